//! Pose graph: nodes indexed by (robot, step), relative-pose measurement
//! edges, the trajectory-error cost, and a damped Gauss-Newton optimizer.

mod io;
mod optimize;

pub use io::{load_graph, read_graph, save_graph, write_graph};
pub use optimize::{optimize, optimize_with, OptimizeOptions, OptimizeReport};

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{rotation_chordal_distance_sq, Pose};

pub type RobotId = u32;

/// Graph node key: robot id plus a per-robot time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub robot: RobotId,
    pub step: u32,
}

impl NodeId {
    pub fn new(robot: RobotId, step: u32) -> Self {
        NodeId { robot, step }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.robot, self.step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Odometry,
    InterRobot,
}

impl EdgeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeKind::Odometry => "odometry",
            EdgeKind::InterRobot => "inter_robot",
        }
    }
}

/// A relative-pose observation with scalar information values.
///
/// `info_trans` weights the squared translation residual and `info_rot` the
/// squared chordal rotation residual. `weight` is the outlier-rejection
/// scaling applied to the whole edge; 1 means untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub z_bar: Pose,
    pub info_trans: f64,
    pub info_rot: f64,
    pub kind: EdgeKind,
    pub weight: f64,
}

impl MeasurementEdge {
    pub fn new(
        from: NodeId,
        to: NodeId,
        z_bar: Pose,
        info_trans: f64,
        info_rot: f64,
        kind: EdgeKind,
    ) -> Self {
        assert!(
            info_trans > 0.0 && info_rot > 0.0,
            "information must be positive"
        );
        MeasurementEdge {
            from,
            to,
            z_bar,
            info_trans,
            info_rot,
            kind,
            weight: 1.0,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        assert!(weight > 0.0 && weight <= 1.0, "weight must be in (0, 1]");
        self.weight = weight;
        self
    }

    /// Cost contribution of this edge at the given endpoint estimates.
    pub fn cost(&self, x_i: &Pose, x_j: &Pose) -> f64 {
        let trans_res = x_j.position - x_i.position - x_i.rotation.apply(&self.z_bar.position);
        let rot_target = x_i.rotation.mul(&self.z_bar.rotation);
        let rot_res = rotation_chordal_distance_sq(&x_j.rotation, &rot_target);
        self.weight * (self.info_trans * trans_res.norm_squared() + self.info_rot * rot_res)
    }
}

/// Which edges a trajectory-error query covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorScope {
    /// Every edge in the graph.
    All,
    /// Edges incident to one robot.
    Robot(RobotId),
    /// Edges incident to one robot that were added at or after an edge index.
    /// This is the monitoring window: it covers the measurements a robot has
    /// gathered since it last took part in an optimization.
    RobotSince(RobotId, usize),
}

/// Pose graph: current node estimates plus measurement edges. The anchor node
/// is held fixed by the optimizer (gauge fixing).
#[derive(Debug, Clone, PartialEq)]
pub struct PoseGraph {
    nodes: BTreeMap<NodeId, Pose>,
    edges: Vec<MeasurementEdge>,
    anchor: NodeId,
}

impl PoseGraph {
    /// Create a graph with its anchor node.
    pub fn new(anchor: NodeId, anchor_pose: Pose) -> Self {
        let mut nodes = BTreeMap::new();
        nodes.insert(anchor, anchor_pose);
        PoseGraph {
            nodes,
            edges: Vec::new(),
            anchor,
        }
    }

    pub fn anchor(&self) -> NodeId {
        self.anchor
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&NodeId, &Pose)> {
        self.nodes.iter()
    }

    pub fn edges(&self) -> &[MeasurementEdge] {
        &self.edges
    }

    pub fn pose(&self, id: NodeId) -> Option<&Pose> {
        self.nodes.get(&id)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn add_node(&mut self, id: NodeId, pose: Pose) -> Result<()> {
        if self.nodes.contains_key(&id) {
            return Err(Error::DuplicateNode(id));
        }
        self.nodes.insert(id, pose);
        Ok(())
    }

    pub fn add_edge(&mut self, edge: MeasurementEdge) -> Result<usize> {
        if !self.nodes.contains_key(&edge.from) {
            return Err(Error::DanglingEndpoint(edge.from));
        }
        if !self.nodes.contains_key(&edge.to) {
            return Err(Error::DanglingEndpoint(edge.to));
        }
        self.edges.push(edge);
        Ok(self.edges.len() - 1)
    }

    pub fn set_pose(&mut self, id: NodeId, pose: Pose) -> Result<()> {
        match self.nodes.get_mut(&id) {
            Some(p) => {
                *p = pose;
                Ok(())
            }
            None => Err(Error::DanglingEndpoint(id)),
        }
    }

    pub fn set_edge_weight(&mut self, index: usize, weight: f64) {
        assert!(weight > 0.0 && weight <= 1.0);
        self.edges[index].weight = weight;
    }

    /// Sum of weighted squared residuals over the selected edges (zero for an
    /// empty selection). `ErrorScope::Robot(i)` restricts to edges incident
    /// to robot `i`.
    pub fn trajectory_error(&self, scope: ErrorScope) -> f64 {
        let mut total = 0.0;
        for (idx, e) in self.edges.iter().enumerate() {
            let selected = match scope {
                ErrorScope::All => true,
                ErrorScope::Robot(r) => e.from.robot == r || e.to.robot == r,
                ErrorScope::RobotSince(r, since) => {
                    idx >= since && (e.from.robot == r || e.to.robot == r)
                }
            };
            if selected {
                total += e.cost(&self.nodes[&e.from], &self.nodes[&e.to]);
            }
        }
        total
    }

    /// Restriction of the graph to the given robots: their nodes plus every
    /// edge with both endpoints surviving. The anchor becomes the original
    /// anchor when it survives, otherwise the smallest surviving node id.
    pub fn subgraph_for_robots(&self, robots: &[RobotId]) -> PoseGraph {
        let keep = |id: &NodeId| robots.contains(&id.robot);
        let nodes: BTreeMap<NodeId, Pose> = self
            .nodes
            .iter()
            .filter(|(id, _)| keep(id))
            .map(|(id, p)| (*id, *p))
            .collect();
        let anchor = if nodes.contains_key(&self.anchor) {
            self.anchor
        } else {
            *nodes.keys().next().expect("subgraph has no nodes")
        };
        let edges = self
            .edges
            .iter()
            .filter(|e| nodes.contains_key(&e.from) && nodes.contains_key(&e.to))
            .cloned()
            .collect();
        PoseGraph {
            nodes,
            edges,
            anchor,
        }
    }

    /// Copy node estimates from `other` for every node this graph shares.
    pub fn absorb_estimates(&mut self, other: &PoseGraph) {
        for (id, pose) in other.nodes.iter() {
            if let Some(p) = self.nodes.get_mut(id) {
                *p = *pose;
            }
        }
    }

    /// Latest step recorded for a robot, if any.
    pub fn last_step(&self, robot: RobotId) -> Option<u32> {
        self.nodes
            .range(NodeId::new(robot, 0)..=NodeId::new(robot, u32::MAX))
            .next_back()
            .map(|(id, _)| id.step)
    }
}

/// Translation residual of an edge at the given estimates, used by both the
/// cost and the optimizer.
pub(crate) fn translation_residual(e: &MeasurementEdge, x_i: &Pose, x_j: &Pose) -> Vector3<f64> {
    x_j.position - x_i.position - x_i.rotation.apply(&e.z_bar.position)
}
