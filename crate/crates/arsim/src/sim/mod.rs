//! World state, exploration, observation generation, and the deterministic
//! tick loop driving the Active-vs-Random comparison.
//!
//! One tick runs four phases in a fixed order: every robot takes an
//! exploration step (ascending id), observations are generated (odometry
//! plus inter-robot measurements in sensor range), the strategy phase runs
//! (error monitoring and rendezvous, or opportunistic joint optimization for
//! the random baseline), and per-robot rows are logged. All randomness comes
//! from named substreams of the master seed, so a run is a pure function of
//! its configuration.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Vector2;
use rand::Rng;
use serde::Serialize;

use crate::aoa::{AoaNoiseParams, GridSpec};
use crate::channel::{esnr, rate_from_esnr, RadioEnvironment};
use crate::error::{Error, Result};
use crate::geometry::{compose, relative_pose, sample_pose_noise, Pose, PoseNoiseModel};
use crate::graph::{
    EdgeKind, ErrorScope, MeasurementEdge, NodeId, OptimizeOptions, PoseGraph, RobotId,
};
use crate::metrics::{ate_rot, ate_trans, TrajectoryPair};
use crate::obstacles::ObstacleSet;
use crate::outlier::{corrupt_measurement, EdgeValidation, OutlierPolicy};
use crate::rendezvous::{monitor_phase, RendezvousParams};
use crate::rng::{stream, substream, RandomStream};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Active,
    Random,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Active => "active",
            Strategy::Random => "random",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "active" => Ok(Strategy::Active),
            "random" => Ok(Strategy::Random),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

/// Every knob of one experiment. Defaults describe the desk-scale world:
/// 10 robots in 45 x 45 m for 50 ticks, 2 m steps, 2.2 m sensing, 0.2 m /
/// 5 degree measurement noise, error threshold 10, 9 observations per
/// rendezvous.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub bounds: (f64, f64),
    pub obstacles: ObstacleSet,
    pub n_robots: u32,
    pub n_iterations: u32,
    pub step_length: f64,
    pub sensor_range: f64,
    pub noise: PoseNoiseModel,
    /// Extra degradation of the onboard estimate relative to the measurement
    /// noise (the local front end drifts faster than the graph measurements).
    pub estimate_drift_trans_scale: f64,
    pub estimate_drift_rot_scale: f64,
    pub info_trans: f64,
    pub info_rot: f64,
    pub radio: RadioEnvironment,
    pub rendezvous: RendezvousParams,
    pub aoa: AoaNoiseParams,
    pub grid: GridSpec,
    pub snapshots_per_turn: usize,
    pub heading_jitter: f64,
    pub n_peaks: usize,
    pub outliers: OutlierPolicy,
    pub outlier_rejection: bool,
    /// Keep the first sensing profile of every rendezvous episode in the
    /// run result (for profile emission).
    pub capture_profiles: bool,
    pub strategy: Strategy,
    pub seed: u64,
    pub q_default: f64,
    pub alpha_default: f64,
    pub rate_scale: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            bounds: (45.0, 45.0),
            obstacles: ObstacleSet::empty(),
            n_robots: 10,
            n_iterations: 50,
            step_length: 2.0,
            sensor_range: 2.2,
            noise: PoseNoiseModel::new(0.2, 5.0_f64.to_radians()),
            estimate_drift_trans_scale: 2.75,
            estimate_drift_rot_scale: 1.0,
            info_trans: 1.0,
            info_rot: 1.0,
            radio: RadioEnvironment::default(),
            rendezvous: RendezvousParams::default(),
            aoa: AoaNoiseParams::default(),
            grid: GridSpec::default(),
            snapshots_per_turn: 90,
            heading_jitter: 2.0_f64.to_radians(),
            n_peaks: 4,
            outliers: OutlierPolicy::default(),
            outlier_rejection: false,
            capture_profiles: false,
            strategy: Strategy::Active,
            seed: 0,
            q_default: 8.0,
            alpha_default: 1.0,
            rate_scale: 1.0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_robots < 2 {
            return Err(Error::Config("need at least 2 robots".into()));
        }
        if self.step_length <= 0.0 || self.sensor_range <= 0.0 {
            return Err(Error::Config(
                "step_length and sensor_range must be positive".into(),
            ));
        }
        if self.bounds.0 <= 0.0 || self.bounds.1 <= 0.0 {
            return Err(Error::Config("world bounds must be positive".into()));
        }
        if self.info_trans <= 0.0 || self.info_rot <= 0.0 {
            return Err(Error::Config("information weights must be positive".into()));
        }
        if self.snapshots_per_turn < 8 {
            return Err(Error::Config("need at least 8 snapshots per turn".into()));
        }
        if self.n_peaks < 1 {
            return Err(Error::Config("need at least one profile peak".into()));
        }
        self.radio.validate()?;
        self.rendezvous.validate()?;
        self.aoa.validate()?;
        self.outliers.validate()?;
        for o in &self.obstacles.obstacles {
            if o.x_min < 0.0 || o.y_min < 0.0 || o.x_max > self.bounds.0 || o.y_max > self.bounds.1
            {
                return Err(Error::Config("obstacle outside world bounds".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exploring,
    RendezvousMover,
    RendezvousAnchor,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Exploring => "exploring",
            Mode::RendezvousMover => "rendezvous_mover",
            Mode::RendezvousAnchor => "rendezvous_anchor",
        }
    }
}

/// Per-robot state: physical truth, the onboard estimate, graph bookkeeping,
/// and the service parameters of the rendezvous protocol.
#[derive(Debug, Clone)]
pub struct RobotAgent {
    pub id: RobotId,
    pub true_pose: Pose,
    pub est_pose: Pose,
    /// Step index of the robot's latest graph node.
    pub step: u32,
    pub q: f64,
    pub alpha: f64,
    pub mode: Mode,
    /// Edge index marking the start of the robot's unreconciled window: the
    /// measurements gathered since it last took part in an optimization.
    pub window_start: usize,
}

impl RobotAgent {
    pub fn latest_node(&self) -> NodeId {
        NodeId::new(self.id, self.step)
    }

    pub fn history_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..=self.step).map(|s| NodeId::new(self.id, s))
    }
}

/// One rendezvous (or baseline encounter) event.
#[derive(Debug, Clone, Serialize)]
pub struct RendezvousEvent {
    pub tick: u32,
    pub kind: &'static str,
    pub requester: RobotId,
    pub partner: RobotId,
    pub w_history: Vec<f64>,
    pub steps: usize,
    pub edges: usize,
    pub pre_err: f64,
    pub post_err: f64,
    pub incomplete: bool,
}

/// One per-tick, per-robot log row.
#[derive(Debug, Clone, Serialize)]
pub struct TickRow {
    pub tick: u32,
    pub robot: RobotId,
    pub err: f64,
    pub mode: &'static str,
    pub x: f64,
    pub y: f64,
    pub est_x: f64,
    pub est_y: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub version: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub n_robots: u32,
    pub n_iterations: u32,
    pub ate_trans_m2: f64,
    pub ate_rot: f64,
    pub rendezvous_count: usize,
    pub retries: u64,
    pub final_mean_err: f64,
    pub max_mean_err: f64,
}

/// One sensing profile kept from a rendezvous episode.
#[derive(Debug, Clone)]
pub struct CapturedProfile {
    pub tick: u32,
    pub requester: RobotId,
    pub partner: RobotId,
    pub profile: crate::aoa::SignalProfile,
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub summary: RunSummary,
    pub ticks: Vec<TickRow>,
    pub events: Vec<RendezvousEvent>,
    pub graph: PoseGraph,
    pub truth: BTreeMap<NodeId, Pose>,
    pub deployment_edges: usize,
    pub outlier_labels: Vec<bool>,
    pub validations: Vec<Option<EdgeValidation>>,
    pub profiles: Vec<CapturedProfile>,
    pub trajectories: TrajectoryPair,
}

pub(crate) struct Streams {
    pub explore: Vec<RandomStream>,
    pub estimate: Vec<RandomStream>,
    pub measurement: RandomStream,
    pub channel: RandomStream,
    pub shadowing: RandomStream,
    pub outliers: RandomStream,
}

/// The mutable simulation state.
pub struct World {
    pub cfg: WorldConfig,
    pub tick: u32,
    pub agents: Vec<RobotAgent>,
    pub graph: PoseGraph,
    pub truth: BTreeMap<NodeId, Pose>,
    /// Count of the exact deployment edges added at construction; the first
    /// `deployment_edges` graph edges are not measurements.
    pub deployment_edges: usize,
    pub outlier_labels: Vec<bool>,
    pub validations: Vec<Option<EdgeValidation>>,
    pub events: Vec<RendezvousEvent>,
    pub ticks_log: Vec<TickRow>,
    pub profiles: Vec<CapturedProfile>,
    pub retries: u64,
    pub(crate) streams: Streams,
    max_mean_err: f64,
}

impl World {
    pub fn new(cfg: WorldConfig) -> Result<World> {
        World::build(cfg, None)
    }

    /// A world with the robots parked at the given poses instead of random
    /// placements (one pose per robot).
    pub fn with_placements(cfg: WorldConfig, placements: &[Pose]) -> Result<World> {
        if placements.len() != cfg.n_robots as usize {
            return Err(Error::Config(format!(
                "{} placements for {} robots",
                placements.len(),
                cfg.n_robots
            )));
        }
        for (k, pose) in placements.iter().enumerate() {
            let p = Vector2::new(pose.position.x, pose.position.y);
            let inside = p.x >= 0.0 && p.x <= cfg.bounds.0 && p.y >= 0.0 && p.y <= cfg.bounds.1;
            if !inside || cfg.obstacles.contains(p) {
                return Err(Error::Config(format!(
                    "placement {k} at ({}, {}) is outside the world or inside an obstacle",
                    p.x, p.y
                )));
            }
        }
        World::build(cfg, Some(placements))
    }

    fn build(cfg: WorldConfig, placements: Option<&[Pose]>) -> Result<World> {
        cfg.validate()?;
        let mut streams = Streams {
            explore: (0..cfg.n_robots)
                .map(|i| substream(cfg.seed, stream::EXPLORATION + i as u64))
                .collect(),
            estimate: (0..cfg.n_robots)
                .map(|i| substream(cfg.seed, stream::ESTIMATE + i as u64))
                .collect(),
            measurement: substream(cfg.seed, stream::MEASUREMENT),
            channel: substream(cfg.seed, stream::CHANNEL),
            shadowing: substream(cfg.seed, stream::SHADOWING),
            outliers: substream(cfg.seed, stream::OUTLIERS),
        };

        let mut agents = Vec::new();
        let mut graph: Option<PoseGraph> = None;
        let mut truth = BTreeMap::new();
        for id in 0..cfg.n_robots {
            let pose = match placements {
                Some(list) => Some(list[id as usize]),
                None => {
                    let rng = &mut streams.explore[id as usize];
                    let mut found = None;
                    for _ in 0..200 {
                        let x = rng.random_range(0.0..cfg.bounds.0);
                        let y = rng.random_range(0.0..cfg.bounds.1);
                        if !cfg.obstacles.contains(Vector2::new(x, y)) {
                            let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                            found = Some(Pose::from_xy_yaw(x, y, yaw));
                            break;
                        }
                    }
                    found
                }
            };
            let pose =
                pose.ok_or_else(|| Error::Config("world too cluttered to place robots".into()))?;
            let node = NodeId::new(id, 0);
            match graph.as_mut() {
                None => graph = Some(PoseGraph::new(node, pose)),
                Some(g) => g.add_node(node, pose)?,
            }
            truth.insert(node, pose);
            agents.push(RobotAgent {
                id,
                true_pose: pose,
                est_pose: pose,
                step: 0,
                q: cfg.q_default,
                alpha: cfg.alpha_default,
                mode: Mode::Exploring,
                window_start: 0,
            });
        }

        // Robots deploy with known poses in a shared frame; encode that as
        // exact, heavily weighted edges between first nodes so optimization
        // keeps every chain's start pinned (and any pair subgraph connected).
        let mut graph = graph.unwrap();
        let mut outlier_labels = Vec::new();
        let mut validations = Vec::new();
        for i in 0..cfg.n_robots {
            for j in (i + 1)..cfg.n_robots {
                let rel = relative_pose(&truth[&NodeId::new(i, 0)], &truth[&NodeId::new(j, 0)]);
                graph
                    .add_edge(MeasurementEdge::new(
                        NodeId::new(i, 0),
                        NodeId::new(j, 0),
                        rel,
                        1e6,
                        1e6,
                        EdgeKind::InterRobot,
                    ))
                    .expect("first nodes exist");
                outlier_labels.push(false);
                validations.push(None);
            }
        }
        let deployment_edges = graph.edge_count();
        for a in agents.iter_mut() {
            a.window_start = deployment_edges;
        }

        Ok(World {
            cfg,
            tick: 0,
            agents,
            graph,
            truth,
            deployment_edges,
            outlier_labels,
            validations,
            events: Vec::new(),
            ticks_log: Vec::new(),
            profiles: Vec::new(),
            retries: 0,
            streams,
            max_mean_err: 0.0,
        })
    }

    /// Trajectory error of a robot's unreconciled window at the current
    /// estimates: the quantity the error monitor compares against delta.
    pub fn monitor_error(&self, robot: RobotId) -> f64 {
        let start = self.agents[robot as usize].window_start;
        self.graph
            .trajectory_error(ErrorScope::RobotSince(robot, start))
    }

    /// Robots within radio sensing range of `i` (excluding `i`).
    pub fn neighbors(&self, i: RobotId) -> BTreeSet<RobotId> {
        let p = self.agents[i as usize].true_pose.position;
        self.agents
            .iter()
            .filter(|a| a.id != i)
            .filter(|a| (a.true_pose.position - p).norm() <= self.cfg.radio.sensing_range)
            .map(|a| a.id)
            .collect()
    }

    /// Physical link quality between two robots right now (consumes the
    /// shadowing stream).
    pub fn measure_rate(&mut self, a: RobotId, b: RobotId) -> f64 {
        let pa = self.agents[a as usize].true_pose.position;
        let pb = self.agents[b as usize].true_pose.position;
        let walls = self
            .cfg
            .obstacles
            .wall_crossings(Vector2::new(pa.x, pa.y), Vector2::new(pb.x, pb.y));
        let snr = esnr(&self.cfg.radio, pa, pb, walls, &mut self.streams.shadowing);
        rate_from_esnr(snr, self.cfg.rate_scale)
    }

    /// Move a robot's true pose along `delta` (clamped to `max_len`), backing
    /// off when the segment hits an obstacle or the world edge. Returns the
    /// distance actually covered. Heading turns to follow the motion.
    pub fn move_true(&mut self, robot: RobotId, delta: Vector2<f64>, max_len: f64) -> f64 {
        let mut d = delta;
        let norm = d.norm();
        if norm < 1e-12 {
            return 0.0;
        }
        if norm > max_len {
            d *= max_len / norm;
        }
        let a = &self.agents[robot as usize];
        let from = Vector2::new(a.true_pose.position.x, a.true_pose.position.y);
        let mut scale = 1.0;
        for _ in 0..7 {
            let to = from + d * scale;
            let inside = to.x >= 0.0
                && to.x <= self.cfg.bounds.0
                && to.y >= 0.0
                && to.y <= self.cfg.bounds.1;
            if inside && !self.cfg.obstacles.blocks_segment(from, to) {
                let heading = (d.y * scale).atan2(d.x * scale);
                let agent = &mut self.agents[robot as usize];
                agent.true_pose = Pose::from_xy_yaw(to.x, to.y, heading);
                return (d * scale).norm();
            }
            scale *= 0.5;
        }
        0.0
    }

    /// Append a graph node at the robot's current true pose, chained to its
    /// previous node by an odometry edge. `distance` scales the noise of the
    /// segment as a random walk of `step_length`-sized legs.
    pub fn advance_node(&mut self, robot: RobotId, distance: f64) {
        let legs = (distance / self.cfg.step_length).max(1.0).sqrt();
        let prev_node = self.agents[robot as usize].latest_node();
        let prev_truth = self.truth[&prev_node];
        let agent_truth = self.agents[robot as usize].true_pose;
        let true_delta = relative_pose(&prev_truth, &agent_truth);

        let meas_noise = sample_pose_noise(
            &self.cfg.noise.scaled(legs, legs),
            &mut self.streams.measurement,
        );
        let z_bar = compose(&true_delta, &meas_noise);

        let drift_model = self.cfg.noise.scaled(
            self.cfg.estimate_drift_trans_scale * legs,
            self.cfg.estimate_drift_rot_scale * legs,
        );
        let est_noise = sample_pose_noise(&drift_model, &mut self.streams.estimate[robot as usize]);
        let est_delta = compose(&true_delta, &est_noise);

        let agent = &mut self.agents[robot as usize];
        agent.est_pose = compose(&agent.est_pose, &est_delta).renormalized();
        agent.step += 1;
        let node = agent.latest_node();
        let est_pose = agent.est_pose;
        self.truth.insert(node, agent_truth);
        self.graph.add_node(node, est_pose).expect("fresh node id");
        self.graph
            .add_edge(MeasurementEdge::new(
                prev_node,
                node,
                z_bar,
                self.cfg.info_trans,
                self.cfg.info_rot,
                EdgeKind::Odometry,
            ))
            .expect("endpoints exist");
        self.outlier_labels.push(false);
        self.validations.push(None);
    }

    /// Record one inter-robot measurement edge `from -> to` at the current
    /// true poses, with outlier injection per the policy. The caller may
    /// attach a validation (AOA reweighting) afterwards via the returned
    /// edge index.
    pub fn record_inter_edge(&mut self, from: RobotId, to: RobotId) -> usize {
        let from_node = self.agents[from as usize].latest_node();
        let to_node = self.agents[to as usize].latest_node();
        let rel = relative_pose(
            &self.agents[from as usize].true_pose,
            &self.agents[to as usize].true_pose,
        );
        let noise = sample_pose_noise(&self.cfg.noise, &mut self.streams.measurement);
        let mut z_bar = compose(&rel, &noise);
        let outlier = self.cfg.outliers.fraction > 0.0
            && self.streams.outliers.random::<f64>() < self.cfg.outliers.fraction;
        if outlier {
            z_bar = corrupt_measurement(
                &z_bar,
                &self.cfg.outliers,
                &self.cfg.noise,
                &mut self.streams.outliers,
            );
        }
        let idx = self
            .graph
            .add_edge(MeasurementEdge::new(
                from_node,
                to_node,
                z_bar,
                self.cfg.info_trans,
                self.cfg.info_rot,
                EdgeKind::InterRobot,
            ))
            .expect("endpoints exist");
        self.outlier_labels.push(outlier);
        self.validations.push(None);
        idx
    }

    /// Jointly optimize the merged subgraph of two robots and absorb the
    /// improved estimates; both windows reset.
    pub fn joint_optimize(&mut self, a: RobotId, b: RobotId) -> Result<()> {
        let sub = self.graph.subgraph_for_robots(&[a, b]);
        // Pose differences below the measurement noise floor do not matter
        // here, so the in-simulation solves run with a loose tolerance.
        let opts = OptimizeOptions {
            max_iterations: 20,
            rel_tol: 1e-5,
            ..OptimizeOptions::default()
        };
        let (solved, _report) = crate::graph::optimize_with(&sub, &opts)?;
        self.graph.absorb_estimates(&solved);
        for id in [a, b] {
            let agent = &mut self.agents[id as usize];
            agent.window_start = self.graph.edge_count();
        }
        self.refresh_estimates(a);
        self.refresh_estimates(b);
        Ok(())
    }

    /// Pull a robot's onboard estimate from its latest graph node.
    pub fn refresh_estimates(&mut self, robot: RobotId) {
        let node = self.agents[robot as usize].latest_node();
        if let Some(p) = self.graph.pose(node) {
            self.agents[robot as usize].est_pose = *p;
        }
    }

    fn explore_phase(&mut self) {
        for id in 0..self.cfg.n_robots {
            let agent = &self.agents[id as usize];
            let pos = Vector2::new(agent.true_pose.position.x, agent.true_pose.position.y);
            let target = explore_policy(
                pos,
                self.cfg.bounds,
                &self.cfg.obstacles,
                self.cfg.step_length,
                &mut self.streams.explore[id as usize],
            );
            let moved = self.move_true(id, target - pos, self.cfg.step_length);
            self.advance_node(id, moved);
        }
    }

    fn observation_phase(&mut self) {
        for i in 0..self.cfg.n_robots {
            for j in (i + 1)..self.cfg.n_robots {
                let d = (self.agents[i as usize].true_pose.position
                    - self.agents[j as usize].true_pose.position)
                    .norm();
                if d <= self.cfg.sensor_range {
                    let idx = self.record_inter_edge(i, j);
                    if self.cfg.outlier_rejection {
                        self.validate_edge(idx, i, j);
                    }
                }
            }
        }
    }

    /// Validate an inter-robot edge against an AOA profile sensed at the
    /// observing robot (`observer` is the edge's `from` endpoint, and the
    /// transmitter the other robot).
    pub fn validate_edge(&mut self, idx: usize, observer: RobotId, tx: RobotId) {
        let rx_pose = self.agents[observer as usize].true_pose;
        let tx_pos = self.agents[tx as usize].true_pose.position;
        let paths = crate::channel::propagation_paths(
            &self.cfg.radio,
            tx_pos,
            rx_pose.position,
            &self.cfg.obstacles,
        );
        let arc = crate::channel::ArcSpec {
            center: rx_pose.position,
            start_heading: rx_pose.rotation.yaw(),
            turn: std::f64::consts::FRAC_PI_2,
            count: self.cfg.snapshots_per_turn,
            heading_jitter_std: self.cfg.heading_jitter,
        };
        let snaps = crate::channel::synthesize_csi(
            &self.cfg.radio,
            &paths,
            &arc,
            &mut self.streams.channel,
        );
        let Ok(profile) = crate::aoa::compute_profile(&snaps, &self.cfg.grid) else {
            return;
        };
        let peaks = crate::aoa::extract_peaks(&profile, self.cfg.n_peaks);
        let (reweighted, validation) =
            crate::outlier::reweight_edge(&self.graph.edges()[idx], &peaks, &self.cfg.aoa);
        self.graph.set_edge_weight(idx, reweighted.weight);
        self.validations[idx] = validation;
    }

    /// Random baseline: whenever two robots are within sensor range they
    /// exchange what they have and jointly optimize. Each robot joins at
    /// most one joint optimization per tick.
    fn opportunistic_phase(&mut self) -> Result<()> {
        let mut engaged: BTreeSet<RobotId> = BTreeSet::new();
        for i in 0..self.cfg.n_robots {
            for j in (i + 1)..self.cfg.n_robots {
                if engaged.contains(&i) || engaged.contains(&j) {
                    continue;
                }
                let d = (self.agents[i as usize].true_pose.position
                    - self.agents[j as usize].true_pose.position)
                    .norm();
                if d > self.cfg.sensor_range {
                    continue;
                }
                let wi = self.agents[i as usize].window_start;
                let wj = self.agents[j as usize].window_start;
                let pre_err = self.monitor_error(i) + self.monitor_error(j);
                self.joint_optimize(i, j)?;
                // Same windows re-evaluated at the optimized estimates.
                let post_err = self.graph.trajectory_error(ErrorScope::RobotSince(i, wi))
                    + self.graph.trajectory_error(ErrorScope::RobotSince(j, wj));
                engaged.insert(i);
                engaged.insert(j);
                self.events.push(RendezvousEvent {
                    tick: self.tick,
                    kind: "random",
                    requester: i,
                    partner: j,
                    w_history: Vec::new(),
                    steps: 0,
                    edges: 0,
                    pre_err,
                    post_err,
                    incomplete: false,
                });
            }
        }
        Ok(())
    }

    fn log_phase(&mut self) {
        let mut sum = 0.0;
        for id in 0..self.cfg.n_robots {
            let err = self.monitor_error(id);
            sum += err;
            let a = &self.agents[id as usize];
            self.ticks_log.push(TickRow {
                tick: self.tick,
                robot: id,
                err,
                mode: a.mode.as_str(),
                x: a.true_pose.position.x,
                y: a.true_pose.position.y,
                est_x: a.est_pose.position.x,
                est_y: a.est_pose.position.y,
            });
        }
        let mean = sum / self.cfg.n_robots as f64;
        if mean > self.max_mean_err {
            self.max_mean_err = mean;
        }
        for a in self.agents.iter_mut() {
            a.mode = Mode::Exploring;
        }
    }

    fn into_result(self) -> Result<RunResult> {
        let mut trajectories = TrajectoryPair::default();
        for agent in &self.agents {
            let mut est = Vec::new();
            let mut reference = Vec::new();
            for node in agent.history_nodes() {
                est.push(*self.graph.pose(node).expect("node exists"));
                reference.push(self.truth[&node]);
            }
            trajectories.estimated.insert(agent.id, est);
            trajectories.reference.insert(agent.id, reference);
        }
        let ate_t = ate_trans(&trajectories)?;
        let ate_r = ate_rot(&trajectories)?;
        let final_tick = self.cfg.n_iterations;
        let finals: Vec<f64> = self
            .ticks_log
            .iter()
            .filter(|r| r.tick == final_tick)
            .map(|r| r.err)
            .collect();
        let final_mean_err = if finals.is_empty() {
            0.0
        } else {
            finals.iter().sum::<f64>() / finals.len() as f64
        };
        let summary = RunSummary {
            version: VERSION.to_string(),
            strategy: self.cfg.strategy,
            seed: self.cfg.seed,
            n_robots: self.cfg.n_robots,
            n_iterations: self.cfg.n_iterations,
            ate_trans_m2: ate_t,
            ate_rot: ate_r,
            rendezvous_count: self.events.len(),
            retries: self.retries,
            final_mean_err,
            max_mean_err: self.max_mean_err,
        };
        Ok(RunResult {
            summary,
            ticks: self.ticks_log,
            events: self.events,
            graph: self.graph,
            truth: self.truth,
            deployment_edges: self.deployment_edges,
            outlier_labels: self.outlier_labels,
            validations: self.validations,
            profiles: self.profiles,
            trajectories,
        })
    }
}

/// One exploration step: a uniformly random heading advanced by
/// `step_length`, re-sampled (up to 20 times) when it would leave the world
/// or clip an obstacle; a fully boxed-in robot stays put.
pub fn explore_policy(
    pos: Vector2<f64>,
    bounds: (f64, f64),
    obstacles: &ObstacleSet,
    step_length: f64,
    rng: &mut RandomStream,
) -> Vector2<f64> {
    for _ in 0..20 {
        let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let target = pos + Vector2::new(heading.cos(), heading.sin()) * step_length;
        let inside =
            target.x >= 0.0 && target.x <= bounds.0 && target.y >= 0.0 && target.y <= bounds.1;
        if inside && !obstacles.blocks_segment(pos, target) {
            return target;
        }
    }
    pos
}

/// Run one experiment to completion. Deterministic: the result is a pure
/// function of the configuration (including its seed).
pub fn run_experiment(cfg: WorldConfig) -> Result<RunResult> {
    let strategy = cfg.strategy;
    let n = cfg.n_iterations;
    let mut world = World::new(cfg)?;
    for tick in 1..=n {
        world.tick = tick;
        world.explore_phase();
        world.observation_phase();
        match strategy {
            Strategy::Active => monitor_phase(&mut world)?,
            Strategy::Random => world.opportunistic_phase()?,
        }
        world.log_phase();
    }
    world.into_result()
}
