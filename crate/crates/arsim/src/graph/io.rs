//! Line-oriented text format for graphs.
//!
//! ```text
//! VERTEX id robot step qx qy qz qw x y z
//! EDGE from to qx qy qz qw x y z info_trans info_rot weight kind
//! ```
//!
//! Rotations are quaternions in file form only and are converted to matrices
//! at this boundary. The anchor is written as the first VERTEX line and read
//! back from it. Floats are printed with shortest round-trip formatting, so a
//! dump/load cycle reproduces poses to within quaternion conversion accuracy.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::{EdgeKind, MeasurementEdge, NodeId, PoseGraph};
use crate::error::{Error, Result};
use crate::geometry::{Pose, Rotation};

pub fn write_graph<W: Write>(graph: &PoseGraph, mut w: W) -> Result<()> {
    let mut ids: BTreeMap<NodeId, usize> = BTreeMap::new();
    let anchor = graph.anchor();
    let mut order: Vec<NodeId> = vec![anchor];
    order.extend(graph.nodes().map(|(id, _)| *id).filter(|id| *id != anchor));
    for (serial, id) in order.iter().enumerate() {
        ids.insert(*id, serial);
        let pose = graph.pose(*id).unwrap();
        let q = pose.rotation.to_quaternion();
        writeln!(
            w,
            "VERTEX {} {} {} {} {} {} {} {} {} {}",
            serial,
            id.robot,
            id.step,
            q.i,
            q.j,
            q.k,
            q.w,
            pose.position.x,
            pose.position.y,
            pose.position.z
        )?;
    }
    for e in graph.edges() {
        let q = e.z_bar.rotation.to_quaternion();
        writeln!(
            w,
            "EDGE {} {} {} {} {} {} {} {} {} {} {} {} {}",
            ids[&e.from],
            ids[&e.to],
            q.i,
            q.j,
            q.k,
            q.w,
            e.z_bar.position.x,
            e.z_bar.position.y,
            e.z_bar.position.z,
            e.info_trans,
            e.info_rot,
            e.weight,
            e.kind.as_str()
        )?;
    }
    Ok(())
}

pub fn save_graph(graph: &PoseGraph, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_graph(graph, std::io::BufWriter::new(file))
}

pub fn read_graph<R: Read>(r: R, origin: &str) -> Result<PoseGraph> {
    let reader = BufReader::new(r);
    let mut graph: Option<PoseGraph> = None;
    let mut serial_to_node: BTreeMap<usize, NodeId> = BTreeMap::new();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let parse_err = |message: String| Error::GraphParse {
            path: origin.to_string(),
            line: lineno,
            message,
        };
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let num = |i: usize| -> Result<f64> {
            fields
                .get(i)
                .ok_or_else(|| parse_err(format!("missing field {i}")))?
                .parse::<f64>()
                .map_err(|e| parse_err(format!("field {i}: {e}")))
        };
        let int = |i: usize| -> Result<u32> {
            fields
                .get(i)
                .ok_or_else(|| parse_err(format!("missing field {i}")))?
                .parse::<u32>()
                .map_err(|e| parse_err(format!("field {i}: {e}")))
        };
        match fields[0] {
            "VERTEX" => {
                if fields.len() != 11 {
                    return Err(parse_err(format!(
                        "VERTEX needs 11 fields, got {}",
                        fields.len()
                    )));
                }
                let serial = int(1)? as usize;
                let id = NodeId::new(int(2)?, int(3)?);
                let pose = pose_from_fields(
                    num(4)?,
                    num(5)?,
                    num(6)?,
                    num(7)?,
                    num(8)?,
                    num(9)?,
                    num(10)?,
                );
                serial_to_node.insert(serial, id);
                match graph.as_mut() {
                    None => graph = Some(PoseGraph::new(id, pose)),
                    Some(g) => g.add_node(id, pose).map_err(|e| parse_err(e.to_string()))?,
                }
            }
            "EDGE" => {
                if fields.len() != 14 {
                    return Err(parse_err(format!(
                        "EDGE needs 14 fields, got {}",
                        fields.len()
                    )));
                }
                let from = serial_to_node
                    .get(&(int(1)? as usize))
                    .copied()
                    .ok_or_else(|| parse_err(format!("unknown vertex id {}", fields[1])))?;
                let to = serial_to_node
                    .get(&(int(2)? as usize))
                    .copied()
                    .ok_or_else(|| parse_err(format!("unknown vertex id {}", fields[2])))?;
                let z_bar = pose_from_fields(
                    num(3)?,
                    num(4)?,
                    num(5)?,
                    num(6)?,
                    num(7)?,
                    num(8)?,
                    num(9)?,
                );
                let info_trans = num(10)?;
                let info_rot = num(11)?;
                let weight = num(12)?;
                if info_trans <= 0.0 || info_rot <= 0.0 {
                    return Err(parse_err("information values must be positive".into()));
                }
                if weight <= 0.0 || weight > 1.0 {
                    return Err(parse_err(format!("weight {weight} outside (0, 1]")));
                }
                let kind = match fields[13] {
                    "odometry" => EdgeKind::Odometry,
                    "inter_robot" => EdgeKind::InterRobot,
                    other => return Err(parse_err(format!("unknown edge kind `{other}`"))),
                };
                let g = graph
                    .as_mut()
                    .ok_or_else(|| parse_err("EDGE before any VERTEX".into()))?;
                g.add_edge(
                    MeasurementEdge::new(from, to, z_bar, info_trans, info_rot, kind)
                        .with_weight(weight),
                )
                .map_err(|e| parse_err(e.to_string()))?;
            }
            other => {
                return Err(parse_err(format!("unknown record `{other}`")));
            }
        }
    }
    graph.ok_or_else(|| Error::GraphParse {
        path: origin.to_string(),
        line: 0,
        message: "file contains no vertices".into(),
    })
}

pub fn load_graph(path: &Path) -> Result<PoseGraph> {
    let file = std::fs::File::open(path)?;
    read_graph(file, &path.display().to_string())
}

fn pose_from_fields(qx: f64, qy: f64, qz: f64, qw: f64, x: f64, y: f64, z: f64) -> Pose {
    let q = UnitQuaternion::from_quaternion(Quaternion::new(qw, qx, qy, qz));
    Pose::new(Rotation::from_quaternion(q), Vector3::new(x, y, z))
}
