//! Absolute trajectory error against ground truth.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{rotation_chordal_distance_sq, Pose, Rotation};
use crate::graph::RobotId;

/// Estimated and reference pose sequences, per robot. Sequences must have
/// matching lengths robot by robot.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryPair {
    pub estimated: BTreeMap<RobotId, Vec<Pose>>,
    pub reference: BTreeMap<RobotId, Vec<Pose>>,
}

impl TrajectoryPair {
    pub fn validate(&self) -> Result<()> {
        if self.estimated.is_empty() {
            return Err(Error::Config("empty trajectory pair".into()));
        }
        for (robot, est) in &self.estimated {
            let reference = self
                .reference
                .get(robot)
                .ok_or_else(|| Error::Config(format!("robot {robot} missing reference")))?;
            if reference.len() != est.len() {
                return Err(Error::Config(format!(
                    "robot {robot}: {} estimated vs {} reference poses",
                    est.len(),
                    reference.len()
                )));
            }
        }
        Ok(())
    }

    fn total_poses(&self) -> usize {
        self.estimated.values().map(|v| v.len()).sum()
    }

    /// Rigidly align the estimated trajectories onto the reference (least
    /// squares over all positions, no scaling). Off by default in the
    /// metrics; estimates normally share the world frame already.
    pub fn aligned(&self) -> TrajectoryPair {
        let n = self.total_poses() as f64;
        if n < 1.0 {
            return self.clone();
        }
        let mut mean_e = Vector3::zeros();
        let mut mean_r = Vector3::zeros();
        for (robot, est) in &self.estimated {
            for (e, r) in est.iter().zip(&self.reference[robot]) {
                mean_e += e.position;
                mean_r += r.position;
            }
        }
        mean_e /= n;
        mean_r /= n;
        let mut cov = Matrix3::zeros();
        for (robot, est) in &self.estimated {
            for (e, r) in est.iter().zip(&self.reference[robot]) {
                cov += (r.position - mean_r) * (e.position - mean_e).transpose();
            }
        }
        let svd = cov.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut d = Matrix3::identity();
        if (u * v_t).determinant() < 0.0 {
            d[(2, 2)] = -1.0;
        }
        let r = Rotation::from_matrix(u * d * v_t).renormalized();
        let t = mean_r - r.apply(&mean_e);
        let transform = Pose::new(r, t);
        let estimated = self
            .estimated
            .iter()
            .map(|(robot, poses)| {
                (
                    *robot,
                    poses
                        .iter()
                        .map(|p| crate::geometry::compose(&transform, p))
                        .collect(),
                )
            })
            .collect();
        TrajectoryPair {
            estimated,
            reference: self.reference.clone(),
        }
    }
}

/// Mean squared position error over all poses of all robots, in m^2.
pub fn ate_trans(pair: &TrajectoryPair) -> Result<f64> {
    pair.validate()?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (robot, est) in &pair.estimated {
        for (e, r) in est.iter().zip(&pair.reference[robot]) {
            sum += (e.position - r.position).norm_squared();
            n += 1;
        }
    }
    Ok(sum / n as f64)
}

/// Mean squared chordal rotation error, `||R' Rhat - I||_F^2` averaged over
/// all poses (dimensionless).
pub fn ate_rot(pair: &TrajectoryPair) -> Result<f64> {
    pair.validate()?;
    let identity = Rotation::identity();
    let mut sum = 0.0;
    let mut n = 0usize;
    for (robot, est) in &pair.estimated {
        for (e, r) in est.iter().zip(&pair.reference[robot]) {
            let rel = e.rotation.transpose().mul(&r.rotation);
            sum += rotation_chordal_distance_sq(&rel, &identity);
            n += 1;
        }
    }
    Ok(sum / n as f64)
}
