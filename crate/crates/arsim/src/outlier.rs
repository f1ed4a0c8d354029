//! Outlier injection and AOA-consistency reweighting of inter-robot edges.
//!
//! Injected outliers perturb a measurement by a random offset drawn between
//! `low_mult` and `high_mult` times the nominal noise scale. Reweighting
//! compares the direction a measurement implies against the peaks of the AOA
//! profile captured at the same encounter; measurements deviating by at least
//! the boundary `delta` in azimuth or polar angle have their information
//! scaled down by the profile-consistency likelihood.

use rand::Rng;

use crate::aoa::{
    closest_peak, likelihood_weight, relative_angles, wrap_angle, AoaNoiseParams, PeakSet,
};
use crate::geometry::{sample_unit_vector, Pose, PoseNoiseModel, Rotation};
use crate::graph::{EdgeKind, MeasurementEdge};
use crate::rng::RandomStream;

/// Which share of inter-robot edges to corrupt and how hard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierPolicy {
    pub fraction: f64,
    pub low_mult: f64,
    pub high_mult: f64,
}

impl Default for OutlierPolicy {
    fn default() -> Self {
        OutlierPolicy {
            fraction: 0.0,
            low_mult: 2.0,
            high_mult: 3.0,
        }
    }
}

impl OutlierPolicy {
    pub fn validate(&self) -> crate::Result<()> {
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(crate::Error::Config(
                "outlier fraction outside [0, 1]".into(),
            ));
        }
        if !(2.0 <= self.low_mult && self.low_mult < self.high_mult) {
            return Err(crate::Error::Config(
                "outlier multipliers must satisfy 2 <= low < high".into(),
            ));
        }
        Ok(())
    }
}

/// Corrupt one measurement in place: translation offset of magnitude
/// `U(low s_t, high s_t)` in a uniform direction, rotation by an angle
/// `U(low s_R, high s_R)` about a uniform axis.
pub fn corrupt_measurement(
    z_bar: &Pose,
    policy: &OutlierPolicy,
    noise: &PoseNoiseModel,
    rng: &mut RandomStream,
) -> Pose {
    let dir = sample_unit_vector(rng);
    let mag = noise.sigma_trans * rng.random_range(policy.low_mult..policy.high_mult);
    let axis = sample_unit_vector(rng);
    let angle = noise.sigma_rot * rng.random_range(policy.low_mult..policy.high_mult);
    Pose::new(
        z_bar.rotation.mul(&Rotation::exp(axis * angle)),
        z_bar.position + dir * mag,
    )
}

/// Corrupt a `fraction` of the inter-robot edges; odometry edges pass
/// through untouched. Returns the edges plus ground-truth outlier labels.
pub fn inject_outliers(
    edges: Vec<MeasurementEdge>,
    policy: &OutlierPolicy,
    noise: &PoseNoiseModel,
    rng: &mut RandomStream,
) -> (Vec<MeasurementEdge>, Vec<bool>) {
    let mut labels = Vec::with_capacity(edges.len());
    let edges = edges
        .into_iter()
        .map(|mut e| {
            let hit = e.kind == EdgeKind::InterRobot
                && policy.fraction > 0.0
                && rng.random::<f64>() < policy.fraction;
            if hit {
                e.z_bar = corrupt_measurement(&e.z_bar, policy, noise, rng);
            }
            labels.push(hit);
            e
        })
        .collect();
    (edges, labels)
}

/// Angular deviations of a validated edge, kept for evaluation output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeValidation {
    pub dev_theta: f64,
    pub dev_phi: f64,
    pub weight: f64,
}

/// Validate one inter-robot edge against the profile peaks measured by the
/// edge's `from` robot at the same encounter (the measurement is expressed in
/// that robot's body frame, the same frame as the profile azimuths).
///
/// Consistent edges (both deviations under `delta`) pass through bit
/// identical; deviating edges get their weight scaled by the likelihood.
/// An empty peak set means the edge cannot be validated and passes through.
pub fn reweight_edge(
    edge: &MeasurementEdge,
    peaks: &PeakSet,
    params: &AoaNoiseParams,
) -> (MeasurementEdge, Option<EdgeValidation>) {
    debug_assert_eq!(edge.kind, EdgeKind::InterRobot);
    if peaks.is_empty() {
        return (edge.clone(), None);
    }
    let Ok((phi_ij, theta_ij)) = relative_angles(nalgebra::Vector3::zeros(), edge.z_bar.position)
    else {
        return (edge.clone(), None);
    };
    let peak = closest_peak(peaks, phi_ij, theta_ij).expect("peaks checked non-empty");
    let dev_theta = wrap_angle(peak.theta - theta_ij).abs();
    let dev_phi = (peak.phi - phi_ij).abs();
    let mut out = edge.clone();
    if dev_theta >= params.delta || dev_phi >= params.delta {
        let w = likelihood_weight(params, dev_phi, dev_theta);
        out.weight = out.weight.min(w);
    }
    let validation = EdgeValidation {
        dev_theta,
        dev_phi,
        weight: out.weight,
    };
    (out, Some(validation))
}
