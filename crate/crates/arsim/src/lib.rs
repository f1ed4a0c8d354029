//! Multi-robot pose-graph simulation with radio-guided active rendezvous.
//!
//! Robots explore a bounded world while accumulating noisy odometry. Each
//! robot monitors the least-squares disagreement between its pose estimates
//! and its measurements ("trajectory error"); when it crosses a threshold the
//! robot recruits a nearby partner, steers it in using angle-of-arrival
//! profiles computed from synthetic Wi-Fi channel snapshots, gathers a batch
//! of relative-pose measurements, and jointly optimizes. The same AOA
//! profiles independently validate inter-robot measurements, down-weighting
//! outliers before optimization.
//!
//! The crate is organized around that pipeline:
//!
//! - [`geometry`]: SE(3) poses and Gaussian pose noise
//! - [`graph`]: pose graph, trajectory error, damped Gauss-Newton solver
//! - [`obstacles`]: axis-aligned walls that block motion and shape radio
//! - [`channel`]: path-loss/ESNR model, multipath rays, CSI synthesis
//! - [`aoa`]: AOA pseudospectrum, peak extraction, likelihood weights
//! - [`rendezvous`]: error monitoring, partner selection, gradient guidance
//! - [`outlier`]: outlier injection and information-matrix reweighting
//! - [`sim`]: world state, exploration, the deterministic tick loop
//! - [`metrics`]: absolute trajectory error
//! - [`cli`]: config files, experiment commands, artifact emission
//!
//! Runnable walkthroughs of each capability live in `examples/`.

pub mod aoa;
pub mod channel;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod metrics;
pub mod obstacles;
pub mod outlier;
pub mod rendezvous;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
