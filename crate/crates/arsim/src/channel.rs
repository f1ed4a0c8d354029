//! Synthetic radio environment.
//!
//! Three layers: an ESNR/path-loss model with log-normal shadowing, an
//! image-method multipath enumerator over obstacle faces, and per-antenna
//! CSI snapshot synthesis along a receiver's quarter-turn arc. Synthesis
//! uses exact per-antenna geometry; the far-field steering approximation
//! appears only on the estimation side (`aoa`).

use nalgebra::{Vector2, Vector3};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::obstacles::ObstacleSet;
use crate::rng::RandomStream;

/// Radio constants of the simulated environment.
///
/// Defaults model a 5 GHz link between two antennas 22 cm apart: ESNR 30 dB
/// at 1 m, path-loss exponent 2.2, 2 dB shadowing, 6 dB per wall crossing,
/// 3 dB per reflection.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioEnvironment {
    pub wavelength: f64,
    pub antenna_separation: f64,
    pub esnr_ref_db: f64,
    pub ref_distance: f64,
    pub path_loss_exponent: f64,
    pub shadowing_std_db: f64,
    pub wall_attenuation_db: f64,
    pub reflection_loss_db: f64,
    pub max_reflections: u32,
    pub noise_snr_db: f64,
    pub sensing_range: f64,
    pub comm_range: f64,
}

impl Default for RadioEnvironment {
    fn default() -> Self {
        RadioEnvironment {
            wavelength: 0.06,
            antenna_separation: 0.22,
            esnr_ref_db: 30.0,
            ref_distance: 1.0,
            path_loss_exponent: 2.2,
            shadowing_std_db: 2.0,
            wall_attenuation_db: 6.0,
            reflection_loss_db: 3.0,
            max_reflections: 1,
            noise_snr_db: 20.0,
            sensing_range: 30.0,
            comm_range: 10.0,
        }
    }
}

impl RadioEnvironment {
    pub fn validate(&self) -> crate::Result<()> {
        if self.wavelength <= 0.0 || self.antenna_separation <= 0.0 {
            return Err(crate::Error::Config(
                "wavelength and antenna separation must be positive".into(),
            ));
        }
        if !(self.sensing_range >= self.comm_range && self.comm_range > 0.0) {
            return Err(crate::Error::Config(
                "ranges must satisfy sensing_range >= comm_range > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Effective SNR of the link in dB: log-distance path loss, per-wall
/// attenuation, and Gaussian shadowing. With `shadowing_std_db = 0` this is
/// a pure function of distance and wall count.
pub fn esnr(
    env: &RadioEnvironment,
    p_tx: Vector3<f64>,
    p_rx: Vector3<f64>,
    walls_crossed: usize,
    rng: &mut RandomStream,
) -> f64 {
    let mut d = (p_rx - p_tx).norm();
    if d < 1e-9 {
        d = env.ref_distance;
    }
    let shadow = if env.shadowing_std_db > 0.0 {
        env.shadowing_std_db * rng.sample::<f64, _>(StandardNormal)
    } else {
        0.0
    };
    env.esnr_ref_db
        - 10.0 * env.path_loss_exponent * (d / env.ref_distance).log10()
        - walls_crossed as f64 * env.wall_attenuation_db
        + shadow
}

/// Map ESNR to an achievable data rate: `max(0, c * log2(1 + 10^(esnr/10)))`.
/// Strictly increasing in ESNR; tends to zero as the ESNR goes to -inf.
pub fn rate_from_esnr(esnr_db: f64, scale: f64) -> f64 {
    (scale * (1.0 + 10.0_f64.powf(esnr_db / 10.0)).log2()).max(0.0)
}

/// One propagation path arriving at the receiver.
///
/// `azimuth`/`polar` are the world-frame arrival direction (pointing from the
/// receiver toward the true or mirrored source), `length` the full path
/// length, and `gain` the complex amplitude excluding propagation phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    pub azimuth: f64,
    pub polar: f64,
    pub length: f64,
    pub gain: Complex64,
}

impl PathComponent {
    /// The (possibly mirrored) source point implied by this path, relative to
    /// the receiver position: the image method puts it on the arrival ray at
    /// the full path length.
    pub fn source_point(&self, p_rx: Vector3<f64>) -> Vector3<f64> {
        let dir = Vector3::new(
            self.polar.cos() * self.azimuth.cos(),
            self.polar.cos() * self.azimuth.sin(),
            self.polar.sin(),
        );
        p_rx + dir * self.length
    }
}

fn direction_angles(v: Vector3<f64>) -> (f64, f64) {
    let azimuth = v.y.atan2(v.x);
    let polar = v.z.atan2((v.x * v.x + v.y * v.y).sqrt());
    (azimuth, polar)
}

fn db_amplitude(db: f64) -> f64 {
    10.0_f64.powf(-db / 20.0)
}

/// Enumerate propagation paths from transmitter to receiver: the direct path
/// (attenuated through walls it crosses) plus first-order specular
/// reflections off obstacle faces when `max_reflections > 0`. Reflected
/// components whose legs pass through their own obstacle are discarded.
pub fn propagation_paths(
    env: &RadioEnvironment,
    p_tx: Vector3<f64>,
    p_rx: Vector3<f64>,
    obstacles: &ObstacleSet,
) -> Vec<PathComponent> {
    let mut paths = Vec::new();
    let tx2 = Vector2::new(p_tx.x, p_tx.y);
    let rx2 = Vector2::new(p_rx.x, p_rx.y);

    let d = (p_tx - p_rx).norm();
    if d > 1e-9 {
        let crossings = obstacles.wall_crossings(tx2, rx2);
        let (azimuth, polar) = direction_angles(p_tx - p_rx);
        let amp = db_amplitude(env.wall_attenuation_db * crossings as f64) / d;
        paths.push(PathComponent {
            azimuth,
            polar,
            length: d,
            gain: Complex64::new(amp, 0.0),
        });
    }

    if env.max_reflections == 0 {
        return paths;
    }

    for (obs_idx, obs) in obstacles.obstacles.iter().enumerate() {
        for (face_idx, face) in obs.faces().iter().enumerate() {
            // Specular reflection requires both endpoints on the outer side.
            if face.side(tx2) <= 1e-9 || face.side(rx2) <= 1e-9 {
                continue;
            }
            let mirror2 = face.mirror(tx2);
            let Some(reflection_point) = face.intersect_segment(mirror2, rx2) else {
                continue;
            };
            // Discard when either leg passes through the reflector itself.
            let self_occluded = obs.faces().iter().enumerate().any(|(k, other)| {
                k != face_idx
                    && (other.intersect_segment(tx2, reflection_point).is_some()
                        || other.intersect_segment(reflection_point, rx2).is_some())
            });
            if self_occluded {
                continue;
            }
            // Wall crossings through other obstacles attenuate the legs.
            let mut crossings = 0usize;
            for (k, other) in obstacles.obstacles.iter().enumerate() {
                if k == obs_idx {
                    continue;
                }
                for f2 in other.faces() {
                    if f2.intersect_segment(tx2, reflection_point).is_some() {
                        crossings += 1;
                    }
                    if f2.intersect_segment(reflection_point, rx2).is_some() {
                        crossings += 1;
                    }
                }
            }

            let mirror3 = Vector3::new(mirror2.x, mirror2.y, p_tx.z);
            let length = (mirror3 - p_rx).norm();
            if length < 1e-9 {
                continue;
            }
            let (azimuth, polar) = direction_angles(mirror3 - p_rx);
            let amp =
                db_amplitude(env.reflection_loss_db + env.wall_attenuation_db * crossings as f64)
                    / length;
            paths.push(PathComponent {
                azimuth,
                polar,
                length,
                // Specular bounce flips the field sign.
                gain: Complex64::new(-amp, 0.0),
            });
        }
    }
    paths
}

/// Description of the receiver's sensing maneuver: a turn about `center`
/// starting at `start_heading`, sampling `count` snapshots. Recorded headings
/// are relative to the arc start and may carry Gaussian jitter, emulating an
/// imperfect onboard rotation estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcSpec {
    pub center: Vector3<f64>,
    pub start_heading: f64,
    pub turn: f64,
    pub count: usize,
    pub heading_jitter_std: f64,
}

impl ArcSpec {
    /// Quarter turn sampled at one-degree spacing.
    pub fn quarter_turn(center: Vector3<f64>, start_heading: f64) -> Self {
        ArcSpec {
            center,
            start_heading,
            turn: std::f64::consts::FRAC_PI_2,
            count: 90,
            heading_jitter_std: 0.0,
        }
    }

    pub fn with_jitter(mut self, std: f64) -> Self {
        self.heading_jitter_std = std;
        self
    }
}

/// Channel-ratio snapshots gathered over one sensing arc.
///
/// `ratios[s]` is h1/h2 at the s-th snapshot; `headings[s]` is the recorded
/// rotation relative to the arc start (so downstream azimuths are expressed
/// in the receiver's body frame at the start of the turn).
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotArray {
    pub ratios: Vec<Complex64>,
    pub headings: Vec<f64>,
    pub tx_orientation: (f64, f64),
    pub arc_center: Vector3<f64>,
    pub wavelength: f64,
    pub antenna_separation: f64,
    /// Snapshots whose noise had to be redrawn because |h2| collapsed.
    pub regenerated: usize,
}

impl SnapshotArray {
    pub fn count(&self) -> usize {
        self.ratios.len()
    }
}

/// Synthesize per-antenna channels along the arc and store their ratios.
///
/// For every snapshot the two antennas sit at `center ± R(heading) * r/2` on
/// the body x axis; each path contributes `gain * exp(-i 2 pi d / lambda)`
/// with `d` the exact distance from the path's (possibly mirrored) source to
/// the antenna. Circular complex Gaussian noise at `env.noise_snr_db` is
/// added per antenna (pass an infinite SNR for a clean channel).
pub fn synthesize_csi(
    env: &RadioEnvironment,
    paths: &[PathComponent],
    arc: &ArcSpec,
    rng: &mut RandomStream,
) -> SnapshotArray {
    assert!(!paths.is_empty(), "need at least one propagation path");
    assert!(arc.count >= 8, "need at least 8 snapshots");
    let half = env.antenna_separation / 2.0;
    let step = arc.turn / arc.count as f64;
    let k = 2.0 * std::f64::consts::PI / env.wavelength;

    let sources: Vec<(Vector3<f64>, Complex64)> = paths
        .iter()
        .map(|p| (p.source_point(arc.center), p.gain))
        .collect();

    // Clean per-antenna channels first; the noise floor scales off their
    // mean amplitude.
    let mut clean = Vec::with_capacity(arc.count);
    let mut amp_sum = 0.0;
    for s in 0..arc.count {
        let heading = arc.start_heading + s as f64 * step;
        let (sin_h, cos_h) = heading.sin_cos();
        let offset = Vector3::new(cos_h * half, sin_h * half, 0.0);
        let a1 = arc.center + offset;
        let a2 = arc.center - offset;
        let mut h1 = Complex64::new(0.0, 0.0);
        let mut h2 = Complex64::new(0.0, 0.0);
        for (src, gain) in &sources {
            h1 += gain * Complex64::cis(-k * (src - a1).norm());
            h2 += gain * Complex64::cis(-k * (src - a2).norm());
        }
        amp_sum += h1.norm() + h2.norm();
        clean.push((h1, h2));
    }
    let mean_amp = amp_sum / (2 * arc.count) as f64;
    let noise_sigma = if env.noise_snr_db.is_finite() {
        mean_amp * db_amplitude(env.noise_snr_db) / 2.0_f64.sqrt()
    } else {
        0.0
    };

    let mut ratios = Vec::with_capacity(arc.count);
    let mut headings = Vec::with_capacity(arc.count);
    let mut regenerated = 0usize;
    for (s, (h1c, h2c)) in clean.iter().enumerate() {
        let mut attempts = 0;
        let ratio = loop {
            let (n1, n2) = if noise_sigma > 0.0 {
                (
                    Complex64::new(
                        noise_sigma * rng.sample::<f64, _>(StandardNormal),
                        noise_sigma * rng.sample::<f64, _>(StandardNormal),
                    ),
                    Complex64::new(
                        noise_sigma * rng.sample::<f64, _>(StandardNormal),
                        noise_sigma * rng.sample::<f64, _>(StandardNormal),
                    ),
                )
            } else {
                (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
            };
            let h2 = h2c + n2;
            if h2.norm() > 1e-12 {
                break (h1c + n1) / h2;
            }
            attempts += 1;
            regenerated += 1;
            if noise_sigma == 0.0 || attempts > 16 {
                // Degenerate fade with nothing to redraw; emit a huge ratio.
                break (h1c + n1) / Complex64::new(1e-12, 0.0);
            }
        };
        ratios.push(ratio);
        let jitter = if arc.heading_jitter_std > 0.0 {
            arc.heading_jitter_std * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        headings.push(s as f64 * step + jitter);
    }

    SnapshotArray {
        ratios,
        headings,
        tx_orientation: (0.0, 0.0),
        arc_center: arc.center,
        wavelength: env.wavelength,
        antenna_separation: env.antenna_separation,
        regenerated,
    }
}
