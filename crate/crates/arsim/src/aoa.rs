//! Angle-of-arrival estimation from channel-ratio snapshots.
//!
//! A sensing arc yields one complex ratio per snapshot. Scoring a candidate
//! direction (phi, theta) against the snapshots produces a pseudospectrum
//! whose peaks mark signal paths: the profile value is the reciprocal of the
//! steering vector's energy in the noise subspace of the rank-one outer
//! product of the ratio vector, computed algebraically as
//! `1 / (||a||^2 - |h*a|^2 / ||h||^2)` without an eigendecomposition.
//!
//! Azimuths are expressed in the receiver's body frame at the start of the
//! arc (the frame the recorded headings are relative to);
//! [`PeakSet::rotated_azimuth`] converts to other frames.

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::SnapshotArray;
use crate::error::{Error, Result};

/// Constants behind a profile: wavelength, antenna separation, and the
/// transmitter orientation offsets (B, Gamma).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceMeta {
    pub wavelength: f64,
    pub antenna_separation: f64,
    pub tx_b: f64,
    pub tx_gamma: f64,
}

impl SourceMeta {
    pub fn from_snapshots(snapshots: &SnapshotArray) -> Self {
        SourceMeta {
            wavelength: snapshots.wavelength,
            antenna_separation: snapshots.antenna_separation,
            tx_b: snapshots.tx_orientation.0,
            tx_gamma: snapshots.tx_orientation.1,
        }
    }
}

/// Far-field phase difference between the two antennas for a signal from
/// (phi, theta): `(2 pi r / lambda) cos(phi - B) sin(theta - Gamma)`.
pub fn steering_phase(phi: f64, theta: f64, meta: &SourceMeta) -> f64 {
    2.0 * std::f64::consts::PI * meta.antenna_separation / meta.wavelength
        * (phi - meta.tx_b).cos()
        * (theta - meta.tx_gamma).sin()
}

/// Evaluation grid: azimuth over (-pi, pi] and a polar band.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub theta_step: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub phi_step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            theta_step: 1.0_f64.to_radians(),
            phi_min: 0.0,
            phi_max: 40.0_f64.to_radians(),
            phi_step: 2.0_f64.to_radians(),
        }
    }
}

impl GridSpec {
    pub fn theta_values(&self) -> Vec<f64> {
        let n = (2.0 * std::f64::consts::PI / self.theta_step).round() as usize;
        (0..n)
            .map(|k| -std::f64::consts::PI + (k + 1) as f64 * self.theta_step)
            .collect()
    }

    pub fn phi_values(&self) -> Vec<f64> {
        let n = ((self.phi_max - self.phi_min) / self.phi_step).round() as usize + 1;
        (0..n)
            .map(|k| self.phi_min + k as f64 * self.phi_step)
            .collect()
    }
}

/// AOA pseudospectrum over the (phi, theta) grid. All values are positive;
/// larger means the direction explains the snapshots better.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalProfile {
    pub theta_grid: Vec<f64>,
    pub phi_grid: Vec<f64>,
    /// Row-major: `values[phi_idx * theta_grid.len() + theta_idx]`.
    pub values: Vec<f64>,
    pub source_meta: SourceMeta,
}

impl SignalProfile {
    pub fn value(&self, phi_idx: usize, theta_idx: usize) -> f64 {
        self.values[phi_idx * self.theta_grid.len() + theta_idx]
    }

    /// Grid coordinates of the maximum cell.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_v = f64::NEG_INFINITY;
        for p in 0..self.phi_grid.len() {
            for t in 0..self.theta_grid.len() {
                let v = self.value(p, t);
                if v > best_v {
                    best_v = v;
                    best = (p, t);
                }
            }
        }
        best
    }
}

/// Score every grid direction against the snapshots.
///
/// The steering phase for snapshot `s` is evaluated at that snapshot's
/// heading-adjusted geometry: the recorded rotation folds into the azimuth
/// reference as `Gamma_s = tx_gamma + heading_s - pi/2`, which turns the
/// paper-form `sin(theta - Gamma_s)` into `cos(theta - tx_gamma - heading_s)`.
pub fn compute_profile(snapshots: &SnapshotArray, grid: &GridSpec) -> Result<SignalProfile> {
    let count = snapshots.count();
    if count < 8 {
        return Err(Error::InsufficientSnapshots { min: 8, got: count });
    }
    let h_norm_sq: f64 = snapshots.ratios.iter().map(|r| r.norm_sqr()).sum();
    if h_norm_sq < 1e-24 {
        return Err(Error::ZeroChannel);
    }

    let meta = SourceMeta::from_snapshots(snapshots);
    let k = 2.0 * std::f64::consts::PI * meta.antenna_separation / meta.wavelength;
    let theta_grid = grid.theta_values();
    let phi_grid = grid.phi_values();
    let n_theta = theta_grid.len();

    // One cosine table over (theta, snapshot), shared by every phi row.
    let mut cos_table = vec![0.0f64; n_theta * count];
    for (ti, theta) in theta_grid.iter().enumerate() {
        let base = theta - meta.tx_gamma;
        for (s, eta) in snapshots.headings.iter().enumerate() {
            cos_table[ti * count + s] = (base - eta).cos();
        }
    }

    let conj_h: Vec<Complex64> = snapshots.ratios.iter().map(|r| r.conj()).collect();
    let mut values = vec![0.0f64; phi_grid.len() * n_theta];
    let table = cis_table();

    for (phi_idx, phi) in phi_grid.iter().enumerate() {
        let k_phi = k * (phi - meta.tx_b).cos();
        for ti in 0..n_theta {
            let row = &cos_table[ti * count..(ti + 1) * count];
            let mut acc_re = 0.0f64;
            let mut acc_im = 0.0f64;
            for (ch, c) in conj_h.iter().zip(row) {
                let (cr, ci) = table.cis(k_phi * c);
                acc_re += ch.re * cr - ch.im * ci;
                acc_im += ch.re * ci + ch.im * cr;
            }
            let denom = (count as f64 - (acc_re * acc_re + acc_im * acc_im) / h_norm_sq).max(1e-12);
            values[phi_idx * n_theta + ti] = 1.0 / denom;
        }
    }

    Ok(SignalProfile {
        theta_grid,
        phi_grid,
        values,
        source_meta: meta,
    })
}

/// One profile peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub phi: f64,
    pub theta: f64,
    pub value: f64,
}

/// The strongest profile peaks, sorted by value descending.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
    pub n_kept: usize,
}

impl PeakSet {
    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn top(&self) -> Option<&Peak> {
        self.peaks.first()
    }

    /// The same peaks with every azimuth shifted by `offset` (wrapped); used
    /// to convert body-frame peaks into the world frame.
    pub fn rotated_azimuth(&self, offset: f64) -> PeakSet {
        PeakSet {
            peaks: self
                .peaks
                .iter()
                .map(|p| Peak {
                    theta: wrap_angle(p.theta + offset),
                    ..*p
                })
                .collect(),
            n_kept: self.n_kept,
        }
    }
}

/// Strict local maxima over 8-neighborhoods (theta wraps, phi clamps), the
/// top `n` by value. A flat profile yields an empty set.
pub fn extract_peaks(profile: &SignalProfile, n: usize) -> PeakSet {
    assert!(n >= 1);
    let n_phi = profile.phi_grid.len();
    let n_theta = profile.theta_grid.len();
    let mut peaks: Vec<Peak> = Vec::new();
    for p in 0..n_phi {
        for t in 0..n_theta {
            let v = profile.value(p, t);
            let mut is_peak = true;
            'scan: for dp in -1i64..=1 {
                for dt in -1i64..=1 {
                    if dp == 0 && dt == 0 {
                        continue;
                    }
                    let pp = p as i64 + dp;
                    if pp < 0 || pp >= n_phi as i64 {
                        continue;
                    }
                    let tt = (t as i64 + dt).rem_euclid(n_theta as i64);
                    if profile.value(pp as usize, tt as usize) >= v {
                        is_peak = false;
                        break 'scan;
                    }
                }
            }
            if is_peak {
                peaks.push(Peak {
                    phi: profile.phi_grid[p],
                    theta: profile.theta_grid[t],
                    value: v,
                });
            }
        }
    }
    peaks.sort_by(|a, b| b.value.total_cmp(&a.value));
    peaks.truncate(n);
    PeakSet { peaks, n_kept: n }
}

/// Azimuth/polar direction of `p_j` as seen from `p_i`:
/// `theta = atan2(dy, dx)`, `phi = atan2(dz, sqrt(dx^2 + dy^2))`.
pub fn relative_angles(
    p_i: nalgebra::Vector3<f64>,
    p_j: nalgebra::Vector3<f64>,
) -> Result<(f64, f64)> {
    let d = p_j - p_i;
    if d.norm() < 1e-12 {
        return Err(Error::CoincidentPoints);
    }
    let theta = d.y.atan2(d.x);
    let phi = d.z.atan2((d.x * d.x + d.y * d.y).sqrt());
    Ok((phi, theta))
}

/// The peak minimizing `|wrap(theta - theta_ij)| + |phi - phi_ij|`; ties go
/// to the peak with the larger profile value (the set is sorted descending,
/// so strict improvement keeps the earlier, stronger peak).
pub fn closest_peak(peaks: &PeakSet, phi_ij: f64, theta_ij: f64) -> Result<&Peak> {
    if peaks.is_empty() {
        return Err(Error::EmptyPeaks);
    }
    let mut best: Option<(&Peak, f64)> = None;
    for p in &peaks.peaks {
        let d = wrap_angle(p.theta - theta_ij).abs() + (p.phi - phi_ij).abs();
        match best {
            Some((_, bd)) if d >= bd => {}
            _ => best = Some((p, d)),
        }
    }
    Ok(best.unwrap().0)
}

/// Parameters of the AOA consistency check: the Gaussian widths of the
/// likelihood factors and the rejection boundary delta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoaNoiseParams {
    pub sigma_theta: f64,
    pub sigma_phi: f64,
    pub delta: f64,
}

impl Default for AoaNoiseParams {
    fn default() -> Self {
        // sigma matches the observed AOA error scale; its likelihood cap then
        // shields observations whose deviation is mere measurement scatter,
        // while genuinely inconsistent ones decay fast.
        AoaNoiseParams {
            sigma_theta: 8.5_f64.to_radians(),
            sigma_phi: 8.5_f64.to_radians(),
            delta: 8.5_f64.to_radians(),
        }
    }
}

impl AoaNoiseParams {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_theta <= 0.0 || self.sigma_phi <= 0.0 || self.delta <= 0.0 {
            return Err(Error::Config(
                "AOA noise parameters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Capped scaled Gaussian: `min(1, sqrt(2 pi) f(x; 0, sigma))`, which is
/// `min(1, (1/sigma) exp(-x^2 / (2 sigma^2)))`. Angles in radians, so any
/// sigma below 1 rad caps aligned observations at exactly 1.
fn capped_gaussian(x: f64, sigma: f64) -> f64 {
    ((1.0 / sigma) * (-x * x / (2.0 * sigma * sigma)).exp()).min(1.0)
}

/// Likelihood that a reported direction deviating by (dphi, dtheta) from the
/// nearest profile peak is consistent with the profile. Always in (0, 1];
/// floored away from zero so downstream information scaling stays positive.
pub fn likelihood_weight(params: &AoaNoiseParams, dphi: f64, dtheta: f64) -> f64 {
    let w = capped_gaussian(dphi, params.sigma_phi) * capped_gaussian(dtheta, params.sigma_theta);
    w.max(1e-12)
}

/// Interpolated unit-circle table for the profile hot loop. Grid scoring
/// evaluates ~10^6 complex exponentials per profile; a 2^14-entry table with
/// linear interpolation keeps the error below 2e-8, orders of magnitude under
/// the grid resolution.
struct CisTable {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

const CIS_TABLE_BITS: usize = 14;
const CIS_TABLE_LEN: usize = 1 << CIS_TABLE_BITS;

impl CisTable {
    fn build() -> CisTable {
        let mut cos = Vec::with_capacity(CIS_TABLE_LEN + 1);
        let mut sin = Vec::with_capacity(CIS_TABLE_LEN + 1);
        for i in 0..=CIS_TABLE_LEN {
            let a = 2.0 * std::f64::consts::PI * i as f64 / CIS_TABLE_LEN as f64;
            let (s, c) = a.sin_cos();
            cos.push(c);
            sin.push(s);
        }
        CisTable { cos, sin }
    }

    #[inline]
    fn cis(&self, angle: f64) -> (f64, f64) {
        // Shift by a multiple of the table length instead of dividing; covers
        // |angle| < 32 pi, far beyond any realistic steering constant.
        const OFFSET: f64 = (16 * CIS_TABLE_LEN) as f64;
        let t = angle * (CIS_TABLE_LEN as f64 / (2.0 * std::f64::consts::PI)) + OFFSET;
        if !(0.0..(32 * CIS_TABLE_LEN) as f64).contains(&t) {
            let (s, c) = angle.sin_cos();
            return (c, s);
        }
        let i = t as usize;
        let frac = t - i as f64;
        let i = i & (CIS_TABLE_LEN - 1);
        let c = self.cos[i] + (self.cos[i + 1] - self.cos[i]) * frac;
        let s = self.sin[i] + (self.sin[i + 1] - self.sin[i]) * frac;
        (c, s)
    }
}

fn cis_table() -> &'static CisTable {
    static TABLE: std::sync::OnceLock<CisTable> = std::sync::OnceLock::new();
    TABLE.get_or_init(CisTable::build)
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut x = (a + std::f64::consts::PI).rem_euclid(two_pi);
    if x == 0.0 {
        x = two_pi;
    }
    x - std::f64::consts::PI
}
