//! Statistical trend checks that span modules.

use arsim::aoa::{compute_profile, extract_peaks, wrap_angle, GridSpec};
use arsim::channel::{propagation_paths, synthesize_csi, ArcSpec, RadioEnvironment};
use arsim::obstacles::ObstacleSet;
use arsim::rendezvous::{build_guidance, gradient_step};
use arsim::rng::{stream, substream};
use nalgebra::{Vector2, Vector3};
use proptest::prelude::*;
use rand::Rng;

/// Median absolute bearing error over 100 randomized encounters at one SNR.
fn median_bearing_error(snr_db: f64) -> f64 {
    let env = RadioEnvironment {
        shadowing_std_db: 0.0,
        noise_snr_db: snr_db,
        ..RadioEnvironment::default()
    };
    let mut chan = substream(500, stream::CHANNEL);
    let mut geo = substream(501, stream::EXPLORATION);
    let mut errors: Vec<f64> = (0..100)
        .map(|_| {
            let range = geo.random_range(4.0..10.0);
            let bearing = geo.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let heading = geo.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let rx = Vector3::new(30.0, 30.0, 0.0);
            let tx = rx + Vector3::new(range * bearing.cos(), range * bearing.sin(), 0.0);
            let paths = propagation_paths(&env, tx, rx, &ObstacleSet::empty());
            let arc = ArcSpec::quarter_turn(rx, heading).with_jitter(1.0_f64.to_radians());
            let snaps = synthesize_csi(&env, &paths, &arc, &mut chan);
            let profile = compute_profile(&snaps, &GridSpec::default()).unwrap();
            let top = *extract_peaks(&profile, 4).top().unwrap();
            wrap_angle(top.theta + heading - bearing).abs()
        })
        .collect();
    errors.sort_by(f64::total_cmp);
    errors[errors.len() / 2]
}

#[test]
fn cleaner_channels_never_hurt_bearing_accuracy() {
    let low = median_bearing_error(5.0);
    let mid = median_bearing_error(15.0);
    let high = median_bearing_error(25.0);
    println!(
        "median |bearing error|: 5 dB {:.2} deg, 15 dB {:.2} deg, 25 dB {:.2} deg",
        low.to_degrees(),
        mid.to_degrees(),
        high.to_degrees()
    );
    assert!(mid <= low + 1e-9, "15 dB worse than 5 dB");
    assert!(high <= mid + 1e-9, "25 dB worse than 15 dB");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    /// One guided step taken with the episode's coupled service discrepancy
    /// strictly closes the true distance whenever the bearing estimate is
    /// off by less than 60 degrees and the mover starts at least 3 m out
    /// (steps are clamped to 2 m, so gross overshoot cannot occur there).
    #[test]
    fn guided_steps_close_the_distance(
        distance in 3.0..25.0f64,
        bearing in -3.1..3.1f64,
        aoa_error in -1.0..1.0f64, // radians, under 60 degrees
        q in 6.0..12.0f64,
    ) {
        let anchor = Vector2::new(40.0, 40.0);
        let mover = anchor - Vector2::new(bearing.cos(), bearing.sin()) * distance;
        // Rate from the clean channel model at this distance.
        let esnr = 30.0 - 22.0 * distance.log10();
        let rho = arsim::channel::rate_from_esnr(esnr, 1.0);
        let w = ((q - rho) / q).max(0.0);
        prop_assume!(w > 0.0);
        let peaks = arsim::aoa::PeakSet {
            peaks: vec![arsim::aoa::Peak {
                phi: 0.0,
                theta: bearing + aoa_error,
                value: 1.0,
            }],
            n_kept: 1,
        };
        let g = build_guidance(&peaks, mover, w, 0.5).unwrap();
        let target = gradient_step(&g, mover, w);
        // Physical step clamp, as in the episode.
        let mut delta = target - mover;
        if delta.norm() > 2.0 {
            delta *= 2.0 / delta.norm();
        }
        let after = mover + delta;
        prop_assert!(
            (after - anchor).norm() < distance - 1e-9,
            "distance grew: {} -> {}",
            distance,
            (after - anchor).norm()
        );
    }
}
