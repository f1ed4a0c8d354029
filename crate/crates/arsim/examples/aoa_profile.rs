//! Synthesize channel snapshots for a transmitter, compute the AOA profile,
//! and compare its peaks against the true bearing, with and without a
//! reflecting wall in the scene.
//!
//! ```text
//! cargo run --example aoa_profile
//! ```

use arsim::aoa::{compute_profile, extract_peaks, relative_angles, wrap_angle, GridSpec};
use arsim::channel::{propagation_paths, synthesize_csi, ArcSpec, RadioEnvironment};
use arsim::obstacles::{Obstacle, ObstacleSet};
use arsim::rng::{stream, substream};
use nalgebra::Vector3;

fn main() -> arsim::Result<()> {
    let env = RadioEnvironment::default();
    let receiver = Vector3::new(2.0, 2.0, 0.0);
    let transmitter = Vector3::new(10.0, 6.0, 0.0);
    let heading = 0.5_f64;
    let (_, true_theta) = relative_angles(receiver, transmitter)?;

    for (label, obstacles) in [
        ("open world", ObstacleSet::empty()),
        (
            "wall beside the link",
            ObstacleSet::new(vec![Obstacle::new(0.0, 12.0, 8.0, 9.0)]),
        ),
    ] {
        let paths = propagation_paths(&env, transmitter, receiver, &obstacles);
        println!("{label}: {} propagation path(s)", paths.len());
        for p in &paths {
            println!(
                "  path: azimuth {:7.2} deg, length {:5.2} m, |gain| {:.4}",
                p.azimuth.to_degrees(),
                p.length,
                p.gain.norm()
            );
        }

        let arc = ArcSpec::quarter_turn(receiver, heading).with_jitter(2.0_f64.to_radians());
        let snaps = synthesize_csi(&env, &paths, &arc, &mut substream(7, stream::CHANNEL));
        let profile = compute_profile(&snaps, &GridSpec::default())?;
        let peaks = extract_peaks(&profile, 4);
        println!(
            "  true bearing: {:.2} deg world = {:.2} deg in the body frame",
            true_theta.to_degrees(),
            wrap_angle(true_theta - heading).to_degrees()
        );
        for (k, p) in peaks.peaks.iter().enumerate() {
            println!(
                "  peak {k}: theta {:7.2} deg, phi {:5.2} deg, value {:.4}",
                p.theta.to_degrees(),
                p.phi.to_degrees(),
                p.value
            );
        }
        let top = peaks.top().unwrap();
        println!(
            "  top-peak azimuth error: {:.2} deg\n",
            wrap_angle(top.theta + heading - true_theta)
                .to_degrees()
                .abs()
        );
    }
    Ok(())
}
