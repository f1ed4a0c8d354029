use arsim::aoa::{compute_profile, extract_peaks, GridSpec};
use arsim::channel::{propagation_paths, synthesize_csi, ArcSpec};
use arsim::geometry::Pose;
use arsim::rendezvous::{build_guidance, gradient_step};
use arsim::sim::{Strategy, World, WorldConfig};
use nalgebra::Vector2;

fn main() -> arsim::Result<()> {
    let cfg = WorldConfig {
        n_robots: 2,
        bounds: (40.0, 40.0),
        strategy: Strategy::Active,
        seed: 3,
        ..WorldConfig::default()
    };
    let mut world = World::new(cfg)?;
    world.agents[0].true_pose = Pose::from_xy_yaw(5.0, 20.0, 0.0);
    world.agents[1].true_pose = Pose::from_xy_yaw(30.0, 24.0, -2.0);
    world.agents[1].est_pose = world.agents[1].true_pose;

    let tx = world.agents[0].true_pose.position;
    let rx = world.agents[1].true_pose;
    let paths = propagation_paths(&world.cfg.radio, tx, rx.position, &world.cfg.obstacles);
    println!("paths: {}", paths.len());
    let arc = ArcSpec {
        center: rx.position,
        start_heading: rx.rotation.yaw(),
        turn: std::f64::consts::FRAC_PI_2,
        count: 90,
        heading_jitter_std: world.cfg.heading_jitter,
    };
    let snaps = synthesize_csi(
        &world.cfg.radio,
        &paths,
        &arc,
        &mut arsim::rng::substream(1, arsim::rng::stream::CHANNEL),
    );
    let thin = GridSpec {
        phi_max: 2.0_f64.to_radians(),
        ..GridSpec::default()
    };
    let profile = compute_profile(&snaps, &thin)?;
    let peaks = extract_peaks(&profile, 4);
    println!(
        "thin-grid peaks: {:?}",
        peaks
            .peaks
            .iter()
            .map(|p| (p.theta.to_degrees().round(), p.phi.to_degrees(), p.value))
            .collect::<Vec<_>>()
    );
    let world_peaks = peaks.rotated_azimuth(rx.rotation.yaw());
    println!(
        "world top: {:?}",
        world_peaks.top().map(|p| p.theta.to_degrees())
    );
    let expected = (tx.y - rx.position.y)
        .atan2(tx.x - rx.position.x)
        .to_degrees();
    println!("true bearing: {expected}");
    let p_est = Vector2::new(rx.position.x, rx.position.y);
    let g = build_guidance(&world_peaks, p_est, 0.8, 0.5)?;
    let target = gradient_step(&g, p_est, 0.8);
    println!(
        "step: {:?} norm {}",
        target - p_est,
        (target - p_est).norm()
    );
    let moved = world.move_true(1, target - p_est, 2.0);
    println!("moved {moved}");
    Ok(())
}
