//! Build a small noisy pose graph, optimize it, and round-trip it through
//! the text format.
//!
//! ```text
//! cargo run --example optimize_pose_graph
//! ```

use arsim::geometry::{compose, sample_pose_noise, Pose, PoseNoiseModel};
use arsim::graph::{
    optimize, read_graph, write_graph, EdgeKind, ErrorScope, MeasurementEdge, NodeId, PoseGraph,
};
use arsim::rng::{stream, substream};

fn main() -> arsim::Result<()> {
    let noise = PoseNoiseModel::new(0.1, 2.0_f64.to_radians());
    let mut rng = substream(42, stream::MEASUREMENT);

    // Ground truth: a single robot walking a square, plus a loop closure.
    let legs = [
        Pose::from_xy_yaw(2.0, 0.0, 0.0),
        Pose::from_xy_yaw(2.0, 0.0, std::f64::consts::FRAC_PI_2),
        Pose::from_xy_yaw(2.0, 0.0, std::f64::consts::FRAC_PI_2),
        Pose::from_xy_yaw(2.0, 0.0, std::f64::consts::FRAC_PI_2),
    ];
    let mut truth = vec![Pose::identity()];
    for leg in &legs {
        truth.push(compose(truth.last().unwrap(), leg));
    }

    let node = |k: usize| NodeId::new(0, k as u32);
    let mut graph = PoseGraph::new(node(0), truth[0]);
    let mut estimate = truth[0];
    for (k, leg) in legs.iter().enumerate() {
        let measured = compose(leg, &sample_pose_noise(&noise, &mut rng));
        estimate = compose(&estimate, &measured);
        graph.add_node(node(k + 1), estimate)?;
        graph.add_edge(MeasurementEdge::new(
            node(k),
            node(k + 1),
            measured,
            25.0,
            131.3,
            EdgeKind::Odometry,
        ))?;
    }
    // Loop closure back to the start: the square should end where it began.
    let closure = compose(
        &arsim::geometry::relative_pose(&truth[4], &truth[0]),
        &sample_pose_noise(&noise, &mut rng),
    );
    graph.add_edge(MeasurementEdge::new(
        node(4),
        node(0),
        closure,
        25.0,
        131.3,
        EdgeKind::InterRobot,
    ))?;

    println!(
        "initial cost: {:.4}",
        graph.trajectory_error(ErrorScope::All)
    );
    let (solved, report) = optimize(&graph)?;
    println!(
        "optimized in {} iterations: cost {:.4} -> {:.6} (converged: {})",
        report.iterations, report.initial_cost, report.final_cost, report.converged
    );
    for (k, t) in truth.iter().enumerate() {
        let est = solved.pose(node(k)).unwrap();
        println!(
            "node {k}: est ({:6.3}, {:6.3})  truth ({:6.3}, {:6.3})  err {:.3} m",
            est.position.x,
            est.position.y,
            t.position.x,
            t.position.y,
            (est.position - t.position).norm()
        );
    }

    // Round-trip through the line-oriented text format.
    let mut buf = Vec::new();
    write_graph(&solved, &mut buf)?;
    let loaded = read_graph(buf.as_slice(), "memory")?;
    println!(
        "round-trip: {} nodes, {} edges, cost {:.6}",
        loaded.node_count(),
        loaded.edge_count(),
        loaded.trajectory_error(ErrorScope::All)
    );
    Ok(())
}
