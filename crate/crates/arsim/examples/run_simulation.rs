//! One full desk-scale run with the active strategy, printing the per-tick
//! mean trajectory error and the rendezvous events.
//!
//! ```text
//! cargo run --release --example run_simulation
//! ```

use arsim::sim::{run_experiment, Strategy, WorldConfig};

fn main() -> arsim::Result<()> {
    let cfg = WorldConfig {
        strategy: Strategy::Active,
        seed: 1,
        ..WorldConfig::default()
    };
    let threshold = cfg.rendezvous.delta;
    let n = cfg.n_robots as f64;
    let result = run_experiment(cfg)?;

    println!("tick  mean_err   events");
    for tick in 1..=result.summary.n_iterations {
        let mean: f64 = result
            .ticks
            .iter()
            .filter(|r| r.tick == tick)
            .map(|r| r.err)
            .sum::<f64>()
            / n;
        let events: Vec<String> = result
            .events
            .iter()
            .filter(|e| e.tick == tick)
            .map(|e| format!("{}<-{}", e.requester, e.partner))
            .collect();
        let bar = "#".repeat((mean * 2.0).round() as usize);
        println!("{tick:>4}  {mean:8.2}  {bar} {}", events.join(" "));
    }
    println!(
        "\nthreshold {threshold}: max mean err {:.2}, final {:.2}",
        result.summary.max_mean_err, result.summary.final_mean_err
    );
    println!(
        "{} rendezvous, ATE_trans {:.3} m^2, ATE_rot {:.4}",
        result.summary.rendezvous_count, result.summary.ate_trans_m2, result.summary.ate_rot
    );
    Ok(())
}
