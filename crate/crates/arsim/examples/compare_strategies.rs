//! Active versus random rendezvous over a few seeds, via the same batch
//! entry point the CLI uses. Artifacts land in a temporary directory.
//!
//! ```text
//! cargo run --release --example compare_strategies
//! ```

use arsim::cli::{cmd_compare, ExperimentSpec};
use arsim::sim::WorldConfig;

fn main() -> arsim::Result<()> {
    let out = std::env::temp_dir().join("arsim_compare_example");
    let world = WorldConfig {
        n_robots: 6,
        n_iterations: 30,
        bounds: (30.0, 30.0),
        ..WorldConfig::default()
    };
    let spec = ExperimentSpec::new(world, out.clone());
    let summary = cmd_compare(&spec, &[1, 2, 3], 2)?;

    println!("\nseed  active_err  random_err  active_ate  random_ate");
    for row in &summary.per_seed {
        println!(
            "{:>4}  {:>10.2}  {:>10.2}  {:>10.2}  {:>10.2}",
            row.seed,
            row.active_final_err,
            row.random_final_err,
            row.active_ate_trans,
            row.random_ate_trans
        );
    }
    println!(
        "\nfinal error ratio (random/active): {:.1}x, ATE reduction {:.0}%",
        summary.err_ratio, summary.ate_reduction_pct
    );
    println!("artifacts: {}", out.display());
    Ok(())
}
