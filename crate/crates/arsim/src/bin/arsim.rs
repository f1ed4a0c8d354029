//! Experiment runner for the rendezvous simulator. Parses arguments and
//! delegates to the library's `cli` module; all the behavior lives there.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use arsim::cli::{
    self, apply_setting, default_output_dir, parse_config_file, parse_seeds, seeds_from_repeats,
    EmitFlags, ExperimentSpec,
};
use arsim::sim::WorldConfig;

#[derive(Parser)]
#[command(
    name = "arsim",
    version,
    about = "Multi-robot rendezvous simulation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Flat key-value experiment config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Strategy: active | random (overrides the config).
    #[arg(long)]
    strategy: Option<String>,
    /// Output directory (default: $ARSIM_OUT_DIR or ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Also dump the final pose graph per run.
    #[arg(long)]
    emit_graphs: bool,
    /// Also dump the first sensing profile of each rendezvous episode.
    #[arg(long)]
    emit_profiles: bool,
}

impl CommonArgs {
    fn world(&self) -> arsim::Result<WorldConfig> {
        let mut cfg = match &self.config {
            Some(path) => parse_config_file(path)?,
            None => WorldConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(strategy) = &self.strategy {
            cfg.strategy = strategy.parse()?;
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| {
                arsim::Error::Config(format!("--set expects key=value, got `{kv}`"))
            })?;
            apply_setting(&mut cfg, k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn spec(&self) -> arsim::Result<ExperimentSpec> {
        let world = self.world()?;
        let mut spec =
            ExperimentSpec::new(world, self.out.clone().unwrap_or_else(default_output_dir));
        spec.emit = EmitFlags {
            graphs: self.emit_graphs,
            profiles: self.emit_profiles,
            ..EmitFlags::default()
        };
        Ok(spec)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Execute one run and write ticks.csv, events.jsonl, summary.json.
    Run {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run active and random strategies over a seed list and aggregate.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of seeds (base seed upward) when --seeds is not given.
        #[arg(long, default_value_t = 5)]
        repeats: u32,
        /// Explicit comma-separated seed list.
        #[arg(long)]
        seeds: Option<String>,
        /// Worker threads for the batch.
        #[arg(long, default_value_t = 2)]
        threads: usize,
    },
    /// Evaluate AOA outlier rejection: weighted vs unweighted final solves.
    OutlierEval {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 5)]
        repeats: u32,
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long, default_value_t = 2)]
        threads: usize,
    },
    /// Synthesize one AOA profile and dump profile.csv / peaks.json /
    /// snapshots.csv.
    DumpProfile {
        #[command(flatten)]
        common: CommonArgs,
        /// Transmitter position "x y z".
        #[arg(long, default_value = "8 3 0", allow_hyphen_values = true)]
        tx: String,
        /// Receiver position "x y z".
        #[arg(long, default_value = "1 1 0", allow_hyphen_values = true)]
        rx: String,
        /// Receiver heading at the arc start, degrees.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        rx_heading_deg: f64,
    },
}

fn parse_point(s: &str) -> arsim::Result<[f64; 3]> {
    let parts: Vec<f64> = s
        .split_whitespace()
        .map(|p| p.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| arsim::Error::Config(format!("point `{s}`: {e}")))?;
    if parts.len() != 3 {
        return Err(arsim::Error::Config(format!("point `{s}` needs 3 numbers")));
    }
    Ok([parts[0], parts[1], parts[2]])
}

fn execute(cli: Cli) -> arsim::Result<()> {
    match cli.command {
        Command::Run { common } => {
            let spec = common.spec()?;
            cmd_elapsed(|| cli::cmd_run(&spec).map(|_| ()))
        }
        Command::Compare {
            common,
            repeats,
            seeds,
            threads,
        } => {
            let spec = common.spec()?;
            let seeds = match seeds {
                Some(list) => parse_seeds(&list)?,
                None => seeds_from_repeats(spec.world.seed, repeats),
            };
            cmd_elapsed(|| cli::cmd_compare(&spec, &seeds, threads).map(|_| ()))
        }
        Command::OutlierEval {
            common,
            repeats,
            seeds,
            threads,
        } => {
            let spec = common.spec()?;
            let seeds = match seeds {
                Some(list) => parse_seeds(&list)?,
                None => seeds_from_repeats(spec.world.seed, repeats),
            };
            cmd_elapsed(|| cli::cmd_outlier_eval(&spec, &seeds, threads).map(|_| ()))
        }
        Command::DumpProfile {
            common,
            tx,
            rx,
            rx_heading_deg,
        } => {
            let spec = common.spec()?;
            let tx = parse_point(&tx)?;
            let rx = parse_point(&rx)?;
            cli::cmd_dump_profile(
                &spec.world,
                tx,
                rx,
                rx_heading_deg.to_radians(),
                &spec.output_dir,
            )
        }
    }
}

/// Wall time goes to stderr so the data artifacts stay byte-deterministic.
fn cmd_elapsed(f: impl FnOnce() -> arsim::Result<()>) -> arsim::Result<()> {
    let t0 = std::time::Instant::now();
    let out = f();
    eprintln!("wall_time_ms={}", t0.elapsed().as_millis());
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (arsim::Error::Config(_) | arsim::Error::ConfigParse { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
