//! Experiment runner: flat key-value config files, single runs, paired
//! Active-vs-Random batches, outlier-rejection evaluation, and profile dumps.
//!
//! Output files are data only (CSV / JSON lines / JSON), schema-stable, and
//! byte-deterministic for a given configuration; plots are made externally.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::aoa::{compute_profile, extract_peaks, relative_angles};
use crate::channel::{propagation_paths, synthesize_csi, ArcSpec};
use crate::error::{Error, Result};
use crate::graph::{optimize_with, save_graph, EdgeKind, OptimizeOptions, PoseGraph, RobotId};
use crate::metrics::{ate_trans, TrajectoryPair};
use crate::obstacles::Obstacle;
use crate::rng::{stream, substream};
use crate::sim::{run_experiment, RunResult, Strategy, WorldConfig, VERSION};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ARSIM_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmitFlags {
    pub ticks: bool,
    pub events: bool,
    pub profiles: bool,
    pub graphs: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        EmitFlags {
            ticks: true,
            events: true,
            profiles: false,
            graphs: false,
        }
    }
}

/// A fully resolved experiment: world settings plus run/emission control.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub world: WorldConfig,
    pub repeats: u32,
    pub output_dir: PathBuf,
    pub emit: EmitFlags,
}

impl ExperimentSpec {
    pub fn new(world: WorldConfig, output_dir: PathBuf) -> Self {
        ExperimentSpec {
            world,
            repeats: 1,
            output_dir,
            emit: EmitFlags::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats < 1 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        self.world.validate()
    }
}

/// Default output directory: `$ARSIM_OUT_DIR` or `./out`.
pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Parse a flat `key = value` config file (`#` comments). Every world field
/// is addressable; unknown keys are line-precise errors.
pub fn parse_config_file(path: &Path) -> Result<WorldConfig> {
    let text = std::fs::read_to_string(path)?;
    let origin = path.display().to_string();
    let mut cfg = WorldConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::ConfigParse {
                path: origin,
                line: lineno + 1,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        apply_setting(&mut cfg, key.trim(), value.trim()).map_err(|e| Error::ConfigParse {
            path: origin.clone(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn unquote(v: &str) -> &str {
    v.trim_matches('"')
}

/// Apply one `key = value` setting; shared by the file parser and `--set`.
pub fn apply_setting(cfg: &mut WorldConfig, key: &str, value: &str) -> Result<()> {
    let v = unquote(value);
    let num = || -> Result<f64> {
        v.parse::<f64>()
            .map_err(|e| Error::Config(format!("{key}: {e}")))
    };
    let int = || -> Result<u64> {
        v.parse::<u64>()
            .map_err(|e| Error::Config(format!("{key}: {e}")))
    };
    let boolean = || -> Result<bool> {
        v.parse::<bool>()
            .map_err(|e| Error::Config(format!("{key}: {e}")))
    };
    let deg = |x: f64| x.to_radians();
    match key {
        "n_robots" => cfg.n_robots = int()? as u32,
        "n_iterations" => cfg.n_iterations = int()? as u32,
        "world_size_x" => cfg.bounds.0 = num()?,
        "world_size_y" => cfg.bounds.1 = num()?,
        "step_length" => cfg.step_length = num()?,
        "sensor_range" => cfg.sensor_range = num()?,
        "noise_sigma_trans_m" => cfg.noise.sigma_trans = num()?,
        "noise_sigma_rot_deg" => cfg.noise.sigma_rot = deg(num()?),
        "estimate_drift_trans_scale" => cfg.estimate_drift_trans_scale = num()?,
        "estimate_drift_rot_scale" => cfg.estimate_drift_rot_scale = num()?,
        "info_trans" => cfg.info_trans = num()?,
        "info_rot" => cfg.info_rot = num()?,
        "wavelength_m" => cfg.radio.wavelength = num()?,
        "antenna_separation_m" => cfg.radio.antenna_separation = num()?,
        "esnr_ref_db" => cfg.radio.esnr_ref_db = num()?,
        "ref_distance_m" => cfg.radio.ref_distance = num()?,
        "path_loss_exponent" => cfg.radio.path_loss_exponent = num()?,
        "shadowing_std_db" => cfg.radio.shadowing_std_db = num()?,
        "wall_attenuation_db" => cfg.radio.wall_attenuation_db = num()?,
        "reflection_loss_db" => cfg.radio.reflection_loss_db = num()?,
        "max_reflections" => cfg.radio.max_reflections = int()? as u32,
        "noise_snr_db" => cfg.radio.noise_snr_db = num()?,
        "sensing_range_m" => cfg.radio.sensing_range = num()?,
        "comm_range_m" => cfg.radio.comm_range = num()?,
        "delta" => cfg.rendezvous.delta = num()?,
        "kappa" => cfg.rendezvous.kappa = int()? as usize,
        "epsilon" => cfg.rendezvous.epsilon = num()?,
        "sigma_profile" => cfg.rendezvous.sigma_profile = num()?,
        "max_steps" => cfg.rendezvous.max_steps = int()? as usize,
        "aoa_sigma_theta_deg" => cfg.aoa.sigma_theta = deg(num()?),
        "aoa_sigma_phi_deg" => cfg.aoa.sigma_phi = deg(num()?),
        "aoa_delta_deg" => cfg.aoa.delta = deg(num()?),
        "theta_step_deg" => cfg.grid.theta_step = deg(num()?),
        "phi_max_deg" => cfg.grid.phi_max = deg(num()?),
        "phi_step_deg" => cfg.grid.phi_step = deg(num()?),
        "snapshots_per_turn" => cfg.snapshots_per_turn = int()? as usize,
        "heading_jitter_deg" => cfg.heading_jitter = deg(num()?),
        "n_peaks" => cfg.n_peaks = int()? as usize,
        "outlier_fraction" => cfg.outliers.fraction = num()?,
        "outlier_low_mult" => cfg.outliers.low_mult = num()?,
        "outlier_high_mult" => cfg.outliers.high_mult = num()?,
        "outlier_rejection" => cfg.outlier_rejection = boolean()?,
        "capture_profiles" => cfg.capture_profiles = boolean()?,
        "strategy" => cfg.strategy = v.parse()?,
        "seed" => cfg.seed = int()?,
        "q_default" => cfg.q_default = num()?,
        "alpha_default" => cfg.alpha_default = num()?,
        "rate_scale" => cfg.rate_scale = num()?,
        "obstacle" => {
            let parts: Vec<f64> = v
                .split_whitespace()
                .map(|p| p.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("obstacle: {e}")))?;
            if parts.len() != 4 {
                return Err(Error::Config(
                    "obstacle needs `x_min y_min x_max y_max`".into(),
                ));
            }
            cfg.obstacles
                .obstacles
                .push(Obstacle::new(parts[0], parts[2], parts[1], parts[3]));
        }
        other => return Err(Error::Config(format!("unknown key `{other}`"))),
    }
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub fn write_ticks_csv<W: Write>(mut w: W, result: &RunResult) -> Result<()> {
    writeln!(w, "tick,robot,err,mode,x,y,est_x,est_y")?;
    for r in &result.ticks {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.tick, r.robot, r.err, r.mode, r.x, r.y, r.est_x, r.est_y
        )?;
    }
    Ok(())
}

pub fn write_events_jsonl<W: Write>(mut w: W, result: &RunResult) -> Result<()> {
    for e in &result.events {
        serde_json::to_writer(&mut w, e).map_err(|e| Error::Config(e.to_string()))?;
        writeln!(w)?;
    }
    Ok(())
}

/// The per-run summary line printed by `run`.
pub fn summary_line(result: &RunResult) -> String {
    format!(
        "strategy={} seed={} ate_trans={} err_final={} rendezvous={}",
        result.summary.strategy.as_str(),
        result.summary.seed,
        result.summary.ate_trans_m2,
        result.summary.final_mean_err,
        result.summary.rendezvous_count
    )
}

/// Write one run's artifacts into `dir`: `ticks.csv`, `events.jsonl`,
/// `summary.json`, plus `graph.txt` when requested.
pub fn write_run_artifacts(dir: &Path, result: &RunResult, emit: &EmitFlags) -> Result<()> {
    ensure_dir(dir)?;
    if emit.ticks {
        let f = std::fs::File::create(dir.join("ticks.csv"))?;
        write_ticks_csv(std::io::BufWriter::new(f), result)?;
    }
    if emit.events {
        let f = std::fs::File::create(dir.join("events.jsonl"))?;
        write_events_jsonl(std::io::BufWriter::new(f), result)?;
    }
    let json =
        serde_json::to_string_pretty(&result.summary).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(dir.join("summary.json"), json + "\n")?;
    if emit.graphs {
        save_graph(&result.graph, &dir.join("graph.txt"))?;
    }
    if emit.profiles && !result.profiles.is_empty() {
        let pdir = dir.join("profiles");
        ensure_dir(&pdir)?;
        for cap in &result.profiles {
            let name = format!("tick{}_{}_{}.csv", cap.tick, cap.requester, cap.partner);
            let f = std::fs::File::create(pdir.join(name))?;
            let mut w = std::io::BufWriter::new(f);
            writeln!(w, "theta_deg,phi_deg,value")?;
            for (pi, phi) in cap.profile.phi_grid.iter().enumerate() {
                for (ti, theta) in cap.profile.theta_grid.iter().enumerate() {
                    writeln!(
                        w,
                        "{},{},{}",
                        theta.to_degrees(),
                        phi.to_degrees(),
                        cap.profile.value(pi, ti)
                    )?;
                }
            }
        }
    }
    Ok(())
}

/// Execute a single run and emit its artifacts. Returns the result so
/// callers can aggregate.
pub fn cmd_run(spec: &ExperimentSpec) -> Result<RunResult> {
    spec.validate()?;
    let mut world = spec.world.clone();
    if spec.emit.profiles {
        world.capture_profiles = true;
    }
    let result = run_experiment(world)?;
    write_run_artifacts(&spec.output_dir, &result, &spec.emit)?;
    println!("{}", summary_line(&result));
    Ok(result)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareSeedRow {
    pub seed: u64,
    pub active_final_err: f64,
    pub random_final_err: f64,
    pub active_ate_trans: f64,
    pub random_ate_trans: f64,
    pub active_rendezvous: usize,
    pub random_rendezvous: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareSummary {
    pub version: String,
    pub seeds: Vec<u64>,
    pub active_final_err_mean: f64,
    pub random_final_err_mean: f64,
    /// random mean final error over active mean final error.
    pub err_ratio: f64,
    pub active_ate_trans_mean: f64,
    pub random_ate_trans_mean: f64,
    /// 100 (1 - active/random), in percent.
    pub ate_reduction_pct: f64,
    pub per_seed: Vec<CompareSeedRow>,
}

/// Run both strategies over the seed list (fanning runs across `threads`
/// workers), write the per-tick aggregate CSV and the comparison summary.
/// Outputs are identical for any thread count.
pub fn cmd_compare(spec: &ExperimentSpec, seeds: &[u64], threads: usize) -> Result<CompareSummary> {
    spec.validate()?;
    if seeds.len() < 2 {
        return Err(Error::Config("compare needs at least 2 seeds".into()));
    }
    ensure_dir(&spec.output_dir)?;

    let mut jobs = Vec::new();
    for &seed in seeds {
        for strategy in [Strategy::Active, Strategy::Random] {
            let mut world = spec.world.clone();
            world.seed = seed;
            world.strategy = strategy;
            if spec.emit.profiles {
                world.capture_profiles = true;
            }
            jobs.push(world);
        }
    }
    let results = run_batch(jobs, threads)?;

    // Per-run artifacts under out/<strategy>_<seed>/.
    for r in &results {
        let sub = spec.output_dir.join(format!(
            "{}_{}",
            r.summary.strategy.as_str(),
            r.summary.seed
        ));
        write_run_artifacts(&sub, r, &spec.emit)?;
    }

    // Aggregate mean/std of the per-tick mean error, per strategy.
    let n_iter = spec.world.n_iterations;
    let f = std::fs::File::create(spec.output_dir.join("compare_ticks.csv"))?;
    let mut w = std::io::BufWriter::new(f);
    writeln!(w, "tick,active_mean,active_std,random_mean,random_std")?;
    let series = |strategy: Strategy| -> Vec<Vec<f64>> {
        results
            .iter()
            .filter(|r| r.summary.strategy == strategy)
            .map(|r| {
                (1..=n_iter)
                    .map(|t| {
                        let rows: Vec<f64> = r
                            .ticks
                            .iter()
                            .filter(|row| row.tick == t)
                            .map(|row| row.err)
                            .collect();
                        rows.iter().sum::<f64>() / rows.len() as f64
                    })
                    .collect()
            })
            .collect()
    };
    let active = series(Strategy::Active);
    let random = series(Strategy::Random);
    let stats = |per_run: &[Vec<f64>], t: usize| -> (f64, f64) {
        let vals: Vec<f64> = per_run.iter().map(|run| run[t]).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
        (mean, var.sqrt())
    };
    for t in 0..n_iter as usize {
        let (am, astd) = stats(&active, t);
        let (rm, rstd) = stats(&random, t);
        writeln!(w, "{},{},{},{},{}", t + 1, am, astd, rm, rstd)?;
    }
    drop(w);

    let mut per_seed = Vec::new();
    for &seed in seeds {
        let a = results
            .iter()
            .find(|r| r.summary.seed == seed && r.summary.strategy == Strategy::Active)
            .unwrap();
        let r = results
            .iter()
            .find(|r| r.summary.seed == seed && r.summary.strategy == Strategy::Random)
            .unwrap();
        per_seed.push(CompareSeedRow {
            seed,
            active_final_err: a.summary.final_mean_err,
            random_final_err: r.summary.final_mean_err,
            active_ate_trans: a.summary.ate_trans_m2,
            random_ate_trans: r.summary.ate_trans_m2,
            active_rendezvous: a.summary.rendezvous_count,
            random_rendezvous: r.summary.rendezvous_count,
        });
    }
    let mean = |f: &dyn Fn(&CompareSeedRow) -> f64| -> f64 {
        per_seed.iter().map(f).sum::<f64>() / per_seed.len() as f64
    };
    let active_err = mean(&|r| r.active_final_err);
    let random_err = mean(&|r| r.random_final_err);
    let active_ate = mean(&|r| r.active_ate_trans);
    let random_ate = mean(&|r| r.random_ate_trans);
    let summary = CompareSummary {
        version: VERSION.to_string(),
        seeds: seeds.to_vec(),
        active_final_err_mean: active_err,
        random_final_err_mean: random_err,
        err_ratio: random_err / active_err.max(1e-12),
        active_ate_trans_mean: active_ate,
        random_ate_trans_mean: random_ate,
        ate_reduction_pct: 100.0 * (1.0 - active_ate / random_ate.max(1e-12)),
        per_seed,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(spec.output_dir.join("compare_summary.json"), json + "\n")?;
    println!(
        "compare seeds={} err_ratio={} ate_reduction_pct={}",
        seeds.len(),
        summary.err_ratio,
        summary.ate_reduction_pct
    );
    Ok(summary)
}

/// Deterministic batch execution: results come back in job order no matter
/// how many worker threads ran them.
fn run_batch(jobs: Vec<WorldConfig>, threads: usize) -> Result<Vec<RunResult>> {
    let threads = threads.max(1).min(jobs.len().max(1));
    let n = jobs.len();
    let slots: Mutex<Vec<Option<Result<RunResult>>>> = Mutex::new((0..n).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let jobs_ref = &jobs;
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= n {
                    break;
                }
                let out = run_experiment(jobs_ref[k].clone());
                slots.lock().unwrap()[k] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|s| s.expect("every job ran"))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct OutlierSeedRow {
    pub seed: u64,
    pub ate_weighted: f64,
    pub ate_unweighted: f64,
    pub reduction_pct: f64,
    pub outliers: usize,
    pub detected: usize,
    pub false_positives: usize,
    pub validated_edges: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutlierSummary {
    pub version: String,
    pub seeds: Vec<u64>,
    pub ate_weighted_mean: f64,
    pub ate_unweighted_mean: f64,
    pub reduction_pct_mean: f64,
    /// Most negative per-seed reduction (worst regression), in percent.
    pub worst_reduction_pct: f64,
    /// Precision/recall of `deviation >= delta` against injection labels.
    pub precision: f64,
    pub recall: f64,
    pub per_seed: Vec<OutlierSeedRow>,
}

/// Trajectories of a solved graph against recorded ground truth.
pub fn solved_trajectories(graph: &PoseGraph, result: &RunResult) -> TrajectoryPair {
    let mut pair = TrajectoryPair::default();
    for robot in 0..result.summary.n_robots {
        let mut est = Vec::new();
        let mut reference = Vec::new();
        for (id, pose) in graph.nodes().filter(|(id, _)| id.robot == robot) {
            est.push(*pose);
            reference.push(result.truth[id]);
        }
        pair.estimated.insert(robot as RobotId, est);
        pair.reference.insert(robot as RobotId, reference);
    }
    pair
}

/// Solve a run's final graph twice (stored weights vs all weights 1) and
/// report both trajectory errors.
pub fn weighted_vs_unweighted(result: &RunResult) -> Result<(f64, f64)> {
    let opts = OptimizeOptions {
        max_iterations: 25,
        rel_tol: 1e-6,
        ..OptimizeOptions::default()
    };
    let mut unweighted = result.graph.clone();
    for i in 0..unweighted.edge_count() {
        unweighted.set_edge_weight(i, 1.0);
    }
    let (gw, _) = optimize_with(&result.graph, &opts)?;
    let (gu, _) = optimize_with(&unweighted, &opts)?;
    let aw = ate_trans(&solved_trajectories(&gw, result))?;
    let au = ate_trans(&solved_trajectories(&gu, result))?;
    Ok((aw, au))
}

/// Outlier-rejection evaluation: run per seed with injection and AOA
/// validation on, solve the final graph with and without the weights, and
/// emit the per-edge deviation table plus the reduction summary.
pub fn cmd_outlier_eval(
    spec: &ExperimentSpec,
    seeds: &[u64],
    threads: usize,
) -> Result<OutlierSummary> {
    spec.validate()?;
    if spec.world.outliers.fraction <= 0.0 {
        return Err(Error::Config(
            "outlier-eval needs outlier_fraction > 0".into(),
        ));
    }
    ensure_dir(&spec.output_dir)?;
    let mut jobs = Vec::new();
    for &seed in seeds {
        let mut world = spec.world.clone();
        world.seed = seed;
        world.strategy = Strategy::Active;
        world.outlier_rejection = true;
        jobs.push(world);
    }
    let results = run_batch(jobs, threads)?;

    let f = std::fs::File::create(spec.output_dir.join("outlier_edges.csv"))?;
    let mut w = std::io::BufWriter::new(f);
    writeln!(
        w,
        "seed,edge_id,is_outlier_truth,theta_dev_deg,phi_dev_deg,weight"
    )?;
    let mut per_seed = Vec::new();
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (r, &seed) in results.iter().zip(seeds) {
        let delta = spec.world.aoa.delta;
        let mut detected = 0usize;
        let mut false_pos = 0usize;
        let mut n_out = 0usize;
        let mut n_val = 0usize;
        for (idx, edge) in r.graph.edges().iter().enumerate() {
            if idx < r.deployment_edges || edge.kind != EdgeKind::InterRobot {
                continue;
            }
            let truth = r.outlier_labels[idx];
            match &r.validations[idx] {
                Some(v) => {
                    n_val += 1;
                    let flagged = v.dev_theta >= delta || v.dev_phi >= delta;
                    match (truth, flagged) {
                        (true, true) => {
                            tp += 1;
                            detected += 1;
                            n_out += 1;
                        }
                        (true, false) => {
                            fn_ += 1;
                            n_out += 1;
                        }
                        (false, true) => {
                            fp += 1;
                            false_pos += 1;
                        }
                        (false, false) => tn += 1,
                    }
                    writeln!(
                        w,
                        "{},{},{},{},{},{}",
                        seed,
                        idx,
                        truth,
                        v.dev_theta.to_degrees(),
                        v.dev_phi.to_degrees(),
                        v.weight
                    )?;
                }
                None => {
                    if truth {
                        n_out += 1;
                    }
                    writeln!(w, "{seed},{idx},{truth},,,{}", edge.weight)?;
                }
            }
        }
        let (aw, au) = weighted_vs_unweighted(r)?;
        per_seed.push(OutlierSeedRow {
            seed,
            ate_weighted: aw,
            ate_unweighted: au,
            reduction_pct: 100.0 * (1.0 - aw / au.max(1e-12)),
            outliers: n_out,
            detected,
            false_positives: false_pos,
            validated_edges: n_val,
        });
    }
    drop(w);
    let _ = tn;

    let aw_mean = per_seed.iter().map(|r| r.ate_weighted).sum::<f64>() / per_seed.len() as f64;
    let au_mean = per_seed.iter().map(|r| r.ate_unweighted).sum::<f64>() / per_seed.len() as f64;
    let summary = OutlierSummary {
        version: VERSION.to_string(),
        seeds: seeds.to_vec(),
        ate_weighted_mean: aw_mean,
        ate_unweighted_mean: au_mean,
        reduction_pct_mean: 100.0 * (1.0 - aw_mean / au_mean.max(1e-12)),
        worst_reduction_pct: per_seed
            .iter()
            .map(|r| r.reduction_pct)
            .fold(f64::INFINITY, f64::min),
        precision: tp as f64 / ((tp + fp) as f64).max(1.0),
        recall: tp as f64 / ((tp + fn_) as f64).max(1.0),
        per_seed,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(spec.output_dir.join("outlier_summary.json"), json + "\n")?;
    println!(
        "outlier-eval seeds={} reduction_pct_mean={} worst={}",
        seeds.len(),
        summary.reduction_pct_mean,
        summary.worst_reduction_pct
    );
    Ok(summary)
}

/// Synthesize one profile for a transmitter/receiver geometry taken from the
/// config world and dump `profile.csv`, `peaks.json`, and `snapshots.csv`.
pub fn cmd_dump_profile(
    world: &WorldConfig,
    tx: [f64; 3],
    rx: [f64; 3],
    rx_heading: f64,
    out_dir: &Path,
) -> Result<()> {
    world.validate()?;
    ensure_dir(out_dir)?;
    let tx = nalgebra::Vector3::new(tx[0], tx[1], tx[2]);
    let rx_pos = nalgebra::Vector3::new(rx[0], rx[1], rx[2]);
    let paths = propagation_paths(&world.radio, tx, rx_pos, &world.obstacles);
    let arc = ArcSpec {
        center: rx_pos,
        start_heading: rx_heading,
        turn: std::f64::consts::FRAC_PI_2,
        count: world.snapshots_per_turn,
        heading_jitter_std: world.heading_jitter,
    };
    let mut rng = substream(world.seed, stream::CHANNEL);
    let snaps = synthesize_csi(&world.radio, &paths, &arc, &mut rng);

    let f = std::fs::File::create(out_dir.join("snapshots.csv"))?;
    let mut w = std::io::BufWriter::new(f);
    writeln!(w, "index,heading_rad,re_ratio,im_ratio")?;
    for (i, (ratio, heading)) in snaps.ratios.iter().zip(&snaps.headings).enumerate() {
        writeln!(w, "{},{},{},{}", i, heading, ratio.re, ratio.im)?;
    }
    drop(w);

    let profile = compute_profile(&snaps, &world.grid)?;
    let f = std::fs::File::create(out_dir.join("profile.csv"))?;
    let mut w = std::io::BufWriter::new(f);
    writeln!(w, "theta_deg,phi_deg,value")?;
    for (pi, phi) in profile.phi_grid.iter().enumerate() {
        for (ti, theta) in profile.theta_grid.iter().enumerate() {
            writeln!(
                w,
                "{},{},{}",
                theta.to_degrees(),
                phi.to_degrees(),
                profile.value(pi, ti)
            )?;
        }
    }
    drop(w);

    let peaks = extract_peaks(&profile, world.n_peaks);
    let json =
        serde_json::to_string_pretty(&peaks.peaks).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(out_dir.join("peaks.json"), json + "\n")?;

    // Convenience: report the true bearing for comparison.
    if let Ok((phi, theta)) = relative_angles(rx_pos, tx) {
        println!(
            "dump-profile: true bearing theta={} phi={} (world frame), {} peaks written",
            theta.to_degrees(),
            phi.to_degrees(),
            peaks.peaks.len()
        );
    }
    Ok(())
}

/// Parse a comma-separated seed list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<u64>()
                .map_err(|e| Error::Config(format!("seed `{p}`: {e}")))
        })
        .collect()
}

/// Seeds for a repeated experiment: `base, base+1, ...`.
pub fn seeds_from_repeats(base: u64, repeats: u32) -> Vec<u64> {
    (0..repeats as u64).map(|k| base + k).collect()
}
