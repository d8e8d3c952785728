//! `terdagger`: trajectory editing, residual generation, detector calibration
//! and the insertion simulator from the command line.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use terdagger::detector::{calibrate, confusion, DetectorConfig, LabeledEpisode, Metric};
use terdagger::editor::{correct, EditConfig, SmoothnessForm};
use terdagger::geometry::Trajectory;
use terdagger::io::{
    parse_scores, read_text, read_trajectory, save_trajectory, write_episode_log, write_metrics, write_samples,
    write_text, RunConfig, EVENTS_SUFFIX,
};
use terdagger::residual::{generate_samples, EditRecord, Region, RegionSet, SampleConfig, TrajectoryPolicy};
use terdagger::sim::{run_benchmark, run_episode, RunMode};
use terdagger::Error;

#[derive(Parser, Debug)]
#[command(name = "terdagger", version, about = "Trajectory-editing residual DAgger toolkit", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Align a demonstration onto a base trajectory, optimize the transition
    /// and write the corrected trajectory. Prints k*, endpoint error,
    /// iterations and the final objective.
    Edit(EditArgs),
    /// Turn an edit into residual samples.
    GenResiduals(GenArgs),
    /// Pick the largest threshold that flags every failed episode.
    Calibrate(CalibrateArgs),
    /// Precision and recall of a threshold over labeled score files.
    DetectEval(DetectEvalArgs),
    /// Run one insertion episode.
    Simulate(SimulateArgs),
    /// Run the edit-size and region ablation grid.
    Benchmark(BenchmarkArgs),
}

#[derive(Args, Debug)]
struct EditArgs {
    /// Base trajectory file.
    #[arg(long)]
    base: PathBuf,
    /// Demonstration trajectory file.
    #[arg(long)]
    demo: PathBuf,
    /// Output file for the corrected trajectory.
    #[arg(long)]
    out: PathBuf,
    /// Segment length N.
    #[arg(long, default_value_t = 20)]
    n_points: usize,
    /// Smoothness weight.
    #[arg(long, default_value_t = 1.0)]
    lambda_s: f64,
    /// Endpoint weight.
    #[arg(long, default_value_t = 1000.0)]
    lambda_e: f64,
    /// Weight of all three orientation terms.
    #[arg(long, default_value_t = 0.5)]
    lambda_q: f64,
    /// Pull the last pose to the demonstration start with the endpoint term only.
    #[arg(long)]
    soft_endpoint: bool,
    /// Smoothness reference: relative (to base steps) or absolute.
    #[arg(long, default_value = "relative")]
    smoothness: SmoothnessForm,
    /// Orientation weight of the alignment distance.
    #[arg(long, default_value_t = 0.5)]
    omega_q: f64,
    /// Orientation solver iteration budget.
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Also write the edit record (k*, N, ...) to this file.
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Base trajectory file.
    #[arg(long)]
    base: PathBuf,
    /// Corrected trajectory file.
    #[arg(long)]
    corrected: PathBuf,
    /// Demonstration trajectory file.
    #[arg(long)]
    demo: PathBuf,
    /// Edit record written by `edit --meta`; supplies k* and N.
    #[arg(long, required_unless_present_all = ["k_star", "n_points"])]
    meta: Option<PathBuf>,
    /// Attachment index k* (instead of --meta).
    #[arg(long, requires = "n_points")]
    k_star: Option<usize>,
    /// Effective segment length N (instead of --meta).
    #[arg(long, requires = "k_star")]
    n_points: Option<usize>,
    /// Regions to emit: comma-separated from pre, transition, demo, post, or all.
    #[arg(long, default_value = "all")]
    regions: RegionSet,
    /// Orientation weight of the post-edit matcher.
    #[arg(long, default_value_t = 0.5)]
    q_weight: f64,
    /// Output samples file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Score files, one episode each.
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct DetectEvalArgs {
    /// Score files, one episode each.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Detection threshold c.
    #[arg(long)]
    threshold: f64,
    /// Consecutive exceedances required to trigger.
    #[arg(long, default_value_t = 1)]
    debounce: usize,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML run configuration; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Target-belief bias in meters: one value (along y) or x,y,z.
    /// [default: from config, 0]
    #[arg(long, allow_hyphen_values = true)]
    bias: Option<String>,
    /// Output location. [default: from config, "out"]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Episode seed. [default: from config, 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Run mode: base (policy only), ter (intervene, edit, replay).
    #[arg(long, default_value = "ter", value_parser = ["base", "ter"])]
    mode: String,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    /// Training episodes per configuration. [default: from config, 50]
    #[arg(long)]
    episodes: Option<usize>,
    /// Comma-separated edit sizes. [default: from config, 10,20,30,40]
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    /// Region subsets separated by ';', each like pre+transition, or "default"
    /// for the eight standard subsets. [default: from config]
    #[arg(long)]
    region_grid: Option<String>,
    /// First training seed. [default: from config, 0]
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    run: RunArgs,
}

/// A failure and the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: 2,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Edit(a) => edit(a),
        Command::GenResiduals(a) => gen_residuals(a),
        Command::Calibrate(a) => calibrate_cmd(a),
        Command::DetectEval(a) => detect_eval(a),
        Command::Simulate(a) => simulate(a),
        Command::Benchmark(a) => benchmark(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(path: &Path) -> Result<Trajectory, Failure> {
    let (t, warnings) = read_trajectory(path).map_err(|e| Failure {
        code: 2,
        message: match e {
            Error::Io { .. } => e.to_string(),
            _ => format!("{}: {e}", path.display()),
        },
    })?;
    for w in warnings {
        eprintln!("warning: {}: line {}: {}", path.display(), w.line, w.message);
    }
    Ok(t)
}

fn edit(a: EditArgs) -> CliResult {
    let base = load(&a.base)?;
    let demo = load(&a.demo)?;
    let mut cfg = EditConfig {
        n_points: a.n_points,
        hard_endpoint: !a.soft_endpoint,
        max_iters: a.max_iters,
        smoothness: a.smoothness,
        ..EditConfig::default()
    };
    cfg.weights.lambda_s = a.lambda_s;
    cfg.weights.lambda_e = a.lambda_e;
    cfg.weights.lambda_qf = a.lambda_q;
    cfg.weights.lambda_qs = a.lambda_q;
    cfg.weights.lambda_qe = a.lambda_q;
    let weights = terdagger::alignment::AlignmentWeights::new(1.0, a.omega_q)?;
    let c = correct(&base, &demo, &weights, &cfg)?;
    save_trajectory(&a.out, &c.corrected)?;
    let record = format!(
        "# edit k_star={} n={} endpoint_position={:e} endpoint_quaternion={:e} iterations={} converged={} final_objective={:e} junction_max_step={:e}",
        c.k_star(),
        c.n_effective(),
        c.edit.endpoint_error.0,
        c.edit.endpoint_error.1,
        c.edit.iterations,
        c.edit.converged,
        c.edit.final_objective(),
        c.junction_max_step(),
    );
    println!("{}", &record[2..]);
    if let Some(meta) = &a.meta {
        write_text(meta, &format!("{record}\n"))?;
    }
    Ok(())
}

fn meta_value(text: &str, key: &str, path: &Path) -> Result<usize, Failure> {
    text.split_whitespace()
        .find_map(|t| t.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Failure {
            code: 2,
            message: format!("{}: no integer `{key}` in edit record", path.display()),
        })
}

fn gen_residuals(a: GenArgs) -> CliResult {
    let base = load(&a.base)?;
    let corrected = load(&a.corrected)?;
    let demo = load(&a.demo)?;
    let (k_star, n) = match (&a.meta, a.k_star, a.n_points) {
        (_, Some(k), Some(n)) => (k, n),
        (Some(meta), _, _) => {
            let text = read_text(meta)?;
            (meta_value(&text, "k_star", meta)?, meta_value(&text, "n", meta)?)
        }
        _ => return Err(usage("give --meta or both --k-star and --n-points")),
    };
    let human = if (demo.dt() - base.dt()).abs() <= 1e-12 * base.dt() {
        demo
    } else {
        terdagger::geometry::resample(&demo, base.dt())?
    };
    if k_star < n || k_star >= base.len() || k_star >= corrected.len() {
        return Err(Failure {
            code: 2,
            message: format!("k* = {k_star}, N = {n} do not fit a base of {} poses", base.len()),
        });
    }
    let segment = corrected.slice(k_star - n..k_star + 1)?;
    let record = EditRecord {
        base: &base,
        corrected: &corrected,
        segment: &segment,
        human: &human,
        k_star,
        n,
    };
    let cfg = SampleConfig {
        regions: a.regions,
        post_edit_q_weight: a.q_weight,
    };
    let samples = generate_samples(&record, &TrajectoryPolicy::new(base.clone()), &cfg)?;
    write_text(&a.out, &write_samples(&samples))?;
    let counts: Vec<String> = Region::ALL
        .iter()
        .map(|r| format!("{}={}", r.as_str(), samples.iter().filter(|s| s.region == *r).count()))
        .collect();
    println!("samples={} {}", samples.len(), counts.join(" "));
    Ok(())
}

fn load_scores(files: &[PathBuf]) -> Result<Vec<LabeledEpisode>, Failure> {
    files
        .iter()
        .map(|f| {
            let text = read_text(f)?;
            parse_scores(&text).map(|(e, _)| e).map_err(|e| Failure {
                code: 2,
                message: format!("{}: {e}", f.display()),
            })
        })
        .collect()
}

fn calibrate_cmd(a: CalibrateArgs) -> CliResult {
    let episodes = load_scores(&a.files)?;
    let c = calibrate(&episodes)?;
    let cfg = DetectorConfig::new(Metric::ForcePredictionError, c, 1)?;
    let m = confusion(&episodes, &cfg);
    println!(
        "threshold_c={c:e} episodes={} failed={} precision={} recall={}",
        episodes.len(),
        episodes.iter().filter(|e| e.failed).count(),
        m.precision(),
        m.recall()
    );
    Ok(())
}

fn detect_eval(a: DetectEvalArgs) -> CliResult {
    let episodes = load_scores(&a.files)?;
    let cfg = DetectorConfig::new(Metric::ForcePredictionError, a.threshold, a.debounce)?;
    let m = confusion(&episodes, &cfg);
    println!(
        "threshold_c={:e} debounce_k={} precision={} recall={} tp={} fp={} fn={} tn={}",
        a.threshold,
        a.debounce,
        m.precision(),
        m.recall(),
        m.true_pos,
        m.false_pos,
        m.false_neg,
        m.true_neg
    );
    Ok(())
}

fn parse_bias(raw: &str) -> Result<[f64; 3], Failure> {
    let values: Vec<f64> = raw
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("--bias: '{raw}' is not a number list")))?;
    match values.as_slice() {
        [y] => Ok([0.0, *y, 0.0]),
        [x, y, z] => Ok([*x, *y, *z]),
        _ => Err(usage("--bias takes one value (y) or three (x,y,z)")),
    }
}

fn resolve(run: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &run.config {
        Some(p) => RunConfig::from_toml(&read_text(p)?).map_err(|e| Failure {
            code: 2,
            message: format!("{}: {e}", p.display()),
        })?,
        None => RunConfig::default(),
    };
    if let Some(b) = &run.bias {
        cfg.policy.belief_bias = parse_bias(b)?;
        cfg.benchmark.bias = cfg.policy.belief_bias;
    }
    if let Some(o) = &run.out {
        cfg.output_dir = o.display().to_string();
    }
    Ok(cfg)
}

fn simulate(a: SimulateArgs) -> CliResult {
    let mut cfg = resolve(&a.run)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let dir = PathBuf::from(&cfg.output_dir);
    let mode = if a.mode == "base" { RunMode::Base } else { RunMode::Ter };
    let ep_cfg = cfg.episode_config();
    let ep = run_episode(cfg.seed, &ep_cfg, mode)?;

    write_text(&dir.join("config.toml"), &cfg.to_toml())?;
    let (log, events) = write_episode_log(&ep.log, &ep_cfg);
    write_text(&dir.join("episode.log"), &log)?;
    write_text(&dir.join(format!("episode.log{EVENTS_SUFFIX}")), &events)?;
    let commanded = Trajectory::new(
        ep_cfg.control.command_dt,
        ep.log.records.iter().map(|r| r.commanded).collect(),
    )?;
    save_trajectory(&dir.join("commanded.traj"), &commanded)?;
    let measured = Trajectory::with_wrenches(
        ep_cfg.control.command_dt,
        ep.log.records.iter().map(|r| r.measured).collect(),
        Some(ep.log.records.iter().map(|r| r.measured_wrench).collect()),
    )?;
    save_trajectory(&dir.join("measured.traj"), &measured)?;
    if let Some(b) = &ep.base_rollout {
        save_trajectory(&dir.join("base.traj"), b)?;
    }
    if let Some(d) = &ep.demo {
        save_trajectory(&dir.join("demo.traj"), d)?;
    }
    if let Some(c) = &ep.correction {
        save_trajectory(&dir.join("corrected.traj"), &c.corrected)?;
    }
    if !ep.samples.is_empty() {
        write_text(&dir.join("samples.csv"), &write_samples(&ep.samples))?;
    }
    let intervention = match ep.log.intervention {
        Some(i) => format!(" trigger_step={} k_star={} n={}", i.trigger_step, i.k_star, i.n_points),
        None => String::new(),
    };
    println!(
        "seed={} mode={} outcome={} steps={} samples={}{intervention} out={}",
        cfg.seed,
        a.mode,
        ep.log.outcome.as_str(),
        ep.log.records.len(),
        ep.samples.len(),
        dir.display()
    );
    Ok(())
}

fn parse_region_grid(raw: &str) -> Result<Vec<RegionSet>, Failure> {
    if raw.trim() == "default" {
        return Ok(terdagger::sim::benchmark::default_region_grid());
    }
    raw.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<RegionSet>().map_err(|e| usage(format!("--region-grid: {e}"))))
        .collect()
}

fn benchmark(a: BenchmarkArgs) -> CliResult {
    let mut cfg = resolve(&a.run)?;
    if let Some(e) = a.episodes {
        cfg.benchmark.episodes = e;
    }
    if let Some(g) = a.n_grid {
        cfg.benchmark.n_grid = g;
    }
    if let Some(r) = &a.region_grid {
        cfg.benchmark.region_grid = parse_region_grid(r)?;
    }
    if let Some(s) = a.seed {
        cfg.benchmark.seed = s;
    }
    cfg.validate()?;
    let rows = run_benchmark(&cfg.episode_config(), &cfg.benchmark)?;
    let table = write_metrics(&rows);
    let out = PathBuf::from(&cfg.output_dir);
    let (csv, config) = if out.extension().is_some_and(|e| e == "csv") {
        (out.clone(), out.with_extension("config.toml"))
    } else {
        (out.join("metrics.csv"), out.join("config.toml"))
    };
    write_text(&csv, &table)?;
    write_text(&config, &cfg.to_toml())?;
    print!("{table}");
    Ok(())
}
