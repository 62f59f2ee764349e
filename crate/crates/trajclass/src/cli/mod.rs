//! Command-line front end: declarative config plus flag overrides, a
//! deterministic run directory per invocation, and six subcommands covering
//! the full loop from dataset synthesis to technology comparison.

pub mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::features::{extract_instances, feature_names, FeatureError, FeatureOptions};
use crate::hpo::{
    assignment_key, cv_objective_fn, pipeline_space, smbo_optimize, Budget, SmboOptions,
};
use crate::protocol::{
    all_families, bootstrap_family, build_report, compare_technologies, family_space,
    render_report_table, train_test_split, wallclock_calibration, BootstrapOptions,
    EvaluationReport, FamilyReport, LeakageAudit, PipelineCalibrationRunner, PipelineFamily,
    ProtocolError, ScoreTuple,
};
use crate::savgol::SavGolParams;
use crate::seed::derive_seed;
use crate::trajectory::{
    generate_dataset, write_dataset, DatasetSpec, TechPreset, Trajectory, TrajectoryError,
};
use config::{ConfigError, DatasetSource, RunConfig};

pub use config::RunConfig as Config;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("lookup: {0}")]
    Lookup(String),
    #[error("output directory {} already exists (pass --force to replace it)", .0.display())]
    Exists(PathBuf),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for anything the user can fix before a run starts (bad config,
    /// missing inputs, refusal to overwrite), 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_)
            | CliError::Usage(_)
            | CliError::MissingInput(_)
            | CliError::Lookup(_)
            | CliError::Exists(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "trajclass",
    about = "Movement-pattern classification experiments on positioning traces",
    version
)]
pub struct Cli {
    /// JSON run configuration; flags override individual fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (wins over config and TRAJCLASS_SEED).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the protocol stage; default: all processors.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Directory that receives the run-stamped output directory.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Replace an existing run directory of the same name.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled trajectory dataset.
    Generate {
        /// Technology preset: gnss-like or uwb-like.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Extract feature instances from a dataset into a CSV.
    Featurize {
        /// Dataset manifest to read instead of generating data.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Segments per trajectory.
        #[arg(long)]
        split: Option<usize>,
        /// Noise placement: no-noise, raw-noise or feature-noise.
        #[arg(long)]
        placement: Option<String>,
        /// Smoothing window length (odd); requires --polyorder.
        #[arg(long)]
        window_length: Option<usize>,
        /// Smoothing polynomial order; requires --window-length.
        #[arg(long)]
        polyorder: Option<usize>,
    },
    /// Optimize one pipeline family and dump the trial history.
    Optimize {
        /// Pipeline family, like rf+raw-noise.
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Stop after this many objective evaluations.
        #[arg(long, conflicts_with = "budget_secs")]
        budget_evals: Option<usize>,
        /// Stop after this much wall time.
        #[arg(long)]
        budget_secs: Option<f64>,
    },
    /// Optimize, bootstrap and score pipeline families; write the report.
    Evaluate {
        /// Comma-separated family list, or "all".
        #[arg(long)]
        families: Option<String>,
        /// Single family; repeatable. Wins over --families.
        #[arg(long)]
        family: Vec<String>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, conflicts_with = "budget_secs")]
        budget_evals: Option<usize>,
        #[arg(long)]
        budget_secs: Option<f64>,
    },
    /// Sweep wallclock optimizer budgets and pick the smallest good one.
    Calibrate {
        /// Restrict the sweep to one family; default: the whole space.
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        step_secs: Option<f64>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        max_secs: Option<f64>,
    },
    /// Compare two evaluation reports metric by metric.
    Compare {
        report_a: PathBuf,
        report_b: PathBuf,
        /// Family to take from the first report; default: best mean MCC.
        #[arg(long)]
        family_a: Option<String>,
        /// Family to take from the second report; default: best mean MCC.
        #[arg(long)]
        family_b: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
    },
}

/// Parses argv and runs the command, printing a structured error to stderr
/// on failure. Returns the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(_) => 0,
        Err(e) => {
            let code = e.exit_code();
            eprintln!(
                "{}",
                serde_json::json!({ "error": e.to_string(), "exit_code": code })
            );
            code
        }
    }
}

/// Like [`run`], but surfaces the run directory and error values; the
/// programmatic entry point for tests.
pub fn execute<I, S>(argv: I) -> Result<PathBuf, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Usage(e.to_string()))?;
    dispatch(cli)
}

fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var("TRAJCLASS_SEED") {
        Ok(text) => text.parse::<u64>().map_err(|_| {
            CliError::Usage(format!(
                "TRAJCLASS_SEED must be an unsigned integer, got {text:?}"
            ))
        }),
        Err(_) => Ok(42),
    }
}

fn config_err(pointer: &str, message: impl Into<String>) -> CliError {
    CliError::Config(ConfigError { pointer: pointer.to_string(), message: message.into() })
}

fn parse_family_arg(s: &str) -> Result<PipelineFamily, CliError> {
    s.parse::<PipelineFamily>().map_err(|e| CliError::Usage(e.to_string()))
}

fn dispatch(cli: Cli) -> Result<PathBuf, CliError> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::MissingInput(format!("config file {}: {e}", path.display()))
            })?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(dir) = &cli.output_dir {
        config.output_dir = dir.display().to_string();
    }
    if cli.jobs.is_some() {
        config.jobs = cli.jobs;
    }
    let seed = resolve_seed(cli.seed, config.seed)?;
    if let Some(jobs) = config.jobs {
        // The global pool can only be built once per process; a repeat
        // invocation in the same process keeps the first size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match &cli.command {
        Command::Generate { preset } => {
            if let Some(p) = preset {
                let preset: TechPreset =
                    p.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
                config.dataset = match config.dataset {
                    DatasetSource::Generate { counts, duration_s, .. } => {
                        DatasetSource::Generate { preset, counts, duration_s }
                    }
                    DatasetSource::Manifest { .. } => DatasetSource::default_generate(preset),
                };
            }
            cmd_generate(&config, seed, cli.force)
        }
        Command::Featurize { manifest, split, placement, window_length, polyorder } => {
            apply_manifest(&mut config, manifest);
            if let Some(s) = split {
                if *s == 0 {
                    return Err(config_err("/featurize/split", "must be positive"));
                }
                config.featurize.split = *s;
            }
            if let Some(p) = placement {
                config.featurize.placement =
                    p.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
            }
            if window_length.is_some() || polyorder.is_some() {
                let window = window_length
                    .or(config.featurize.savgol.map(|s| s.window_length));
                let poly = polyorder.or(config.featurize.savgol.map(|s| s.polyorder));
                let (Some(window_length), Some(polyorder)) = (window, poly) else {
                    return Err(config_err(
                        "/featurize",
                        "window_length and polyorder must be given together",
                    ));
                };
                let params = SavGolParams { window_length, polyorder };
                params
                    .validate()
                    .map_err(|e| config_err("/featurize/window_length", format!("{e}")))?;
                config.featurize.savgol = Some(params);
            }
            cmd_featurize(&config, seed, cli.force)
        }
        Command::Optimize { family, manifest, budget_evals, budget_secs } => {
            apply_manifest(&mut config, manifest);
            apply_budget(&mut config, budget_evals, budget_secs)?;
            if let Some(f) = family {
                config.family = Some(parse_family_arg(f)?);
            }
            let family = config
                .family
                .ok_or_else(|| config_err("/family", "optimize needs a pipeline family"))?;
            cmd_optimize(&config, seed, cli.force, family)
        }
        Command::Evaluate { families, family, manifest, reps, budget_evals, budget_secs } => {
            apply_manifest(&mut config, manifest);
            apply_budget(&mut config, budget_evals, budget_secs)?;
            if let Some(r) = reps {
                if *r == 0 {
                    return Err(config_err("/reps", "must be positive"));
                }
                config.reps = *r;
            }
            if !family.is_empty() {
                let mut list = Vec::with_capacity(family.len());
                for f in family {
                    let parsed = parse_family_arg(f)?;
                    if list.contains(&parsed) {
                        return Err(CliError::Usage(format!("duplicate family {parsed}")));
                    }
                    list.push(parsed);
                }
                config.families = list;
            } else if let Some(spec) = families {
                config.families = if spec == "all" {
                    all_families()
                } else {
                    let mut list = Vec::new();
                    for part in spec.split(',') {
                        let parsed = parse_family_arg(part.trim())?;
                        if list.contains(&parsed) {
                            return Err(CliError::Usage(format!("duplicate family {parsed}")));
                        }
                        list.push(parsed);
                    }
                    list
                };
            }
            cmd_evaluate(&config, seed, cli.force)
        }
        Command::Calibrate { family, manifest, step_secs, runs, max_secs } => {
            apply_manifest(&mut config, manifest);
            if let Some(f) = family {
                config.family = Some(parse_family_arg(f)?);
            }
            if let Some(s) = step_secs {
                if !(*s > 0.0) {
                    return Err(config_err("/calibration/step_s", "must be positive"));
                }
                config.calibration.step_s = *s;
            }
            if let Some(r) = runs {
                if *r == 0 {
                    return Err(config_err("/calibration/runs", "must be positive"));
                }
                config.calibration.runs = *r;
            }
            if let Some(m) = max_secs {
                config.calibration.max_time_s = *m;
            }
            if config.calibration.max_time_s < config.calibration.step_s {
                return Err(config_err("/calibration/max_time_s", "must be at least one step"));
            }
            cmd_calibrate(&config, seed, cli.force)
        }
        Command::Compare { report_a, report_b, family_a, family_b, alpha } => {
            if let Some(a) = alpha {
                if !(*a > 0.0 && *a < 1.0) {
                    return Err(config_err("/alpha", "must be strictly between 0 and 1"));
                }
                config.alpha = *a;
            }
            cmd_compare(
                &config,
                seed,
                cli.force,
                report_a,
                report_b,
                family_a.as_deref(),
                family_b.as_deref(),
            )
        }
    }
}

fn apply_manifest(config: &mut RunConfig, manifest: &Option<PathBuf>) {
    if let Some(path) = manifest {
        config.dataset = DatasetSource::Manifest { path: path.display().to_string() };
    }
}

fn apply_budget(
    config: &mut RunConfig,
    evals: &Option<usize>,
    secs: &Option<f64>,
) -> Result<(), CliError> {
    if let Some(n) = evals {
        if *n == 0 {
            return Err(config_err("/budget/evals", "must be positive"));
        }
        config.budget = Budget::Evals(*n);
    } else if let Some(s) = secs {
        if !(*s > 0.0) {
            return Err(config_err("/budget/wallclock_secs", "must be positive"));
        }
        config.budget = Budget::WallclockSecs(*s);
    }
    Ok(())
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// Creates `{output_dir}/{command}-{seed}-{hash8}`; the hash covers every
/// output-determining setting, so identical invocations share a name and
/// collide unless --force replaces the older run.
fn prepare_run_dir(
    config: &RunConfig,
    command: &str,
    seed: u64,
    force: bool,
    extra: &[&str],
) -> Result<PathBuf, CliError> {
    let mut fingerprint = config.fingerprint(command, seed);
    for e in extra {
        fingerprint.push('\u{0}');
        fingerprint.push_str(e);
    }
    let hash = fnv1a64(fingerprint.as_bytes()) as u32;
    let dir = Path::new(&config.output_dir).join(format!("{command}-{seed}-{hash:08x}"));
    if dir.exists() {
        if !force {
            return Err(CliError::Exists(dir));
        }
        std::fs::remove_dir_all(&dir)?;
    }
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn load_input_dataset(config: &RunConfig, seed: u64) -> Result<Vec<Trajectory>, CliError> {
    match &config.dataset {
        DatasetSource::Generate { preset, counts, duration_s } => {
            let mut spec = DatasetSpec::new(*preset);
            spec.counts = *counts;
            spec.duration_s = *duration_s;
            Ok(generate_dataset(&spec, seed)?)
        }
        DatasetSource::Manifest { path } => {
            let path = Path::new(path);
            if !path.exists() {
                return Err(CliError::MissingInput(format!(
                    "dataset manifest {} does not exist",
                    path.display()
                )));
            }
            let (_, trajectories) = crate::trajectory::load_dataset(path)?;
            Ok(trajectories)
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)?;
    Ok(())
}

fn write_json_pretty<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn cmd_generate(config: &RunConfig, seed: u64, force: bool) -> Result<PathBuf, CliError> {
    let DatasetSource::Generate { preset, counts, duration_s } = &config.dataset else {
        return Err(config_err("/dataset/source", "generate needs a generator dataset spec"));
    };
    let mut spec = DatasetSpec::new(*preset);
    spec.counts = *counts;
    spec.duration_s = *duration_s;
    let trajectories = generate_dataset(&spec, seed)?;
    let dir = prepare_run_dir(config, "generate", seed, force, &[])?;
    let manifest = write_dataset(
        &dir.join("dataset"),
        &trajectories,
        seed,
        Some(preset.name().to_string()),
    )?;
    println!("wrote {} trajectories, manifest {}", trajectories.len(), manifest.display());
    Ok(dir)
}

fn cmd_featurize(config: &RunConfig, seed: u64, force: bool) -> Result<PathBuf, CliError> {
    let trajectories = load_input_dataset(config, seed)?;
    let instances = extract_instances(
        &trajectories,
        config.featurize.split,
        config.featurize.placement,
        config.featurize.savgol,
        &FeatureOptions::default(),
    )?;
    let dir = prepare_run_dir(config, "featurize", seed, force, &[])?;
    let mut csv = String::new();
    csv.push_str(&feature_names().join(","));
    csv.push_str(",label,parent_id\n");
    for instance in &instances {
        let mut row: Vec<String> = instance.values.iter().map(|v| format!("{v}")).collect();
        row.push(instance.label.map(|l| l.name().to_string()).unwrap_or_default());
        row.push(csv_escape(&instance.parent_id));
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    let path = dir.join("features.csv");
    write_text(&path, &csv)?;
    println!("wrote {} instances to {}", instances.len(), path.display());
    Ok(dir)
}

fn cmd_optimize(
    config: &RunConfig,
    seed: u64,
    force: bool,
    family: PipelineFamily,
) -> Result<PathBuf, CliError> {
    let trajectories = load_input_dataset(config, seed)?;
    let (train, _) = train_test_split(&trajectories, config.split_fraction, seed)?;
    let space = family_space(family);
    let feature_opts = FeatureOptions::default();
    let result = smbo_optimize(
        &space,
        cv_objective_fn(&train, &feature_opts),
        config.budget,
        derive_seed(seed, &[0x09]),
        SmboOptions::default(),
    );
    let dir = prepare_run_dir(config, "optimize", seed, force, &[])?;
    let mut history = String::from("trial,objective,failed,config\n");
    for (i, trial) in result.trials.iter().enumerate() {
        history.push_str(&format!(
            "{i},{},{},{}\n",
            trial.objective,
            trial.failed,
            csv_escape(&assignment_key(&trial.assignment))
        ));
    }
    write_text(&dir.join("history.csv"), &history)?;
    match result.best() {
        Some(best) => {
            write_json_pretty(
                &dir.join("best.json"),
                &serde_json::json!({
                    "family": family.to_string(),
                    "objective": best.objective,
                    "assignment": best.assignment,
                }),
            )?;
            println!(
                "{} trials; best objective {} with {}",
                result.trials.len(),
                best.objective,
                assignment_key(&best.assignment)
            );
        }
        None => println!("budget allowed no evaluations"),
    }
    Ok(dir)
}

fn cmd_evaluate(config: &RunConfig, seed: u64, force: bool) -> Result<PathBuf, CliError> {
    let trajectories = load_input_dataset(config, seed)?;
    let (train, test) = train_test_split(&trajectories, config.split_fraction, seed)?;
    let opts = BootstrapOptions {
        reps: config.reps,
        optimizer_runs: config.optimizer_runs,
        sample_k: config.sample_k,
        budget: config.budget,
        smbo: SmboOptions::default(),
    };
    let feature_opts = FeatureOptions::default();
    let audit = LeakageAudit::new();
    let reference = all_families();
    let mut evaluations = Vec::with_capacity(config.families.len());
    for family in &config.families {
        // Family seeds key off the position in the full family list, so a
        // subset run reproduces the matching slice of a full run.
        let index = reference.iter().position(|f| f == family).unwrap() as u64;
        evaluations.push(bootstrap_family(
            *family,
            &train,
            &test,
            &opts,
            &feature_opts,
            derive_seed(seed, &[0xFA, index]),
            Some(&audit),
        )?);
    }
    let report = build_report(&evaluations, seed, config.budget);
    let dir = prepare_run_dir(config, "evaluate", seed, force, &[])?;
    write_json_pretty(&dir.join("report.json"), &report)?;
    let table = render_report_table(&report);
    write_text(&dir.join("table.txt"), &table)?;
    write_json_pretty(
        &dir.join("leakage.json"),
        &serde_json::json!({ "clean": audit.clean(), "events": audit.events() }),
    )?;
    print!("{table}");
    Ok(dir)
}

fn cmd_calibrate(config: &RunConfig, seed: u64, force: bool) -> Result<PathBuf, CliError> {
    let trajectories = load_input_dataset(config, seed)?;
    let (train, test) = train_test_split(&trajectories, config.split_fraction, seed)?;
    let feature_opts = FeatureOptions::default();
    let space = match config.family {
        Some(family) => family_space(family),
        None => pipeline_space(),
    };
    let mut runner = PipelineCalibrationRunner {
        space,
        train: &train,
        test: &test,
        feature_opts: &feature_opts,
        seed,
        smbo: SmboOptions::default(),
    };
    let table = wallclock_calibration(
        &mut runner,
        config.calibration.step_s,
        config.calibration.runs,
        config.calibration.max_time_s,
    )?;
    let dir = prepare_run_dir(config, "calibrate", seed, force, &[])?;
    write_json_pretty(&dir.join("calibration.json"), &table)?;
    for row in &table.rows {
        println!("budget {:>8.1}s  mean score {:.4}", row.budget_s, row.mean_score);
    }
    println!("selected budget: {}s", table.selected_budget_s);
    Ok(dir)
}

fn load_report(path: &Path) -> Result<EvaluationReport, CliError> {
    if !path.exists() {
        return Err(CliError::MissingInput(format!("report {} does not exist", path.display())));
    }
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Config(ConfigError {
            pointer: path.display().to_string(),
            message: format!("malformed report: {e}"),
        })
    })
}

fn pick_family<'r>(
    report: &'r EvaluationReport,
    requested: Option<&str>,
    path: &Path,
) -> Result<&'r FamilyReport, CliError> {
    match requested {
        Some(name) => report.families.iter().find(|f| f.family == name).ok_or_else(|| {
            CliError::Lookup(format!("family {name:?} is not in report {}", path.display()))
        }),
        None => {
            let mcc_mean = |f: &FamilyReport| {
                f.summaries.iter().find(|s| s.metric == "mcc").map(|s| s.mean).unwrap_or(0.0)
            };
            report
                .families
                .iter()
                .max_by(|a, b| mcc_mean(a).partial_cmp(&mcc_mean(b)).unwrap())
                .ok_or_else(|| {
                    CliError::Lookup(format!("report {} has no families", path.display()))
                })
        }
    }
}

fn cmd_compare(
    config: &RunConfig,
    seed: u64,
    force: bool,
    report_a: &Path,
    report_b: &Path,
    family_a: Option<&str>,
    family_b: Option<&str>,
) -> Result<PathBuf, CliError> {
    let a = load_report(report_a)?;
    let b = load_report(report_b)?;
    let fa = pick_family(&a, family_a, report_a)?;
    let fb = pick_family(&b, family_b, report_b)?;
    let scores_a: Vec<ScoreTuple> = fa.outcomes.iter().map(|o| o.score).collect();
    let scores_b: Vec<ScoreTuple> = fb.outcomes.iter().map(|o| o.score).collect();
    let comparison = compare_technologies(&scores_a, &scores_b, config.alpha)?;
    let dir = prepare_run_dir(
        config,
        "compare",
        seed,
        force,
        &[
            &report_a.display().to_string(),
            &report_b.display().to_string(),
            &fa.family,
            &fb.family,
        ],
    )?;
    write_json_pretty(
        &dir.join("comparison.json"),
        &serde_json::json!({
            "report_a": report_a.display().to_string(),
            "family_a": fa.family,
            "report_b": report_b.display().to_string(),
            "family_b": fb.family,
            "alpha": comparison.alpha,
            "metrics": comparison.metrics,
        }),
    )?;
    println!("{} ({}) vs {} ({})", report_a.display(), fa.family, report_b.display(), fb.family);
    for m in &comparison.metrics {
        if m.degenerate {
            println!("{:<10} degenerate (constant scores), no test applies", m.metric);
        } else if m.significant_at_alpha {
            println!(
                "{:<10} significant at alpha={} (p={:.4}), higher side: {} ({:.4} vs {:.4})",
                m.metric,
                comparison.alpha,
                m.p_value.unwrap(),
                m.direction,
                m.mean_a,
                m.mean_b
            );
        } else {
            println!(
                "{:<10} no significant difference (p={:.4}, {:.4} vs {:.4})",
                m.metric,
                m.p_value.unwrap(),
                m.mean_a,
                m.mean_b
            );
        }
    }
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn seed_precedence_is_flag_config_env_default() {
        assert_eq!(resolve_seed(Some(1), Some(2)).unwrap(), 1);
        assert_eq!(resolve_seed(None, Some(2)).unwrap(), 2);
        std::env::set_var("TRAJCLASS_SEED", "77");
        assert_eq!(resolve_seed(None, None).unwrap(), 77);
        std::env::set_var("TRAJCLASS_SEED", "many");
        assert!(resolve_seed(None, None).is_err());
        std::env::remove_var("TRAJCLASS_SEED");
        assert_eq!(resolve_seed(None, None).unwrap(), 42);
    }

    #[test]
    fn generate_writes_dataset_and_reruns_identically() {
        let out = tmp();
        let dir = execute([
            "trajclass",
            "generate",
            "--seed",
            "5",
            "--output-dir",
            out.path().to_str().unwrap(),
        ])
        .unwrap();
        let manifest = dir.join("dataset/manifest.json");
        assert!(manifest.exists());
        let first = std::fs::read(&manifest).unwrap();
        let csvs = std::fs::read_dir(dir.join("dataset"))
            .unwrap()
            .filter(|e| {
                e.as_ref().unwrap().path().extension().map(|x| x == "csv").unwrap_or(false)
            })
            .count();
        assert_eq!(csvs, 104);

        // Same invocation without --force refuses to overwrite.
        let err = execute([
            "trajclass",
            "generate",
            "--seed",
            "5",
            "--output-dir",
            out.path().to_str().unwrap(),
        ])
        .unwrap_err();
        assert!(matches!(err, CliError::Exists(_)));
        assert_eq!(err.exit_code(), 2);

        let dir2 = execute([
            "trajclass",
            "generate",
            "--seed",
            "5",
            "--output-dir",
            out.path().to_str().unwrap(),
            "--force",
        ])
        .unwrap();
        assert_eq!(dir, dir2);
        assert_eq!(std::fs::read(dir2.join("dataset/manifest.json")).unwrap(), first);
    }

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("config.json");
        std::fs::write(&path, body).unwrap();
        path
    }

    fn small_generate_config(out: &Path) -> String {
        format!(
            r#"{{
                "dataset": {{"source": "generate", "preset": "uwb-like",
                             "counts": [4, 4, 4, 4], "duration_s": 30.0}},
                "output_dir": {:?}
            }}"#,
            out.display()
        )
    }

    #[test]
    fn featurize_emits_the_documented_header() {
        let out = tmp();
        let cfg = write_config(out.path(), &small_generate_config(out.path()));
        let dir = execute([
            "trajclass",
            "featurize",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "4",
            "--split",
            "3",
            "--placement",
            "raw-noise",
            "--window-length",
            "5",
            "--polyorder",
            "2",
        ])
        .unwrap();
        let csv = std::fs::read_to_string(dir.join("features.csv")).unwrap();
        let header = csv.lines().next().unwrap();
        let mut expected = feature_names().join(",");
        expected.push_str(",label,parent_id");
        assert_eq!(header, expected);
        // 16 trajectories, 3 segments each, plus the header.
        assert_eq!(csv.lines().count(), 49);
        assert!(csv.lines().nth(1).unwrap().ends_with(",straight-000"));
    }

    #[test]
    fn evaluate_is_deterministic_across_processes_worth_of_state() {
        let out = tmp();
        let body = format!(
            r#"{{
                "dataset": {{"source": "generate", "preset": "uwb-like",
                             "counts": [4, 4, 4, 4], "duration_s": 30.0}},
                "families": ["dt+no-noise"],
                "reps": 2,
                "optimizer_runs": 1,
                "sample_k": 1,
                "budget": {{"evals": 2}},
                "output_dir": {:?}
            }}"#,
            out.path().display()
        );
        let cfg = write_config(out.path(), &body);
        let dir1 = execute([
            "trajclass",
            "evaluate",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "3",
        ])
        .unwrap();
        let report1 = std::fs::read(dir1.join("report.json")).unwrap();
        assert!(dir1.join("table.txt").exists());
        let leakage: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir1.join("leakage.json")).unwrap())
                .unwrap();
        assert_eq!(leakage["clean"], serde_json::Value::Bool(true));

        let dir2 = execute([
            "trajclass",
            "evaluate",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "3",
            "--force",
        ])
        .unwrap();
        let report2 = std::fs::read(dir2.join("report.json")).unwrap();
        assert_eq!(report1, report2);

        let parsed: EvaluationReport = serde_json::from_slice(&report1).unwrap();
        assert_eq!(parsed.families.len(), 1);
        assert_eq!(parsed.families[0].family, "dt+no-noise");
        assert_eq!(parsed.families[0].outcomes.len(), 2);
    }

    #[test]
    fn validation_failures_leave_no_output_behind() {
        let out = tmp();
        let cfg = write_config(out.path(), r#"{"repz": 3}"#);
        let code = run([
            "trajclass",
            "evaluate",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "1",
            "--output-dir",
            out.path().join("runs").to_str().unwrap(),
        ]);
        assert_eq!(code, 2);
        assert!(!out.path().join("runs").exists());
    }

    #[test]
    fn missing_manifest_names_the_path_and_exits_2() {
        let out = tmp();
        let err = execute([
            "trajclass",
            "evaluate",
            "--manifest",
            "/nonexistent/manifest.json",
            "--seed",
            "1",
            "--output-dir",
            out.path().to_str().unwrap(),
        ])
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("/nonexistent/manifest.json"));
        assert!(std::fs::read_dir(out.path()).unwrap().next().is_none());
    }

    #[test]
    fn optimize_requires_a_family() {
        let out = tmp();
        let cfg = write_config(out.path(), &small_generate_config(out.path()));
        let err = execute([
            "trajclass",
            "optimize",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "2",
        ])
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("family"));
    }

    #[test]
    fn optimize_writes_history_and_best() {
        let out = tmp();
        let cfg = write_config(out.path(), &small_generate_config(out.path()));
        let dir = execute([
            "trajclass",
            "optimize",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "2",
            "--family",
            "dt+no-noise",
            "--budget-evals",
            "3",
        ])
        .unwrap();
        let history = std::fs::read_to_string(dir.join("history.csv")).unwrap();
        assert_eq!(history.lines().next().unwrap(), "trial,objective,failed,config");
        assert_eq!(history.lines().count(), 4);
        let best: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("best.json")).unwrap())
                .unwrap();
        assert_eq!(best["family"], "dt+no-noise");
        assert!(best["objective"].is_number());
    }

    fn fake_report(path: &Path, family: &str, base: f64) {
        let outcomes: Vec<serde_json::Value> = (0..10)
            .map(|i| {
                let v = base + (i % 5) as f64 * 0.01;
                serde_json::json!({
                    "chosen_run": 0,
                    "chosen_objective": 1.0 - v,
                    "config": null,
                    "score": {
                        "precision": v, "recall": v, "f1": v, "mcc": v, "failed": false
                    },
                })
            })
            .collect();
        let report = serde_json::json!({
            "seed": 1,
            "reps": 10,
            "budget_evals": 5,
            "families": [{
                "family": family,
                "outcomes": outcomes,
                "summaries": [
                    {"metric": "precision", "mean": base, "std": 0.01, "normality": null},
                    {"metric": "recall", "mean": base, "std": 0.01, "normality": null},
                    {"metric": "f1", "mean": base, "std": 0.01, "normality": null},
                    {"metric": "mcc", "mean": base, "std": 0.01, "normality": null}
                ],
                "failures": 0
            }],
            "pairwise_wilcoxon": []
        });
        let mut text = serde_json::to_string_pretty(&report).unwrap();
        text.push('\n');
        std::fs::write(path, text).unwrap();
    }

    #[test]
    fn compare_self_reports_no_significant_difference() {
        let out = tmp();
        let report = out.path().join("report.json");
        fake_report(&report, "rf+raw-noise", 0.8);
        let dir = execute([
            "trajclass",
            "compare",
            report.to_str().unwrap(),
            report.to_str().unwrap(),
            "--seed",
            "1",
            "--output-dir",
            out.path().join("runs").to_str().unwrap(),
        ])
        .unwrap();
        let cmp: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("comparison.json")).unwrap())
                .unwrap();
        assert_eq!(cmp["family_a"], "rf+raw-noise");
        let metrics = cmp["metrics"].as_array().unwrap();
        assert_eq!(metrics.len(), 4);
        for m in metrics {
            assert_eq!(m["significant_at_alpha"], serde_json::Value::Bool(false));
        }
    }

    #[test]
    fn compare_detects_separated_reports_and_missing_families() {
        let out = tmp();
        let ra = out.path().join("a.json");
        let rb = out.path().join("b.json");
        fake_report(&ra, "rf+raw-noise", 0.5);
        fake_report(&rb, "rf+raw-noise", 0.9);
        let dir = execute([
            "trajclass",
            "compare",
            ra.to_str().unwrap(),
            rb.to_str().unwrap(),
            "--seed",
            "1",
            "--output-dir",
            out.path().join("runs").to_str().unwrap(),
        ])
        .unwrap();
        let cmp: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("comparison.json")).unwrap())
                .unwrap();
        for m in cmp["metrics"].as_array().unwrap() {
            assert_eq!(m["direction"], "b");
            assert_eq!(m["significant_at_1pct"], serde_json::Value::Bool(true));
        }

        let err = execute([
            "trajclass",
            "compare",
            ra.to_str().unwrap(),
            rb.to_str().unwrap(),
            "--family-a",
            "svm+no-noise",
            "--seed",
            "1",
            "--output-dir",
            out.path().join("runs2").to_str().unwrap(),
        ])
        .unwrap_err();
        assert!(matches!(err, CliError::Lookup(_)));
        assert_eq!(err.exit_code(), 2);

        let bad = out.path().join("bad.json");
        std::fs::write(&bad, "{not json").unwrap();
        let err = execute([
            "trajclass",
            "compare",
            bad.to_str().unwrap(),
            rb.to_str().unwrap(),
            "--seed",
            "1",
            "--output-dir",
            out.path().join("runs3").to_str().unwrap(),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn calibrate_runs_a_tiny_sweep() {
        let out = tmp();
        let body = format!(
            r#"{{
                "dataset": {{"source": "generate", "preset": "uwb-like",
                             "counts": [4, 4, 4, 4], "duration_s": 30.0}},
                "family": "dt+no-noise",
                "calibration": {{"step_s": 0.05, "runs": 1, "max_time_s": 0.1}},
                "output_dir": {:?}
            }}"#,
            out.path().display()
        );
        let cfg = write_config(out.path(), &body);
        let dir = execute([
            "trajclass",
            "calibrate",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "2",
        ])
        .unwrap();
        let table: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("calibration.json")).unwrap())
                .unwrap();
        assert_eq!(table["rows"].as_array().unwrap().len(), 2);
        assert!(table["selected_budget_s"].is_number());
    }
}
