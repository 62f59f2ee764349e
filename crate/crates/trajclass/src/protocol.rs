//! The evaluation protocol: stratified trajectory-level train/test splits,
//! the optimize-sample-retrain bootstrap over pipeline families, wallclock
//! budget calibration, a leakage audit hook, and the technology comparison.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureOptions, NoisePlacement};
use crate::hpo::{
    cv_objective_fn, fit_pipeline, pipeline_space, smbo_optimize, Assignment, Budget,
    ConfigurationSpace, ParamValue, PipelineConfig, PipelineError, SmboOptions,
};
use crate::metrics::{score_predictions, MetricsError};
use crate::seed::{derive_seed, rng_from_seed};
use crate::stats::{
    anderson_darling_normality, mann_whitney_u, wilcoxon_signed_rank, StatsError,
};
use crate::trajectory::{PatternLabel, Trajectory};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid argument: {0}")]
    BadArgument(String),
    #[error("trajectory {0:?} has no label")]
    Unlabeled(String),
    #[error("class {class} has {count} trajectories; splitting needs at least 2")]
    ClassTooSmall { class: String, count: usize },
    #[error("unknown pipeline family {0:?} (expected like \"rf+raw-noise\")")]
    BadFamily(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Stratified split at the trajectory level. Per class,
/// `round(fraction * count)` trajectories go to the training side, clamped
/// so neither side is empty; a trajectory's segments therefore can never
/// straddle the split.
pub fn train_test_split(
    trajectories: &[Trajectory],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<Trajectory>, Vec<Trajectory>), ProtocolError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(ProtocolError::BadArgument(format!(
            "split fraction must be inside (0, 1), got {fraction}"
        )));
    }
    if trajectories.is_empty() {
        return Err(ProtocolError::BadArgument("empty dataset".into()));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); PatternLabel::ALL.len()];
    for (i, t) in trajectories.iter().enumerate() {
        let label = t.label.ok_or_else(|| ProtocolError::Unlabeled(t.id.clone()))?;
        let c = PatternLabel::ALL.iter().position(|l| *l == label).unwrap();
        by_class[c].push(i);
    }
    let mut in_train = vec![false; trajectories.len()];
    for (c, members) in by_class.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(ProtocolError::ClassTooSmall {
                class: PatternLabel::ALL[c].name().to_string(),
                count: members.len(),
            });
        }
        let n_train =
            ((fraction * members.len() as f64).round() as usize).clamp(1, members.len() - 1);
        let mut shuffled = members.clone();
        let mut rng = rng_from_seed(derive_seed(seed, &[0x517, c as u64]));
        for i in (1..shuffled.len()).rev() {
            let j = rng.random_range(0..=i);
            shuffled.swap(i, j);
        }
        for &idx in &shuffled[..n_train] {
            in_train[idx] = true;
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, t) in trajectories.iter().enumerate() {
        if in_train[i] {
            train.push(t.clone());
        } else {
            test.push(t.clone());
        }
    }
    Ok((train, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Dt,
    Rf,
    Svm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] =
        [ClassifierKind::Dt, ClassifierKind::Rf, ClassifierKind::Svm];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Dt => "dt",
            ClassifierKind::Rf => "rf",
            ClassifierKind::Svm => "svm",
        }
    }
}

/// One of the nine classifier x noise-placement combinations; the remaining
/// hyperparameters stay free for the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineFamily {
    pub classifier: ClassifierKind,
    pub placement: NoisePlacement,
}

impl fmt::Display for PipelineFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.classifier.name(), self.placement.name())
    }
}

impl FromStr for PipelineFamily {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (ck, pl) = s.split_once('+').ok_or_else(|| ProtocolError::BadFamily(s.into()))?;
        let classifier = ClassifierKind::ALL
            .into_iter()
            .find(|c| c.name() == ck)
            .ok_or_else(|| ProtocolError::BadFamily(s.into()))?;
        let placement: NoisePlacement =
            pl.parse().map_err(|_| ProtocolError::BadFamily(s.into()))?;
        Ok(PipelineFamily { classifier, placement })
    }
}

pub fn all_families() -> Vec<PipelineFamily> {
    let mut out = Vec::with_capacity(9);
    for classifier in ClassifierKind::ALL {
        for placement in NoisePlacement::ALL {
            out.push(PipelineFamily { classifier, placement });
        }
    }
    out
}

/// The full pipeline space with the family's classifier and placement
/// pinned; every sampled or perturbed configuration stays in the family.
pub fn family_space(family: PipelineFamily) -> ConfigurationSpace {
    let mut space = pipeline_space();
    space
        .pin("classifier", ParamValue::Cat(family.classifier.name().to_string()))
        .expect("classifier is a space parameter");
    space
        .pin("placement", ParamValue::Cat(family.placement.name().to_string()))
        .expect("placement is a space parameter");
    space
}

pub const METRICS: [&str; 4] = ["precision", "recall", "f1", "mcc"];

/// Macro precision, macro recall, macro F1 and MCC on one test evaluation.
/// `failed` marks repetitions whose retrain or scoring errored; they carry
/// the worst score (zeros) so result arrays stay rectangular.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreTuple {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
    pub failed: bool,
}

impl ScoreTuple {
    pub fn worst() -> ScoreTuple {
        ScoreTuple { precision: 0.0, recall: 0.0, f1: 0.0, mcc: 0.0, failed: true }
    }

    pub fn metric(&self, index: usize) -> f64 {
        match index {
            0 => self.precision,
            1 => self.recall,
            2 => self.f1,
            3 => self.mcc,
            _ => panic!("metric index {index} out of range"),
        }
    }
}

/// Records which trajectory ids fed training and testing, per context, so a
/// test can prove no parent id ever crossed the split.
#[derive(Debug, Default)]
pub struct LeakageAudit {
    events: Mutex<Vec<LeakageEvent>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageEvent {
    pub context: String,
    pub train_parents: usize,
    pub test_parents: usize,
    pub overlap: Vec<String>,
}

impl LeakageAudit {
    pub fn new() -> LeakageAudit {
        LeakageAudit::default()
    }

    pub fn record(&self, context: &str, train: &BTreeSet<String>, test: &BTreeSet<String>) {
        let overlap: Vec<String> = train.intersection(test).cloned().collect();
        self.events.lock().unwrap().push(LeakageEvent {
            context: context.to_string(),
            train_parents: train.len(),
            test_parents: test.len(),
            overlap,
        });
    }

    pub fn events(&self) -> Vec<LeakageEvent> {
        self.events.lock().unwrap().clone()
    }

    /// True when every recorded event had an empty train/test intersection.
    pub fn clean(&self) -> bool {
        self.events.lock().unwrap().iter().all(|e| e.overlap.is_empty())
    }
}

#[derive(Debug, Clone)]
pub struct BootstrapOptions {
    /// Repetitions of the sample-select-retrain step.
    pub reps: usize,
    /// Independent optimizer runs shared by all repetitions.
    pub optimizer_runs: usize,
    /// Incumbents sampled (without replacement) per repetition.
    pub sample_k: usize,
    pub budget: Budget,
    pub smbo: SmboOptions,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            reps: 50,
            optimizer_runs: 15,
            sample_k: 5,
            budget: Budget::Evals(60),
            smbo: SmboOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    /// Index of the optimizer run whose incumbent was selected.
    pub chosen_run: Option<usize>,
    pub chosen_objective: Option<f64>,
    pub config: Option<PipelineConfig>,
    pub score: ScoreTuple,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyEvaluation {
    pub family: PipelineFamily,
    pub outcomes: Vec<RepOutcome>,
}

impl FamilyEvaluation {
    pub fn metric_values(&self, metric: usize) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.score.metric(metric)).collect()
    }

    pub fn mean_mcc(&self) -> f64 {
        mean(&self.metric_values(3))
    }
}

struct CachedRun {
    config: Option<PipelineConfig>,
    score: ScoreTuple,
    train_parents: BTreeSet<String>,
    test_parents: BTreeSet<String>,
}

fn retrain_and_score(
    assignment: &Assignment,
    train: &[Trajectory],
    test: &[Trajectory],
    feature_opts: &FeatureOptions,
    retrain_seed: u64,
) -> CachedRun {
    let config = match PipelineConfig::from_assignment(assignment) {
        Ok(c) => c,
        Err(_) => {
            return CachedRun {
                config: None,
                score: ScoreTuple::worst(),
                train_parents: BTreeSet::new(),
                test_parents: BTreeSet::new(),
            }
        }
    };
    let mut cached = CachedRun {
        config: Some(config.clone()),
        score: ScoreTuple::worst(),
        train_parents: BTreeSet::new(),
        test_parents: BTreeSet::new(),
    };
    if let (Ok(ti), Ok(si)) =
        (config.extract(train, feature_opts), config.extract(test, feature_opts))
    {
        cached.train_parents = ti.into_iter().map(|i| i.parent_id).collect();
        cached.test_parents = si.into_iter().map(|i| i.parent_id).collect();
    }
    let fitted = match fit_pipeline(&config, train, feature_opts, retrain_seed) {
        Ok(f) => f,
        Err(_) => return cached,
    };
    let scored = fitted.score_instances(test, feature_opts).and_then(|(y_true, y_pred)| {
        score_predictions(&y_true, &y_pred, fitted.classes.len()).map_err(PipelineError::from)
    });
    if let Ok((_, precision, recall, f1, mcc)) = scored {
        cached.score = ScoreTuple { precision, recall, f1, mcc, failed: false };
    }
    cached
}

/// Evaluates one family: `optimizer_runs` independent optimizations on the
/// training set, then `reps` repetitions that each sample `sample_k` of the
/// collected incumbents, keep the lowest objective (earliest run wins ties),
/// and score that configuration's retrained model on the test set.
///
/// The optimizer runs are shared across repetitions; the repetitions only
/// resample them. Retraining uses one fixed derived seed, so a repetition's
/// score depends only on which incumbent it selected.
pub fn bootstrap_family(
    family: PipelineFamily,
    train: &[Trajectory],
    test: &[Trajectory],
    opts: &BootstrapOptions,
    feature_opts: &FeatureOptions,
    master_seed: u64,
    audit: Option<&LeakageAudit>,
) -> Result<FamilyEvaluation, ProtocolError> {
    if opts.reps == 0 || opts.optimizer_runs == 0 || opts.sample_k == 0 {
        return Err(ProtocolError::BadArgument(
            "reps, optimizer_runs and sample_k must be positive".into(),
        ));
    }
    if opts.sample_k > opts.optimizer_runs {
        return Err(ProtocolError::BadArgument(format!(
            "cannot sample {} of {} optimizer runs",
            opts.sample_k, opts.optimizer_runs
        )));
    }
    match opts.budget {
        Budget::Evals(0) => {
            return Err(ProtocolError::BadArgument("budget must allow evaluations".into()))
        }
        Budget::WallclockSecs(s) if !(s > 0.0) => {
            return Err(ProtocolError::BadArgument("wallclock budget must be positive".into()))
        }
        _ => {}
    }
    if train.is_empty() || test.is_empty() {
        return Err(ProtocolError::BadArgument("train and test sets must be non-empty".into()));
    }

    let space = family_space(family);
    let incumbents: Vec<Option<(Assignment, f64)>> = (0..opts.optimizer_runs)
        .into_par_iter()
        .map(|u| {
            let result = smbo_optimize(
                &space,
                cv_objective_fn(train, feature_opts),
                opts.budget,
                derive_seed(master_seed, &[0x0B, u as u64]),
                opts.smbo.clone(),
            );
            result.best().map(|t| (t.assignment.clone(), t.objective))
        })
        .collect();

    let mut choices: Vec<Option<(usize, f64)>> = Vec::with_capacity(opts.reps);
    for rep in 0..opts.reps {
        let mut rng = rng_from_seed(derive_seed(master_seed, &[0x5A, rep as u64]));
        let mut idx: Vec<usize> = (0..opts.optimizer_runs).collect();
        for i in 0..opts.sample_k {
            let j = rng.random_range(i..idx.len());
            idx.swap(i, j);
        }
        let chosen = idx[..opts.sample_k]
            .iter()
            .filter_map(|&u| incumbents[u].as_ref().map(|(_, obj)| (u, *obj)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        choices.push(chosen);
    }

    let needed: BTreeSet<usize> = choices.iter().flatten().map(|(u, _)| *u).collect();
    let retrain_seed = derive_seed(master_seed, &[0xF17]);
    let cached: BTreeMap<usize, CachedRun> = needed
        .into_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|u| {
            let (assignment, _) = incumbents[u].as_ref().unwrap();
            (u, retrain_and_score(assignment, train, test, feature_opts, retrain_seed))
        })
        .collect();

    let mut outcomes = Vec::with_capacity(opts.reps);
    for (rep, choice) in choices.iter().enumerate() {
        let outcome = match choice {
            None => RepOutcome {
                chosen_run: None,
                chosen_objective: None,
                config: None,
                score: ScoreTuple::worst(),
            },
            Some((u, obj)) => {
                let run = &cached[u];
                if let Some(audit) = audit {
                    audit.record(
                        &format!("{family} rep {rep}"),
                        &run.train_parents,
                        &run.test_parents,
                    );
                }
                RepOutcome {
                    chosen_run: Some(*u),
                    chosen_objective: Some(*obj),
                    config: run.config.clone(),
                    score: run.score,
                }
            }
        };
        outcomes.push(outcome);
    }
    Ok(FamilyEvaluation { family, outcomes })
}

/// Something that can run one budgeted optimization and report the
/// resulting test score. The production implementation wraps a pipeline
/// family; tests substitute stubs.
pub trait CalibrationRunner {
    fn run(&mut self, budget_secs: f64, run_index: usize) -> Result<f64, String>;
}

impl<F> CalibrationRunner for F
where
    F: FnMut(f64, usize) -> Result<f64, String>,
{
    fn run(&mut self, budget_secs: f64, run_index: usize) -> Result<f64, String> {
        self(budget_secs, run_index)
    }
}

/// Real calibration runner: optimize over the given space under the
/// wallclock budget, retrain the incumbent, return the test MCC.
pub struct PipelineCalibrationRunner<'a> {
    pub space: ConfigurationSpace,
    pub train: &'a [Trajectory],
    pub test: &'a [Trajectory],
    pub feature_opts: &'a FeatureOptions,
    pub seed: u64,
    pub smbo: SmboOptions,
}

impl CalibrationRunner for PipelineCalibrationRunner<'_> {
    fn run(&mut self, budget_secs: f64, run_index: usize) -> Result<f64, String> {
        let result = smbo_optimize(
            &self.space,
            cv_objective_fn(self.train, self.feature_opts),
            Budget::WallclockSecs(budget_secs),
            derive_seed(self.seed, &[0xCA1, run_index as u64]),
            self.smbo.clone(),
        );
        let best = result.best().ok_or("budget allowed no evaluations")?;
        let config =
            PipelineConfig::from_assignment(&best.assignment).map_err(|e| e.to_string())?;
        let fitted =
            fit_pipeline(&config, self.train, self.feature_opts, derive_seed(self.seed, &[0xCA2]))
                .map_err(|e| e.to_string())?;
        let (y_true, y_pred) =
            fitted.score_instances(self.test, self.feature_opts).map_err(|e| e.to_string())?;
        let (_, _, _, _, mcc) =
            score_predictions(&y_true, &y_pred, fitted.classes.len()).map_err(|e| e.to_string())?;
        Ok(mcc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub budget_s: f64,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub rows: Vec<CalibrationRow>,
    /// Smallest budget whose mean score is within 0.01 of the best mean.
    pub selected_budget_s: f64,
}

/// Sweeps optimizer budgets `step, 2*step, ..., floor(max/step)*step`, with
/// `runs` runs each; failed runs score 0.
pub fn wallclock_calibration(
    runner: &mut dyn CalibrationRunner,
    step_s: f64,
    runs: usize,
    max_time_s: f64,
) -> Result<CalibrationTable, ProtocolError> {
    if !(step_s > 0.0) || runs == 0 {
        return Err(ProtocolError::BadArgument("step and runs must be positive".into()));
    }
    if max_time_s < step_s {
        return Err(ProtocolError::BadArgument(format!(
            "max time {max_time_s} is below one step {step_s}"
        )));
    }
    let buckets = (max_time_s / step_s).floor() as usize;
    let mut rows = Vec::with_capacity(buckets);
    for b in 1..=buckets {
        let budget = step_s * b as f64;
        let mut total = 0.0;
        for u in 0..runs {
            total += runner.run(budget, (b - 1) * runs + u).unwrap_or(0.0);
        }
        rows.push(CalibrationRow { budget_s: budget, mean_score: total / runs as f64 });
    }
    let best = rows.iter().map(|r| r.mean_score).fold(f64::NEG_INFINITY, f64::max);
    let selected_budget_s =
        rows.iter().find(|r| r.mean_score >= best - 0.01).map(|r| r.budget_s).unwrap();
    Ok(CalibrationTable { rows, selected_budget_s })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalitySummary {
    pub statistic: f64,
    pub reject_at_5pct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Set when the pooled scores were constant and no test applies.
    pub degenerate: bool,
    pub normality_a: Option<NormalitySummary>,
    pub normality_b: Option<NormalitySummary>,
    pub u_statistic: Option<f64>,
    pub p_value: Option<f64>,
    /// "a", "b", or "none", by mean score.
    pub direction: String,
    pub significant_at_alpha: bool,
    pub significant_at_1pct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnologyComparison {
    pub alpha: f64,
    pub metrics: Vec<MetricComparison>,
}

fn normality_summary(values: &[f64]) -> Option<NormalitySummary> {
    anderson_darling_normality(values)
        .ok()
        .map(|t| NormalitySummary { statistic: t.statistic, reject_at_5pct: t.reject_at_5pct })
}

/// Per-metric two-sample comparison: normality check on both sides, then a
/// two-sided rank test with direction read from the means.
pub fn compare_technologies(
    a: &[ScoreTuple],
    b: &[ScoreTuple],
    alpha: f64,
) -> Result<TechnologyComparison, ProtocolError> {
    if a.is_empty() || b.is_empty() {
        return Err(ProtocolError::BadArgument("score arrays must be non-empty".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ProtocolError::BadArgument(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let mut metrics = Vec::with_capacity(METRICS.len());
    for (m, name) in METRICS.iter().enumerate() {
        let xa: Vec<f64> = a.iter().map(|s| s.metric(m)).collect();
        let xb: Vec<f64> = b.iter().map(|s| s.metric(m)).collect();
        let mean_a = mean(&xa);
        let mean_b = mean(&xb);
        let direction = if mean_b > mean_a {
            "b"
        } else if mean_a > mean_b {
            "a"
        } else {
            "none"
        };
        let entry = match mann_whitney_u(&xa, &xb) {
            Ok(test) => MetricComparison {
                metric: name.to_string(),
                mean_a,
                mean_b,
                degenerate: false,
                normality_a: normality_summary(&xa),
                normality_b: normality_summary(&xb),
                u_statistic: Some(test.statistic),
                p_value: Some(test.p_value),
                direction: direction.to_string(),
                significant_at_alpha: test.p_value < alpha,
                significant_at_1pct: test.p_value < 0.01,
            },
            Err(StatsError::Degenerate) => MetricComparison {
                metric: name.to_string(),
                mean_a,
                mean_b,
                degenerate: true,
                normality_a: None,
                normality_b: None,
                u_statistic: None,
                p_value: None,
                direction: direction.to_string(),
                significant_at_alpha: false,
                significant_at_1pct: false,
            },
            Err(e) => return Err(e.into()),
        };
        metrics.push(entry);
    }
    Ok(TechnologyComparison { alpha, metrics })
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n-1 denominator); 0 for fewer than 2 values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub normality: Option<NormalitySummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub family: String,
    pub outcomes: Vec<RepOutcome>,
    pub summaries: Vec<MetricSummary>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub family_a: String,
    pub family_b: String,
    pub metric: String,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    /// All paired differences were zero; the signed-rank test is undefined.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub seed: u64,
    pub reps: usize,
    /// Present only for evaluation-count budgets; wallclock runs are not
    /// reproducible byte-for-byte.
    pub budget_evals: Option<usize>,
    pub families: Vec<FamilyReport>,
    pub pairwise_wilcoxon: Vec<PairwiseTest>,
}

/// Assembles the report: per-family score summaries with normality checks,
/// plus pairwise signed-rank tests across families for every metric.
pub fn build_report(
    families: &[FamilyEvaluation],
    seed: u64,
    budget: Budget,
) -> EvaluationReport {
    let reps = families.first().map(|f| f.outcomes.len()).unwrap_or(0);
    let family_reports: Vec<FamilyReport> = families
        .iter()
        .map(|fe| {
            let summaries = METRICS
                .iter()
                .enumerate()
                .map(|(m, name)| {
                    let values = fe.metric_values(m);
                    MetricSummary {
                        metric: name.to_string(),
                        mean: mean(&values),
                        std: sample_std(&values),
                        normality: normality_summary(&values),
                    }
                })
                .collect();
            FamilyReport {
                family: fe.family.to_string(),
                outcomes: fe.outcomes.clone(),
                summaries,
                failures: fe.outcomes.iter().filter(|o| o.score.failed).count(),
            }
        })
        .collect();

    let mut pairwise = Vec::new();
    for i in 0..families.len() {
        for j in i + 1..families.len() {
            for (m, name) in METRICS.iter().enumerate() {
                let xi = families[i].metric_values(m);
                let xj = families[j].metric_values(m);
                let (statistic, p_value, degenerate) = match wilcoxon_signed_rank(&xi, &xj) {
                    Ok(t) => (Some(t.statistic), Some(t.p_value), false),
                    Err(_) => (None, None, true),
                };
                pairwise.push(PairwiseTest {
                    family_a: families[i].family.to_string(),
                    family_b: families[j].family.to_string(),
                    metric: name.to_string(),
                    statistic,
                    p_value,
                    degenerate,
                });
            }
        }
    }

    EvaluationReport {
        seed,
        reps,
        budget_evals: match budget {
            Budget::Evals(n) => Some(n),
            Budget::WallclockSecs(_) => None,
        },
        families: family_reports,
        pairwise_wilcoxon: pairwise,
    }
}

/// Plain-text table of the report: one row per family, `mean±std` per
/// metric, scores scaled to percentages.
pub fn render_report_table(report: &EvaluationReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<24}", "family"));
    for name in METRICS {
        out.push_str(&format!("{:>18}", name));
    }
    out.push('\n');
    for fam in &report.families {
        out.push_str(&format!("{:<24}", fam.family));
        for s in &fam.summaries {
            let cell = format!("{:.2}\u{b1}{:.2}", s.mean * 100.0, s.std * 100.0);
            out.push_str(&format!("{cell:>18}"));
        }
        if fam.failures > 0 {
            out.push_str(&format!("  ({} failed)", fam.failures));
        }
        out.push('\n');
    }
    out
}
