//! The tunable classification pipeline: how a hyperparameter assignment
//! maps onto segmentation, smoothing, featurization and a classifier, and
//! the cross-validated objective the optimizers minimize.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{
    encode_labels, extract_instances, present_classes, to_matrix, FeatureError, FeatureInstance,
    FeatureOptions, MinMaxScaler, NoisePlacement,
};
use crate::hpo::space::{get_float, get_int, get_str, Assignment, ConfigurationSpace};
use crate::learners::{
    self, ClassifierParams, DtParams, KernelKind, LearnError, RfParams, SplitCriterion, SvmParams,
};
use crate::metrics::{mcc_multiclass, ConfusionMatrix, MetricsError};
use crate::savgol::SavGolParams;
use crate::seed::{derive_seed, rng_from_seed};
use crate::trajectory::Trajectory;

pub const CV_FOLDS: usize = 10;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("assignment: {0}")]
    BadAssignment(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("class {class} has {count} instances, needs at least {needed} for {folds}-fold splits")]
    ClassTooSmall { class: String, count: usize, needed: usize, folds: usize },
    #[error("no labeled instances to cross-validate")]
    NoInstances,
}

/// Everything needed to rebuild a pipeline: segmentation level, where the
/// smoothing filter sits (if anywhere), its parameters, and the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub split: usize,
    pub placement: NoisePlacement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub savgol: Option<SavGolParams>,
    pub classifier: ClassifierParams,
}

/// The full search space over pipeline configurations.
pub fn pipeline_space() -> ConfigurationSpace {
    ConfigurationSpace::from_json(include_str!("../../assets/pipeline_space.json"))
        .expect("embedded pipeline space is valid")
}

fn missing(name: &str) -> PipelineError {
    PipelineError::BadAssignment(format!("missing or mistyped parameter {name:?}"))
}

impl PipelineConfig {
    /// Interprets a search-space assignment. Filter parameters sampled as
    /// independent axes are repaired (polyorder clamped below the window)
    /// rather than rejected.
    pub fn from_assignment(a: &Assignment) -> Result<PipelineConfig, PipelineError> {
        let split = get_int(a, "split").ok_or_else(|| missing("split"))? as usize;
        let placement: NoisePlacement = get_str(a, "placement")
            .ok_or_else(|| missing("placement"))?
            .parse()
            .map_err(|_| PipelineError::BadAssignment("unknown placement".into()))?;
        let savgol = if placement == NoisePlacement::NoNoise {
            None
        } else {
            let window_length: usize = get_str(a, "window_length")
                .ok_or_else(|| missing("window_length"))?
                .parse()
                .map_err(|_| PipelineError::BadAssignment("window_length is not a number".into()))?;
            let polyorder = get_int(a, "polyorder").ok_or_else(|| missing("polyorder"))? as usize;
            Some(SavGolParams { window_length, polyorder }.repaired())
        };
        let classifier = match get_str(a, "classifier").ok_or_else(|| missing("classifier"))? {
            kind @ ("dt" | "rf") => {
                let criterion = match get_str(a, "criterion").ok_or_else(|| missing("criterion"))? {
                    "gini" => SplitCriterion::Gini,
                    "entropy" => SplitCriterion::Entropy,
                    other => {
                        return Err(PipelineError::BadAssignment(format!(
                            "unknown criterion {other:?}"
                        )))
                    }
                };
                let tree = DtParams {
                    max_depth: Some(
                        get_int(a, "max_depth").ok_or_else(|| missing("max_depth"))? as usize
                    ),
                    min_samples_split: get_int(a, "min_samples_split")
                        .ok_or_else(|| missing("min_samples_split"))?
                        as usize,
                    min_samples_leaf: get_int(a, "min_samples_leaf")
                        .ok_or_else(|| missing("min_samples_leaf"))?
                        as usize,
                    criterion,
                };
                if kind == "dt" {
                    ClassifierParams::Dt(tree)
                } else {
                    ClassifierParams::Rf(RfParams {
                        n_estimators: get_int(a, "n_estimators")
                            .ok_or_else(|| missing("n_estimators"))?
                            as usize,
                        tree,
                    })
                }
            }
            "svm" => {
                let kernel = match get_str(a, "kernel").ok_or_else(|| missing("kernel"))? {
                    "linear" => KernelKind::Linear,
                    "poly" => KernelKind::Poly,
                    "rbf" => KernelKind::Rbf,
                    "sigmoid" => KernelKind::Sigmoid,
                    other => {
                        return Err(PipelineError::BadAssignment(format!(
                            "unknown kernel {other:?}"
                        )))
                    }
                };
                ClassifierParams::Svm(SvmParams {
                    c: get_float(a, "C").ok_or_else(|| missing("C"))?,
                    kernel,
                })
            }
            other => {
                return Err(PipelineError::BadAssignment(format!(
                    "unknown classifier {other:?}"
                )))
            }
        };
        Ok(PipelineConfig { split, placement, savgol, classifier })
    }

    pub fn extract(
        &self,
        trajectories: &[Trajectory],
        opts: &FeatureOptions,
    ) -> Result<Vec<FeatureInstance>, PipelineError> {
        Ok(extract_instances(trajectories, self.split, self.placement, self.savgol, opts)?)
    }
}

/// Instance indices per fold: classes are shuffled separately and dealt
/// round-robin, so fold class proportions match the whole set within one.
pub fn stratified_folds(
    labels: &[u32],
    n_classes: usize,
    folds: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, PipelineError> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y as usize].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < folds {
            return Err(PipelineError::ClassTooSmall {
                class: c.to_string(),
                count: members.len(),
                needed: folds,
                folds,
            });
        }
    }
    let mut out = vec![Vec::new(); folds];
    for (c, members) in by_class.iter().enumerate() {
        let mut shuffled = members.clone();
        let mut rng = rng_from_seed(derive_seed(seed, &[0xF01d, c as u64]));
        // Partial Fisher-Yates over the whole slice.
        for i in (1..shuffled.len()).rev() {
            let j = rand::Rng::random_range(&mut rng, 0..=i);
            shuffled.swap(i, j);
        }
        for (k, idx) in shuffled.into_iter().enumerate() {
            out[k % folds].push(idx);
        }
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    /// `1 - mean(per-fold MCC)`; 0 is perfect, values above 1 mean the
    /// classifier is anticorrelated with the truth.
    pub objective: f64,
    pub fold_scores: Vec<f64>,
}

/// Cross-validated objective on the training trajectories. Scaling is fit
/// inside each fold on the nine training parts only.
pub fn cv_objective(
    config: &PipelineConfig,
    train: &[Trajectory],
    opts: &FeatureOptions,
    seed: u64,
) -> Result<CvOutcome, PipelineError> {
    let instances = config.extract(train, opts)?;
    if instances.is_empty() {
        return Err(PipelineError::NoInstances);
    }
    let classes = present_classes(&instances)?;
    let class_names: Vec<String> = classes.iter().map(|c| c.name().to_string()).collect();
    let labels = encode_labels(&instances, &classes)?;
    let x = to_matrix(&instances)?;
    let folds = stratified_folds(&labels, classes.len(), CV_FOLDS, derive_seed(seed, &[0xCF]))?;

    let mut fold_scores = Vec::with_capacity(CV_FOLDS);
    for (f, held_out) in folds.iter().enumerate() {
        let mut in_fold = vec![false; x.rows()];
        for &i in held_out {
            in_fold[i] = true;
        }
        let train_idx: Vec<usize> = (0..x.rows()).filter(|&i| !in_fold[i]).collect();
        let x_train = x.select_rows(&train_idx);
        let x_test = x.select_rows(held_out);
        let y_train: Vec<u32> = train_idx.iter().map(|&i| labels[i]).collect();
        let y_test: Vec<u32> = held_out.iter().map(|&i| labels[i]).collect();

        let (scaler, x_train) = MinMaxScaler::fit_transform(&x_train)?;
        let x_test = scaler.transform(&x_test)?;
        let model = learners::train(
            &x_train,
            &y_train,
            &class_names,
            &config.classifier,
            derive_seed(seed, &[0xF17, f as u64]),
        )?;
        let preds = model.predict(&x_test)?;
        let cm = ConfusionMatrix::from_labels(&y_test, &preds, classes.len())?;
        fold_scores.push(mcc_multiclass(&cm));
    }
    let objective = 1.0 - fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
    Ok(CvOutcome { objective, fold_scores })
}

/// Adapter with the optimizer's expected shape: parses the assignment, runs
/// the cross-validation, and turns any error into a failed-evaluation
/// message.
pub fn cv_objective_fn<'a>(
    train: &'a [Trajectory],
    opts: &'a FeatureOptions,
) -> impl FnMut(&Assignment, u64) -> Result<f64, String> + 'a {
    move |assignment, seed| {
        let config = PipelineConfig::from_assignment(assignment).map_err(|e| e.to_string())?;
        cv_objective(&config, train, opts, seed)
            .map(|o| o.objective)
            .map_err(|e| e.to_string())
    }
}

/// Fits the configured pipeline on whole trajectories; returns the scaler
/// and model needed to score unseen trajectories.
pub struct FittedPipeline {
    pub config: PipelineConfig,
    pub scaler: MinMaxScaler,
    pub model: learners::TrainedModel,
    pub classes: Vec<crate::trajectory::PatternLabel>,
}

pub fn fit_pipeline(
    config: &PipelineConfig,
    train: &[Trajectory],
    opts: &FeatureOptions,
    seed: u64,
) -> Result<FittedPipeline, PipelineError> {
    let instances = config.extract(train, opts)?;
    if instances.is_empty() {
        return Err(PipelineError::NoInstances);
    }
    let classes = present_classes(&instances)?;
    let class_names: Vec<String> = classes.iter().map(|c| c.name().to_string()).collect();
    let labels = encode_labels(&instances, &classes)?;
    let x = to_matrix(&instances)?;
    let (scaler, x) = MinMaxScaler::fit_transform(&x)?;
    let model = learners::train(&x, &labels, &class_names, &config.classifier, seed)?;
    Ok(FittedPipeline { config: config.clone(), scaler, model, classes })
}

impl FittedPipeline {
    /// Instance-level predictions paired with true labels for a test set.
    pub fn score_instances(
        &self,
        test: &[Trajectory],
        opts: &FeatureOptions,
    ) -> Result<(Vec<u32>, Vec<u32>), PipelineError> {
        let instances = self.config.extract(test, opts)?;
        if instances.is_empty() {
            return Err(PipelineError::NoInstances);
        }
        let labels = encode_labels(&instances, &self.classes)?;
        let x = to_matrix(&instances)?;
        let x = self.scaler.transform(&x)?;
        let preds = self.model.predict(&x)?;
        Ok((labels, preds))
    }
}
