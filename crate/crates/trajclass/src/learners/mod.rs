//! Classifiers trained on instance matrices: a single decision tree, a
//! random forest, and a kernel SVM, behind one `TrainedModel` type that
//! handles prediction and JSON (de)serialization uniformly.

pub mod forest;
pub mod svm;
pub mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

pub use forest::{default_mtry, train_forest, ForestModel, RfParams, RfTrainOptions};
pub use svm::{gamma_scale, kernel_eval, train_svm, KernelKind, SvmModel, SvmParams};
pub use tree::{train_tree, DtParams, SplitCriterion, TreeModel};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("training set is empty")]
    EmptySet,
    #[error("labels: expected {expected} rows, found {found}")]
    LabelLength { expected: usize, found: usize },
    #[error("label {label} out of range for {n_classes} classes")]
    LabelRange { label: u32, n_classes: usize },
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error("optimizer did not converge within {iterations} passes")]
    Convergence { iterations: usize },
    #[error("model expects {expected} features, row has {found}")]
    FeatureCount { expected: usize, found: usize },
    #[error("unsupported model format version {0}")]
    FormatVersion(u32),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Which classifier to train, with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierParams {
    Dt(DtParams),
    Rf(RfParams),
    Svm(SvmParams),
}

impl ClassifierParams {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierParams::Dt(_) => "dt",
            ClassifierParams::Rf(_) => "rf",
            ClassifierParams::Svm(_) => "svm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelKind {
    Dt(TreeModel),
    Rf(ForestModel),
    Svm(SvmModel),
}

/// A fitted classifier plus the label vocabulary it was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub classes: Vec<String>,
    pub n_features: usize,
    pub kind: ModelKind,
}

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    model: TrainedModel,
}

fn validate_training_input(x: &Matrix, y: &[u32], n_classes: usize) -> Result<(), LearnError> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(LearnError::EmptySet);
    }
    if y.len() != x.rows() {
        return Err(LearnError::LabelLength { expected: x.rows(), found: y.len() });
    }
    if n_classes == 0 {
        return Err(LearnError::BadParam("n_classes must be positive".into()));
    }
    for &label in y {
        if label as usize >= n_classes {
            return Err(LearnError::LabelRange { label, n_classes });
        }
    }
    Ok(())
}

/// Trains the classifier chosen by `params` on integer-encoded labels.
/// `classes[i]` names label `i`; `y` must stay within that range.
pub fn train(
    x: &Matrix,
    y: &[u32],
    classes: &[String],
    params: &ClassifierParams,
    seed: u64,
) -> Result<TrainedModel, LearnError> {
    validate_training_input(x, y, classes.len())?;
    let n_classes = classes.len();
    let kind = match params {
        ClassifierParams::Dt(p) => ModelKind::Dt(train_tree(x, y, n_classes, p)),
        ClassifierParams::Rf(p) => {
            if p.n_estimators == 0 {
                return Err(LearnError::BadParam("n_estimators must be positive".into()));
            }
            ModelKind::Rf(train_forest(x, y, n_classes, p, seed, &RfTrainOptions::default()))
        }
        ClassifierParams::Svm(p) => ModelKind::Svm(train_svm(x, y, n_classes, p, seed)?),
    };
    Ok(TrainedModel { classes: classes.to_vec(), n_features: x.cols(), kind })
}

impl TrainedModel {
    pub fn predict_row(&self, row: &[f64]) -> Result<u32, LearnError> {
        if row.len() != self.n_features {
            return Err(LearnError::FeatureCount {
                expected: self.n_features,
                found: row.len(),
            });
        }
        Ok(match &self.kind {
            ModelKind::Dt(m) => m.predict_row(row),
            ModelKind::Rf(m) => m.predict_row(row),
            ModelKind::Svm(m) => m.predict_row(row),
        })
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<u32>, LearnError> {
        (0..x.rows()).map(|i| self.predict_row(x.row(i))).collect()
    }

    pub fn class_name(&self, label: u32) -> &str {
        &self.classes[label as usize]
    }

    pub fn to_json(&self) -> Result<String, LearnError> {
        let file = ModelFile { format_version: FORMAT_VERSION, model: self.clone() };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<TrainedModel, LearnError> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != FORMAT_VERSION {
            return Err(LearnError::FormatVersion(file.format_version));
        }
        Ok(file.model)
    }
}
