//! Hyperparameter optimization: the search space language, the pipeline it
//! configures, a regression-forest surrogate, and the sequential
//! model-based optimizer with its random-search baseline.

pub mod pipeline;
pub mod smbo;
pub mod space;
pub mod surrogate;

pub use pipeline::{
    cv_objective, cv_objective_fn, fit_pipeline, pipeline_space, stratified_folds, CvOutcome,
    FittedPipeline, PipelineConfig, PipelineError, CV_FOLDS,
};
pub use smbo::{
    expected_improvement, random_search, smbo_optimize, Budget, OptimizeResult, SmboOptions,
    Trial, FAILED_OBJECTIVE,
};
pub use space::{
    assignment_key, get_float, get_int, get_str, Assignment, Condition, ConfigurationSpace,
    ParamDef, ParamSpec, ParamValue, SpaceError,
};
pub use surrogate::{fit_surrogate, SurrogateForest};
