//! Python bindings for the trajectory-classification core: dataset
//! generation and I/O, smoothing, feature extraction, pipeline training,
//! rank statistics, the evaluation protocol, and the configuration
//! optimizer (with Python callables as objectives).

use std::path::Path;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyModule};

use trajclass::features::{
    extract_instances, feature_names, haversine_m, to_matrix, FeatureOptions, NoisePlacement,
};
use trajclass::hpo::{
    fit_pipeline, smbo_optimize, Assignment, Budget, ConfigurationSpace, ParamValue,
    PipelineConfig, SmboOptions,
};
use trajclass::metrics::score_predictions;
use trajclass::protocol::{
    bootstrap_family, train_test_split, BootstrapOptions, LeakageAudit, PipelineFamily,
};
use trajclass::savgol::{savgol_coeffs, savgol_filter, SavGolParams};
use trajclass::stats::{anderson_darling_normality, mann_whitney_u, wilcoxon_signed_rank, Method};
use trajclass::trajectory::{
    generate_dataset, load_dataset, write_dataset, CoordinateSystem, DatasetSpec, PatternLabel,
    TechPreset, TrajPoint, Trajectory,
};

fn val_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyIOError::new_err(e.to_string())
}

/// One recorded trajectory: an id, an optional pattern label, a coordinate
/// system ("planar" or "geodetic") and (c1, c2, t) sample triples.
#[pyclass(name = "Trajectory", frozen, from_py_object)]
#[derive(Clone)]
struct PyTrajectory {
    inner: Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[new]
    #[pyo3(signature = (id, system, points, label=None))]
    fn new(
        id: &str,
        system: &str,
        points: Vec<(f64, f64, f64)>,
        label: Option<&str>,
    ) -> PyResult<Self> {
        let system = match system {
            "planar" => CoordinateSystem::Planar,
            "geodetic" => CoordinateSystem::Geodetic,
            other => {
                return Err(val_err(format!(
                    "unknown coordinate system {other:?}, expected \"planar\" or \"geodetic\""
                )))
            }
        };
        let label = label.map(|l| l.parse::<PatternLabel>()).transpose().map_err(val_err)?;
        let points =
            points.into_iter().map(|(c1, c2, t)| TrajPoint { c1, c2, t }).collect();
        let inner = Trajectory::new(id, label, system, points).map_err(val_err)?;
        Ok(PyTrajectory { inner })
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn label(&self) -> Option<&'static str> {
        self.inner.label.map(|l| l.name())
    }

    #[getter]
    fn system(&self) -> &'static str {
        match self.inner.system {
            CoordinateSystem::Planar => "planar",
            CoordinateSystem::Geodetic => "geodetic",
        }
    }

    fn points(&self) -> Vec<(f64, f64, f64)> {
        self.inner.points.iter().map(|p| (p.c1, p.c2, p.t)).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.points.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory(id={:?}, label={:?}, system={:?}, points={})",
            self.inner.id,
            self.inner.label.map(|l| l.name()),
            self.system(),
            self.inner.points.len()
        )
    }
}

fn unwrap_trajectories(trajectories: Vec<PyTrajectory>) -> Vec<Trajectory> {
    trajectories.into_iter().map(|t| t.inner).collect()
}

/// Generates a labeled synthetic corpus for a technology preset
/// ("gnss-like" or "uwb-like").
#[pyfunction]
#[pyo3(signature = (preset, seed, counts=None, duration_s=None))]
fn generate(
    preset: &str,
    seed: u64,
    counts: Option<[usize; 4]>,
    duration_s: Option<f64>,
) -> PyResult<Vec<PyTrajectory>> {
    let preset: TechPreset = preset.parse().map_err(val_err)?;
    let mut spec = DatasetSpec::new(preset);
    if let Some(c) = counts {
        spec.counts = c;
    }
    if let Some(d) = duration_s {
        spec.duration_s = d;
    }
    let data = generate_dataset(&spec, seed).map_err(val_err)?;
    Ok(data.into_iter().map(|inner| PyTrajectory { inner }).collect())
}

/// Writes one CSV per trajectory plus a manifest; returns the manifest path.
#[pyfunction]
#[pyo3(signature = (trajectories, directory, seed=0, preset=None))]
fn save_dataset(
    trajectories: Vec<PyTrajectory>,
    directory: &str,
    seed: u64,
    preset: Option<String>,
) -> PyResult<String> {
    let data = unwrap_trajectories(trajectories);
    let manifest = write_dataset(Path::new(directory), &data, seed, preset).map_err(io_err)?;
    Ok(manifest.display().to_string())
}

/// Loads a dataset from its manifest; returns the trajectories.
#[pyfunction]
fn read_dataset(manifest_path: &str) -> PyResult<Vec<PyTrajectory>> {
    let (_, data) = load_dataset(Path::new(manifest_path)).map_err(io_err)?;
    Ok(data.into_iter().map(|inner| PyTrajectory { inner }).collect())
}

/// Splits per class so both sides keep every pattern, preserving order.
#[pyfunction]
fn split_train_test(
    trajectories: Vec<PyTrajectory>,
    fraction: f64,
    seed: u64,
) -> PyResult<(Vec<PyTrajectory>, Vec<PyTrajectory>)> {
    let data = unwrap_trajectories(trajectories);
    let (train, test) = train_test_split(&data, fraction, seed).map_err(val_err)?;
    let wrap = |v: Vec<Trajectory>| v.into_iter().map(|inner| PyTrajectory { inner }).collect();
    Ok((wrap(train), wrap(test)))
}

/// Great-circle distance in meters between two geodetic points in degrees.
#[pyfunction]
fn haversine(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    haversine_m(lat1, lon1, lat2, lon2)
}

/// Least-squares polynomial smoothing of a series. The window shrinks to the
/// largest odd length that fits a short series.
#[pyfunction]
fn smooth(values: Vec<f64>, window_length: usize, polyorder: usize) -> PyResult<Vec<f64>> {
    savgol_filter(&values, window_length, polyorder).map_err(val_err)
}

/// Convolution weights of the smoothing filter for one evaluation offset.
#[pyfunction]
#[pyo3(signature = (window_length, polyorder, offset=0))]
fn smoothing_weights(window_length: usize, polyorder: usize, offset: i64) -> PyResult<Vec<f64>> {
    savgol_coeffs(window_length, polyorder, offset).map_err(val_err)
}

/// The 30 instance-vector column names, in order.
#[pyfunction]
fn instance_feature_names() -> Vec<String> {
    feature_names()
}

fn parse_filter(
    placement: NoisePlacement,
    window_length: Option<usize>,
    polyorder: Option<usize>,
) -> PyResult<Option<SavGolParams>> {
    match (window_length, polyorder) {
        (Some(w), Some(p)) => {
            let params = SavGolParams { window_length: w, polyorder: p };
            params.validate().map_err(val_err)?;
            Ok(Some(params))
        }
        (None, None) => {
            if placement == NoisePlacement::NoNoise {
                Ok(None)
            } else {
                Err(val_err(format!(
                    "placement {placement} needs window_length and polyorder"
                )))
            }
        }
        _ => Err(val_err("window_length and polyorder must be given together")),
    }
}

/// Segments trajectories and summarizes their motion streams into
/// fixed-length instance vectors.
#[pyfunction]
#[pyo3(signature = (trajectories, split, placement="no-noise", window_length=None, polyorder=None))]
fn extract_features<'py>(
    py: Python<'py>,
    trajectories: Vec<PyTrajectory>,
    split: usize,
    placement: &str,
    window_length: Option<usize>,
    polyorder: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let placement: NoisePlacement = placement.parse().map_err(val_err)?;
    let filter = parse_filter(placement, window_length, polyorder)?;
    let data = unwrap_trajectories(trajectories);
    let instances = extract_instances(&data, split, placement, filter, &FeatureOptions::default())
        .map_err(val_err)?;
    let values: Vec<Vec<f64>> = instances.iter().map(|i| i.values.clone()).collect();
    let labels: Vec<Option<&'static str>> =
        instances.iter().map(|i| i.label.map(|l| l.name())).collect();
    let parents: Vec<String> = instances.iter().map(|i| i.parent_id.clone()).collect();
    let segments: Vec<usize> = instances.iter().map(|i| i.segment_index).collect();
    let out = PyDict::new(py);
    out.set_item("names", feature_names())?;
    out.set_item("values", values)?;
    out.set_item("labels", labels)?;
    out.set_item("parent_ids", parents)?;
    out.set_item("segment_indices", segments)?;
    Ok(out)
}

/// A fitted classification pipeline: scaler plus trained model, built from a
/// JSON configuration (see `pipeline_space_json` for the search space).
#[pyclass(name = "Pipeline", frozen)]
struct PyPipeline {
    inner: trajclass::hpo::FittedPipeline,
}

#[pymethods]
impl PyPipeline {
    /// Trains on labeled trajectories. `config` is the JSON form of a
    /// pipeline configuration, e.g.
    /// `{"split": 3, "placement": "raw-noise",
    ///   "savgol": {"window_length": 21, "polyorder": 2},
    ///   "classifier": {"kind": "rf", "n_estimators": 100, "max_depth": 30,
    ///   "min_samples_split": 2, "min_samples_leaf": 1, "criterion": "gini"}}`.
    #[staticmethod]
    #[pyo3(signature = (config, trajectories, seed=0))]
    fn fit(config: &str, trajectories: Vec<PyTrajectory>, seed: u64) -> PyResult<Self> {
        let config: PipelineConfig = serde_json::from_str(config).map_err(val_err)?;
        let data = unwrap_trajectories(trajectories);
        let inner =
            fit_pipeline(&config, &data, &FeatureOptions::default(), seed).map_err(val_err)?;
        Ok(PyPipeline { inner })
    }

    /// The configuration this pipeline was trained with, as JSON.
    #[getter]
    fn config(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.config).map_err(val_err)
    }

    /// Class names the model can emit, in label order.
    #[getter]
    fn classes(&self) -> Vec<&'static str> {
        self.inner.classes.iter().map(|c| c.name()).collect()
    }

    /// Per-segment predictions: (parent_id, segment_index, predicted label).
    fn predict(&self, trajectories: Vec<PyTrajectory>) -> PyResult<Vec<(String, usize, String)>> {
        let data = unwrap_trajectories(trajectories);
        let instances = self
            .inner
            .config
            .extract(&data, &FeatureOptions::default())
            .map_err(val_err)?;
        let x = to_matrix(&instances).map_err(val_err)?;
        let x = self.inner.scaler.transform(&x).map_err(val_err)?;
        let preds = self.inner.model.predict(&x).map_err(val_err)?;
        Ok(instances
            .iter()
            .zip(&preds)
            .map(|(inst, &p)| {
                (inst.parent_id.clone(), inst.segment_index, self.inner.model.class_name(p).to_string())
            })
            .collect())
    }

    /// Scores labeled trajectories; returns the four macro metrics and the
    /// confusion matrix.
    fn score<'py>(
        &self,
        py: Python<'py>,
        trajectories: Vec<PyTrajectory>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let data = unwrap_trajectories(trajectories);
        let (y_true, y_pred) =
            self.inner.score_instances(&data, &FeatureOptions::default()).map_err(val_err)?;
        let (cm, precision, recall, f1, mcc) =
            score_predictions(&y_true, &y_pred, self.inner.classes.len()).map_err(val_err)?;
        let out = PyDict::new(py);
        out.set_item("precision", precision)?;
        out.set_item("recall", recall)?;
        out.set_item("f1", f1)?;
        out.set_item("mcc", mcc)?;
        out.set_item("confusion", cm.rows())?;
        out.set_item("classes", self.classes())?;
        Ok(out)
    }
}

fn stat_dict<'py>(
    py: Python<'py>,
    statistic: f64,
    p_value: f64,
    method: Method,
    n: (usize, usize),
) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("statistic", statistic)?;
    out.set_item("p_value", p_value)?;
    out.set_item(
        "method",
        match method {
            Method::Exact => "exact",
            Method::NormalApprox => "normal-approx",
        },
    )?;
    out.set_item("n", n)?;
    Ok(out)
}

/// Two-sided signed-rank test for paired samples.
#[pyfunction]
fn wilcoxon<'py>(py: Python<'py>, a: Vec<f64>, b: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let t = wilcoxon_signed_rank(&a, &b).map_err(val_err)?;
    stat_dict(py, t.statistic, t.p_value, t.method, t.n)
}

/// Two-sided rank-sum test for independent samples.
#[pyfunction]
fn mann_whitney<'py>(py: Python<'py>, a: Vec<f64>, b: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let t = mann_whitney_u(&a, &b).map_err(val_err)?;
    stat_dict(py, t.statistic, t.p_value, t.method, t.n)
}

/// Anderson-Darling composite normality check.
#[pyfunction]
fn normality<'py>(py: Python<'py>, x: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let t = anderson_darling_normality(&x).map_err(val_err)?;
    let out = PyDict::new(py);
    out.set_item("statistic", t.statistic)?;
    out.set_item("n", t.n)?;
    out.set_item("reject_at_5pct", t.reject_at_5pct)?;
    out.set_item("p_lower", t.p_lower)?;
    out.set_item("p_upper", t.p_upper)?;
    Ok(out)
}

/// The built-in pipeline search space, as JSON.
#[pyfunction]
fn pipeline_space_json() -> &'static str {
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../trajclass/assets/pipeline_space.json"))
}

fn assignment_to_dict<'py>(py: Python<'py>, a: &Assignment) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    for (name, value) in a {
        match value {
            ParamValue::Int(v) => dict.set_item(name, *v)?,
            ParamValue::Float(v) => dict.set_item(name, *v)?,
            ParamValue::Cat(v) => dict.set_item(name, v)?,
        }
    }
    Ok(dict)
}

/// Sequential model-based minimization over a JSON-defined space. The
/// objective is a Python callable taking a parameter dict and returning a
/// float; exceptions abort the search and propagate.
#[pyfunction]
#[pyo3(signature = (space, objective, budget_evals, seed))]
fn minimize<'py>(
    py: Python<'py>,
    space: &str,
    objective: Bound<'py, PyAny>,
    budget_evals: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let space = ConfigurationSpace::from_json(space).map_err(val_err)?;
    let mut raised: Option<PyErr> = None;
    let result = smbo_optimize(
        &space,
        |assignment, _| {
            if raised.is_some() {
                return Err("python objective already raised".into());
            }
            let params = match assignment_to_dict(py, assignment) {
                Ok(d) => d,
                Err(e) => {
                    raised = Some(e);
                    return Err("parameter conversion failed".into());
                }
            };
            match objective.call1((params,)).and_then(|v| v.extract::<f64>()) {
                Ok(v) => Ok(v),
                Err(e) => {
                    raised = Some(e);
                    Err("python objective raised".into())
                }
            }
        },
        Budget::Evals(budget_evals),
        seed,
        SmboOptions::default(),
    );
    if let Some(e) = raised {
        return Err(e);
    }
    let best = result.best().ok_or_else(|| val_err("optimizer produced no trials"))?;
    let out = PyDict::new(py);
    out.set_item("best", assignment_to_dict(py, &best.assignment)?)?;
    out.set_item("objective", best.objective)?;
    out.set_item("trials", result.trials.len())?;
    Ok(out)
}

/// Full protocol evaluation of one pipeline family ("rf+raw-noise" style):
/// shared optimizer runs, then repetitions that subsample them, retrain and
/// score on the held-out set. Returns per-repetition scores plus the
/// train/test leakage verdict.
#[pyfunction]
#[pyo3(signature = (family, train, test, seed, reps=50, optimizer_runs=15, sample_k=5, budget_evals=60))]
#[allow(clippy::too_many_arguments)]
fn evaluate_family<'py>(
    py: Python<'py>,
    family: &str,
    train: Vec<PyTrajectory>,
    test: Vec<PyTrajectory>,
    seed: u64,
    reps: usize,
    optimizer_runs: usize,
    sample_k: usize,
    budget_evals: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let family: PipelineFamily = family.parse().map_err(val_err)?;
    let train = unwrap_trajectories(train);
    let test = unwrap_trajectories(test);
    let opts = BootstrapOptions {
        reps,
        optimizer_runs,
        sample_k,
        budget: Budget::Evals(budget_evals),
        smbo: SmboOptions::default(),
    };
    let audit = LeakageAudit::new();
    let eval = bootstrap_family(
        family,
        &train,
        &test,
        &opts,
        &FeatureOptions::default(),
        seed,
        Some(&audit),
    )
    .map_err(val_err)?;
    let scores = eval
        .outcomes
        .iter()
        .map(|o| {
            let row = PyDict::new(py);
            row.set_item("precision", o.score.precision)?;
            row.set_item("recall", o.score.recall)?;
            row.set_item("f1", o.score.f1)?;
            row.set_item("mcc", o.score.mcc)?;
            row.set_item("failed", o.score.failed)?;
            row.set_item("chosen_run", o.chosen_run)?;
            row.set_item(
                "config",
                o.config
                    .as_ref()
                    .map(|c| serde_json::to_string(c))
                    .transpose()
                    .map_err(val_err)?,
            )?;
            Ok(row)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let out = PyDict::new(py);
    out.set_item("family", family.to_string())?;
    out.set_item("scores", scores)?;
    out.set_item("mean_mcc", eval.mean_mcc())?;
    out.set_item("leakage_clean", audit.clean())?;
    Ok(out)
}

#[pymodule]
fn trajclass_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyPipeline>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(save_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(read_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(split_train_test, m)?)?;
    m.add_function(wrap_pyfunction!(haversine, m)?)?;
    m.add_function(wrap_pyfunction!(smooth, m)?)?;
    m.add_function(wrap_pyfunction!(smoothing_weights, m)?)?;
    m.add_function(wrap_pyfunction!(instance_feature_names, m)?)?;
    m.add_function(wrap_pyfunction!(extract_features, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon, m)?)?;
    m.add_function(wrap_pyfunction!(mann_whitney, m)?)?;
    m.add_function(wrap_pyfunction!(normality, m)?)?;
    m.add_function(wrap_pyfunction!(pipeline_space_json, m)?)?;
    m.add_function(wrap_pyfunction!(minimize, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_family, m)?)?;
    Ok(())
}
