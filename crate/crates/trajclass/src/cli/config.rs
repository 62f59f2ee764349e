//! The declarative run configuration: one JSON document describing dataset
//! source, family selection, budgets and seeds. Validation is strict; an
//! unknown or ill-typed key is reported with its JSON pointer.

use serde_json::{Map, Value};
use thiserror::Error;

use crate::features::NoisePlacement;
use crate::hpo::Budget;
use crate::protocol::{all_families, PipelineFamily};
use crate::savgol::SavGolParams;
use crate::trajectory::TechPreset;

#[derive(Debug, Error)]
#[error("config {pointer:?}: {message}")]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

fn bad(pointer: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { pointer: pointer.to_string(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Generate { preset: TechPreset, counts: [usize; 4], duration_s: f64 },
    Manifest { path: String },
}

impl DatasetSource {
    pub fn default_generate(preset: TechPreset) -> DatasetSource {
        DatasetSource::Generate { preset, counts: [19, 25, 30, 30], duration_s: 300.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturizeConfig {
    pub split: usize,
    pub placement: NoisePlacement,
    pub savgol: Option<SavGolParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    pub step_s: f64,
    pub runs: usize,
    pub max_time_s: f64,
}

/// Everything a run needs, resolved from the config document; command-line
/// flags override individual fields afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub split_fraction: f64,
    pub families: Vec<PipelineFamily>,
    /// Family for single-family commands (optimize, calibrate).
    pub family: Option<PipelineFamily>,
    pub budget: Budget,
    pub reps: usize,
    pub optimizer_runs: usize,
    pub sample_k: usize,
    pub seed: Option<u64>,
    pub output_dir: String,
    pub jobs: Option<usize>,
    pub featurize: FeaturizeConfig,
    pub calibration: CalibrationConfig,
    pub alpha: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetSource::default_generate(TechPreset::GnssLike),
            split_fraction: 0.67,
            families: all_families(),
            family: None,
            budget: Budget::Evals(60),
            reps: 50,
            optimizer_runs: 15,
            sample_k: 5,
            seed: None,
            output_dir: "runs".to_string(),
            jobs: None,
            featurize: FeaturizeConfig {
                split: 1,
                placement: NoisePlacement::NoNoise,
                savgol: None,
            },
            calibration: CalibrationConfig { step_s: 25.0, runs: 15, max_time_s: 500.0 },
            alpha: 0.05,
        }
    }
}

fn as_object<'v>(value: &'v Value, pointer: &str) -> Result<&'v Map<String, Value>, ConfigError> {
    value.as_object().ok_or_else(|| bad(pointer, "expected an object"))
}

fn reject_unknown(
    obj: &Map<String, Value>,
    pointer: &str,
    allowed: &[&str],
) -> Result<(), ConfigError> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(bad(&format!("{pointer}/{key}"), "unknown key"));
        }
    }
    Ok(())
}

fn get_usize(value: &Value, pointer: &str) -> Result<usize, ConfigError> {
    value
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| bad(pointer, "expected a non-negative integer"))
}

fn get_positive_usize(value: &Value, pointer: &str) -> Result<usize, ConfigError> {
    let v = get_usize(value, pointer)?;
    if v == 0 {
        return Err(bad(pointer, "must be positive"));
    }
    Ok(v)
}

fn get_f64(value: &Value, pointer: &str) -> Result<f64, ConfigError> {
    value.as_f64().ok_or_else(|| bad(pointer, "expected a number"))
}

fn get_positive_f64(value: &Value, pointer: &str) -> Result<f64, ConfigError> {
    let v = get_f64(value, pointer)?;
    if !(v > 0.0) {
        return Err(bad(pointer, "must be positive"));
    }
    Ok(v)
}

fn get_str<'v>(value: &'v Value, pointer: &str) -> Result<&'v str, ConfigError> {
    value.as_str().ok_or_else(|| bad(pointer, "expected a string"))
}

fn parse_family(s: &str, pointer: &str) -> Result<PipelineFamily, ConfigError> {
    s.parse().map_err(|e| bad(pointer, format!("{e}")))
}

fn parse_dataset(value: &Value) -> Result<DatasetSource, ConfigError> {
    let obj = as_object(value, "/dataset")?;
    let source = match obj.get("source") {
        Some(v) => get_str(v, "/dataset/source")?,
        None => return Err(bad("/dataset/source", "missing key")),
    };
    match source {
        "generate" => {
            reject_unknown(obj, "/dataset", &["source", "preset", "counts", "duration_s"])?;
            let preset = match obj.get("preset") {
                Some(v) => get_str(v, "/dataset/preset")?
                    .parse::<TechPreset>()
                    .map_err(|e| bad("/dataset/preset", format!("{e}")))?,
                None => TechPreset::GnssLike,
            };
            let mut counts = [19, 25, 30, 30];
            if let Some(v) = obj.get("counts") {
                let arr = v
                    .as_array()
                    .ok_or_else(|| bad("/dataset/counts", "expected an array of 4 integers"))?;
                if arr.len() != 4 {
                    return Err(bad("/dataset/counts", "expected exactly 4 per-pattern counts"));
                }
                for (i, item) in arr.iter().enumerate() {
                    counts[i] = get_usize(item, &format!("/dataset/counts/{i}"))?;
                }
                if counts.iter().sum::<usize>() == 0 {
                    return Err(bad("/dataset/counts", "at least one count must be positive"));
                }
            }
            let duration_s = match obj.get("duration_s") {
                Some(v) => get_positive_f64(v, "/dataset/duration_s")?,
                None => 300.0,
            };
            Ok(DatasetSource::Generate { preset, counts, duration_s })
        }
        "manifest" => {
            reject_unknown(obj, "/dataset", &["source", "path"])?;
            let path = match obj.get("path") {
                Some(v) => get_str(v, "/dataset/path")?.to_string(),
                None => return Err(bad("/dataset/path", "missing key")),
            };
            Ok(DatasetSource::Manifest { path })
        }
        other => Err(bad("/dataset/source", format!("expected \"generate\" or \"manifest\", got {other:?}"))),
    }
}

fn parse_families(value: &Value) -> Result<Vec<PipelineFamily>, ConfigError> {
    if let Some(s) = value.as_str() {
        if s == "all" {
            return Ok(all_families());
        }
        return Err(bad("/families", "expected \"all\" or an array of family names"));
    }
    let arr = value
        .as_array()
        .ok_or_else(|| bad("/families", "expected \"all\" or an array of family names"))?;
    if arr.is_empty() {
        return Err(bad("/families", "family list must be non-empty"));
    }
    let mut out = Vec::with_capacity(arr.len());
    for (i, item) in arr.iter().enumerate() {
        let pointer = format!("/families/{i}");
        let family = parse_family(get_str(item, &pointer)?, &pointer)?;
        if out.contains(&family) {
            return Err(bad(&pointer, format!("duplicate family {family}")));
        }
        out.push(family);
    }
    Ok(out)
}

fn parse_budget(value: &Value) -> Result<Budget, ConfigError> {
    let obj = as_object(value, "/budget")?;
    reject_unknown(obj, "/budget", &["evals", "wallclock_secs"])?;
    match (obj.get("evals"), obj.get("wallclock_secs")) {
        (Some(v), None) => Ok(Budget::Evals(get_positive_usize(v, "/budget/evals")?)),
        (None, Some(v)) => {
            Ok(Budget::WallclockSecs(get_positive_f64(v, "/budget/wallclock_secs")?))
        }
        (Some(_), Some(_)) => {
            Err(bad("/budget", "give either \"evals\" or \"wallclock_secs\", not both"))
        }
        (None, None) => Err(bad("/budget", "expected an \"evals\" or \"wallclock_secs\" key")),
    }
}

fn parse_featurize(value: &Value) -> Result<FeaturizeConfig, ConfigError> {
    let obj = as_object(value, "/featurize")?;
    reject_unknown(obj, "/featurize", &["split", "placement", "window_length", "polyorder"])?;
    let split = match obj.get("split") {
        Some(v) => get_positive_usize(v, "/featurize/split")?,
        None => 1,
    };
    let placement = match obj.get("placement") {
        Some(v) => get_str(v, "/featurize/placement")?
            .parse::<NoisePlacement>()
            .map_err(|e| bad("/featurize/placement", format!("{e}")))?,
        None => NoisePlacement::NoNoise,
    };
    let savgol = match (obj.get("window_length"), obj.get("polyorder")) {
        (None, None) => None,
        (Some(w), Some(p)) => {
            let params = SavGolParams {
                window_length: get_positive_usize(w, "/featurize/window_length")?,
                polyorder: get_usize(p, "/featurize/polyorder")?,
            };
            params.validate().map_err(|e| bad("/featurize/window_length", format!("{e}")))?;
            Some(params)
        }
        _ => {
            return Err(bad(
                "/featurize",
                "window_length and polyorder must be given together",
            ))
        }
    };
    Ok(FeaturizeConfig { split, placement, savgol })
}

fn parse_calibration(value: &Value) -> Result<CalibrationConfig, ConfigError> {
    let obj = as_object(value, "/calibration")?;
    reject_unknown(obj, "/calibration", &["step_s", "runs", "max_time_s"])?;
    let mut out = CalibrationConfig { step_s: 25.0, runs: 15, max_time_s: 500.0 };
    if let Some(v) = obj.get("step_s") {
        out.step_s = get_positive_f64(v, "/calibration/step_s")?;
    }
    if let Some(v) = obj.get("runs") {
        out.runs = get_positive_usize(v, "/calibration/runs")?;
    }
    if let Some(v) = obj.get("max_time_s") {
        out.max_time_s = get_positive_f64(v, "/calibration/max_time_s")?;
    }
    if out.max_time_s < out.step_s {
        return Err(bad("/calibration/max_time_s", "must be at least one step"));
    }
    Ok(out)
}

impl RunConfig {
    /// Parses and validates a config document against the schema. Returns
    /// the first violation with the JSON pointer of the offending key.
    pub fn from_json(text: &str) -> Result<RunConfig, ConfigError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| bad("", format!("invalid JSON: {e}")))?;
        let obj = as_object(&value, "")?;
        reject_unknown(
            obj,
            "",
            &[
                "dataset",
                "split_fraction",
                "families",
                "family",
                "budget",
                "reps",
                "optimizer_runs",
                "sample_k",
                "seed",
                "output_dir",
                "jobs",
                "featurize",
                "calibration",
                "alpha",
            ],
        )?;
        let mut c = RunConfig::default();
        if let Some(v) = obj.get("dataset") {
            c.dataset = parse_dataset(v)?;
        }
        if let Some(v) = obj.get("split_fraction") {
            c.split_fraction = get_f64(v, "/split_fraction")?;
            if !(c.split_fraction > 0.0 && c.split_fraction < 1.0) {
                return Err(bad("/split_fraction", "must be strictly between 0 and 1"));
            }
        }
        if let Some(v) = obj.get("families") {
            c.families = parse_families(v)?;
        }
        if let Some(v) = obj.get("family") {
            c.family = Some(parse_family(get_str(v, "/family")?, "/family")?);
        }
        if let Some(v) = obj.get("budget") {
            c.budget = parse_budget(v)?;
        }
        if let Some(v) = obj.get("reps") {
            c.reps = get_positive_usize(v, "/reps")?;
        }
        if let Some(v) = obj.get("optimizer_runs") {
            c.optimizer_runs = get_positive_usize(v, "/optimizer_runs")?;
        }
        if let Some(v) = obj.get("sample_k") {
            c.sample_k = get_positive_usize(v, "/sample_k")?;
        }
        if c.sample_k > c.optimizer_runs {
            return Err(bad("/sample_k", "cannot exceed optimizer_runs"));
        }
        if let Some(v) = obj.get("seed") {
            c.seed = Some(v.as_u64().ok_or_else(|| bad("/seed", "expected a non-negative integer"))?);
        }
        if let Some(v) = obj.get("output_dir") {
            c.output_dir = get_str(v, "/output_dir")?.to_string();
        }
        if let Some(v) = obj.get("jobs") {
            c.jobs = Some(get_positive_usize(v, "/jobs")?);
        }
        if let Some(v) = obj.get("featurize") {
            c.featurize = parse_featurize(v)?;
        }
        if let Some(v) = obj.get("calibration") {
            c.calibration = parse_calibration(v)?;
        }
        if let Some(v) = obj.get("alpha") {
            c.alpha = get_f64(v, "/alpha")?;
            if !(c.alpha > 0.0 && c.alpha < 1.0) {
                return Err(bad("/alpha", "must be strictly between 0 and 1"));
            }
        }
        Ok(c)
    }

    /// Canonical JSON of the fields that determine a run's outputs; the run
    /// directory name hashes this, so equal settings collide on purpose.
    pub fn fingerprint(&self, command: &str, seed: u64) -> String {
        let dataset = match &self.dataset {
            DatasetSource::Generate { preset, counts, duration_s } => serde_json::json!({
                "source": "generate",
                "preset": preset.name(),
                "counts": counts,
                "duration_s": duration_s,
            }),
            DatasetSource::Manifest { path } => serde_json::json!({
                "source": "manifest",
                "path": path,
            }),
        };
        let budget = match self.budget {
            Budget::Evals(n) => serde_json::json!({ "evals": n }),
            Budget::WallclockSecs(s) => serde_json::json!({ "wallclock_secs": s }),
        };
        serde_json::json!({
            "command": command,
            "seed": seed,
            "dataset": dataset,
            "split_fraction": self.split_fraction,
            "families": self.families.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
            "family": self.family.map(|f| f.to_string()),
            "budget": budget,
            "reps": self.reps,
            "optimizer_runs": self.optimizer_runs,
            "sample_k": self.sample_k,
            "featurize": {
                "split": self.featurize.split,
                "placement": self.featurize.placement.name(),
                "window_length": self.featurize.savgol.map(|s| s.window_length),
                "polyorder": self.featurize.savgol.map(|s| s.polyorder),
            },
            "calibration": {
                "step_s": self.calibration.step_s,
                "runs": self.calibration.runs,
                "max_time_s": self.calibration.max_time_s,
            },
            "alpha": self.alpha,
        })
        .to_string()
    }
}
