//! Typed hyperparameter search spaces.
//!
//! A space is an ordered list of parameter definitions. A parameter may
//! carry a condition naming an earlier parameter and the values that switch
//! it on; inactive parameters are absent from assignments. The space knows
//! how to sample, validate, perturb and numerically encode assignments.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("duplicate parameter {0:?}")]
    DuplicateParam(String),
    #[error("parameter {child:?} references parent {parent:?} which is not declared before it")]
    BadParent { child: String, parent: String },
    #[error("parameter {0:?} has an empty or duplicated choice list")]
    BadChoices(String),
    #[error("parameter {0:?} has invalid bounds")]
    BadBounds(String),
    #[error("condition on {0:?} lists no activating values")]
    EmptyCondition(String),
    #[error("unknown parameter {0:?}")]
    UnknownParam(String),
    #[error("active parameter {0:?} is missing from the assignment")]
    MissingParam(String),
    #[error("parameter {0:?} is inactive but present in the assignment")]
    InactiveParam(String),
    #[error("parameter {name:?} expects a {expected} value")]
    WrongType { name: String, expected: &'static str },
    #[error("parameter {name:?} value {value} is out of range")]
    OutOfRange { name: String, value: String },
    #[error("parameter {name:?} is pinned to a different value")]
    PinViolation { name: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Cat(String),
}

impl ParamValue {
    /// String form used when matching activation conditions.
    pub fn as_condition_str(&self) -> String {
        match self {
            ParamValue::Int(v) => v.to_string(),
            ParamValue::Float(v) => format!("{v}"),
            ParamValue::Cat(v) => v.clone(),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_condition_str())
    }
}

/// Parameter values keyed by name; inactive parameters are absent.
pub type Assignment = BTreeMap<String, ParamValue>;

pub fn get_int(a: &Assignment, name: &str) -> Option<i64> {
    match a.get(name) {
        Some(ParamValue::Int(v)) => Some(*v),
        _ => None,
    }
}

pub fn get_float(a: &Assignment, name: &str) -> Option<f64> {
    match a.get(name) {
        Some(ParamValue::Float(v)) => Some(*v),
        Some(ParamValue::Int(v)) => Some(*v as f64),
        _ => None,
    }
}

pub fn get_str<'a>(a: &'a Assignment, name: &str) -> Option<&'a str> {
    match a.get(name) {
        Some(ParamValue::Cat(v)) => Some(v.as_str()),
        _ => None,
    }
}

/// Canonical text form of an assignment, used for duplicate detection.
pub fn assignment_key(a: &Assignment) -> String {
    serde_json::to_string(a).expect("assignments are always serializable")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamSpec {
    /// Inclusive integer range.
    UniformInt { low: i64, high: i64 },
    /// Inclusive float range.
    UniformFloat { low: f64, high: f64 },
    Categorical { choices: Vec<String> },
}

/// Activates the owning parameter when the parent's value (in string form)
/// is one of `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub parent: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDef {
    pub name: String,
    #[serde(flatten)]
    pub spec: ParamSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigurationSpace {
    params: Vec<ParamDef>,
    index: BTreeMap<String, usize>,
    pins: Assignment,
}

#[derive(Serialize, Deserialize)]
struct SpaceFile {
    params: Vec<ParamDef>,
}

impl ConfigurationSpace {
    /// Builds a space, checking that names are unique, bounds are sane, and
    /// every condition references a parameter declared earlier (which also
    /// rules out cycles).
    pub fn new(params: Vec<ParamDef>) -> Result<Self, SpaceError> {
        let mut index = BTreeMap::new();
        for (i, p) in params.iter().enumerate() {
            if index.insert(p.name.clone(), i).is_some() {
                return Err(SpaceError::DuplicateParam(p.name.clone()));
            }
            match &p.spec {
                ParamSpec::UniformInt { low, high } => {
                    if low > high {
                        return Err(SpaceError::BadBounds(p.name.clone()));
                    }
                }
                ParamSpec::UniformFloat { low, high } => {
                    if !(low.is_finite() && high.is_finite() && low <= high) {
                        return Err(SpaceError::BadBounds(p.name.clone()));
                    }
                }
                ParamSpec::Categorical { choices } => {
                    if choices.is_empty() {
                        return Err(SpaceError::BadChoices(p.name.clone()));
                    }
                    let mut seen = choices.clone();
                    seen.sort();
                    seen.dedup();
                    if seen.len() != choices.len() {
                        return Err(SpaceError::BadChoices(p.name.clone()));
                    }
                }
            }
            if let Some(cond) = &p.condition {
                match index.get(&cond.parent) {
                    Some(&pi) if pi < i => {}
                    _ => {
                        return Err(SpaceError::BadParent {
                            child: p.name.clone(),
                            parent: cond.parent.clone(),
                        })
                    }
                }
                if cond.values.is_empty() {
                    return Err(SpaceError::EmptyCondition(p.name.clone()));
                }
            }
        }
        Ok(ConfigurationSpace { params, index, pins: Assignment::new() })
    }

    pub fn from_json(text: &str) -> Result<Self, SpaceError> {
        let file: SpaceFile = serde_json::from_str(text)?;
        ConfigurationSpace::new(file.params)
    }

    pub fn defs(&self) -> &[ParamDef] {
        &self.params
    }

    pub fn pins(&self) -> &Assignment {
        &self.pins
    }

    /// Fixes a parameter to one value: sampling and perturbation will always
    /// emit it (when active), and validation will insist on it.
    pub fn pin(&mut self, name: &str, value: ParamValue) -> Result<(), SpaceError> {
        let &i = self
            .index
            .get(name)
            .ok_or_else(|| SpaceError::UnknownParam(name.to_string()))?;
        check_value(&self.params[i], &value)?;
        self.pins.insert(name.to_string(), value);
        Ok(())
    }

    /// Activity of each parameter (by declaration index) given an
    /// assignment. A conditional parameter is active only if its parent is
    /// active and carries one of the activating values.
    fn activity(&self, a: &Assignment) -> Vec<bool> {
        let mut active = vec![false; self.params.len()];
        for (i, p) in self.params.iter().enumerate() {
            active[i] = match &p.condition {
                None => true,
                Some(cond) => {
                    let pi = self.index[&cond.parent];
                    active[pi]
                        && a.get(&cond.parent)
                            .is_some_and(|v| cond.values.contains(&v.as_condition_str()))
                }
            };
        }
        active
    }

    pub fn is_active(&self, a: &Assignment, name: &str) -> Result<bool, SpaceError> {
        let &i = self
            .index
            .get(name)
            .ok_or_else(|| SpaceError::UnknownParam(name.to_string()))?;
        Ok(self.activity(a)[i])
    }

    /// Rebuilds `a` in declaration order: active parameters keep their value
    /// (pins win, missing ones are drawn fresh), inactive ones are dropped.
    fn complete(&self, a: &mut Assignment, rng: &mut ChaCha8Rng) {
        let mut out = Assignment::new();
        for p in &self.params {
            let active = match &p.condition {
                None => true,
                Some(cond) => out
                    .get(&cond.parent)
                    .is_some_and(|v| cond.values.contains(&v.as_condition_str())),
            };
            if !active {
                continue;
            }
            let value = if let Some(v) = self.pins.get(&p.name) {
                v.clone()
            } else if let Some(v) = a.get(&p.name) {
                v.clone()
            } else {
                draw(&p.spec, rng)
            };
            out.insert(p.name.clone(), value);
        }
        *a = out;
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Assignment {
        let mut a = Assignment::new();
        self.complete(&mut a, rng);
        a
    }

    /// Mutates one active, unpinned parameter and repairs activation. When
    /// nothing is mutable the assignment comes back unchanged.
    pub fn perturb(&self, base: &Assignment, rng: &mut ChaCha8Rng) -> Assignment {
        let activity = self.activity(base);
        let candidates: Vec<usize> = (0..self.params.len())
            .filter(|&i| {
                let p = &self.params[i];
                activity[i]
                    && !self.pins.contains_key(&p.name)
                    && match &p.spec {
                        ParamSpec::UniformInt { low, high } => low < high,
                        ParamSpec::UniformFloat { low, high } => low < high,
                        ParamSpec::Categorical { choices } => choices.len() > 1,
                    }
            })
            .collect();
        let mut next = base.clone();
        if candidates.is_empty() {
            return next;
        }
        let pick = candidates[rng.random_range(0..candidates.len())];
        let p = &self.params[pick];
        let current = base.get(&p.name).cloned();
        let mutated = match (&p.spec, current) {
            (ParamSpec::UniformInt { low, high }, Some(ParamValue::Int(v))) => {
                let step = ((high - low) / 10).max(1);
                loop {
                    let cand = (v + rng.random_range(-step..=step)).clamp(*low, *high);
                    if cand != v {
                        break ParamValue::Int(cand);
                    }
                }
            }
            (ParamSpec::UniformFloat { low, high }, Some(ParamValue::Float(v))) => {
                let span = high - low;
                loop {
                    let cand = (v + (rng.random::<f64>() - 0.5) * span * 0.4).clamp(*low, *high);
                    if cand != v {
                        break ParamValue::Float(cand);
                    }
                }
            }
            (ParamSpec::Categorical { choices }, Some(ParamValue::Cat(v))) => loop {
                let cand = &choices[rng.random_range(0..choices.len())];
                if *cand != v {
                    break ParamValue::Cat(cand.clone());
                }
            },
            // Value missing or of unexpected shape: draw fresh.
            (spec, _) => draw(spec, rng),
        };
        next.insert(p.name.clone(), mutated);
        self.complete(&mut next, rng);
        next
    }

    /// Checks that the assignment contains exactly the active parameters,
    /// each within range, and that pinned values are honored.
    pub fn validate(&self, a: &Assignment) -> Result<(), SpaceError> {
        for name in a.keys() {
            if !self.index.contains_key(name) {
                return Err(SpaceError::UnknownParam(name.clone()));
            }
        }
        let activity = self.activity(a);
        for (i, p) in self.params.iter().enumerate() {
            match (activity[i], a.get(&p.name)) {
                (true, None) => return Err(SpaceError::MissingParam(p.name.clone())),
                (true, Some(v)) => {
                    check_value(p, v)?;
                    if let Some(pin) = self.pins.get(&p.name) {
                        if pin != v {
                            return Err(SpaceError::PinViolation { name: p.name.clone() });
                        }
                    }
                }
                (false, Some(_)) => return Err(SpaceError::InactiveParam(p.name.clone())),
                (false, None) => {}
            }
        }
        Ok(())
    }

    /// Width of the numeric encoding produced by [`encode`](Self::encode).
    pub fn encode_width(&self) -> usize {
        self.params
            .iter()
            .map(|p| match &p.spec {
                ParamSpec::UniformInt { .. } | ParamSpec::UniformFloat { .. } => 2,
                ParamSpec::Categorical { choices } => choices.len() + 1,
            })
            .sum()
    }

    /// Flattens an assignment to a fixed-width numeric vector for surrogate
    /// models. Numeric parameters contribute a min-max scaled value plus an
    /// activity flag (0.5 and 0 when inactive); categoricals contribute a
    /// one-hot block plus the flag.
    pub fn encode(&self, a: &Assignment) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.encode_width());
        for p in &self.params {
            let v = a.get(&p.name);
            match &p.spec {
                ParamSpec::UniformInt { low, high } => {
                    let scaled = match v {
                        Some(ParamValue::Int(x)) if high > low => {
                            (x - low) as f64 / (high - low) as f64
                        }
                        Some(ParamValue::Int(_)) => 0.5,
                        _ => 0.5,
                    };
                    out.push(scaled);
                    out.push(if v.is_some() { 1.0 } else { 0.0 });
                }
                ParamSpec::UniformFloat { low, high } => {
                    let scaled = match v {
                        Some(ParamValue::Float(x)) if high > low => (x - low) / (high - low),
                        Some(ParamValue::Int(x)) if high > low => (*x as f64 - low) / (high - low),
                        Some(_) => 0.5,
                        None => 0.5,
                    };
                    out.push(scaled);
                    out.push(if v.is_some() { 1.0 } else { 0.0 });
                }
                ParamSpec::Categorical { choices } => {
                    let hit = match v {
                        Some(ParamValue::Cat(s)) => choices.iter().position(|c| c == s),
                        _ => None,
                    };
                    for (k, _) in choices.iter().enumerate() {
                        out.push(if hit == Some(k) { 1.0 } else { 0.0 });
                    }
                    out.push(if v.is_some() { 1.0 } else { 0.0 });
                }
            }
        }
        out
    }
}

fn draw(spec: &ParamSpec, rng: &mut ChaCha8Rng) -> ParamValue {
    match spec {
        ParamSpec::UniformInt { low, high } => ParamValue::Int(rng.random_range(*low..=*high)),
        ParamSpec::UniformFloat { low, high } => {
            if low == high {
                ParamValue::Float(*low)
            } else {
                ParamValue::Float(rng.random_range(*low..=*high))
            }
        }
        ParamSpec::Categorical { choices } => {
            ParamValue::Cat(choices[rng.random_range(0..choices.len())].clone())
        }
    }
}

fn check_value(p: &ParamDef, v: &ParamValue) -> Result<(), SpaceError> {
    match (&p.spec, v) {
        (ParamSpec::UniformInt { low, high }, ParamValue::Int(x)) => {
            if x < low || x > high {
                return Err(SpaceError::OutOfRange { name: p.name.clone(), value: x.to_string() });
            }
        }
        (ParamSpec::UniformInt { .. }, _) => {
            return Err(SpaceError::WrongType { name: p.name.clone(), expected: "integer" })
        }
        (ParamSpec::UniformFloat { low, high }, value) => {
            let x = match value {
                ParamValue::Float(x) => *x,
                ParamValue::Int(x) => *x as f64,
                ParamValue::Cat(_) => {
                    return Err(SpaceError::WrongType { name: p.name.clone(), expected: "float" })
                }
            };
            if !x.is_finite() || x < *low || x > *high {
                return Err(SpaceError::OutOfRange { name: p.name.clone(), value: x.to_string() });
            }
        }
        (ParamSpec::Categorical { choices }, ParamValue::Cat(s)) => {
            if !choices.contains(s) {
                return Err(SpaceError::OutOfRange { name: p.name.clone(), value: s.clone() });
            }
        }
        (ParamSpec::Categorical { .. }, _) => {
            return Err(SpaceError::WrongType { name: p.name.clone(), expected: "categorical" })
        }
    }
    Ok(())
}
