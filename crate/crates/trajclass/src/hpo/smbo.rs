//! Sequential model-based optimization with a regression-forest surrogate,
//! expected improvement acquisition, and interleaved random proposals; a
//! pure random search is available as the baseline.

use std::collections::HashSet;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;

use crate::hpo::space::{assignment_key, Assignment, ConfigurationSpace};
use crate::hpo::surrogate::fit_surrogate;
use crate::matrix::Matrix;
use crate::seed::{derive_seed, rng_from_seed};
use crate::stats::{normal_cdf, normal_pdf};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    /// Stop after exactly this many evaluations.
    Evals(usize),
    /// Stop once this much wall time has elapsed (no new evaluations begin
    /// past the limit; the one in flight finishes).
    WallclockSecs(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub assignment: Assignment,
    pub objective: f64,
    pub wall_time_s: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub trials: Vec<Trial>,
    /// Index of the lowest-objective trial; earliest wins ties. `None` only
    /// when the budget allowed no evaluations at all.
    pub incumbent: Option<usize>,
}

impl OptimizeResult {
    pub fn best(&self) -> Option<&Trial> {
        self.incumbent.map(|i| &self.trials[i])
    }
}

#[derive(Debug, Clone)]
pub struct SmboOptions {
    /// Size of the initial random design; defaults to
    /// `max(5, ceil(0.1 * evals))` under an evaluation budget, 5 otherwise.
    pub init_design: Option<usize>,
    pub random_candidates: usize,
    pub local_candidates: usize,
    /// Every n-th model-phase proposal is drawn at random instead.
    pub random_interleave: usize,
}

impl Default for SmboOptions {
    fn default() -> Self {
        SmboOptions {
            init_design: None,
            random_candidates: 500,
            local_candidates: 100,
            random_interleave: 4,
        }
    }
}

/// Objective value recorded for evaluations that return an error or a
/// non-finite number.
pub const FAILED_OBJECTIVE: f64 = 1.0;

enum Mode {
    Smbo(SmboOptions),
    Random,
}

pub fn smbo_optimize<F>(
    space: &ConfigurationSpace,
    objective: F,
    budget: Budget,
    seed: u64,
    opts: SmboOptions,
) -> OptimizeResult
where
    F: FnMut(&Assignment, u64) -> Result<f64, String>,
{
    optimize(space, objective, budget, seed, Mode::Smbo(opts))
}

pub fn random_search<F>(
    space: &ConfigurationSpace,
    objective: F,
    budget: Budget,
    seed: u64,
) -> OptimizeResult
where
    F: FnMut(&Assignment, u64) -> Result<f64, String>,
{
    optimize(space, objective, budget, seed, Mode::Random)
}

fn optimize<F>(
    space: &ConfigurationSpace,
    mut objective: F,
    budget: Budget,
    seed: u64,
    mode: Mode,
) -> OptimizeResult
where
    F: FnMut(&Assignment, u64) -> Result<f64, String>,
{
    let mut rng = rng_from_seed(derive_seed(seed, &[0x5eed]));
    let start = Instant::now();
    let max_evals = match budget {
        Budget::Evals(n) => n,
        Budget::WallclockSecs(_) => usize::MAX,
    };
    let init = match &mode {
        Mode::Random => usize::MAX,
        Mode::Smbo(opts) => opts.init_design.unwrap_or(match budget {
            Budget::Evals(n) => 5usize.max((0.1 * n as f64).ceil() as usize),
            Budget::WallclockSecs(_) => 5,
        }),
    };

    let mut trials: Vec<Trial> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut incumbent: Option<usize> = None;

    for t in 0..max_evals {
        if let Budget::WallclockSecs(limit) = budget {
            if start.elapsed().as_secs_f64() >= limit {
                break;
            }
        }
        let assignment = if t < init {
            propose_random(space, &mut rng, &seen)
        } else {
            let Mode::Smbo(opts) = &mode else { unreachable!() };
            let model_phase_index = t - init;
            if opts.random_interleave > 0
                && model_phase_index % opts.random_interleave == opts.random_interleave - 1
            {
                propose_random(space, &mut rng, &seen)
            } else {
                propose_by_model(space, &trials, incumbent, &seen, &mut rng, opts, seed, t)
            }
        };

        let eval_start = Instant::now();
        let (objective_value, failed) = match objective(&assignment, seed) {
            Ok(v) if v.is_finite() => (v, false),
            _ => (FAILED_OBJECTIVE, true),
        };
        let wall_time_s = eval_start.elapsed().as_secs_f64();
        seen.insert(assignment_key(&assignment));
        trials.push(Trial { assignment, objective: objective_value, wall_time_s, failed });
        let better = match incumbent {
            None => true,
            Some(b) => objective_value < trials[b].objective,
        };
        if better {
            incumbent = Some(trials.len() - 1);
        }
    }
    OptimizeResult { trials, incumbent }
}

/// Draws fresh samples, preferring one not evaluated yet. Falls back to a
/// duplicate after bounded retries so exhausted discrete spaces still make
/// progress toward the budget.
fn propose_random(
    space: &ConfigurationSpace,
    rng: &mut ChaCha8Rng,
    seen: &HashSet<String>,
) -> Assignment {
    let mut last = space.sample(rng);
    for _ in 0..1000 {
        if !seen.contains(&assignment_key(&last)) {
            return last;
        }
        last = space.sample(rng);
    }
    last
}

#[allow(clippy::too_many_arguments)]
fn propose_by_model(
    space: &ConfigurationSpace,
    trials: &[Trial],
    incumbent: Option<usize>,
    seen: &HashSet<String>,
    rng: &mut ChaCha8Rng,
    opts: &SmboOptions,
    seed: u64,
    t: usize,
) -> Assignment {
    let rows: Vec<Vec<f64>> = trials.iter().map(|tr| space.encode(&tr.assignment)).collect();
    let Some(x) = Matrix::from_rows(&rows) else {
        return propose_random(space, rng, seen);
    };
    let y: Vec<f64> = trials.iter().map(|tr| tr.objective).collect();
    let forest = fit_surrogate(&x, &y, derive_seed(seed, &[0x5412, t as u64]));
    let f_best = incumbent.map(|i| trials[i].objective).unwrap_or(FAILED_OBJECTIVE);

    let mut candidates = Vec::with_capacity(opts.random_candidates + opts.local_candidates);
    for _ in 0..opts.random_candidates {
        candidates.push(space.sample(rng));
    }
    if let Some(b) = incumbent {
        for _ in 0..opts.local_candidates {
            candidates.push(space.perturb(&trials[b].assignment, rng));
        }
    }

    let mut best: Option<(f64, Assignment)> = None;
    for cand in candidates {
        if seen.contains(&assignment_key(&cand)) {
            continue;
        }
        let (mu, sigma) = forest.predict(&space.encode(&cand));
        let ei = expected_improvement(f_best, mu, sigma);
        if best.as_ref().is_none_or(|(b_ei, _)| ei > *b_ei) {
            best = Some((ei, cand));
        }
    }
    match best {
        Some((_, cand)) => cand,
        None => propose_random(space, rng, seen),
    }
}

/// Expected improvement for minimization: `(f* - mu) Phi(z) + sigma phi(z)`
/// with `z = (f* - mu) / sigma`; degenerates to the plain improvement when
/// the model is certain.
pub fn expected_improvement(f_best: f64, mu: f64, sigma: f64) -> f64 {
    let diff = f_best - mu;
    if sigma < 1e-12 {
        return diff.max(0.0);
    }
    let z = diff / sigma;
    (diff * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0)
}
