//! Soft-margin SVM trained by sequential minimal optimization, with
//! one-vs-one voting for more than two classes.
//!
//! The SMO solver follows the classic two-multiplier scheme: pick a
//! KKT-violating multiplier, pair it with a second one, solve the
//! two-variable subproblem analytically, repeat. Indefinite kernels (the
//! sigmoid, and any kernel that yields a non-positive curvature along the
//! update direction) fall back to evaluating the objective at the two
//! clipping endpoints.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::learners::LearnError;
use crate::matrix::Matrix;
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Poly,
    Rbf,
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: KernelKind,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, kernel: KernelKind::Rbf }
    }
}

/// Polynomial degree and additive constant are fixed; the search space only
/// varies C and the kernel family.
pub const POLY_DEGREE: i32 = 3;
pub const COEF0: f64 = 0.0;

/// KKT violation tolerance.
const TOL: f64 = 1e-3;
/// Minimum multiplier change that counts as progress.
const EPS: f64 = 1e-8;
/// Passes over the data before giving up.
const MAX_PASSES: usize = 1000;
/// Multipliers above this are kept as support vectors.
const SUPPORT_CUTOFF: f64 = 1e-12;

pub fn kernel_eval(kind: KernelKind, gamma: f64, u: &[f64], v: &[f64]) -> f64 {
    match kind {
        KernelKind::Linear => dot(u, v),
        KernelKind::Poly => (gamma * dot(u, v) + COEF0).powi(POLY_DEGREE),
        KernelKind::Rbf => {
            let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
            (-gamma * d2).exp()
        }
        KernelKind::Sigmoid => (gamma * dot(u, v) + COEF0).tanh(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The `scale` heuristic: `1 / (n_features * var)` with `var` the population
/// variance of all matrix entries, falling back to 1 when the data is
/// (nearly) constant.
pub fn gamma_scale(x: &Matrix) -> f64 {
    let n = (x.rows() * x.cols()) as f64;
    if n == 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for i in 0..x.rows() {
        for &v in x.row(i) {
            sum += v;
        }
    }
    let mean = sum / n;
    let mut var = 0.0;
    for i in 0..x.rows() {
        for &v in x.row(i) {
            var += (v - mean) * (v - mean);
        }
    }
    var /= n;
    if var > 1e-12 {
        1.0 / (x.cols() as f64 * var)
    } else {
        1.0
    }
}

/// One trained pair: decides between `class_a` (positive side) and `class_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub class_a: u32,
    pub class_b: u32,
    pub support: Matrix,
    /// `alpha_i * y_i` per support vector; the multiplier is its magnitude.
    pub coef: Vec<f64>,
    pub bias: f64,
}

impl BinarySvm {
    pub fn decision(&self, kind: KernelKind, gamma: f64, row: &[f64]) -> f64 {
        let mut f = self.bias;
        for (i, c) in self.coef.iter().enumerate() {
            f += c * kernel_eval(kind, gamma, self.support.row(i), row);
        }
        f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: KernelKind,
    pub gamma: f64,
    pub c: f64,
    pub n_classes: usize,
    pub machines: Vec<BinarySvm>,
}

impl SvmModel {
    /// One-vs-one majority vote; ties resolve to the lowest class index.
    pub fn predict_row(&self, row: &[f64]) -> u32 {
        let mut votes = vec![0u32; self.n_classes];
        for m in &self.machines {
            let f = m.decision(self.kernel, self.gamma, row);
            let winner = if f >= 0.0 { m.class_a } else { m.class_b };
            votes[winner as usize] += 1;
        }
        let mut best = 0usize;
        for (k, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = k;
            }
        }
        best as u32
    }
}

struct Smo<'a> {
    k: Vec<f64>,
    y: &'a [f64],
    c: f64,
    n: usize,
    alpha: Vec<f64>,
    bias: f64,
    /// Error cache: decision(i) - y_i, kept exact after every step.
    err: Vec<f64>,
    rng: ChaCha8Rng,
}

impl<'a> Smo<'a> {
    fn new(x: &Matrix, y: &'a [f64], c: f64, kind: KernelKind, gamma: f64, seed: u64) -> Self {
        let n = x.rows();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = kernel_eval(kind, gamma, x.row(i), x.row(j));
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        Smo {
            k,
            y,
            c,
            n,
            alpha: vec![0.0; n],
            bias: 0.0,
            err: y.iter().map(|v| -v).collect(),
            rng: rng_from_seed(seed),
        }
    }

    fn kk(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n + j]
    }

    /// Dual objective `sum alpha - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij`
    /// (maximized by the solver). Used by tests to check monotonicity.
    #[cfg(test)]
    fn dual_objective(&self) -> f64 {
        let mut obj: f64 = self.alpha.iter().sum();
        for i in 0..self.n {
            if self.alpha[i] == 0.0 {
                continue;
            }
            for j in 0..self.n {
                if self.alpha[j] == 0.0 {
                    continue;
                }
                obj -= 0.5 * self.alpha[i] * self.alpha[j] * self.y[i] * self.y[j] * self.kk(i, j);
            }
        }
        obj
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1_old, a2_old) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (e1, e2) = (self.err[i1], self.err[i2]);
        let s = y1 * y2;
        let (lo, hi) = if s < 0.0 {
            ((a2_old - a1_old).max(0.0), (self.c + a2_old - a1_old).min(self.c))
        } else {
            ((a1_old + a2_old - self.c).max(0.0), (a1_old + a2_old).min(self.c))
        };
        if lo >= hi {
            return false;
        }
        let (k11, k12, k22) = (self.kk(i1, i1), self.kk(i1, i2), self.kk(i2, i2));
        let eta = k11 + k22 - 2.0 * k12;
        let mut a2 = if eta > 0.0 {
            (a2_old + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // Non-positive curvature: the subproblem objective is evaluated
            // at both clipping endpoints and the better one is taken.
            let f1 = y1 * (e1 + self.bias) - a1_old * k11 - s * a2_old * k12;
            let f2 = y2 * (e2 + self.bias) - s * a1_old * k12 - a2_old * k22;
            let l1 = a1_old + s * (a2_old - lo);
            let h1 = a1_old + s * (a2_old - hi);
            let obj_lo = l1 * f1 + lo * f2
                + 0.5 * l1 * l1 * k11
                + 0.5 * lo * lo * k22
                + s * lo * l1 * k12;
            let obj_hi = h1 * f1 + hi * f2
                + 0.5 * h1 * h1 * k11
                + 0.5 * hi * hi * k22
                + s * hi * h1 * k12;
            // These are values of the (minimized) primal-form subproblem.
            if obj_lo < obj_hi - EPS {
                lo
            } else if obj_lo > obj_hi + EPS {
                hi
            } else {
                return false;
            }
        };
        if (a2 - a2_old).abs() < EPS * (a2 + a2_old + EPS) {
            return false;
        }
        let mut a1 = a1_old + s * (a2_old - a2);
        // Repair rounding drift so the equality constraint stays exact.
        if a1 < 0.0 {
            a2 += s * a1;
            a1 = 0.0;
        } else if a1 > self.c {
            a2 += s * (a1 - self.c);
            a1 = self.c;
        }

        let d1 = y1 * (a1 - a1_old);
        let d2 = y2 * (a2 - a2_old);
        let b1 = self.bias - e1 - d1 * k11 - d2 * k12;
        let b2 = self.bias - e2 - d1 * k12 - d2 * k22;
        let new_b = if a1 > 0.0 && a1 < self.c {
            b1
        } else if a2 > 0.0 && a2 < self.c {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let db = new_b - self.bias;
        for i in 0..self.n {
            self.err[i] += d1 * self.kk(i1, i) + d2 * self.kk(i2, i) + db;
        }
        self.alpha[i1] = a1;
        self.alpha[i2] = a2;
        self.bias = new_b;
        true
    }

    fn examine(&mut self, i2: usize) -> bool {
        let y2 = self.y[i2];
        let a2 = self.alpha[i2];
        let r2 = self.err[i2] * y2;
        let violates = (r2 < -TOL && a2 < self.c) || (r2 > TOL && a2 > 0.0);
        if !violates {
            return false;
        }
        let non_bound: Vec<usize> = (0..self.n)
            .filter(|&i| self.alpha[i] > 0.0 && self.alpha[i] < self.c)
            .collect();
        // Second-choice heuristic: the largest error gap first.
        if non_bound.len() > 1 {
            let e2 = self.err[i2];
            let i1 = non_bound
                .iter()
                .copied()
                .max_by(|&a, &b| {
                    let da = (self.err[a] - e2).abs();
                    let db = (self.err[b] - e2).abs();
                    da.partial_cmp(&db).unwrap().then(b.cmp(&a))
                })
                .unwrap();
            if self.take_step(i1, i2) {
                return true;
            }
        }
        // Then all non-bound points, then everything, both from a random
        // starting offset.
        if !non_bound.is_empty() {
            let start = self.rng.random_range(0..non_bound.len());
            for k in 0..non_bound.len() {
                let i1 = non_bound[(start + k) % non_bound.len()];
                if self.take_step(i1, i2) {
                    return true;
                }
            }
        }
        let start = self.rng.random_range(0..self.n);
        for k in 0..self.n {
            let i1 = (start + k) % self.n;
            if self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }

    fn solve(&mut self, mut trace: Option<&mut Vec<f64>>) -> Result<usize, LearnError> {
        let mut examine_all = true;
        let mut changed = 0usize;
        let mut passes = 0usize;
        while changed > 0 || examine_all {
            passes += 1;
            if passes > MAX_PASSES {
                return Err(LearnError::Convergence { iterations: passes - 1 });
            }
            changed = 0;
            for i in 0..self.n {
                let candidate = examine_all || (self.alpha[i] > 0.0 && self.alpha[i] < self.c);
                if candidate && self.examine(i) {
                    changed += 1;
                    #[cfg(test)]
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(self.dual_objective());
                    }
                }
            }
            #[cfg(not(test))]
            let _ = &mut trace;
            if examine_all {
                examine_all = false;
            } else if changed == 0 {
                examine_all = true;
            }
        }
        Ok(passes)
    }
}

/// Trains a one-vs-one SVM. Class pairs missing on either side (possible
/// when `n_classes` exceeds the labels actually present) get no machine.
pub fn train_svm(
    x: &Matrix,
    y: &[u32],
    n_classes: usize,
    params: &SvmParams,
    seed: u64,
) -> Result<SvmModel, LearnError> {
    if !(params.c > 0.0) || !params.c.is_finite() {
        return Err(LearnError::BadParam(format!("C must be positive, got {}", params.c)));
    }
    let gamma = gamma_scale(x);
    let mut machines = Vec::new();
    for a in 0..n_classes as u32 {
        for b in a + 1..n_classes as u32 {
            let idx: Vec<usize> =
                (0..x.rows()).filter(|&i| y[i] == a || y[i] == b).collect();
            let has_a = idx.iter().any(|&i| y[i] == a);
            let has_b = idx.iter().any(|&i| y[i] == b);
            if !has_a || !has_b {
                continue;
            }
            let sub_x = x.select_rows(&idx);
            let sub_y: Vec<f64> =
                idx.iter().map(|&i| if y[i] == a { 1.0 } else { -1.0 }).collect();
            let mut smo = Smo::new(
                &sub_x,
                &sub_y,
                params.c,
                params.kernel,
                gamma,
                derive_seed(seed, &[a as u64, b as u64]),
            );
            smo.solve(None)?;
            let kept: Vec<usize> =
                (0..smo.n).filter(|&i| smo.alpha[i] > SUPPORT_CUTOFF).collect();
            let support = sub_x.select_rows(&kept);
            let coef: Vec<f64> = kept.iter().map(|&i| smo.alpha[i] * sub_y[i]).collect();
            machines.push(BinarySvm { class_a: a, class_b: b, support, coef, bias: smo.bias });
        }
    }
    Ok(SvmModel { kernel: params.kernel, gamma, c: params.c, n_classes, machines })
}
