//! Rank-based hypothesis tests and a normality check.
//!
//! Small samples get exact permutation p-values by full enumeration; larger
//! ones use the normal approximation with tie and continuity corrections.
//! All p-values are two-sided.

use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("paired samples must have equal, nonzero length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty sample")]
    Empty,
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("sample is degenerate (zero variance)")]
    Degenerate,
    #[error("normality test requires at least 8 values, got {0}")]
    SampleTooSmall(usize),
    #[error("sample contains non-finite values")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    NormalApprox,
}

/// Outcome of a rank test. `n` is (effective pairs, dropped zeros) for the
/// signed-rank test and (len a, len b) for the U test.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StatTest {
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
    pub n: (usize, usize),
}

/// Φ(x) for the standard normal.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// 1-based ranks with midranks for ties, plus the tie-group sizes.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut groups = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        groups.push(j - i + 1);
        i = j + 1;
    }
    (ranks, groups)
}

fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Largest effective sample for which the exact null distribution is
/// enumerated instead of approximated.
const EXACT_LIMIT: usize = 12;

fn two_sided_from_z(num: f64, sigma: f64) -> f64 {
    let z = (num.abs() - 0.5).max(0.0) / sigma;
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Wilcoxon signed-rank test for paired samples.
///
/// Zero differences are dropped before ranking; the statistic is
/// `min(W+, W-)` over the remaining pairs. Up to [`EXACT_LIMIT`] effective
/// pairs the p-value enumerates all sign assignments of the (possibly tied)
/// rank vector; beyond that the normal approximation with tie and continuity
/// corrections is used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<StatTest, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(StatsError::Empty);
    }
    check_finite(a)?;
    check_finite(b)?;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let dropped = a.len() - diffs.len();
    let n = diffs.len();
    if n == 0 {
        return Err(StatsError::AllZeroDifferences);
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, groups) = midranks(&abs);
    let w_plus: f64 =
        diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| *r).sum();
    let total = n as f64 * (n as f64 + 1.0) / 2.0;
    let w_minus = total - w_plus;
    let statistic = w_plus.min(w_minus);

    let p_value = if n <= EXACT_LIMIT {
        // Exact conditional null: signs are independent coin flips over the
        // observed rank vector.
        let masks = 1u32 << n;
        let (mut le, mut ge) = (0u64, 0u64);
        for mask in 0..masks {
            let mut w = 0.0;
            for (bit, r) in ranks.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    w += r;
                }
            }
            if w <= w_plus + 1e-9 {
                le += 1;
            }
            if w >= w_plus - 1e-9 {
                ge += 1;
            }
        }
        let m = masks as f64;
        (2.0 * (le as f64 / m).min(ge as f64 / m)).min(1.0)
    } else {
        let nf = n as f64;
        let mu = total / 2.0;
        let tie_term: f64 =
            groups.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        if var <= 0.0 {
            return Err(StatsError::Degenerate);
        }
        two_sided_from_z(w_plus - mu, var.sqrt())
    };
    Ok(StatTest {
        statistic,
        p_value,
        method: if n <= EXACT_LIMIT { Method::Exact } else { Method::NormalApprox },
        n: (n, dropped),
    })
}

/// Mann-Whitney U test for two independent samples.
///
/// The statistic is `min(U_a, U_b)`. When the pooled size is at most
/// [`EXACT_LIMIT`] and there are no ties, the p-value enumerates all
/// assignments of pooled ranks to the first sample; otherwise the normal
/// approximation with tie and continuity corrections is used.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<StatTest, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::Empty);
    }
    check_finite(a)?;
    check_finite(b)?;
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, groups) = midranks(&pooled);
    let r_a: f64 = ranks[..na].iter().sum();
    let u_a = r_a - na as f64 * (na as f64 + 1.0) / 2.0;
    let u_b = na as f64 * nb as f64 - u_a;
    let statistic = u_a.min(u_b);
    let has_ties = groups.iter().any(|&g| g > 1);
    let total = na + nb;

    let (p_value, method) = if total <= EXACT_LIMIT && !has_ties {
        // Tie-free ranks are exactly 1..=total; enumerate which ranks go to
        // sample a.
        let offset = na as f64 * (na as f64 + 1.0) / 2.0;
        let (mut le, mut ge, mut count) = (0u64, 0u64, 0u64);
        for mask in 0u32..1 << total {
            if mask.count_ones() as usize != na {
                continue;
            }
            count += 1;
            let mut sum = 0.0;
            for bit in 0..total {
                if mask >> bit & 1 == 1 {
                    sum += (bit + 1) as f64;
                }
            }
            let u = sum - offset;
            if u <= u_a + 1e-9 {
                le += 1;
            }
            if u >= u_a - 1e-9 {
                ge += 1;
            }
        }
        let c = count as f64;
        ((2.0 * (le as f64 / c).min(ge as f64 / c)).min(1.0), Method::Exact)
    } else {
        let (naf, nbf, nf) = (na as f64, nb as f64, total as f64);
        let mu = naf * nbf / 2.0;
        let tie_term: f64 = groups.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>()
            / (nf * (nf - 1.0));
        let var = naf * nbf / 12.0 * (nf + 1.0 - tie_term);
        if var <= 0.0 {
            return Err(StatsError::Degenerate);
        }
        (two_sided_from_z(u_a - mu, var.sqrt()), Method::NormalApprox)
    };
    Ok(StatTest { statistic, p_value, method, n: (na, nb) })
}

/// Critical values of the size-adjusted statistic and their significance
/// levels, for the composite normality case (mean and variance estimated).
pub const AD_CRITICAL: [(f64, f64); 5] =
    [(0.576, 0.15), (0.656, 0.10), (0.787, 0.05), (0.918, 0.025), (1.092, 0.01)];

/// Anderson-Darling normality test result. The p-value is reported as the
/// bracket `[p_lower, p_upper]` between the tabulated significance levels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NormalityTest {
    /// Size-adjusted statistic A*².
    pub statistic: f64,
    pub n: usize,
    pub reject_at_5pct: bool,
    pub p_lower: f64,
    pub p_upper: f64,
}

/// Anderson-Darling test of composite normality (mean and variance estimated
/// from the sample, `A*² = A² (1 + 4/n - 25/n²)`).
pub fn anderson_darling_normality(x: &[f64]) -> Result<NormalityTest, StatsError> {
    let n = x.len();
    if n < 8 {
        return Err(StatsError::SampleTooSmall(n));
    }
    check_finite(x)?;
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    if var <= 0.0 {
        return Err(StatsError::Degenerate);
    }
    let sd = var.sqrt();
    let mut z: Vec<f64> = x.iter().map(|v| (v - mean) / sd).collect();
    z.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let ln_phi = |v: f64| normal_cdf(v).max(1e-300).ln();
    let mut a2 = 0.0;
    for i in 0..n {
        // ln Φ(z_(i)) + ln(1 - Φ(z_(n-1-i))), the complement via symmetry.
        a2 += (2 * i + 1) as f64 * (ln_phi(z[i]) + ln_phi(-z[n - 1 - i]));
    }
    let a2 = -nf - a2 / nf;
    let statistic = a2 * (1.0 + 4.0 / nf - 25.0 / (nf * nf));

    let mut p_lower = 0.0;
    let mut p_upper = 1.0;
    for &(crit, sig) in AD_CRITICAL.iter() {
        if statistic >= crit {
            p_upper = sig;
        } else {
            p_lower = sig;
            break;
        }
    }
    Ok(NormalityTest {
        statistic,
        n,
        reject_at_5pct: statistic >= 0.787,
        p_lower,
        p_upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn wilcoxon_constant_shift_exact() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 3.0, 4.0, 5.0, 6.0];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.method, Method::Exact);
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 0.0625).abs() < 1e-12);
        assert_eq!(r.n, (5, 0));
        // Swapping the samples flips the signs but not the outcome.
        let s = wilcoxon_signed_rank(&b, &a).unwrap();
        assert_eq!(s.statistic, r.statistic);
        assert_eq!(s.p_value, r.p_value);
    }

    #[test]
    fn wilcoxon_six_distinct_differences() {
        let b = [0.0; 6];
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 2.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn wilcoxon_drops_zero_differences() {
        let a = [1.0, 2.0, 3.0, 7.0, 9.0, 4.0];
        let b = [1.0, 2.0, 3.0, 6.0, 7.0, 5.0];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.n, (3, 3));
        let err = wilcoxon_signed_rank(&[5.0, 5.0], &[5.0, 5.0]);
        assert_eq!(err, Err(StatsError::AllZeroDifferences));
    }

    #[test]
    fn wilcoxon_large_sample_uses_normal_approximation() {
        let a: Vec<f64> = (0..30).map(|i| i as f64 + if i % 2 == 0 { 0.8 } else { -0.4 }).collect();
        let b: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.method, Method::NormalApprox);
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
        // A strong one-sided shift is detected.
        let c: Vec<f64> = (0..30).map(|i| i as f64 + 5.0).collect();
        let s = wilcoxon_signed_rank(&c, &b).unwrap();
        assert!(s.p_value < 1e-4, "p was {}", s.p_value);
    }

    #[test]
    fn mann_whitney_separated_samples_exact() {
        let a = [1.0, 2.0, 3.0];
        let b = [4.0, 5.0, 6.0];
        let r = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(r.method, Method::Exact);
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 0.1).abs() < 1e-12);
        assert_eq!(r.n, (3, 3));
        let s = mann_whitney_u(&b, &a).unwrap();
        assert_eq!(s.p_value, r.p_value);
        assert_eq!(s.statistic, r.statistic);
    }

    #[test]
    fn mann_whitney_ties_force_approximation() {
        let a = [1.0, 2.0, 2.0];
        let b = [2.0, 3.0, 4.0];
        let r = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(r.method, Method::NormalApprox);
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
    }

    #[test]
    fn mann_whitney_identical_samples_have_p_one() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = mann_whitney_u(&a, &a).unwrap();
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mann_whitney_unequal_sizes() {
        let a = [10.0, 11.0, 12.0, 13.0, 14.0];
        let b = [1.0, 2.0];
        let r = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(r.method, Method::Exact);
        assert_eq!(r.statistic, 0.0);
        // C(7, 5) = 21 assignments, doubled tail of 1.
        assert!((r.p_value - 2.0 / 21.0).abs() < 1e-12);
    }

    #[test]
    fn mann_whitney_degenerate_pool() {
        let a = [5.0, 5.0];
        let b = [5.0, 5.0, 5.0];
        assert_eq!(mann_whitney_u(&a, &b), Err(StatsError::Degenerate));
    }

    #[test]
    fn argument_validation() {
        assert_eq!(
            wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]),
            Err(StatsError::LengthMismatch(1, 2))
        );
        assert_eq!(wilcoxon_signed_rank(&[], &[]), Err(StatsError::Empty));
        assert_eq!(mann_whitney_u(&[], &[1.0]), Err(StatsError::Empty));
        assert_eq!(
            mann_whitney_u(&[f64::NAN], &[1.0, 2.0]),
            Err(StatsError::NonFinite)
        );
    }

    #[test]
    fn anderson_darling_accepts_normal_rejects_uniform() {
        let mut rng = crate::seed::rng_from_seed(2024);
        let normal: Vec<f64> = (0..300)
            .map(|_| {
                // Box-Muller from two uniforms.
                let u1: f64 = rng.random::<f64>().max(1e-12);
                let u2: f64 = rng.random();
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        let r = anderson_darling_normality(&normal).unwrap();
        assert!(!r.reject_at_5pct, "A*^2 = {}", r.statistic);
        assert!(r.p_lower < r.p_upper);

        let uniform: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
        let u = anderson_darling_normality(&uniform).unwrap();
        assert!(u.reject_at_5pct, "A*^2 = {}", u.statistic);
        assert_eq!(u.p_upper, 0.01);
        assert_eq!(u.p_lower, 0.0);
    }

    #[test]
    fn anderson_darling_guards() {
        assert_eq!(
            anderson_darling_normality(&[1.0; 7]),
            Err(StatsError::SampleTooSmall(7))
        );
        assert_eq!(anderson_darling_normality(&[3.0; 12]), Err(StatsError::Degenerate));
    }

    #[test]
    fn anderson_darling_brackets_are_consistent() {
        // A bimodal sample sits deep in the rejection region; the bracket
        // must follow the tabulated thresholds.
        let x: Vec<f64> = (0..40)
            .map(|i| if i % 2 == 0 { -1.0 } else { 1.0 } + 0.05 * (i as f64 / 40.0))
            .collect();
        let r = anderson_darling_normality(&x).unwrap();
        assert!(r.p_lower < r.p_upper);
        for (crit, sig) in AD_CRITICAL {
            if r.statistic >= crit {
                assert!(r.p_upper <= sig);
            } else {
                assert!(r.p_lower >= sig || r.p_lower == 0.0);
            }
        }
    }

    proptest! {
        #[test]
        fn p_values_are_probabilities(
            a in proptest::collection::vec(-100.0f64..100.0, 1..25),
            b in proptest::collection::vec(-100.0f64..100.0, 1..25),
        ) {
            let r = mann_whitney_u(&a, &b);
            if let Ok(r) = r {
                prop_assert!((0.0..=1.0).contains(&r.p_value));
            }
            if a.len() == b.len() {
                if let Ok(r) = wilcoxon_signed_rank(&a, &b) {
                    prop_assert!((0.0..=1.0).contains(&r.p_value));
                }
            }
        }

        #[test]
        fn mann_whitney_invariant_under_monotone_transform(
            a in proptest::collection::vec(-5.0f64..5.0, 2..15),
            b in proptest::collection::vec(-5.0f64..5.0, 2..15),
        ) {
            let ta: Vec<f64> = a.iter().map(|v| v.exp()).collect();
            let tb: Vec<f64> = b.iter().map(|v| v.exp()).collect();
            let r1 = mann_whitney_u(&a, &b).unwrap();
            let r2 = mann_whitney_u(&ta, &tb).unwrap();
            prop_assert!((r1.statistic - r2.statistic).abs() < 1e-9);
            prop_assert!((r1.p_value - r2.p_value).abs() < 1e-9);
        }

        #[test]
        fn wilcoxon_invariant_under_common_shift(
            pairs in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..20),
            shift in -100.0f64..100.0,
        ) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            prop_assume!(a.iter().zip(&b).any(|(x, y)| x != y));
            let sa: Vec<f64> = a.iter().map(|v| v + shift).collect();
            let sb: Vec<f64> = b.iter().map(|v| v + shift).collect();
            let r1 = wilcoxon_signed_rank(&a, &b).unwrap();
            let r2 = wilcoxon_signed_rank(&sa, &sb).unwrap();
            prop_assert!((r1.p_value - r2.p_value).abs() < 1e-9);
        }

        #[test]
        fn anderson_darling_affine_invariance(
            x in proptest::collection::vec(-10.0f64..10.0, 10..60),
            scale in 0.1f64..10.0,
            shift in -100.0f64..100.0,
        ) {
            let distinct = x.iter().any(|v| (v - x[0]).abs() > 1e-9);
            prop_assume!(distinct);
            let y: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
            let r1 = anderson_darling_normality(&x).unwrap();
            let r2 = anderson_darling_normality(&y).unwrap();
            prop_assert!((r1.statistic - r2.statistic).abs() < 1e-6);
        }
    }
}
