//! Release gate: ten end-to-end guarantees, one test per criterion.
//!
//! Each test writes a `criterion N: PASS` or `criterion N: FAIL (...)` line
//! straight to the process stderr so the verdicts survive libtest's output
//! capture, then asserts. Criteria 7, 8 and 10 share one expensive pair of
//! dataset evaluations through a lazily initialized static.

use std::io::Write as _;
use std::sync::LazyLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use trajclass::features::{
    haversine_m, point_features, segment, FeatureOptions, NoisePlacement, Segment,
};
use trajclass::hpo::{
    get_int, random_search, smbo_optimize, Budget, ConfigurationSpace, ParamDef, ParamSpec,
    SmboOptions,
};
use trajclass::learners::{train_svm, train_tree, DtParams, KernelKind, SvmModel, SvmParams};
use trajclass::matrix::Matrix;
use trajclass::metrics::{mcc_multiclass, ConfusionMatrix};
use trajclass::protocol::{
    bootstrap_family, compare_technologies, mean, train_test_split, BootstrapOptions,
    ClassifierKind, FamilyEvaluation, LeakageAudit, PipelineFamily, ScoreTuple,
};
use trajclass::savgol::{savgol_coeffs, savgol_filter};
use trajclass::seed::{derive_seed, rng_from_seed};
use trajclass::stats::{mann_whitney_u, wilcoxon_signed_rank, Method};
use trajclass::trajectory::{
    generate_dataset, CoordinateSystem, DatasetSpec, TechPreset, TrajPoint, Trajectory,
};

fn verdict(n: usize, outcome: Result<(), String>) {
    let line = match &outcome {
        Ok(()) => format!("criterion {n}: PASS"),
        Err(msg) => format!("criterion {n}: FAIL ({msg})"),
    };
    let _ = writeln!(std::io::stderr(), "{line}");
    if outcome.is_err() {
        panic!("{line}");
    }
}

fn gauss(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u1: f64 = rng.random::<f64>().max(1e-300);
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        })
        .collect()
}

// --- criterion 1: correlation coefficient vs independent oracles ---------

/// Direct evaluation of the K-class correlation coefficient from the raw
/// count matrix, in plain f64 (exact here: every product stays below 2^53).
fn mcc_oracle(rows: &[Vec<u64>]) -> f64 {
    let k = rows.len();
    let s: f64 = rows.iter().flatten().map(|&v| v as f64).sum();
    let c: f64 = (0..k).map(|i| rows[i][i] as f64).sum();
    let t: Vec<f64> = rows.iter().map(|r| r.iter().map(|&v| v as f64).sum()).collect();
    let p: Vec<f64> = (0..k).map(|j| rows.iter().map(|r| r[j] as f64).sum()).collect();
    let cov = c * s - t.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>();
    let d1 = s * s - p.iter().map(|v| v * v).sum::<f64>();
    let d2 = s * s - t.iter().map(|v| v * v).sum::<f64>();
    if d1 <= 0.0 || d2 <= 0.0 {
        return 0.0;
    }
    cov / (d1.sqrt() * d2.sqrt())
}

/// Classical binary formula, positive class 1, zero denominator -> 0.
fn binary_mcc(rows: &[Vec<u64>]) -> f64 {
    let (tn, fp) = (rows[0][0] as f64, rows[0][1] as f64);
    let (fname, tp) = (rows[1][0] as f64, rows[1][1] as f64);
    let den = (tp + fp) * (tp + fname) * (tn + fp) * (tn + fname);
    if den <= 0.0 {
        return 0.0;
    }
    (tp * tn - fp * fname) / den.sqrt()
}

fn check_mcc_oracles() -> Result<(), String> {
    let mut rng = rng_from_seed(101);
    for case in 0..1000 {
        let k = rng.random_range(2..=4usize);
        let total = rng.random_range(1..=50u32);
        let mut rows = vec![vec![0u64; k]; k];
        for _ in 0..total {
            let i = rng.random_range(0..k);
            let j = rng.random_range(0..k);
            rows[i][j] += 1;
        }
        let cm = ConfusionMatrix::from_counts(&rows).map_err(|e| e.to_string())?;
        let ours = mcc_multiclass(&cm);
        let oracle = mcc_oracle(&rows);
        if (ours - oracle).abs() > 1e-12 {
            return Err(format!("case {case}: {ours} vs oracle {oracle}"));
        }
        if k == 2 {
            let binary = binary_mcc(&rows);
            if (ours - binary).abs() > 1e-12 {
                return Err(format!("case {case}: {ours} vs binary {binary}"));
            }
        }
    }
    Ok(())
}

#[test]
fn criterion_01_mcc_matches_independent_oracles() {
    verdict(1, check_mcc_oracles());
}

// --- criterion 2: smoothing filter ----------------------------------------

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn check_smoothing_filter() -> Result<(), String> {
    let weights = savgol_coeffs(5, 2, 0).map_err(|e| e.to_string())?;
    let expected = [-3.0, 12.0, 17.0, 12.0, -3.0].map(|v| v / 35.0);
    for (i, (w, e)) in weights.iter().zip(&expected).enumerate() {
        if (w - e).abs() > 1e-12 {
            return Err(format!("window-5 weight {i}: {w} vs {e}"));
        }
    }

    // Filtering a sampled polynomial of degree <= polyorder must return it
    // unchanged, edges included.
    let windows = [3usize, 5, 7, 9, 11, 13, 15];
    let mut rng = rng_from_seed(202);
    for case in 0..100 {
        let w = windows[rng.random_range(0..windows.len())];
        let p = rng.random_range(1..=(w - 1).min(5));
        let n = rng.random_range(w..=w + 30);
        let coeffs: Vec<f64> = (0..=p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> =
            (0..n).map(|i| poly_eval(&coeffs, i as f64 - n as f64 / 2.0)).collect();
        let out = savgol_filter(&y, w, p).map_err(|e| e.to_string())?;
        for (i, (a, b)) in out.iter().zip(&y).enumerate() {
            if (a - b).abs() > 1e-7 * (1.0 + b.abs()) {
                return Err(format!(
                    "reproduction case {case} (w={w} p={p}) index {i}: {a} vs {b}"
                ));
            }
        }
    }

    // The filter is a fixed linear map: filter(a*x + b*y) must equal
    // a*filter(x) + b*filter(y).
    let windows = [3usize, 5, 7, 9, 11, 15, 21];
    for case in 0..100 {
        let w = windows[rng.random_range(0..windows.len())];
        let p = rng.random_range(1..w.min(7));
        let n = rng.random_range(8..=60);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let (a, b) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let mixed: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| a * x + b * y).collect();
        let lhs = savgol_filter(&mixed, w, p).map_err(|e| e.to_string())?;
        let fx = savgol_filter(&xs, w, p).map_err(|e| e.to_string())?;
        let fy = savgol_filter(&ys, w, p).map_err(|e| e.to_string())?;
        for i in 0..n {
            let rhs = a * fx[i] + b * fy[i];
            if (lhs[i] - rhs).abs() > 1e-9 * (1.0 + rhs.abs()) {
                return Err(format!(
                    "linearity case {case} (w={w} p={p}) index {i}: {} vs {rhs}",
                    lhs[i]
                ));
            }
        }
    }
    Ok(())
}

#[test]
fn criterion_02_smoothing_filter_is_exact_and_linear() {
    verdict(2, check_smoothing_filter());
}

// --- criterion 3: distance, step features, segmentation -------------------

/// Great-circle distance through the numerically stable atan2 form, written
/// independently of the half-angle formulation under test.
fn great_circle_oracle(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dl = (lon2 - lon1).to_radians();
    let y = ((p2.cos() * dl.sin()).powi(2)
        + (p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos()).powi(2))
    .sqrt();
    let x = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
    6_371_000.0 * y.atan2(x)
}

fn check_feature_formulas() -> Result<(), String> {
    let mut rng = rng_from_seed(303);
    for case in 0..100 {
        let lat1 = rng.random_range(-60.0..60.0);
        let lon1 = rng.random_range(-179.0..179.0);
        let lat2 = lat1 + rng.random_range(0.0..1.0);
        let lon2 = lon1 + rng.random_range(0.0..1.0);
        let ours = haversine_m(lat1, lon1, lat2, lon2);
        let oracle = great_circle_oracle(lat1, lon1, lat2, lon2);
        if (ours - oracle).abs() > 0.01 {
            return Err(format!("distance case {case}: {ours} vs {oracle}"));
        }
    }

    // One 3-4-5 step over one second: speed 5 m/s, heading atan2(4, 3).
    let pts =
        vec![TrajPoint { c1: 0.0, c2: 0.0, t: 0.0 }, TrajPoint { c1: 3.0, c2: 4.0, t: 1.0 }];
    let seg = Segment {
        points: &pts,
        system: CoordinateSystem::Planar,
        label: None,
        parent_id: "hand-345",
        index: 0,
    };
    let streams = point_features(&seg, &FeatureOptions::default()).map_err(|e| e.to_string())?;
    if (streams.v[1] - 5.0).abs() > 1e-12 {
        return Err(format!("3-4-5 speed: {}", streams.v[1]));
    }
    let angle = streams.da[1];
    if (angle - 4f64.atan2(3.0)).abs() > 1e-12 || (angle - 0.92730).abs() > 5e-6 {
        return Err(format!("3-4-5 heading: {angle}"));
    }

    // Segment sizes follow the floor rule with the remainder spread over the
    // leading segments, for every record count and segment count in range.
    for m in 1..=10usize {
        for r in m.max(2)..=200usize {
            let points: Vec<TrajPoint> =
                (0..r).map(|i| TrajPoint { c1: i as f64 * 0.01, c2: 0.0, t: i as f64 }).collect();
            let traj = Trajectory::new("seg-check", None, CoordinateSystem::Planar, points)
                .map_err(|e| e.to_string())?;
            let segs = segment(&traj, m).map_err(|e| e.to_string())?;
            if segs.len() != m {
                return Err(format!("r={r} m={m}: got {} segments", segs.len()));
            }
            let (base, extra) = (r / m, r % m);
            for (i, s) in segs.iter().enumerate() {
                let want = base + usize::from(i < extra);
                if s.points.len() != want {
                    return Err(format!(
                        "r={r} m={m} segment {i}: {} records, want {want}",
                        s.points.len()
                    ));
                }
            }
        }
    }
    Ok(())
}

#[test]
fn criterion_03_feature_formulas_match_hand_oracles() {
    verdict(3, check_feature_formulas());
}

// --- criterion 4: rank tests vs enumeration and calibration ---------------

/// Exact signed-rank null by subset-sum counting over the ranks 1..=n.
fn signed_rank_oracle(diffs: &[f64]) -> (f64, f64) {
    let n = diffs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diffs[i].abs().partial_cmp(&diffs[j].abs()).unwrap());
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    let w_plus: usize = (0..n).filter(|&i| diffs[i] > 0.0).map(|i| rank[i]).sum();
    let total = n * (n + 1) / 2;
    let mut ways = vec![0u64; total + 1];
    ways[0] = 1;
    for r in 1..=n {
        for s in (r..=total).rev() {
            ways[s] += ways[s - r];
        }
    }
    let le: u64 = ways[..=w_plus].iter().sum();
    let ge: u64 = ways[w_plus..].iter().sum();
    let m = (1u64 << n) as f64;
    let p = (2.0 * (le.min(ge) as f64) / m).min(1.0);
    (w_plus.min(total - w_plus) as f64, p)
}

/// Exact rank-sum null by counting size-na subsets of the pooled ranks.
fn rank_sum_oracle(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (na, nb) = (a.len(), b.len());
    let nn = na + nb;
    let mut pooled: Vec<(f64, bool)> =
        a.iter().map(|&v| (v, true)).chain(b.iter().map(|&v| (v, false))).collect();
    pooled.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let r_a: usize =
        pooled.iter().enumerate().filter(|(_, (_, is_a))| *is_a).map(|(i, _)| i + 1).sum();
    let u_a = r_a - na * (na + 1) / 2;
    let u_b = na * nb - u_a;

    let max_sum = nn * (nn + 1) / 2;
    let mut ways = vec![vec![0u64; max_sum + 1]; na + 1];
    ways[0][0] = 1;
    for i in 1..=nn {
        for j in (1..=na).rev() {
            for s in (i..=max_sum).rev() {
                let add = ways[j - 1][s - i];
                ways[j][s] += add;
            }
        }
    }
    let offset = na * (na + 1) / 2;
    let count: u64 = ways[na].iter().sum();
    let le: u64 = ways[na][..=u_a + offset].iter().sum();
    let ge: u64 = ways[na][u_a + offset..].iter().sum();
    let p = (2.0 * (le.min(ge) as f64) / count as f64).min(1.0);
    (u_a.min(u_b) as f64, p)
}

/// Distinct magnitudes in (i+1, i+1.4), shuffled: tie-free by construction.
fn distinct_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut vals: Vec<f64> =
        (0..n).map(|i| (i + 1) as f64 + rng.random_range(0.0..0.4)).collect();
    for i in (1..n).rev() {
        vals.swap(i, rng.random_range(0..=i));
    }
    vals
}

fn check_rank_tests() -> Result<(), String> {
    let mut rng = rng_from_seed(404);
    for n in 1..=10usize {
        for case in 0..15 {
            let mags = distinct_values(&mut rng, n);
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let a: Vec<f64> = b
                .iter()
                .zip(&mags)
                .map(|(base, mag)| base + if rng.random::<bool>() { *mag } else { -mag })
                .collect();
            let test = wilcoxon_signed_rank(&a, &b).map_err(|e| e.to_string())?;
            if test.method != Method::Exact {
                return Err(format!("signed-rank n={n} did not take the exact branch"));
            }
            let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            let (stat, p) = signed_rank_oracle(&diffs);
            if (test.statistic - stat).abs() > 1e-12 || (test.p_value - p).abs() > 1e-12 {
                return Err(format!(
                    "signed-rank n={n} case {case}: ({}, {}) vs oracle ({stat}, {p})",
                    test.statistic, test.p_value
                ));
            }
        }
    }

    for na in 1..=9usize {
        for nb in 1..=(10 - na) {
            for case in 0..5 {
                let pooled = distinct_values(&mut rng, na + nb);
                let (a, b) = pooled.split_at(na);
                let test = mann_whitney_u(a, b).map_err(|e| e.to_string())?;
                if test.method != Method::Exact {
                    return Err(format!("rank-sum {na}+{nb} did not take the exact branch"));
                }
                let (stat, p) = rank_sum_oracle(a, b);
                if (test.statistic - stat).abs() > 1e-12 || (test.p_value - p).abs() > 1e-12 {
                    return Err(format!(
                        "rank-sum {na}+{nb} case {case}: ({}, {}) vs oracle ({stat}, {p})",
                        test.statistic, test.p_value
                    ));
                }
            }
        }
    }

    // Under a true null, both tests must reject near the nominal 5% rate.
    let mut rejections = 0;
    for rep in 0..1000u64 {
        let mut r = rng_from_seed(derive_seed(405, &[rep]));
        let a = gauss(&mut r, 20);
        let b = gauss(&mut r, 20);
        let test = wilcoxon_signed_rank(&a, &b).map_err(|e| e.to_string())?;
        if test.p_value < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / 1000.0;
    if !(0.02..=0.08).contains(&rate) {
        return Err(format!("signed-rank type-I rate {rate}"));
    }

    let mut rejections = 0;
    for rep in 0..1000u64 {
        let mut r = rng_from_seed(derive_seed(406, &[rep]));
        let a = gauss(&mut r, 12);
        let b = gauss(&mut r, 12);
        let test = mann_whitney_u(&a, &b).map_err(|e| e.to_string())?;
        if test.p_value < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / 1000.0;
    if !(0.02..=0.08).contains(&rate) {
        return Err(format!("rank-sum type-I rate {rate}"));
    }
    Ok(())
}

#[test]
fn criterion_04_rank_tests_match_enumeration_and_calibrate() {
    verdict(4, check_rank_tests());
}

// --- criterion 5: learner sanity -------------------------------------------

fn dual_constraints_hold(model: &SvmModel, c: f64) -> Result<(), String> {
    for (i, m) in model.machines.iter().enumerate() {
        let balance: f64 = m.coef.iter().sum();
        if balance.abs() > 1e-6 {
            return Err(format!("machine {i}: multiplier balance {balance}"));
        }
        if let Some(bad) = m.coef.iter().find(|v| v.abs() > c + 1e-9) {
            return Err(format!("machine {i}: multiplier {bad} above C={c}"));
        }
    }
    Ok(())
}

fn check_learner_sanity() -> Result<(), String> {
    let mut rng = rng_from_seed(505);
    let centers = [(0.0, 0.0), (6.0, 0.0), (0.0, 6.0)];
    let mut rows = Vec::new();
    let mut y: Vec<u32> = Vec::new();
    for (cls, (cx, cy)) in centers.into_iter().enumerate() {
        for _ in 0..20 {
            rows.push(vec![cx + rng.random_range(-0.5..0.5), cy + rng.random_range(-0.5..0.5)]);
            y.push(cls as u32);
        }
    }
    let x = Matrix::from_rows(&rows).ok_or("blob matrix build failed")?;

    let tree = train_tree(&x, &y, 3, &DtParams::default());
    for (i, row) in x.iter_rows().enumerate() {
        if tree.predict_row(row) != y[i] {
            return Err(format!("tree misses training row {i}"));
        }
    }

    let linear = SvmParams { c: 100.0, kernel: KernelKind::Linear };
    let svm = train_svm(&x, &y, 3, &linear, 1).map_err(|e| e.to_string())?;
    for (i, row) in x.iter_rows().enumerate() {
        if svm.predict_row(row) != y[i] {
            return Err(format!("linear svm misses training row {i}"));
        }
    }

    let xor_rows =
        [vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
    let xor_x = Matrix::from_rows(&xor_rows).ok_or("xor matrix build failed")?;
    let xor_y = [0u32, 0, 1, 1];
    let rbf = SvmParams { c: 100.0, kernel: KernelKind::Rbf };
    let xor = train_svm(&xor_x, &xor_y, 2, &rbf, 2).map_err(|e| e.to_string())?;
    for (i, row) in xor_x.iter_rows().enumerate() {
        if xor.predict_row(row) != xor_y[i] {
            return Err(format!("rbf svm misses xor point {i}"));
        }
    }

    dual_constraints_hold(&svm, 100.0)?;
    dual_constraints_hold(&xor, 100.0)?;
    Ok(())
}

#[test]
fn criterion_05_learners_fit_separable_and_xor_data() {
    verdict(5, check_learner_sanity());
}

// --- criterion 6: optimizer competence -------------------------------------

fn check_optimizer_competence() -> Result<(), String> {
    let line = ConfigurationSpace::new(vec![ParamDef {
        name: "x".into(),
        spec: ParamSpec::UniformInt { low: 0, high: 100 },
        condition: None,
    }])
    .map_err(|e| e.to_string())?;
    let mut hits = 0;
    for seed in 0..20 {
        let result = smbo_optimize(
            &line,
            |a, _| {
                let x = get_int(a, "x").ok_or("missing x")?;
                Ok(((x - 42) as f64 / 100.0).powi(2))
            },
            Budget::Evals(200),
            seed,
            SmboOptions::default(),
        );
        let best = result.best().ok_or("empty history")?;
        if get_int(&best.assignment, "x") == Some(42) {
            hits += 1;
        }
    }
    if hits < 18 {
        return Err(format!("quadratic optimum found in {hits}/20 seeds"));
    }

    // Shifted two-dimensional multimodal surface; the guided search must not
    // lose to blind sampling at the same budget.
    let plane = ConfigurationSpace::new(vec![
        ParamDef {
            name: "x".into(),
            spec: ParamSpec::UniformFloat { low: -5.12, high: 5.12 },
            condition: None,
        },
        ParamDef {
            name: "y".into(),
            spec: ParamSpec::UniformFloat { low: -5.12, high: 5.12 },
            condition: None,
        },
    ])
    .map_err(|e| e.to_string())?;
    let rugged = |a: &trajclass::hpo::Assignment, _: u64| -> Result<f64, String> {
        let x = trajclass::hpo::get_float(a, "x").ok_or("missing x")? - 1.5;
        let y = trajclass::hpo::get_float(a, "y").ok_or("missing y")? + 2.5;
        let term = |z: f64| z * z - 10.0 * (std::f64::consts::TAU * z).cos();
        Ok((20.0 + term(x) + term(y)) / 100.0)
    };
    let mut smbo_best = Vec::new();
    let mut random_best = Vec::new();
    for seed in 300..320 {
        let s = smbo_optimize(&plane, rugged, Budget::Evals(100), seed, SmboOptions::default());
        let r = random_search(&plane, rugged, Budget::Evals(100), seed);
        smbo_best.push(s.best().ok_or("empty smbo history")?.objective);
        random_best.push(r.best().ok_or("empty random history")?.objective);
    }
    let median = |xs: &mut Vec<f64>| {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        (xs[9] + xs[10]) / 2.0
    };
    let (ms, mr) = (median(&mut smbo_best), median(&mut random_best));
    if ms > mr {
        return Err(format!("median objective {ms:.4} vs random {mr:.4}"));
    }
    Ok(())
}

#[test]
fn criterion_06_optimizer_beats_blind_search() {
    verdict(6, check_optimizer_competence());
}

// --- criteria 7, 8, 10: headline dataset evaluations ------------------------

struct Headline {
    gnss_raw: FamilyEvaluation,
    gnss_none: FamilyEvaluation,
    uwb_raw: FamilyEvaluation,
    uwb_none: FamilyEvaluation,
    audit_events: usize,
    audit_clean: bool,
}

fn run_headline() -> Result<Headline, String> {
    let audit = LeakageAudit::new();
    let opts = BootstrapOptions {
        reps: 20,
        optimizer_runs: 15,
        sample_k: 5,
        budget: Budget::Evals(30),
        smbo: SmboOptions::default(),
    };
    let feature_opts = FeatureOptions::default();
    let mut evals = Vec::new();
    for (pi, preset) in [TechPreset::GnssLike, TechPreset::UwbLike].into_iter().enumerate() {
        let data =
            generate_dataset(&DatasetSpec::new(preset), 42).map_err(|e| e.to_string())?;
        let (train, test) = train_test_split(&data, 0.67, 42).map_err(|e| e.to_string())?;
        for (fi, placement) in
            [NoisePlacement::RawNoise, NoisePlacement::NoNoise].into_iter().enumerate()
        {
            let family = PipelineFamily { classifier: ClassifierKind::Rf, placement };
            let seed = derive_seed(42, &[0xACCE, pi as u64, fi as u64]);
            let eval = bootstrap_family(
                family,
                &train,
                &test,
                &opts,
                &feature_opts,
                seed,
                Some(&audit),
            )
            .map_err(|e| e.to_string())?;
            evals.push(eval);
        }
    }
    let audit_clean = audit.clean();
    let audit_events = audit.events().len();
    let mut it = evals.into_iter();
    Ok(Headline {
        gnss_raw: it.next().unwrap(),
        gnss_none: it.next().unwrap(),
        uwb_raw: it.next().unwrap(),
        uwb_none: it.next().unwrap(),
        audit_events,
        audit_clean,
    })
}

static HEADLINE: LazyLock<Result<Headline, String>> = LazyLock::new(run_headline);

fn headline() -> Result<&'static Headline, String> {
    HEADLINE.as_ref().map_err(|e| e.clone())
}

fn check_noise_handling_trend() -> Result<(), String> {
    let h = headline()?;
    let raw = h.gnss_raw.metric_values(3);
    let none = h.gnss_none.metric_values(3);
    let (mean_raw, mean_none) = (mean(&raw), mean(&none));
    if mean_raw <= mean_none {
        return Err(format!(
            "mean mcc: raw-noise {mean_raw:.4} vs no-noise {mean_none:.4}"
        ));
    }
    let test = wilcoxon_signed_rank(&raw, &none).map_err(|e| e.to_string())?;
    if test.p_value >= 0.05 {
        return Err(format!("signed-rank p {:.4}", test.p_value));
    }
    Ok(())
}

#[test]
fn criterion_07_noise_removal_beats_skipping_it() {
    verdict(7, check_noise_handling_trend());
}

fn best_scores<'h>(a: &'h FamilyEvaluation, b: &'h FamilyEvaluation) -> Vec<ScoreTuple> {
    let pick = if a.mean_mcc() >= b.mean_mcc() { a } else { b };
    pick.outcomes.iter().map(|o| o.score).collect()
}

fn check_technology_gap() -> Result<(), String> {
    let h = headline()?;
    let uwb = best_scores(&h.uwb_raw, &h.uwb_none);
    let gnss = best_scores(&h.gnss_raw, &h.gnss_none);
    let cmp = compare_technologies(&uwb, &gnss, 0.05).map_err(|e| e.to_string())?;
    for m in &cmp.metrics {
        let p_ok = m.p_value.is_some_and(|p| p < 0.01);
        if m.direction != "a" || !p_ok {
            return Err(format!(
                "{}: direction {} p {:?} (uwb {:.4} vs gnss {:.4})",
                m.metric, m.direction, m.p_value, m.mean_a, m.mean_b
            ));
        }
    }
    Ok(())
}

#[test]
fn criterion_08_uwb_outperforms_gnss_on_every_metric() {
    verdict(8, check_technology_gap());
}

// --- criterion 9: end-to-end determinism ------------------------------------

fn check_evaluate_determinism() -> Result<(), String> {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for tag in ["a", "b"] {
        let out = root.path().join(tag);
        let cfg_path = root.path().join(format!("cfg-{tag}.json"));
        let body = format!(
            r#"{{
  "dataset": {{"source": "generate", "preset": "gnss-like"}},
  "families": ["dt+raw-noise"],
  "reps": 5,
  "optimizer_runs": 5,
  "sample_k": 3,
  "budget": {{"evals": 10}},
  "output_dir": {:?}
}}"#,
            out.to_str().ok_or("non-utf8 temp path")?
        );
        std::fs::write(&cfg_path, body).map_err(|e| e.to_string())?;
        let dir = trajclass::cli::execute([
            "trajclass",
            "evaluate",
            "--config",
            cfg_path.to_str().ok_or("non-utf8 temp path")?,
            "--seed",
            "4242",
        ])
        .map_err(|e| format!("{e:?}"))?;
        reports.push(std::fs::read(dir.join("report.json")).map_err(|e| e.to_string())?);
    }
    if reports[0].is_empty() {
        return Err("empty report".into());
    }
    if reports[0] != reports[1] {
        return Err("report bytes differ between identically seeded runs".into());
    }
    Ok(())
}

#[test]
fn criterion_09_identically_seeded_runs_emit_identical_reports() {
    verdict(9, check_evaluate_determinism());
}

// --- criterion 10: leakage audit ---------------------------------------------

fn check_leakage_audit() -> Result<(), String> {
    let h = headline()?;
    // 2 technologies x 2 families x 20 repetitions, one audit entry each.
    if h.audit_events != 80 {
        return Err(format!("{} audit events, expected 80", h.audit_events));
    }
    if !h.audit_clean {
        return Err("train and test shared a parent trajectory".into());
    }
    Ok(())
}

#[test]
fn criterion_10_no_parent_crosses_the_train_test_split() {
    verdict(10, check_leakage_audit());
}
