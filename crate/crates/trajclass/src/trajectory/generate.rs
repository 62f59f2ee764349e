//! Synthetic trajectory generation.
//!
//! Each pattern is an ideal piecewise path (lines and circular arcs) traversed
//! at constant speed, sampled at a fixed rate, then disturbed by an isotropic
//! Gaussian positioning error in the plane. Open paths (straight, s-shape,
//! u-shape) are walked back and forth; the circle wraps around.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::seed::{derive_seed, rng_from_seed};
use crate::trajectory::{
    to_geodetic, CoordinateSystem, GeodeticRef, PatternLabel, TrajPoint, Trajectory,
    TrajectoryError,
};

/// Positioning-error model applied to ideal pattern positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Standard deviation of the per-axis Gaussian position error, meters.
    pub position_sigma_m: f64,
    /// Samples per second.
    pub sample_rate_hz: f64,
    /// Probability that a sample is lost entirely.
    pub dropout_prob: f64,
}

impl NoiseModel {
    /// Satellite-receiver-like: meter-scale error at a slow fix rate.
    pub fn gnss_like() -> NoiseModel {
        NoiseModel { position_sigma_m: 2.5, sample_rate_hz: 1.0, dropout_prob: 0.0 }
    }

    /// Local-ranging-like: decimeter-scale error at a fast update rate.
    pub fn uwb_like() -> NoiseModel {
        NoiseModel { position_sigma_m: 0.125, sample_rate_hz: 5.91, dropout_prob: 0.0 }
    }

    fn validate(&self) -> Result<(), TrajectoryError> {
        if !(self.sample_rate_hz > 0.0) || !self.sample_rate_hz.is_finite() {
            return Err(TrajectoryError::BadArgument("sample rate must be positive".into()));
        }
        if !(self.position_sigma_m >= 0.0) || !self.position_sigma_m.is_finite() {
            return Err(TrajectoryError::BadArgument("noise sigma must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(TrajectoryError::BadArgument("dropout must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// The two simulated positioning technologies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TechPreset {
    GnssLike,
    UwbLike,
}

impl TechPreset {
    pub fn noise(self) -> NoiseModel {
        match self {
            TechPreset::GnssLike => NoiseModel::gnss_like(),
            TechPreset::UwbLike => NoiseModel::uwb_like(),
        }
    }

    pub fn system(self) -> CoordinateSystem {
        match self {
            TechPreset::GnssLike => CoordinateSystem::Geodetic,
            TechPreset::UwbLike => CoordinateSystem::Planar,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TechPreset::GnssLike => "gnss-like",
            TechPreset::UwbLike => "uwb-like",
        }
    }
}

impl FromStr for TechPreset {
    type Err = TrajectoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gnss" | "gnss-like" => Ok(TechPreset::GnssLike),
            "uwb" | "uwb-like" => Ok(TechPreset::UwbLike),
            other => Err(TrajectoryError::BadArgument(format!("unknown preset {other:?}"))),
        }
    }
}

/// Similarity transform applied to the canonical pattern shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternGeometry {
    pub scale: f64,
    pub rotation_rad: f64,
}

impl Default for PatternGeometry {
    fn default() -> Self {
        PatternGeometry { scale: 1.0, rotation_rad: 0.0 }
    }
}

#[derive(Debug, Clone, Copy)]
enum Seg {
    Line { x0: f64, y0: f64, x1: f64, y1: f64 },
    /// Circular arc from angle `a0` sweeping `sweep` radians (sign gives
    /// orientation).
    Arc { cx: f64, cy: f64, r: f64, a0: f64, sweep: f64 },
}

impl Seg {
    fn len(&self) -> f64 {
        match *self {
            Seg::Line { x0, y0, x1, y1 } => ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt(),
            Seg::Arc { r, sweep, .. } => r * sweep.abs(),
        }
    }

    fn point_at(&self, s: f64) -> (f64, f64) {
        match *self {
            Seg::Line { x0, y0, x1, y1 } => {
                let len = self.len();
                let f = if len > 0.0 { (s / len).clamp(0.0, 1.0) } else { 0.0 };
                (x0 + f * (x1 - x0), y0 + f * (y1 - y0))
            }
            Seg::Arc { cx, cy, r, a0, sweep } => {
                let a = a0 + sweep.signum() * (s / r).clamp(0.0, sweep.abs());
                (cx + r * a.cos(), cy + r * a.sin())
            }
        }
    }

    fn distance_to(&self, px: f64, py: f64) -> f64 {
        match *self {
            Seg::Line { x0, y0, x1, y1 } => {
                let (dx, dy) = (x1 - x0, y1 - y0);
                let len2 = dx * dx + dy * dy;
                let t = if len2 > 0.0 {
                    (((px - x0) * dx + (py - y0) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (qx, qy) = (x0 + t * dx, y0 + t * dy);
                ((px - qx).powi(2) + (py - qy).powi(2)).sqrt()
            }
            Seg::Arc { cx, cy, r, a0, sweep } => {
                let (vx, vy) = (px - cx, py - cy);
                let phi = vy.atan2(vx);
                let delta = if sweep >= 0.0 {
                    (phi - a0).rem_euclid(2.0 * PI)
                } else {
                    (a0 - phi).rem_euclid(2.0 * PI)
                };
                if delta <= sweep.abs() {
                    ((vx * vx + vy * vy).sqrt() - r).abs()
                } else {
                    let d_end = |a: f64| {
                        let (qx, qy) = (cx + r * a.cos(), cy + r * a.sin());
                        ((px - qx).powi(2) + (py - qy).powi(2)).sqrt()
                    };
                    d_end(a0).min(d_end(a0 + sweep))
                }
            }
        }
    }

    fn transformed(&self, scale: f64, rot: f64) -> Seg {
        let map = |x: f64, y: f64| {
            let (sx, sy) = (x * scale, y * scale);
            (sx * rot.cos() - sy * rot.sin(), sx * rot.sin() + sy * rot.cos())
        };
        match *self {
            Seg::Line { x0, y0, x1, y1 } => {
                let (a, b) = map(x0, y0);
                let (c, d) = map(x1, y1);
                Seg::Line { x0: a, y0: b, x1: c, y1: d }
            }
            Seg::Arc { cx, cy, r, a0, sweep } => {
                let (ncx, ncy) = map(cx, cy);
                Seg::Arc { cx: ncx, cy: ncy, r: r * scale, a0: a0 + rot, sweep }
            }
        }
    }
}

/// An ideal pattern path: ordered segments with cumulative arc length.
#[derive(Debug, Clone)]
pub struct PiecewisePath {
    segs: Vec<Seg>,
    cum: Vec<f64>,
    total: f64,
    closed: bool,
    /// Axis-aligned footprint of the canonical (unrotated) shape.
    footprint: (f64, f64),
    /// Radius of the smallest origin-centered circle containing the shape.
    circumradius: f64,
}

impl PiecewisePath {
    fn new(segs: Vec<Seg>, closed: bool, footprint: (f64, f64), circumradius: f64) -> Self {
        let mut cum = Vec::with_capacity(segs.len() + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for s in &segs {
            acc += s.len();
            cum.push(acc);
        }
        PiecewisePath { segs, cum, total: acc, closed, footprint, circumradius }
    }

    pub fn total_len(&self) -> f64 {
        self.total
    }

    pub fn closed(&self) -> bool {
        self.closed
    }

    pub fn footprint(&self) -> (f64, f64) {
        self.footprint
    }

    pub fn circumradius(&self) -> f64 {
        self.circumradius
    }

    /// Position at arc length `s` from the path start, clamped to the path.
    pub fn point_at(&self, s: f64) -> (f64, f64) {
        let s = s.clamp(0.0, self.total);
        // Find the segment containing s (few segments; linear scan).
        let mut i = 0;
        while i + 1 < self.segs.len() && s > self.cum[i + 1] {
            i += 1;
        }
        self.segs[i].point_at(s - self.cum[i])
    }

    /// Arc length along the traversal at time `t` for a walker at `speed`:
    /// modular wrap for closed paths, back-and-forth for open ones.
    pub fn arclen_at_time(&self, t: f64, speed: f64) -> f64 {
        let s = speed * t;
        if self.closed {
            s.rem_euclid(self.total)
        } else {
            let u = s.rem_euclid(2.0 * self.total);
            if u <= self.total {
                u
            } else {
                2.0 * self.total - u
            }
        }
    }

    /// Distance from a point to the nearest spot on the path.
    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        self.segs
            .iter()
            .map(|seg| seg.distance_to(x, y))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Canonical pattern dimensions, in meters, chosen so that every shape fits a
/// 10 m square arena at scale 1 under any rotation about the origin.
mod dims {
    pub const STRAIGHT_LEN: f64 = 9.0;
    pub const CIRCLE_R: f64 = 3.5;
    pub const S_STRAIGHT: f64 = 4.6;
    pub const S_RADIUS: f64 = 1.8;
    pub const U_WIDTH: f64 = 5.0;
    pub const U_LEG: f64 = 4.5;
}

/// Builds the ideal path for a pattern, centered at the origin, under the
/// given similarity transform.
pub fn pattern_path(kind: PatternLabel, geometry: &PatternGeometry) -> PiecewisePath {
    use dims::*;
    let (segs, closed, footprint, circumradius): (Vec<Seg>, bool, (f64, f64), f64) = match kind {
        PatternLabel::Straight => {
            let h = STRAIGHT_LEN / 2.0;
            (
                vec![Seg::Line { x0: -h, y0: 0.0, x1: h, y1: 0.0 }],
                false,
                (STRAIGHT_LEN, 0.0),
                h,
            )
        }
        PatternLabel::Circling => (
            vec![Seg::Arc { cx: 0.0, cy: 0.0, r: CIRCLE_R, a0: 0.0, sweep: 2.0 * PI }],
            true,
            (2.0 * CIRCLE_R, 2.0 * CIRCLE_R),
            CIRCLE_R,
        ),
        PatternLabel::SShape => {
            // Three horizontal runs joined by semicircles of opposite
            // orientation at alternating ends.
            let hx = S_STRAIGHT / 2.0;
            let r = S_RADIUS;
            let y = 2.0 * r;
            let segs = vec![
                Seg::Line { x0: -hx, y0: -y, x1: hx, y1: -y },
                Seg::Arc { cx: hx, cy: -r, r, a0: -PI / 2.0, sweep: PI },
                Seg::Line { x0: hx, y0: 0.0, x1: -hx, y1: 0.0 },
                Seg::Arc { cx: -hx, cy: r, r, a0: -PI / 2.0, sweep: -PI },
                Seg::Line { x0: -hx, y0: y, x1: hx, y1: y },
            ];
            let circum = (hx * hx + r * r).sqrt() + r;
            (segs, false, (S_STRAIGHT + 2.0 * r, 2.0 * y), circum)
        }
        PatternLabel::UShape => {
            // Two parallel legs joined by a semicircle, shifted so the
            // bounding box is centered on the origin.
            let r = U_WIDTH / 2.0;
            let cy = -(U_LEG - r) / 2.0;
            let top = cy + U_LEG;
            let segs = vec![
                Seg::Line { x0: -r, y0: top, x1: -r, y1: cy },
                Seg::Arc { cx: 0.0, cy, r, a0: PI, sweep: PI },
                Seg::Line { x0: r, y0: cy, x1: r, y1: top },
            ];
            let circum = (r * r + top * top).sqrt().max(cy.abs() + r);
            (segs, false, (U_WIDTH, U_LEG + r), circum)
        }
    };
    let transformed: Vec<Seg> = segs
        .iter()
        .map(|s| s.transformed(geometry.scale, geometry.rotation_rad))
        .collect();
    let (fw, fh) = footprint;
    PiecewisePath::new(
        transformed,
        closed,
        (fw * geometry.scale, fh * geometry.scale),
        circumradius * geometry.scale,
    )
}

/// Knobs for a single generated trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerateOptions {
    pub duration_s: f64,
    pub speed_mps: f64,
    pub arena_side_m: f64,
    pub geometry: PatternGeometry,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            duration_s: 300.0,
            speed_mps: 1.4,
            arena_side_m: 10.0,
            geometry: PatternGeometry::default(),
        }
    }
}

const MAX_POINTS: usize = 10_000_000;

/// Generates one planar trajectory of `kind`.
///
/// Samples are taken at `i / rate` for `i = 0..ceil(duration * rate)`, so a
/// 300 s trace at 5.91 Hz has exactly 1773 points. With zero noise every
/// point lies on the ideal path. The result is unlabeled-id planar data;
/// callers attach ids and map to geodetic coordinates as needed.
pub fn generate_pattern(
    kind: PatternLabel,
    opts: &GenerateOptions,
    noise: &NoiseModel,
    seed: u64,
) -> Result<Trajectory, TrajectoryError> {
    noise.validate()?;
    for (v, name) in [
        (opts.duration_s, "duration"),
        (opts.speed_mps, "speed"),
        (opts.arena_side_m, "arena side"),
        (opts.geometry.scale, "scale"),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(TrajectoryError::BadArgument(format!("{name} must be positive")));
        }
    }

    let path = pattern_path(kind, &opts.geometry);
    // Rotated shapes are checked against the circle they sweep; axis-aligned
    // ones against their bounding box.
    let needed = if opts.geometry.rotation_rad == 0.0 {
        let (w, h) = path.footprint();
        w.max(h)
    } else {
        2.0 * path.circumradius()
    };
    if needed > opts.arena_side_m {
        return Err(TrajectoryError::ArenaTooSmall { needed, side: opts.arena_side_m });
    }

    // Tolerate representation error in duration * rate so that e.g.
    // 300 * 5.91 counts as exactly 1773 samples.
    let n_f = (opts.duration_s * noise.sample_rate_hz - 1e-9).ceil();
    if !(n_f >= 2.0) {
        return Err(TrajectoryError::BadArgument(
            "duration and rate yield fewer than 2 samples".into(),
        ));
    }
    if n_f > MAX_POINTS as f64 {
        return Err(TrajectoryError::BadArgument(format!(
            "duration and rate yield more than {MAX_POINTS} samples"
        )));
    }
    let n = n_f as usize;

    let mut rng = rng_from_seed(seed);
    let normal = Normal::new(0.0, noise.position_sigma_m)
        .map_err(|e| TrajectoryError::BadArgument(e.to_string()))?;
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        if noise.dropout_prob > 0.0 && rng.random_bool(noise.dropout_prob) {
            continue;
        }
        let t = i as f64 / noise.sample_rate_hz;
        let s = path.arclen_at_time(t, opts.speed_mps);
        let (mut x, mut y) = path.point_at(s);
        if noise.position_sigma_m > 0.0 {
            x += normal.sample(&mut rng);
            y += normal.sample(&mut rng);
        }
        points.push(TrajPoint { c1: x, c2: y, t });
    }
    Trajectory::new(String::new(), Some(kind), CoordinateSystem::Planar, points)
}

/// Recipe for a labeled corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    /// Trajectories per pattern, in [`PatternLabel::ALL`] order.
    pub counts: [usize; 4],
    pub preset: TechPreset,
    pub duration_s: f64,
    pub arena_side_m: f64,
    /// Per-trajectory walking speed is drawn uniformly from this range.
    pub speed_range_mps: (f64, f64),
    /// Per-trajectory shape scale is drawn uniformly from this range.
    pub scale_range: (f64, f64),
    /// Rotate each trajectory by a uniform random angle.
    pub rotate: bool,
    pub dropout_prob: f64,
    /// Tangent-plane origin for geodetic presets.
    pub geodetic_ref: GeodeticRef,
}

impl DatasetSpec {
    /// Default corpus: 19 straight, 25 circling, 30 s-shape, 30 u-shape
    /// trajectories of 300 s each in a 10 m arena.
    pub fn new(preset: TechPreset) -> DatasetSpec {
        DatasetSpec {
            counts: [19, 25, 30, 30],
            preset,
            duration_s: 300.0,
            arena_side_m: 10.0,
            speed_range_mps: (1.2, 1.6),
            scale_range: (0.8, 1.0),
            rotate: true,
            dropout_prob: 0.0,
            geodetic_ref: GeodeticRef::default(),
        }
    }
}

fn uniform_in(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Generates a labeled corpus. Each trajectory gets an independent seed
/// derived from `seed`, plus per-trajectory speed/scale/rotation jitter so
/// that instances of one pattern are not copies of each other.
pub fn generate_dataset(spec: &DatasetSpec, seed: u64) -> Result<Vec<Trajectory>, TrajectoryError> {
    if spec.speed_range_mps.0 > spec.speed_range_mps.1
        || spec.scale_range.0 > spec.scale_range.1
        || !(spec.scale_range.0 > 0.0)
        || !(spec.speed_range_mps.0 > 0.0)
    {
        return Err(TrajectoryError::BadArgument("invalid jitter range".into()));
    }
    let mut noise = spec.preset.noise();
    noise.dropout_prob = spec.dropout_prob;
    let mut out = Vec::with_capacity(spec.counts.iter().sum());
    for (li, &label) in PatternLabel::ALL.iter().enumerate() {
        for j in 0..spec.counts[li] {
            let tseed = derive_seed(seed, &[li as u64, j as u64]);
            let mut jrng = rng_from_seed(derive_seed(tseed, &[0]));
            let speed = uniform_in(&mut jrng, spec.speed_range_mps);
            let scale = uniform_in(&mut jrng, spec.scale_range);
            let rotation = if spec.rotate { jrng.random_range(0.0..2.0 * PI) } else { 0.0 };
            let opts = GenerateOptions {
                duration_s: spec.duration_s,
                speed_mps: speed,
                arena_side_m: spec.arena_side_m,
                geometry: PatternGeometry { scale, rotation_rad: rotation },
            };
            let mut traj = generate_pattern(label, &opts, &noise, derive_seed(tseed, &[1]))?;
            if spec.preset.system() == CoordinateSystem::Geodetic {
                traj = to_geodetic(&traj, spec.geodetic_ref)?;
            }
            traj.id = format!("{}-{:03}", label.name(), j);
            out.push(traj);
        }
    }
    Ok(out)
}
