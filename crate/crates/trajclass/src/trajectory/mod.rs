//! Trajectory types, CSV serialization, and dataset manifests.
//!
//! A trajectory is a time-ordered sequence of positions in one of two
//! coordinate systems: geodetic (latitude/longitude degrees, as produced by
//! satellite receivers) or planar (meters, as produced by local ranging
//! systems). Labels name the movement pattern the trajectory follows.

mod generate;

pub use generate::{
    generate_dataset, generate_pattern, pattern_path, DatasetSpec, GenerateOptions, NoiseModel,
    PatternGeometry, PiecewisePath, TechPreset,
};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in meters, shared by the geodetic mapping and the
/// haversine features.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("trajectory data is not valid UTF-8")]
    Utf8,
    #[error("line 1: expected header {expected:?}, found {found:?}")]
    Header { expected: &'static str, found: String },
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
    #[error("line {line}: timestamps must be strictly increasing")]
    TimeOrder { line: usize },
    #[error("trajectory has {rows} data rows; at least 2 are required")]
    TooShort { rows: usize },
    #[error("line {line}: latitude/longitude outside valid range")]
    CoordinateRange { line: usize },
    #[error("arena side {side} m is too small for pattern footprint {needed:.3} m")]
    ArenaTooSmall { needed: f64, side: f64 },
    #[error("invalid argument: {0}")]
    BadArgument(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("unknown coordinate system {0:?}")]
    UnknownSystem(String),
    #[error("trajectory {id:?} has no label; dataset entries must be labeled")]
    Unlabeled { id: String },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("manifest JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateSystem {
    /// Latitude/longitude in degrees.
    Geodetic,
    /// x/y in meters.
    Planar,
}

impl CoordinateSystem {
    pub fn csv_header(self) -> &'static str {
        match self {
            CoordinateSystem::Geodetic => "lat,lon,t",
            CoordinateSystem::Planar => "x,y,t",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CoordinateSystem::Geodetic => "geodetic",
            CoordinateSystem::Planar => "planar",
        }
    }
}

impl FromStr for CoordinateSystem {
    type Err = TrajectoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "geodetic" => Ok(CoordinateSystem::Geodetic),
            "planar" => Ok(CoordinateSystem::Planar),
            other => Err(TrajectoryError::UnknownSystem(other.to_string())),
        }
    }
}

/// The four movement patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PatternLabel {
    #[serde(rename = "straight")]
    Straight,
    #[serde(rename = "circling")]
    Circling,
    #[serde(rename = "s-shape")]
    SShape,
    #[serde(rename = "u-shape")]
    UShape,
}

impl PatternLabel {
    pub const ALL: [PatternLabel; 4] = [
        PatternLabel::Straight,
        PatternLabel::Circling,
        PatternLabel::SShape,
        PatternLabel::UShape,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PatternLabel::Straight => "straight",
            PatternLabel::Circling => "circling",
            PatternLabel::SShape => "s-shape",
            PatternLabel::UShape => "u-shape",
        }
    }
}

impl fmt::Display for PatternLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PatternLabel {
    type Err = TrajectoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PatternLabel::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| TrajectoryError::UnknownLabel(s.to_string()))
    }
}

/// One position sample. `c1`/`c2` are lat/lon for geodetic trajectories and
/// x/y for planar ones; `t` is seconds from trajectory start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajPoint {
    pub c1: f64,
    pub c2: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: String,
    /// Pattern label, when known. Files parsed outside a dataset manifest
    /// carry no label.
    pub label: Option<PatternLabel>,
    pub system: CoordinateSystem,
    pub points: Vec<TrajPoint>,
}

impl Trajectory {
    pub fn new(
        id: impl Into<String>,
        label: Option<PatternLabel>,
        system: CoordinateSystem,
        points: Vec<TrajPoint>,
    ) -> Result<Trajectory, TrajectoryError> {
        let t = Trajectory { id: id.into(), label, system, points };
        t.validate()?;
        Ok(t)
    }

    /// Checks the structural invariants: at least two samples, finite values,
    /// strictly increasing timestamps, and coordinates in range for the
    /// system. Line numbers refer to CSV rows (data starts at line 2).
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        if self.points.len() < 2 {
            return Err(TrajectoryError::TooShort { rows: self.points.len() });
        }
        for (i, p) in self.points.iter().enumerate() {
            let line = i + 2;
            if !p.c1.is_finite() || !p.c2.is_finite() || !p.t.is_finite() {
                return Err(TrajectoryError::Row {
                    line,
                    message: "non-finite value".to_string(),
                });
            }
            if self.system == CoordinateSystem::Geodetic
                && (p.c1.abs() > 90.0 || p.c2.abs() > 180.0)
            {
                return Err(TrajectoryError::CoordinateRange { line });
            }
            if i > 0 && p.t <= self.points[i - 1].t {
                return Err(TrajectoryError::TimeOrder { line });
            }
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        match (self.points.first(), self.points.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}

/// Reference origin for mapping planar meters onto latitude/longitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticRef {
    pub lat: f64,
    pub lon: f64,
}

impl Default for GeodeticRef {
    fn default() -> Self {
        GeodeticRef { lat: 52.0, lon: 4.0 }
    }
}

/// Maps a planar trajectory onto the sphere via a local tangent plane at
/// `origin`: x is meters east, y is meters north. Valid for extents that are
/// tiny against the Earth radius, which holds for arena-scale tracks.
pub fn to_geodetic(traj: &Trajectory, origin: GeodeticRef) -> Result<Trajectory, TrajectoryError> {
    if traj.system != CoordinateSystem::Planar {
        return Err(TrajectoryError::BadArgument(
            "to_geodetic expects a planar trajectory".to_string(),
        ));
    }
    if origin.lat.abs() >= 89.0 {
        return Err(TrajectoryError::BadArgument(
            "reference latitude too close to a pole".to_string(),
        ));
    }
    let m_per_deg_lat = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
    let m_per_deg_lon = m_per_deg_lat * origin.lat.to_radians().cos();
    let points = traj
        .points
        .iter()
        .map(|p| TrajPoint {
            c1: origin.lat + p.c2 / m_per_deg_lat,
            c2: origin.lon + p.c1 / m_per_deg_lon,
            t: p.t,
        })
        .collect();
    Trajectory::new(traj.id.clone(), traj.label, CoordinateSystem::Geodetic, points)
}

/// Serializes a trajectory to CSV: a header naming the coordinate columns,
/// then one row per sample. Floats are written with the shortest
/// representation that round-trips exactly.
pub fn write_trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(traj.points.len() * 24 + 8);
    out.push_str(traj.system.csv_header());
    out.push('\n');
    for p in &traj.points {
        out.push_str(&format!("{},{},{}\n", p.c1, p.c2, p.t));
    }
    out
}

/// Parses trajectory CSV bytes. The header must match the coordinate system;
/// errors carry 1-based line numbers.
pub fn parse_trajectory_csv(
    bytes: &[u8],
    system: CoordinateSystem,
) -> Result<Trajectory, TrajectoryError> {
    let text = std::str::from_utf8(bytes).map_err(|_| TrajectoryError::Utf8)?;
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
    let expected = system.csv_header();
    let header = lines.next().unwrap_or("");
    let norm: Vec<&str> = header.split(',').map(str::trim).collect();
    if norm.join(",") != expected {
        return Err(TrajectoryError::Header { expected, found: header.to_string() });
    }
    let mut points = Vec::new();
    for (idx, raw) in lines.enumerate() {
        let line = idx + 2;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 3 {
            return Err(TrajectoryError::Row {
                line,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let mut vals = [0.0f64; 3];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f.trim().parse::<f64>().map_err(|_| TrajectoryError::Row {
                line,
                message: format!("cannot parse {:?} as a number", f.trim()),
            })?;
        }
        points.push(TrajPoint { c1: vals[0], c2: vals[1], t: vals[2] });
    }
    Trajectory::new(String::new(), None, system, points)
}

/// One dataset entry: where a trajectory lives and what it is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub label: PatternLabel,
    pub system: CoordinateSystem,
    /// CSV path relative to the manifest file.
    pub path: String,
}

/// Dataset index: the seed it was generated from, the technology preset (if
/// any), and the member trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub trajectories: Vec<ManifestEntry>,
}

/// Writes every trajectory as `<id>.csv` next to a `manifest.json` in `dir`.
/// Returns the manifest path. All trajectories must be labeled and ids must
/// be unique.
pub fn write_dataset(
    dir: &Path,
    trajectories: &[Trajectory],
    seed: u64,
    preset: Option<String>,
) -> Result<PathBuf, TrajectoryError> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(trajectories.len());
    let mut seen = std::collections::HashSet::new();
    for traj in trajectories {
        let label = traj
            .label
            .ok_or_else(|| TrajectoryError::Unlabeled { id: traj.id.clone() })?;
        if traj.id.is_empty() || !seen.insert(traj.id.clone()) {
            return Err(TrajectoryError::Manifest(format!(
                "duplicate or empty trajectory id {:?}",
                traj.id
            )));
        }
        let file = format!("{}.csv", traj.id);
        std::fs::write(dir.join(&file), write_trajectory_csv(traj))?;
        entries.push(ManifestEntry {
            id: traj.id.clone(),
            label,
            system: traj.system,
            path: file,
        });
    }
    let manifest = DatasetManifest { seed, preset, trajectories: entries };
    let path = dir.join("manifest.json");
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    std::fs::write(&path, json)?;
    Ok(path)
}

/// Loads a dataset from its manifest, parsing and validating every member
/// CSV and attaching ids and labels from the manifest.
pub fn load_dataset(
    manifest_path: &Path,
) -> Result<(DatasetManifest, Vec<Trajectory>), TrajectoryError> {
    let text = std::fs::read_to_string(manifest_path)?;
    let manifest: DatasetManifest = serde_json::from_str(&text)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut out = Vec::with_capacity(manifest.trajectories.len());
    for entry in &manifest.trajectories {
        let bytes = std::fs::read(base.join(&entry.path)).map_err(|e| {
            TrajectoryError::Manifest(format!("cannot read {:?}: {e}", entry.path))
        })?;
        let mut traj = parse_trajectory_csv(&bytes, entry.system).map_err(|e| {
            TrajectoryError::Manifest(format!("{}: {e}", entry.path))
        })?;
        traj.id = entry.id.clone();
        traj.label = Some(entry.label);
        out.push(traj);
    }
    Ok((manifest, out))
}
