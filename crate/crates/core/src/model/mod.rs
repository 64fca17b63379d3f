//! Dataset model: raw GPS records, grid discretization, trajectories, and the
//! on-disk CSV formats.
//!
//! A trajectory point lives on a grid: square spatial cells of `epsilon_m`
//! meters indexed from a southwest origin, and time-of-day bins of
//! `epsilon_t_s` seconds. Cell indices are stored as leaf labels of the
//! per-attribute generalization hierarchies, so "one cell" and "leaf node" are
//! the same thing throughout.

mod csvio;
mod grid;
mod ingest;
mod synth;

pub use csvio::{
    read_anonymized_csv, read_canonical_csv, write_anonymized_csv, write_canonical_csv,
    PhysicalParams, ReleasedTrajectory, ANONYMIZED_HEADER, CANONICAL_HEADER,
};
pub use grid::{crop, discretize, southwest_origin, Discretized, GridSpec, EARTH_RADIUS_M};
pub use ingest::{ingest_geolife, ingest_tdrive, IngestOutcome, RawRecord};
pub use synth::{random_walk_dataset, LengthDistribution};

use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dgh::{DghError, Hierarchies, Label};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Dgh(#[from] DghError),
    #[error("grid cell size must be a positive finite length, got {0}")]
    InvalidEpsilon(f64),
    #[error("time bin width must be a positive finite duration, got {0}")]
    InvalidEpsilonT(f64),
    #[error("grid origin must be finite lat/lon in range, got ({0}, {1})")]
    InvalidOrigin(f64, f64),
    #[error("dataset contains no trajectories")]
    EmptyDataset,
    #[error("trajectory {0:?} has no points")]
    EmptyTrajectory(String),
    #[error("duplicate trajectory id {0:?}")]
    DuplicateTrajectoryId(String),
    #[error("trajectory {id:?}: label '{label}' is not a leaf of the {attribute} hierarchy (depth {depth})")]
    NotALeaf { id: String, attribute: &'static str, label: String, depth: u8 },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no data files found under {0}")]
    NoInputFiles(PathBuf),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trajectory id {0:?} contains a character that cannot be written to CSV")]
    UnwritableId(String),
    #[error("invalid synthetic data parameters: {0}")]
    InvalidSynthParams(String),
}

/// A grid-resolved trajectory point: one leaf label per attribute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub x: Label,
    pub y: Label,
    pub t: Label,
}

impl Point {
    pub fn new(x: Label, y: Label, t: Label) -> Point {
        Point { x, y, t }
    }

    pub fn generalized(&self) -> GeneralizedPoint {
        GeneralizedPoint { x: self.x, y: self.y, t: self.t }
    }

    pub fn label(&self, attribute: crate::dgh::Attribute) -> Label {
        match attribute {
            crate::dgh::Attribute::X => self.x,
            crate::dgh::Attribute::Y => self.y,
            crate::dgh::Attribute::T => self.t,
        }
    }
}

/// A point whose labels may sit anywhere in their hierarchies, root included.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GeneralizedPoint {
    pub x: Label,
    pub y: Label,
    pub t: Label,
}

impl GeneralizedPoint {
    pub const ROOT: GeneralizedPoint =
        GeneralizedPoint { x: Label::ROOT, y: Label::ROOT, t: Label::ROOT };

    pub fn new(x: Label, y: Label, t: Label) -> GeneralizedPoint {
        GeneralizedPoint { x, y, t }
    }

    pub fn is_fully_suppressed(&self) -> bool {
        self.x.is_root() && self.y.is_root() && self.t.is_root()
    }

    pub fn label(&self, attribute: crate::dgh::Attribute) -> Label {
        match attribute {
            crate::dgh::Attribute::X => self.x,
            crate::dgh::Attribute::Y => self.y,
            crate::dgh::Attribute::T => self.t,
        }
    }
}

impl From<Point> for GeneralizedPoint {
    fn from(p: Point) -> GeneralizedPoint {
        p.generalized()
    }
}

/// One trajectory: an opaque id and its grid points in time order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    pub id: String,
    pub points: Vec<Point>,
}

impl Trajectory {
    pub fn new(id: impl Into<String>, points: Vec<Point>) -> Trajectory {
        Trajectory { id: id.into(), points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A discretized trajectory dataset bound to the grid that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    trajectories: Vec<Trajectory>,
    grid: GridSpec,
}

impl Dataset {
    /// Validates that the dataset is non-empty, ids are unique, every
    /// trajectory has points, and every label is a leaf of its hierarchy.
    pub fn new(trajectories: Vec<Trajectory>, grid: GridSpec) -> Result<Dataset, ModelError> {
        grid.validate()?;
        if trajectories.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        let mut seen = HashSet::new();
        for tr in &trajectories {
            if !seen.insert(tr.id.as_str()) {
                return Err(ModelError::DuplicateTrajectoryId(tr.id.clone()));
            }
            if tr.points.is_empty() {
                return Err(ModelError::EmptyTrajectory(tr.id.clone()));
            }
            for p in &tr.points {
                for (attribute, label, depth) in [
                    ("x", p.x, grid.bits_x),
                    ("y", p.y, grid.bits_y),
                    ("t", p.t, grid.bits_t),
                ] {
                    if label.bit_len() != depth {
                        return Err(ModelError::NotALeaf {
                            id: tr.id.clone(),
                            attribute,
                            label: label.to_string(),
                            depth,
                        });
                    }
                }
            }
        }
        Ok(Dataset { trajectories, grid })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn hierarchies(&self) -> Hierarchies {
        self.grid.hierarchies()
    }

    pub fn n_trajectories(&self) -> usize {
        self.trajectories.len()
    }

    pub fn n_points(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    pub fn trajectory_by_id(&self, id: &str) -> Option<&Trajectory> {
        self.trajectories.iter().find(|tr| tr.id == id)
    }
}

/// Ingestion statistics sidecar written next to a canonical CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub grid: GridSpec,
    pub trajectories: usize,
    pub samples: usize,
    pub avg_samples_per_trajectory: f64,
    pub dropped_records: usize,
    pub malformed_lines: usize,
}

impl DatasetMeta {
    pub fn describe(dataset: &Dataset, dropped_records: usize, malformed_lines: usize) -> DatasetMeta {
        let samples = dataset.n_points();
        let trajectories = dataset.n_trajectories();
        DatasetMeta {
            grid: dataset.grid().clone(),
            trajectories,
            samples,
            avg_samples_per_trajectory: samples as f64 / trajectories as f64,
            dropped_records,
            malformed_lines,
        }
    }
}
