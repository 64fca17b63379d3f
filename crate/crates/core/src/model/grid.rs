//! Grid geometry: local projection, cell indexing, cropping, and discretization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Dataset, ModelError, Point, RawRecord, Trajectory};
use crate::dgh::{Hierarchies, Label};

/// Mean Earth radius; the local equirectangular projection needs no geodesy
/// beyond this.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

const DAY_SECONDS: i64 = 86_400;

/// Geometry of the discretization grid.
///
/// Spatial cells are `epsilon_m`-meter squares counted east (x) and north (y)
/// from the origin, which sits at the grid's southwest corner. Time is binned
/// by time of day (`timestamp mod 86400`, dates discarded) into `epsilon_t_s`
/// second slots. Each axis carries `2^bits` cells; records outside any extent
/// are dropped by [`discretize`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub epsilon_m: f64,
    pub epsilon_t_s: f64,
    pub bits_x: u8,
    pub bits_y: u8,
    pub bits_t: u8,
}

impl GridSpec {
    pub fn new(
        origin_lat: f64,
        origin_lon: f64,
        epsilon_m: f64,
        epsilon_t_s: f64,
        bits_x: u32,
        bits_y: u32,
        bits_t: u32,
    ) -> Result<GridSpec, ModelError> {
        // Depth validation happens via the hierarchies; reuse it for the error.
        Hierarchies::new(bits_x, bits_y, bits_t)?;
        let grid = GridSpec {
            origin_lat,
            origin_lon,
            epsilon_m,
            epsilon_t_s,
            bits_x: bits_x as u8,
            bits_y: bits_y as u8,
            bits_t: bits_t as u8,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Revalidate (e.g. after deserializing a meta sidecar).
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.epsilon_m.is_finite() && self.epsilon_m > 0.0) {
            return Err(ModelError::InvalidEpsilon(self.epsilon_m));
        }
        if !(self.epsilon_t_s.is_finite() && self.epsilon_t_s > 0.0) {
            return Err(ModelError::InvalidEpsilonT(self.epsilon_t_s));
        }
        let lat_ok = self.origin_lat.is_finite() && self.origin_lat.abs() <= 90.0;
        let lon_ok = self.origin_lon.is_finite() && self.origin_lon.abs() <= 180.0;
        if !(lat_ok && lon_ok) {
            return Err(ModelError::InvalidOrigin(self.origin_lat, self.origin_lon));
        }
        Hierarchies::new(self.bits_x as u32, self.bits_y as u32, self.bits_t as u32)?;
        Ok(())
    }

    pub fn hierarchies(&self) -> Hierarchies {
        Hierarchies::new(self.bits_x as u32, self.bits_y as u32, self.bits_t as u32)
            .expect("grid was validated")
    }

    pub fn cells_x(&self) -> u64 {
        1u64 << self.bits_x
    }

    pub fn cells_y(&self) -> u64 {
        1u64 << self.bits_y
    }

    pub fn cells_t(&self) -> u64 {
        1u64 << self.bits_t
    }

    /// Meters east and north of the grid origin (local equirectangular).
    pub fn project(&self, lat: f64, lon: f64) -> (f64, f64) {
        let dx = (lon - self.origin_lon).to_radians()
            * self.origin_lat.to_radians().cos()
            * EARTH_RADIUS_M;
        let dy = (lat - self.origin_lat).to_radians() * EARTH_RADIUS_M;
        (dx, dy)
    }

    /// Approximate lat/lon of a cell center; the inverse of [`Self::project`].
    pub fn cell_center(&self, cell_x: u32, cell_y: u32) -> (f64, f64) {
        let x_m = (cell_x as f64 + 0.5) * self.epsilon_m;
        let y_m = (cell_y as f64 + 0.5) * self.epsilon_m;
        let lat = self.origin_lat + (y_m / EARTH_RADIUS_M).to_degrees();
        let lon = self.origin_lon
            + (x_m / (EARTH_RADIUS_M * self.origin_lat.to_radians().cos())).to_degrees();
        (lat, lon)
    }

    /// Time-of-day bin for a UTC timestamp, or `None` past the tree's extent.
    pub fn time_bin(&self, timestamp: i64) -> Option<u32> {
        let in_day = timestamp.rem_euclid(DAY_SECONDS) as f64;
        let bin = (in_day / self.epsilon_t_s).floor();
        if bin >= 0.0 && (bin as u64) < self.cells_t() {
            Some(bin as u32)
        } else {
            None
        }
    }

    /// Grid point for a record, or `None` when it falls outside the extents.
    pub fn cell_of(&self, lat: f64, lon: f64, timestamp: i64) -> Option<Point> {
        let (dx, dy) = self.project(lat, lon);
        let cx = (dx / self.epsilon_m).floor();
        let cy = (dy / self.epsilon_m).floor();
        if cx < 0.0 || cy < 0.0 || cx as u64 >= self.cells_x() || cy as u64 >= self.cells_y() {
            return None;
        }
        let t = self.time_bin(timestamp)?;
        Some(Point {
            x: Label::leaf(cx as u32, self.bits_x),
            y: Label::leaf(cy as u32, self.bits_y),
            t: Label::leaf(t, self.bits_t),
        })
    }
}

/// Southwest corner of a `width_m` x `height_m` box centered on a coordinate;
/// the natural grid origin for a crop of that box.
pub fn southwest_origin(
    center_lat: f64,
    center_lon: f64,
    width_m: f64,
    height_m: f64,
) -> (f64, f64) {
    let lat = center_lat - (height_m / 2.0 / EARTH_RADIUS_M).to_degrees();
    let lon = center_lon
        - (width_m / 2.0 / (EARTH_RADIUS_M * center_lat.to_radians().cos())).to_degrees();
    (lat, lon)
}

/// Keep only records inside the axis-aligned box (bounds inclusive) centered
/// on `(center_lat, center_lon)`.
pub fn crop(
    records: Vec<RawRecord>,
    center_lat: f64,
    center_lon: f64,
    width_m: f64,
    height_m: f64,
) -> Vec<RawRecord> {
    let cos_lat = center_lat.to_radians().cos();
    records
        .into_iter()
        .filter(|r| {
            let dx = (r.lon - center_lon).to_radians() * cos_lat * EARTH_RADIUS_M;
            let dy = (r.lat - center_lat).to_radians() * EARTH_RADIUS_M;
            dx.abs() <= width_m / 2.0 && dy.abs() <= height_m / 2.0
        })
        .collect()
}

/// Result of snapping raw records to a grid.
#[derive(Clone, Debug)]
pub struct Discretized {
    pub dataset: Dataset,
    /// Records dropped for falling outside the spatial or temporal extent.
    pub dropped_records: usize,
}

/// Snap records to grid cells and group them into per-id trajectories.
///
/// Records of one id are sorted by timestamp (stable, so input order breaks
/// ties); trajectories come out in id order. Records outside the grid extents
/// are dropped and counted. An empty result is an error.
pub fn discretize(records: &[RawRecord], grid: &GridSpec) -> Result<Discretized, ModelError> {
    grid.validate()?;
    let mut groups: BTreeMap<&str, Vec<(i64, Point)>> = BTreeMap::new();
    let mut dropped = 0usize;
    for r in records {
        match grid.cell_of(r.lat, r.lon, r.timestamp) {
            Some(p) => groups.entry(r.id.as_str()).or_default().push((r.timestamp, p)),
            None => dropped += 1,
        }
    }
    if groups.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let trajectories = groups
        .into_iter()
        .map(|(id, mut stamped)| {
            stamped.sort_by_key(|(ts, _)| *ts);
            Trajectory::new(id, stamped.into_iter().map(|(_, p)| p).collect())
        })
        .collect();
    let dataset = Dataset::new(trajectories, grid.clone())?;
    Ok(Discretized { dataset, dropped_records: dropped })
}
