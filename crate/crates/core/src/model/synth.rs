//! Seeded synthetic datasets: random walks on the grid.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, GridSpec, ModelError, Point, Trajectory};
use crate::dgh::Label;

/// How trajectory lengths are drawn.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LengthDistribution {
    /// Uniform over `min..=max`.
    Uniform { min: usize, max: usize },
    /// Truncated geometric starting at `min`: each extra point happens with
    /// probability `1 - p`, capped at `max`. Skewed-short, like real GPS logs.
    Geometric { p: f64, min: usize, max: usize },
}

impl LengthDistribution {
    fn validate(&self) -> Result<(), ModelError> {
        let (min, max) = match *self {
            LengthDistribution::Uniform { min, max } => (min, max),
            LengthDistribution::Geometric { p, min, max } => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(ModelError::InvalidSynthParams(format!(
                        "geometric p must be in (0, 1), got {p}"
                    )));
                }
                (min, max)
            }
        };
        if min < 1 || min > max {
            return Err(ModelError::InvalidSynthParams(format!(
                "length range must satisfy 1 <= min <= max, got {min}..={max}"
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        match *self {
            LengthDistribution::Uniform { min, max } => rng.random_range(min..=max),
            LengthDistribution::Geometric { p, min, max } => {
                let mut len = min;
                while len < max && rng.random::<f64>() >= p {
                    len += 1;
                }
                len
            }
        }
    }
}

/// Generate `n` seeded random walks on the grid.
///
/// Each walk starts in a uniform random cell, moves by at most one cell per
/// step in x and y (clamped to the extent), and advances one time bin per
/// step, so points are in time order. Ids are zero-padded (`w000042`) so
/// lexicographic and numeric order agree.
pub fn random_walk_dataset(
    grid: &GridSpec,
    n: usize,
    lengths: &LengthDistribution,
    seed: u64,
) -> Result<Dataset, ModelError> {
    grid.validate()?;
    lengths.validate()?;
    if n == 0 {
        return Err(ModelError::InvalidSynthParams("n must be at least 1".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cells_x, cells_y, cells_t) = (grid.cells_x(), grid.cells_y(), grid.cells_t());
    let mut trajectories = Vec::with_capacity(n);
    for i in 0..n {
        let len = lengths.sample(&mut rng);
        let mut cx = rng.random_range(0..cells_x) as i64;
        let mut cy = rng.random_range(0..cells_y) as i64;
        // Start early enough that the walk can advance a bin per step.
        let t_slack = cells_t.saturating_sub(len as u64).saturating_add(1);
        let mut ct = rng.random_range(0..t_slack.max(1));
        let mut points = Vec::with_capacity(len);
        for step in 0..len {
            if step > 0 {
                cx = (cx + rng.random_range(-1i64..=1)).clamp(0, cells_x as i64 - 1);
                cy = (cy + rng.random_range(-1i64..=1)).clamp(0, cells_y as i64 - 1);
                ct = (ct + 1).min(cells_t - 1);
            }
            points.push(Point {
                x: Label::leaf(cx as u32, grid.bits_x),
                y: Label::leaf(cy as u32, grid.bits_y),
                t: Label::leaf(ct as u32, grid.bits_t),
            });
        }
        trajectories.push(Trajectory::new(format!("w{i:06}"), points));
    }
    Dataset::new(trajectories, grid.clone())
}
