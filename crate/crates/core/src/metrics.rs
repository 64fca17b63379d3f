//! Evaluation of anonymized datasets: information loss, released area,
//! k-anonymity verification, achieved-k statistics, and length inflation,
//! plus the serializable per-run report.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::AlignmentStructure;
use crate::cluster::AnonymizedDataset;
use crate::model::{Dataset, GeneralizedPoint, GridSpec, Trajectory};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("released dataset names unknown trajectory '{0}'")]
    UnknownMember(String),
    #[error("trajectory '{0}' is released more than once")]
    DuplicateMember(String),
    #[error("trajectory '{0}' is missing from the released dataset")]
    MissingMember(String),
    #[error("inconsistent alignment structure for trajectory '{id}': {detail}")]
    InconsistentStructure { id: String, detail: String },
    #[error("no released locations to average over")]
    EmptyInput,
}

/// Bits lost per attribute; losses are additive over attributes and points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeLoss {
    pub x: u64,
    pub y: u64,
    pub t: u64,
}

impl AttributeLoss {
    pub fn total(&self) -> u64 {
        self.x + self.y + self.t
    }
}

impl std::ops::AddAssign for AttributeLoss {
    fn add_assign(&mut self, rhs: AttributeLoss) {
        self.x += rhs.x;
        self.y += rhs.y;
        self.t += rhs.t;
    }
}

/// Bits `original` loses when released as `head` under `structure`: at every
/// position the member occupies, each attribute drops from its own label depth
/// to the released label depth. Gap positions cost this member nothing.
pub fn trajectory_loss(
    original: &Trajectory,
    head: &[GeneralizedPoint],
    structure: &AlignmentStructure,
) -> Result<AttributeLoss, MetricsError> {
    let inconsistent = |detail: String| MetricsError::InconsistentStructure {
        id: original.id.clone(),
        detail,
    };
    if structure.output_len() != head.len() {
        return Err(inconsistent(format!(
            "structure covers {} released positions but the head has {}",
            structure.output_len(),
            head.len()
        )));
    }
    if !structure.is_consistent(original.points.len()) {
        return Err(inconsistent(format!(
            "structure does not map the {} original points monotonically",
            original.points.len()
        )));
    }
    let mut loss = AttributeLoss::default();
    for (o, slot) in structure.positions().iter().enumerate() {
        let Some(i) = slot else { continue };
        let p = original.points[*i];
        let g = head[o];
        if !(g.x.is_prefix_of(&p.x) && g.y.is_prefix_of(&p.y) && g.t.is_prefix_of(&p.t)) {
            return Err(inconsistent(format!(
                "released position {o} is not an ancestor of original point {i}"
            )));
        }
        loss.x += u64::from(p.x.bit_len() - g.x.bit_len());
        loss.y += u64::from(p.y.bit_len() - g.y.bit_len());
        loss.t += u64::from(p.t.bit_len() - g.t.bit_len());
    }
    Ok(loss)
}

/// Check that the released dataset names every dataset trajectory exactly once
/// and yield `(member, cluster_index, member_slot)` in released order.
fn check_one_to_one<'a>(
    dataset: &'a Dataset,
    released: &AnonymizedDataset,
) -> Result<Vec<(&'a Trajectory, usize, usize)>, MetricsError> {
    let mut seen: HashSet<&str> = HashSet::with_capacity(dataset.n_trajectories());
    let mut members = Vec::with_capacity(dataset.n_trajectories());
    for (ci, cluster) in released.clusters.iter().enumerate() {
        for (mi, id) in cluster.members.iter().enumerate() {
            let tr = dataset
                .trajectory_by_id(id)
                .ok_or_else(|| MetricsError::UnknownMember(id.clone()))?;
            if !seen.insert(id) {
                return Err(MetricsError::DuplicateMember(id.clone()));
            }
            members.push((tr, ci, mi));
        }
    }
    for tr in dataset.trajectories() {
        if !seen.contains(tr.id.as_str()) {
            return Err(MetricsError::MissingMember(tr.id.clone()));
        }
    }
    Ok(members)
}

/// Total and per-attribute bits the whole dataset loses in the release.
pub fn dataset_loss(
    dataset: &Dataset,
    released: &AnonymizedDataset,
) -> Result<AttributeLoss, MetricsError> {
    let mut total = AttributeLoss::default();
    for (tr, ci, mi) in check_one_to_one(dataset, released)? {
        let cluster = &released.clusters[ci];
        total += trajectory_loss(tr, &cluster.head, &cluster.structures[mi])?;
    }
    Ok(total)
}

/// The loss split the clustering strategies steer by.
///
/// `part_a` (fixed by the dataset) is the cost of suppressing everything;
/// `part_b` is the information the released heads retain, counted once per
/// member. `part_a - part_b` equals the true dataset loss exactly when every
/// position a member does not occupy is fully suppressed in its head；
/// `uncovered_nonroot` counts the (member, position) pairs violating that.
/// Progressive alignment can never produce such a pair: gaps are released as
/// fully suppressed positions and stay fully suppressed in later folds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LossDecomposition {
    pub part_a: u64,
    pub part_b: u64,
    pub uncovered_nonroot: usize,
}

pub fn loss_decomposition(
    dataset: &Dataset,
    released: &AnonymizedDataset,
) -> Result<LossDecomposition, MetricsError> {
    check_one_to_one(dataset, released)?;
    let part_a: u64 = dataset
        .trajectories()
        .iter()
        .flat_map(|tr| &tr.points)
        .map(|p| u64::from(p.x.bit_len()) + u64::from(p.y.bit_len()) + u64::from(p.t.bit_len()))
        .sum();
    let mut part_b = 0u64;
    let mut uncovered_nonroot = 0usize;
    for cluster in &released.clusters {
        let head_bits: u64 = cluster
            .head
            .iter()
            .map(|g| u64::from(g.x.bit_len()) + u64::from(g.y.bit_len()) + u64::from(g.t.bit_len()))
            .sum();
        part_b += head_bits * cluster.members.len() as u64;
        for s in &cluster.structures {
            for (o, slot) in s.positions().iter().enumerate() {
                if slot.is_none() && !cluster.head[o].is_fully_suppressed() {
                    uncovered_nonroot += 1;
                }
            }
        }
    }
    Ok(LossDecomposition { part_a, part_b, uncovered_nonroot })
}

/// Ground area (m²) a released position could denote: each spatial label
/// covers a dyadic run of grid cells, so the bounding rectangle is the
/// per-axis leaf count times the cell size.
pub fn released_area(p: &GeneralizedPoint, grid: &GridSpec) -> f64 {
    let h = grid.hierarchies();
    let cells = h.x.lf(p.x) as u128 * h.y.lf(p.y) as u128;
    cells as f64 * grid.epsilon_m * grid.epsilon_m
}

/// Mean released area over member locations: each position of each cluster
/// head counts once per member that has a real (non-gap) point there, so
/// fully padded positions never dilute the average.
pub fn avg_area_per_location(released: &AnonymizedDataset) -> Result<f64, MetricsError> {
    let h = released.grid.hierarchies();
    let mut cell_sum: u128 = 0;
    let mut locations: u64 = 0;
    for cluster in &released.clusters {
        for (o, g) in cluster.head.iter().enumerate() {
            let occupants = cluster
                .structures
                .iter()
                .filter(|s| s.positions()[o].is_some())
                .count() as u64;
            if occupants > 0 {
                cell_sum += u128::from(occupants) * (h.x.lf(g.x) as u128 * h.y.lf(g.y) as u128);
                locations += occupants;
            }
        }
    }
    if locations == 0 {
        return Err(MetricsError::EmptyInput);
    }
    Ok(cell_sum as f64 * released.grid.epsilon_m * released.grid.epsilon_m / locations as f64)
}

/// Result of grouping released sequences by exact equality.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KAnonymity {
    pub holds: bool,
    pub n_groups: usize,
    /// Sizes of every group smaller than the required k, ascending.
    pub offending_group_sizes: Vec<usize>,
}

fn equality_groups<'a>(
    sequences: impl IntoIterator<Item = &'a [GeneralizedPoint]>,
) -> BTreeMap<&'a [GeneralizedPoint], usize> {
    let mut groups = BTreeMap::new();
    for seq in sequences {
        *groups.entry(seq).or_insert(0) += 1;
    }
    groups
}

/// A release is k-anonymous iff every released sequence is shared by at least
/// k members (equality across cluster boundaries counts).
pub fn verify_k_anonymity<'a>(
    sequences: impl IntoIterator<Item = &'a [GeneralizedPoint]>,
    k: usize,
) -> KAnonymity {
    let groups = equality_groups(sequences);
    let mut offending: Vec<usize> =
        groups.values().copied().filter(|&size| size < k).collect();
    offending.sort_unstable();
    KAnonymity { holds: offending.is_empty(), n_groups: groups.len(), offending_group_sizes: offending }
}

/// Per-member anonymity achieved: the size of each member's equality group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AchievedK {
    /// Mean equality-group size over members.
    pub avg_achieved_k: f64,
    /// Percentage (0..=100) of members whose group is smaller than k.
    pub pct_under_k: f64,
}

pub fn achieved_k_stats<'a>(
    sequences: impl IntoIterator<Item = &'a [GeneralizedPoint]>,
    k: usize,
) -> Result<AchievedK, MetricsError> {
    let groups = equality_groups(sequences);
    let members: u64 = groups.values().map(|&s| s as u64).sum();
    if members == 0 {
        return Err(MetricsError::EmptyInput);
    }
    let weighted: u64 = groups.values().map(|&s| (s * s) as u64).sum();
    let under: u64 = groups.values().filter(|&&s| s < k).map(|&s| s as u64).sum();
    Ok(AchievedK {
        avg_achieved_k: weighted as f64 / members as f64,
        pct_under_k: under as f64 * 100.0 / members as f64,
    })
}

/// Mean number of positions a member gains: its cluster head is at least as
/// long as it is, so this is never negative.
pub fn length_increase_stats(
    dataset: &Dataset,
    released: &AnonymizedDataset,
) -> Result<f64, MetricsError> {
    let members = check_one_to_one(dataset, released)?;
    let n = members.len() as f64;
    let gained: i64 = members
        .iter()
        .map(|(tr, ci, _)| released.clusters[*ci].head.len() as i64 - tr.points.len() as i64)
        .sum();
    Ok(gained as f64 / n)
}

/// Wall-clock seconds per pipeline phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WallTime {
    pub clustering: f64,
    pub alignment: f64,
    pub metrics: f64,
    pub total: f64,
}

/// Everything one anonymization run reports, serializable as JSON and as one
/// CSV row (see [`BENCH_CSV_HEADER`] for the stable column order).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnonymizationReport {
    pub algorithm: String,
    pub align: String,
    pub k: usize,
    pub seed: u64,
    pub n_trajectories: usize,
    pub n_clusters: usize,
    pub total_loss_bits: u64,
    pub per_attribute_loss: AttributeLoss,
    pub avg_loss_per_cluster: f64,
    pub avg_released_area_m2: f64,
    pub avg_length_increase: f64,
    pub avg_achieved_k: f64,
    pub pct_under_k: f64,
    pub wall_time_s: WallTime,
}

/// Column order of benchmark CSV rows.
pub const BENCH_CSV_HEADER: &str = "algorithm,align,k,seed,status,n_trajectories,n_clusters,\
total_loss_bits,loss_x_bits,loss_y_bits,loss_t_bits,avg_loss_per_cluster,avg_released_area_m2,\
avg_length_increase,avg_achieved_k,pct_under_k,clustering_s,alignment_s,metrics_s,total_s";

impl AnonymizationReport {
    /// One benchmark CSV row; `status` is `ok` or an error tag for failed runs.
    pub fn csv_row(&self, status: &str) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.algorithm,
            self.align,
            self.k,
            self.seed,
            status,
            self.n_trajectories,
            self.n_clusters,
            self.total_loss_bits,
            self.per_attribute_loss.x,
            self.per_attribute_loss.y,
            self.per_attribute_loss.t,
            self.avg_loss_per_cluster,
            self.avg_released_area_m2,
            self.avg_length_increase,
            self.avg_achieved_k,
            self.pct_under_k,
            self.wall_time_s.clustering,
            self.wall_time_s.alignment,
            self.wall_time_s.metrics,
            self.wall_time_s.total,
        )
    }
}

/// The bits lost if every point of the dataset were fully suppressed — the
/// ceiling no anonymization of it can exceed.
pub fn full_suppression_bound(dataset: &Dataset) -> u64 {
    dataset
        .trajectories()
        .iter()
        .flat_map(|tr| &tr.points)
        .map(|p| u64::from(p.x.bit_len()) + u64::from(p.y.bit_len()) + u64::from(p.t.bit_len()))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::{PairwiseAligner, ProgressivePolicy};
    use crate::cluster::{
        generate_anonymized_dataset, iterative_kmeans_clustering, random_clustering,
        AnonymizedCluster,
    };
    use crate::dgh::Label;
    use crate::model::{random_walk_dataset, LengthDistribution, Point};

    fn grid335() -> GridSpec {
        GridSpec::new(0.0, 0.0, 10.0, 60.0, 3, 3, 5).unwrap()
    }

    fn gp(x: &str, y: &str, t: &str) -> GeneralizedPoint {
        GeneralizedPoint::new(x.parse().unwrap(), y.parse().unwrap(), t.parse().unwrap())
    }

    fn leaf_point(x: u32, y: u32, t: u32) -> Point {
        Point::new(Label::leaf(x, 3), Label::leaf(y, 3), Label::leaf(t, 5))
    }

    fn identical_dataset(groups: usize, size: usize) -> Dataset {
        let mut trajectories = Vec::new();
        for g in 0..groups {
            let points: Vec<Point> =
                (0..g + 1).map(|s| leaf_point(g as u32, g as u32, s as u32)).collect();
            for m in 0..size {
                trajectories.push(Trajectory::new(format!("g{g}m{m}"), points.clone()));
            }
        }
        Dataset::new(trajectories, grid335()).unwrap()
    }

    fn pipeline(ds: &Dataset, k: usize, seed: u64) -> AnonymizedDataset {
        let assignment = iterative_kmeans_clustering(ds, k, seed).unwrap();
        generate_anonymized_dataset(
            ds,
            &assignment,
            PairwiseAligner::Dynamic,
            ProgressivePolicy::GreedyMinLoss,
            seed,
        )
        .unwrap()
        .0
    }

    #[test]
    fn trajectory_loss_counts_depth_drops_per_attribute() {
        let tr = Trajectory::new("t", vec![leaf_point(0, 1, 2), leaf_point(3, 4, 5)]);
        let identity = AlignmentStructure::identity(2);
        let head: Vec<GeneralizedPoint> = tr.points.iter().map(Point::generalized).collect();
        assert_eq!(trajectory_loss(&tr, &head, &identity).unwrap(), AttributeLoss::default());

        // Generalize only the first x label by two levels.
        let mut coarse = head.clone();
        coarse[0].x = "0".parse().unwrap();
        let loss = trajectory_loss(&tr, &coarse, &identity).unwrap();
        assert_eq!(loss, AttributeLoss { x: 2, y: 0, t: 0 });

        let rooted = vec![GeneralizedPoint::ROOT; 2];
        let loss = trajectory_loss(&tr, &rooted, &identity).unwrap();
        assert_eq!(loss, AttributeLoss { x: 6, y: 6, t: 10 });
        assert_eq!(loss.total(), 22);
    }

    #[test]
    fn trajectory_loss_rejects_inconsistent_structures() {
        let tr = Trajectory::new("t", vec![leaf_point(0, 0, 0)]);
        let head = vec![tr.points[0].generalized()];
        let too_long = AlignmentStructure::identity(2);
        assert!(matches!(
            trajectory_loss(&tr, &head, &too_long),
            Err(MetricsError::InconsistentStructure { .. })
        ));
        // Head not an ancestor of the member point.
        let other = vec![gp("111", "000", "00000")];
        let identity = AlignmentStructure::identity(1);
        assert!(matches!(
            trajectory_loss(&tr, &other, &identity),
            Err(MetricsError::InconsistentStructure { .. })
        ));
    }

    #[test]
    fn dataset_loss_zero_for_identical_clusters_and_bounded_always() {
        let ds = identical_dataset(3, 4);
        let released = pipeline(&ds, 4, 1);
        let loss = dataset_loss(&ds, &released).unwrap();
        assert_eq!(loss.total(), 0);

        let grid = GridSpec::new(0.0, 0.0, 10.0, 60.0, 4, 4, 6).unwrap();
        let walks = random_walk_dataset(
            &grid,
            40,
            &LengthDistribution::Uniform { min: 1, max: 8 },
            5,
        )
        .unwrap();
        let released = pipeline(&walks, 4, 9);
        let loss = dataset_loss(&walks, &released).unwrap();
        assert!(loss.total() <= full_suppression_bound(&walks));
    }

    #[test]
    fn dataset_loss_matches_pipeline_reported_total() {
        let grid = GridSpec::new(0.0, 0.0, 10.0, 60.0, 4, 4, 6).unwrap();
        let ds = random_walk_dataset(
            &grid,
            30,
            &LengthDistribution::Uniform { min: 1, max: 7 },
            11,
        )
        .unwrap();
        let assignment = random_clustering(&ds, 3, 2).unwrap();
        let (released, reported) = generate_anonymized_dataset(
            &ds,
            &assignment,
            PairwiseAligner::Dynamic,
            ProgressivePolicy::GreedyMinLoss,
            2,
        )
        .unwrap();
        assert_eq!(dataset_loss(&ds, &released).unwrap().total(), reported);
    }

    #[test]
    fn dataset_loss_requires_a_one_to_one_mapping() {
        let ds = identical_dataset(1, 4);
        let mut released = pipeline(&ds, 4, 0);
        let dropped = released.clusters[0].members.remove(3);
        released.clusters[0].structures.pop();
        assert_eq!(
            dataset_loss(&ds, &released).unwrap_err(),
            MetricsError::MissingMember(dropped)
        );

        let mut released = pipeline(&ds, 4, 0);
        released.clusters[0].members[1] = "g0m0".into();
        assert_eq!(
            dataset_loss(&ds, &released).unwrap_err(),
            MetricsError::DuplicateMember("g0m0".into())
        );

        let mut released = pipeline(&ds, 4, 0);
        released.clusters[0].members[1] = "ghost".into();
        assert_eq!(
            dataset_loss(&ds, &released).unwrap_err(),
            MetricsError::UnknownMember("ghost".into())
        );
    }

    #[test]
    fn decomposition_identity_holds_for_pipeline_outputs() {
        let grid = GridSpec::new(0.0, 0.0, 10.0, 60.0, 4, 4, 6).unwrap();
        for seed in 0..5 {
            let ds = random_walk_dataset(
                &grid,
                25,
                &LengthDistribution::Uniform { min: 1, max: 6 },
                seed,
            )
            .unwrap();
            let released = pipeline(&ds, 4, seed);
            let d = loss_decomposition(&ds, &released).unwrap();
            assert_eq!(d.uncovered_nonroot, 0, "seed {seed}");
            let loss = dataset_loss(&ds, &released).unwrap().total();
            assert_eq!(d.part_a - d.part_b, loss, "seed {seed}");
            assert_eq!(d.part_a, full_suppression_bound(&ds));
        }
    }

    #[test]
    fn decomposition_identity_edges() {
        // Singleton clusters releasing the originals: part_b equals part_a.
        let ds = identical_dataset(2, 1);
        let clusters = ds
            .trajectories()
            .iter()
            .map(|tr| AnonymizedCluster {
                members: vec![tr.id.clone()],
                head: tr.points.iter().map(Point::generalized).collect(),
                structures: vec![AlignmentStructure::identity(tr.points.len())],
                loss: 0,
            })
            .collect();
        let released = AnonymizedDataset { clusters, grid: ds.grid().clone() };
        let d = loss_decomposition(&ds, &released).unwrap();
        assert_eq!(d.part_a, d.part_b);
        assert_eq!(d.uncovered_nonroot, 0);

        // Full suppression: the heads retain nothing, part_b = 0.
        let clusters = ds
            .trajectories()
            .iter()
            .map(|tr| AnonymizedCluster {
                members: vec![tr.id.clone()],
                head: vec![GeneralizedPoint::ROOT; tr.points.len()],
                structures: vec![AlignmentStructure::identity(tr.points.len())],
                loss: 0,
            })
            .collect();
        let released = AnonymizedDataset { clusters, grid: ds.grid().clone() };
        let d = loss_decomposition(&ds, &released).unwrap();
        assert_eq!(d.part_b, 0);
        assert_eq!(d.part_a, dataset_loss(&ds, &released).unwrap().total());
    }

    #[test]
    fn decomposition_counts_uncovered_nonroot_positions() {
        // Hand-crafted release progressive alignment never emits: member 1
        // gaps only at a root position (fine), member 2 gaps at a non-root
        // position. part_a - part_b then misses member 2's real loss.
        let ds = identical_dataset(1, 2);
        let leaf = ds.trajectories()[0].points[0].generalized();
        let released = AnonymizedDataset {
            clusters: vec![AnonymizedCluster {
                members: vec!["g0m0".into(), "g0m1".into()],
                head: vec![leaf, GeneralizedPoint::ROOT],
                structures: vec![
                    AlignmentStructure::from_positions(vec![Some(0), None]),
                    AlignmentStructure::from_positions(vec![None, Some(0)]),
                ],
                loss: 0,
            }],
            grid: ds.grid().clone(),
        };
        let d = loss_decomposition(&ds, &released).unwrap();
        assert_eq!(d.uncovered_nonroot, 1);
        let true_loss = dataset_loss(&ds, &released).unwrap().total();
        assert_eq!(true_loss, 11);
        assert_ne!(d.part_a - d.part_b, true_loss);
    }

    #[test]
    fn released_area_follows_label_depths() {
        let grid = grid335();
        assert_eq!(released_area(&gp("000", "111", "00000"), &grid), 100.0);
        assert_eq!(released_area(&gp("0", "111", "00000"), &grid), 400.0);
        assert_eq!(released_area(&GeneralizedPoint::ROOT, &grid), 6400.0);
        // Area ignores the time attribute entirely.
        assert_eq!(
            released_area(&gp("0", "111", "00000"), &grid),
            released_area(&gp("0", "111", "1"), &grid)
        );
    }

    #[test]
    fn avg_area_weights_by_occupying_members() {
        let ds = identical_dataset(1, 2);
        let head = vec![ds.trajectories()[0].points[0].generalized(), GeneralizedPoint::ROOT];
        // One member location at 100 m², one at 6400 m²: gap slots contribute
        // nothing, so the weighted mean is over the two real locations.
        let s0 = AlignmentStructure::from_positions(vec![Some(0), None]);
        let s1 = AlignmentStructure::from_positions(vec![None, Some(0)]);
        let released = AnonymizedDataset {
            clusters: vec![AnonymizedCluster {
                members: vec!["g0m0".into(), "g0m1".into()],
                head,
                structures: vec![s0, s1],
                loss: 0,
            }],
            grid: ds.grid().clone(),
        };
        let avg = avg_area_per_location(&released).unwrap();
        assert_eq!(avg, 3250.0);

        // A second member on the 100 m² cell shifts the weighted mean.
        let mut weighted = released.clone();
        weighted.clusters[0].members.push("g0m1b".into());
        weighted.clusters[0]
            .structures
            .push(AlignmentStructure::from_positions(vec![Some(0), None]));
        assert_eq!(
            avg_area_per_location(&weighted).unwrap(),
            (2.0 * 100.0 + 6400.0) / 3.0
        );
    }

    #[test]
    fn avg_area_identical_clusters_is_cell_area() {
        let ds = identical_dataset(2, 3);
        let released = pipeline(&ds, 3, 4);
        assert_eq!(avg_area_per_location(&released).unwrap(), 100.0);
    }

    #[test]
    fn avg_area_increases_when_a_position_generalizes() {
        let ds = identical_dataset(2, 3);
        let mut released = pipeline(&ds, 3, 4);
        let before = avg_area_per_location(&released).unwrap();
        let g = &mut released.clusters[0].head[0];
        g.x = g.x.parent().unwrap();
        let after = avg_area_per_location(&released).unwrap();
        assert!(after > before);
    }

    #[test]
    fn avg_area_empty_input_is_an_error() {
        let released = AnonymizedDataset { clusters: vec![], grid: grid335() };
        assert_eq!(avg_area_per_location(&released).unwrap_err(), MetricsError::EmptyInput);
    }

    #[test]
    fn k_anonymity_groups_by_exact_sequence_equality() {
        let a = vec![gp("000", "000", "00000")];
        let b = vec![gp("111", "111", "11111")];
        let seqs: Vec<&[GeneralizedPoint]> =
            vec![&a, &a, &a, &b, &b, &b, &a, &b]; // groups of 4 each
        let v = verify_k_anonymity(seqs.iter().copied(), 4);
        assert!(v.holds);
        assert_eq!(v.n_groups, 2);
        let v = verify_k_anonymity(seqs.iter().copied(), 5);
        assert!(!v.holds);
        assert_eq!(v.offending_group_sizes, vec![4, 4]);

        let singleton: Vec<&[GeneralizedPoint]> = vec![&a, &a, &b];
        let v = verify_k_anonymity(singleton.iter().copied(), 2);
        assert!(!v.holds);
        assert_eq!(v.offending_group_sizes, vec![1]);
        assert!(verify_k_anonymity(singleton.iter().copied(), 1).holds);
    }

    #[test]
    fn k_anonymity_counts_equality_across_clusters() {
        // Two clusters with equal heads form one group of 4.
        let ds = identical_dataset(1, 4);
        let tr = &ds.trajectories()[0];
        let head: Vec<GeneralizedPoint> = tr.points.iter().map(Point::generalized).collect();
        let cluster = |members: &[&str]| AnonymizedCluster {
            members: members.iter().map(|s| s.to_string()).collect(),
            head: head.clone(),
            structures: vec![AlignmentStructure::identity(head.len()); members.len()],
            loss: 0,
        };
        let released = AnonymizedDataset {
            clusters: vec![cluster(&["g0m0", "g0m1"]), cluster(&["g0m2", "g0m3"])],
            grid: ds.grid().clone(),
        };
        let seqs: Vec<&[GeneralizedPoint]> =
            released.rows().map(|(_, _, points)| points).collect();
        let v = verify_k_anonymity(seqs.iter().copied(), 4);
        assert!(v.holds, "clusters sharing a head merge into one group");
    }

    #[test]
    fn achieved_k_examples() {
        let a = vec![gp("000", "000", "00000")];
        let b = vec![gp("111", "111", "11111")];
        let c = vec![gp("010", "010", "01010")];
        // Groups of sizes 3, 3, 2 with k = 3.
        let seqs: Vec<&[GeneralizedPoint]> = vec![&a, &a, &a, &b, &b, &b, &c, &c];
        let stats = achieved_k_stats(seqs.iter().copied(), 3).unwrap();
        assert_eq!(stats.avg_achieved_k, 2.75);
        assert_eq!(stats.pct_under_k, 25.0);

        let all: Vec<&[GeneralizedPoint]> = vec![&a; 6];
        let stats = achieved_k_stats(all.iter().copied(), 6).unwrap();
        assert_eq!(stats.avg_achieved_k, 6.0);
        assert_eq!(stats.pct_under_k, 0.0);

        assert_eq!(
            achieved_k_stats(std::iter::empty(), 2).unwrap_err(),
            MetricsError::EmptyInput
        );
    }

    #[test]
    fn verify_and_achieved_k_agree_on_pipeline_output() {
        let grid = GridSpec::new(0.0, 0.0, 10.0, 60.0, 4, 4, 6).unwrap();
        for seed in 0..4 {
            let ds = random_walk_dataset(
                &grid,
                30,
                &LengthDistribution::Uniform { min: 1, max: 6 },
                seed,
            )
            .unwrap();
            let released = pipeline(&ds, 3, seed);
            let seqs: Vec<&[GeneralizedPoint]> =
                released.rows().map(|(_, _, points)| points).collect();
            let v = verify_k_anonymity(seqs.iter().copied(), 3);
            let stats = achieved_k_stats(seqs.iter().copied(), 3).unwrap();
            assert!(v.holds, "iterative pipeline must satisfy k, seed {seed}");
            assert_eq!(stats.pct_under_k == 0.0, v.holds);
            assert!(stats.avg_achieved_k >= 3.0);
        }
    }

    #[test]
    fn length_increase_examples() {
        let ds = identical_dataset(2, 3);
        let released = pipeline(&ds, 3, 4);
        assert_eq!(length_increase_stats(&ds, &released).unwrap(), 0.0);

        // A length-2 member under a length-4 head gains 2 positions.
        let long = Trajectory::new(
            "long",
            (0..4).map(|s| leaf_point(0, 0, s)).collect(),
        );
        let short = Trajectory::new("short", (0..2).map(|s| leaf_point(0, 0, s)).collect());
        let ds = Dataset::new(vec![long, short], grid335()).unwrap();
        let released = pipeline(&ds, 2, 0);
        assert_eq!(released.clusters.len(), 1);
        assert_eq!(released.clusters[0].head.len(), 4);
        assert_eq!(length_increase_stats(&ds, &released).unwrap(), 1.0);
    }

    #[test]
    fn report_serialization_is_stable() {
        let report = AnonymizationReport {
            algorithm: "iterative-kmeans".into(),
            align: "progressive".into(),
            k: 5,
            seed: 7,
            n_trajectories: 500,
            n_clusters: 83,
            total_loss_bits: 12345,
            per_attribute_loss: AttributeLoss { x: 4000, y: 4100, t: 4245 },
            avg_loss_per_cluster: 148.734_939_759_036_17,
            avg_released_area_m2: 512.5,
            avg_length_increase: 1.25,
            avg_achieved_k: 6.02,
            pct_under_k: 0.0,
            wall_time_s: WallTime { clustering: 0.5, alignment: 1.5, metrics: 0.25, total: 2.25 },
        };
        let json = serde_json::to_string_pretty(&report).unwrap();
        let back: AnonymizationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        assert!(json.contains("\"total_loss_bits\": 12345"));

        let row = report.csv_row("ok");
        assert_eq!(row.split(',').count(), BENCH_CSV_HEADER.split(',').count());
        assert_eq!(
            row,
            "iterative-kmeans,progressive,5,7,ok,500,83,12345,4000,4100,4245,\
             148.73493975903617,512.5,1.25,6.02,0,0.5,1.5,0.25,2.25"
        );
    }
}
