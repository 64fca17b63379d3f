//! Grouping trajectories into clusters of at least `k` members and aligning
//! each cluster into one shared released sequence.
//!
//! Strategies:
//! - [`heuristic_clustering`]: greedy, alignment-cost-driven cluster growth.
//! - [`kmeans_clustering`]: one k-means pass over per-trajectory feature
//!   vectors; fast, but cluster sizes are not guaranteed.
//! - [`iterative_kmeans_clustering`]: repeated k-means passes that only keep
//!   clusters of size at least `k`, so the guarantee always holds.
//! - [`random_clustering`]: seeded random grouping, as a baseline.

use std::collections::HashMap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::align::{
    progressive_sa, AlignError, AlignmentStructure, PairwiseAligner, ProgressivePolicy,
};
use crate::model::{Dataset, GeneralizedPoint, GridSpec, Point, Trajectory};

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("cannot form clusters of at least {k} members from {n} trajectories")]
    InfeasibleK { n: usize, k: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error("cluster assignment names unknown trajectory '{0}'")]
    UnknownMember(String),
    #[error("cluster assignment lists trajectory '{0}' more than once")]
    DuplicateMember(String),
    #[error("cluster assignment misses trajectory '{0}'")]
    MissingMember(String),
    #[error("cluster assignment contains an empty cluster")]
    EmptyCluster,
}

/// Per-trajectory feature vector: the bits each attribute would lose if the
/// whole trajectory were fully suppressed. Trajectories that cost similar
/// amounts to suppress land close together.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureVector {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl FeatureVector {
    pub fn of(trajectory: &Trajectory) -> FeatureVector {
        let mut v = FeatureVector { x: 0.0, y: 0.0, t: 0.0 };
        for p in &trajectory.points {
            v.x += f64::from(p.x.bit_len());
            v.y += f64::from(p.y.bit_len());
            v.t += f64::from(p.t.bit_len());
        }
        v
    }

    fn as_array(self) -> [f64; 3] {
        [self.x, self.y, self.t]
    }
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dt = a[2] - b[2];
    dx * dx + dy * dy + dt * dt
}

const KMEANS_MAX_ITERS: usize = 100;
const KMEANS_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
struct KmeansResult {
    assignments: Vec<usize>,
    #[cfg_attr(not(test), allow(dead_code))]
    sse: f64,
}

/// Lloyd iterations with seeded initialization from distinct input values.
///
/// Determinism: initial centroids are a seeded sample (without replacement) of
/// the distinct feature values; assignment ties go to the lowest centroid
/// index. A centroid that loses all members is re-seeded with the point
/// currently farthest from its assigned centroid.
fn kmeans(points: &[[f64; 3]], k: usize, seed: u64, max_iters: usize) -> KmeansResult {
    assert!(k >= 1 && !points.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut seen = HashMap::new();
    let mut distinct: Vec<[f64; 3]> = Vec::new();
    for p in points {
        let key = (p[0].to_bits(), p[1].to_bits(), p[2].to_bits());
        if seen.insert(key, ()).is_none() {
            distinct.push(*p);
        }
    }
    let mut centroids: Vec<[f64; 3]> = Vec::with_capacity(k);
    let picks = k.min(distinct.len());
    for i in 0..picks {
        let j = rng.random_range(i..distinct.len());
        distinct.swap(i, j);
        centroids.push(distinct[i]);
    }
    // Fewer distinct values than clusters: duplicate centroids lose every tie,
    // stay empty, and are dropped by the callers.
    for i in picks..k {
        centroids.push(centroids[i % picks]);
    }

    let mut assignments = vec![0usize; points.len()];
    for iter in 0..max_iters {
        let mut changed = false;
        for (pi, p) in points.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = dist2(*p, centroids[0]);
            for (ci, c) in centroids.iter().enumerate().skip(1) {
                let d = dist2(*p, *c);
                if d < best_d {
                    best_d = d;
                    best = ci;
                }
            }
            if assignments[pi] != best {
                assignments[pi] = best;
                changed = true;
            }
        }
        if !changed && iter > 0 {
            break;
        }

        let mut sums = vec![[0.0f64; 3]; k];
        let mut counts = vec![0usize; k];
        for (pi, p) in points.iter().enumerate() {
            let c = assignments[pi];
            counts[c] += 1;
            for d in 0..3 {
                sums[c][d] += p[d];
            }
        }
        let mut max_shift = 0.0f64;
        for c in 0..k {
            if counts[c] > 0 {
                let mean = [
                    sums[c][0] / counts[c] as f64,
                    sums[c][1] / counts[c] as f64,
                    sums[c][2] / counts[c] as f64,
                ];
                max_shift = max_shift.max(dist2(mean, centroids[c]));
                centroids[c] = mean;
            } else {
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        let da = dist2(points[a], centroids[assignments[a]]);
                        let db = dist2(points[b], centroids[assignments[b]]);
                        da.partial_cmp(&db).expect("finite features")
                    })
                    .expect("non-empty");
                if dist2(points[far], centroids[assignments[far]]) > 0.0 {
                    max_shift = f64::INFINITY;
                    centroids[c] = points[far];
                }
            }
        }
        if max_shift <= KMEANS_TOL * KMEANS_TOL {
            break;
        }
    }

    let sse = points.iter().enumerate().map(|(pi, p)| dist2(*p, centroids[assignments[pi]])).sum();
    KmeansResult { assignments, sse }
}

/// A partition of the dataset's trajectory ids into clusters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterAssignment {
    clusters: Vec<Vec<String>>,
}

impl ClusterAssignment {
    pub fn clusters(&self) -> &[Vec<String>] {
        &self.clusters
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn min_cluster_size(&self) -> usize {
        self.clusters.iter().map(Vec::len).min().unwrap_or(0)
    }

    /// Every dataset trajectory appears in exactly one non-empty cluster.
    pub fn validate_partition(&self, dataset: &Dataset) -> Result<(), ClusterError> {
        let mut seen: HashMap<&str, ()> = HashMap::with_capacity(dataset.n_trajectories());
        for cluster in &self.clusters {
            if cluster.is_empty() {
                return Err(ClusterError::EmptyCluster);
            }
            for id in cluster {
                if dataset.trajectory_by_id(id).is_none() {
                    return Err(ClusterError::UnknownMember(id.clone()));
                }
                if seen.insert(id, ()).is_some() {
                    return Err(ClusterError::DuplicateMember(id.clone()));
                }
            }
        }
        for tr in dataset.trajectories() {
            if !seen.contains_key(tr.id.as_str()) {
                return Err(ClusterError::MissingMember(tr.id.clone()));
            }
        }
        Ok(())
    }
}

fn check_k(dataset: &Dataset, k: usize) -> Result<(), ClusterError> {
    if k == 0 {
        return Err(ClusterError::InvalidK);
    }
    let n = dataset.n_trajectories();
    if n < k {
        return Err(ClusterError::InfeasibleK { n, k });
    }
    Ok(())
}

fn ids_of(dataset: &Dataset, indices: &[usize]) -> Vec<String> {
    indices.iter().map(|&i| dataset.trajectories()[i].id.clone()).collect()
}

/// One k-means pass over feature vectors with `n / k` clusters.
///
/// Fast, but nothing forces every cluster to reach `k` members; callers that
/// need the guarantee must verify it (or use [`iterative_kmeans_clustering`]).
pub fn kmeans_clustering(
    dataset: &Dataset,
    k: usize,
    seed: u64,
) -> Result<ClusterAssignment, ClusterError> {
    check_k(dataset, k)?;
    let n = dataset.n_trajectories();
    let features: Vec<[f64; 3]> =
        dataset.trajectories().iter().map(|tr| FeatureVector::of(tr).as_array()).collect();
    let result = kmeans(&features, n / k, seed, KMEANS_MAX_ITERS);
    let mut clusters: Vec<Vec<String>> = vec![Vec::new(); n / k];
    for (i, &c) in result.assignments.iter().enumerate() {
        clusters[c].push(dataset.trajectories()[i].id.clone());
    }
    clusters.retain(|c| !c.is_empty());
    Ok(ClusterAssignment { clusters })
}

/// Repeated k-means passes that finalize only clusters of at least `k`
/// members; smaller clusters are pooled and re-clustered. Once fewer than `2k`
/// trajectories remain they form one final cluster (if at least `k` are left)
/// or are folded into the nearest finalized cluster by feature distance.
pub fn iterative_kmeans_clustering(
    dataset: &Dataset,
    k: usize,
    seed: u64,
) -> Result<ClusterAssignment, ClusterError> {
    check_k(dataset, k)?;
    let features: Vec<[f64; 3]> =
        dataset.trajectories().iter().map(|tr| FeatureVector::of(tr).as_array()).collect();

    let mut pool: Vec<usize> = (0..dataset.n_trajectories()).collect();
    let mut finalized: Vec<Vec<usize>> = Vec::new();
    let mut pass = 0u64;
    while pool.len() >= 2 * k {
        let pool_features: Vec<[f64; 3]> = pool.iter().map(|&i| features[i]).collect();
        let result = kmeans(&pool_features, pool.len() / k, derive_seed(seed, pass), KMEANS_MAX_ITERS);
        pass += 1;
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); pool.len() / k];
        for (slot, &c) in result.assignments.iter().enumerate() {
            groups[c].push(pool[slot]);
        }
        let mut next_pool = Vec::new();
        for group in groups {
            if group.len() >= k {
                finalized.push(group);
            } else {
                next_pool.extend(group);
            }
        }
        // At least one cluster of a pass reaches size k (the pass forms
        // floor(|pool| / k) clusters), so the pool always shrinks.
        pool = next_pool;
        pool.sort_unstable();
    }
    if pool.len() >= k {
        finalized.push(std::mem::take(&mut pool));
    } else if !pool.is_empty() {
        // Fewer than k stragglers: attach each to the finalized cluster whose
        // feature centroid is nearest (ties: lowest cluster index).
        let centroids: Vec<[f64; 3]> = finalized
            .iter()
            .map(|members| {
                let mut c = [0.0f64; 3];
                for &i in members {
                    for d in 0..3 {
                        c[d] += features[i][d];
                    }
                }
                c.map(|v| v / members.len() as f64)
            })
            .collect();
        for &i in &pool {
            let nearest = (0..finalized.len())
                .min_by(|&a, &b| {
                    dist2(features[i], centroids[a])
                        .partial_cmp(&dist2(features[i], centroids[b]))
                        .expect("finite features")
                })
                .expect("at least one finalized cluster");
            finalized[nearest].push(i);
        }
        for members in &mut finalized {
            members.sort_unstable();
        }
    }
    Ok(ClusterAssignment { clusters: finalized.iter().map(|m| ids_of(dataset, m)).collect() })
}

/// How [`heuristic_clustering`] scores a candidate member for the cluster
/// being grown.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CandidateEvaluation {
    /// Align the candidate against the cluster's running released sequence.
    #[default]
    RunningHead,
    /// Re-align the whole cluster with the candidate included and use the
    /// recomputed total loss. Much slower; kept for comparison runs.
    FullRealignment,
}

/// Greedy clustering: seed each cluster with a random unassigned trajectory,
/// then repeatedly add the unassigned trajectory that is cheapest to align
/// with the cluster (ties: smallest id) until the cluster holds `k` members.
/// The up-to-`k - 1` leftover trajectories join the last cluster.
pub fn heuristic_clustering(
    dataset: &Dataset,
    k: usize,
    aligner: PairwiseAligner,
    evaluation: CandidateEvaluation,
    seed: u64,
) -> Result<ClusterAssignment, ClusterError> {
    check_k(dataset, k)?;
    let n = dataset.n_trajectories();
    let h = dataset.hierarchies();
    let trajectories = dataset.trajectories();
    let sequences: Vec<Vec<GeneralizedPoint>> = trajectories
        .iter()
        .map(|tr| tr.points.iter().map(Point::generalized).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..n).collect();
    let mut clusters: Vec<Vec<usize>> = Vec::with_capacity(n / k);
    for _ in 0..n / k {
        let first = pool.swap_remove(rng.random_range(0..pool.len()));
        let mut members = vec![first];
        let mut running = sequences[first].clone();
        for _ in 1..k {
            let best = pool
                .par_iter()
                .map(|&cand| {
                    let loss = match evaluation {
                        CandidateEvaluation::RunningHead => {
                            aligner.loss(&h, &running, &sequences[cand])
                        }
                        CandidateEvaluation::FullRealignment => {
                            let mut refs: Vec<&Trajectory> =
                                members.iter().map(|&i| &trajectories[i]).collect();
                            refs.push(&trajectories[cand]);
                            progressive_sa(&h, &refs, aligner, ProgressivePolicy::GreedyMinLoss, 0)
                                .map(|r| r.total_loss)
                        }
                    };
                    loss.map(|l| (l, trajectories[cand].id.as_str(), cand))
                })
                .try_reduce_with(|a, b| Ok(if (a.0, a.1) <= (b.0, b.1) { a } else { b }))
                .expect("pool is non-empty")?;
            let cand = best.2;
            pool.remove(pool.iter().position(|&i| i == cand).expect("candidate from pool"));
            running = aligner.align(&h, &running, &sequences[cand])?.gen;
            members.push(cand);
        }
        clusters.push(members);
    }
    if let Some(last) = clusters.last_mut() {
        last.append(&mut pool);
    }
    Ok(ClusterAssignment { clusters: clusters.iter().map(|m| ids_of(dataset, m)).collect() })
}

/// Seeded random partition into clusters of `k`; leftovers join the last cluster.
pub fn random_clustering(
    dataset: &Dataset,
    k: usize,
    seed: u64,
) -> Result<ClusterAssignment, ClusterError> {
    check_k(dataset, k)?;
    let n = dataset.n_trajectories();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        indices.swap(i, rng.random_range(0..=i));
    }
    let c = n / k;
    let mut clusters: Vec<Vec<usize>> = (0..c).map(|j| indices[j * k..(j + 1) * k].to_vec()).collect();
    if let Some(last) = clusters.last_mut() {
        last.extend_from_slice(&indices[c * k..]);
    }
    Ok(ClusterAssignment { clusters: clusters.iter().map(|m| ids_of(dataset, m)).collect() })
}

/// The clustering strategies exposed by the command-line tool.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClusteringAlgorithm {
    Heuristic,
    Kmeans,
    IterativeKmeans,
    Random,
}

impl ClusteringAlgorithm {
    pub fn run(
        self,
        dataset: &Dataset,
        k: usize,
        aligner: PairwiseAligner,
        evaluation: CandidateEvaluation,
        seed: u64,
    ) -> Result<ClusterAssignment, ClusterError> {
        match self {
            ClusteringAlgorithm::Heuristic => {
                heuristic_clustering(dataset, k, aligner, evaluation, seed)
            }
            ClusteringAlgorithm::Kmeans => kmeans_clustering(dataset, k, seed),
            ClusteringAlgorithm::IterativeKmeans => iterative_kmeans_clustering(dataset, k, seed),
            ClusteringAlgorithm::Random => random_clustering(dataset, k, seed),
        }
    }
}

/// One anonymized cluster: every member is released as the shared `head`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnonymizedCluster {
    pub members: Vec<String>,
    pub head: Vec<GeneralizedPoint>,
    /// Per member (parallel to `members`), where its points sit in `head`.
    pub structures: Vec<AlignmentStructure>,
    /// Bits the members lost against `head`.
    pub loss: u64,
}

/// The released dataset: clusters plus the grid that maps labels back to
/// physical cells.
#[derive(Clone, Debug, PartialEq)]
pub struct AnonymizedDataset {
    pub clusters: Vec<AnonymizedCluster>,
    pub grid: GridSpec,
}

impl AnonymizedDataset {
    pub fn total_loss(&self) -> u64 {
        self.clusters.iter().map(|c| c.loss).sum()
    }

    /// Rows for the anonymized CSV writer: every member of every cluster,
    /// each released as its cluster's shared sequence.
    pub fn rows(&self) -> impl Iterator<Item = (usize, &str, &[GeneralizedPoint])> {
        self.clusters.iter().enumerate().flat_map(|(ci, cluster)| {
            cluster.members.iter().map(move |id| (ci, id.as_str(), cluster.head.as_slice()))
        })
    }
}

fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Align every cluster of the assignment and return the released dataset and
/// its total information loss in bits. Clusters are aligned in parallel; each
/// gets a seed derived from `seed` and its index, so results do not depend on
/// scheduling.
pub fn generate_anonymized_dataset(
    dataset: &Dataset,
    assignment: &ClusterAssignment,
    aligner: PairwiseAligner,
    policy: ProgressivePolicy,
    seed: u64,
) -> Result<(AnonymizedDataset, u64), ClusterError> {
    assignment.validate_partition(dataset)?;
    let h = dataset.hierarchies();
    let clusters: Vec<AnonymizedCluster> = assignment
        .clusters
        .par_iter()
        .enumerate()
        .map(|(ci, members)| {
            let refs: Vec<&Trajectory> = members
                .iter()
                .map(|id| dataset.trajectory_by_id(id).expect("validated partition"))
                .collect();
            let aligned = progressive_sa(&h, &refs, aligner, policy, derive_seed(seed, ci as u64))?;
            Ok(AnonymizedCluster {
                members: members.clone(),
                head: aligned.gen,
                structures: aligned.structures,
                loss: aligned.total_loss,
            })
        })
        .collect::<Result<_, ClusterError>>()?;
    let released = AnonymizedDataset { clusters, grid: dataset.grid().clone() };
    let total = released.total_loss();
    Ok((released, total))
}
