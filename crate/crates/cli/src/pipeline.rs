//! The anonymization run shared by `anonymize` and `bench`: cluster, align,
//! measure, and cross-check the result before reporting it.

use std::time::Instant;

use trajanon::align::{PairwiseAligner, ProgressivePolicy};
use trajanon::cluster::{
    generate_anonymized_dataset, AnonymizedDataset, CandidateEvaluation, ClusterError,
    ClusteringAlgorithm,
};
use trajanon::metrics::{
    achieved_k_stats, avg_area_per_location, dataset_loss, length_increase_stats,
    loss_decomposition, verify_k_anonymity, AnonymizationReport, WallTime,
};
use trajanon::model::{Dataset, GeneralizedPoint};

/// Why a run failed; maps onto the process exit codes.
#[derive(Debug)]
pub enum RunError {
    /// The dataset cannot support the requested k (exit 3).
    Infeasible(String),
    /// The pipeline produced something its own invariants reject (exit 4).
    Invariant(String),
}

impl RunError {
    pub fn message(&self) -> &str {
        match self {
            RunError::Infeasible(m) | RunError::Invariant(m) => m,
        }
    }

    /// Short machine-readable tag for benchmark status columns.
    pub fn status_tag(&self) -> &'static str {
        match self {
            RunError::Infeasible(_) => "infeasible-k",
            RunError::Invariant(_) => "invariant-breach",
        }
    }
}

fn cluster_error(e: ClusterError) -> RunError {
    match e {
        ClusterError::InfeasibleK { .. } | ClusterError::InvalidK => {
            RunError::Infeasible(e.to_string())
        }
        other => RunError::Invariant(other.to_string()),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RunSpec {
    pub algorithm: ClusteringAlgorithm,
    pub algorithm_label: &'static str,
    pub aligner: PairwiseAligner,
    pub align_label: &'static str,
    pub evaluation: CandidateEvaluation,
    pub k: usize,
    pub seed: u64,
}

/// Cluster, align, and evaluate one run.
///
/// After the pipeline proper, the result is re-derived through independent
/// paths (partition validity, recomputed loss, minimum cluster size and
/// verified anonymity for the guaranteeing algorithm); any disagreement is an
/// invariant breach, never silently reported.
pub fn run(dataset: &Dataset, spec: &RunSpec) -> Result<(AnonymizedDataset, AnonymizationReport), RunError> {
    let started = Instant::now();

    let clustering_started = Instant::now();
    let assignment = spec
        .algorithm
        .run(dataset, spec.k, spec.aligner, spec.evaluation, spec.seed)
        .map_err(cluster_error)?;
    let clustering_s = clustering_started.elapsed().as_secs_f64();

    assignment
        .validate_partition(dataset)
        .map_err(|e| RunError::Invariant(format!("clustering broke the partition: {e}")))?;
    if spec.algorithm == ClusteringAlgorithm::IterativeKmeans
        && assignment.min_cluster_size() < spec.k
    {
        return Err(RunError::Invariant(format!(
            "iterative k-means produced a cluster of {} members (k = {})",
            assignment.min_cluster_size(),
            spec.k
        )));
    }

    let alignment_started = Instant::now();
    let (released, reported_loss) = generate_anonymized_dataset(
        dataset,
        &assignment,
        spec.aligner,
        ProgressivePolicy::GreedyMinLoss,
        spec.seed,
    )
    .map_err(cluster_error)?;
    let alignment_s = alignment_started.elapsed().as_secs_f64();

    let metrics_started = Instant::now();
    let loss = dataset_loss(dataset, &released)
        .map_err(|e| RunError::Invariant(format!("loss recomputation rejected the release: {e}")))?;
    if loss.total() != reported_loss {
        return Err(RunError::Invariant(format!(
            "recomputed loss {} disagrees with pipeline loss {}",
            loss.total(),
            reported_loss
        )));
    }
    let decomposition = loss_decomposition(dataset, &released)
        .map_err(|e| RunError::Invariant(e.to_string()))?;
    if decomposition.uncovered_nonroot != 0 {
        return Err(RunError::Invariant(format!(
            "{} released positions are skipped by a member without being fully suppressed",
            decomposition.uncovered_nonroot
        )));
    }
    if decomposition.part_a - decomposition.part_b != reported_loss {
        return Err(RunError::Invariant(
            "loss decomposition identity failed on a pipeline release".to_string(),
        ));
    }
    let avg_area = avg_area_per_location(&released)
        .map_err(|e| RunError::Invariant(e.to_string()))?;
    let sequences: Vec<&[GeneralizedPoint]> =
        released.rows().map(|(_, _, points)| points).collect();
    let anonymity = verify_k_anonymity(sequences.iter().copied(), spec.k);
    if spec.algorithm == ClusteringAlgorithm::IterativeKmeans && !anonymity.holds {
        return Err(RunError::Invariant(format!(
            "iterative k-means release failed k-anonymity (smallest group {})",
            anonymity.offending_group_sizes.first().copied().unwrap_or(0)
        )));
    }
    let achieved = achieved_k_stats(sequences.iter().copied(), spec.k)
        .map_err(|e| RunError::Invariant(e.to_string()))?;
    let avg_length_increase = length_increase_stats(dataset, &released)
        .map_err(|e| RunError::Invariant(e.to_string()))?;
    let metrics_s = metrics_started.elapsed().as_secs_f64();

    let report = AnonymizationReport {
        algorithm: spec.algorithm_label.to_string(),
        align: spec.align_label.to_string(),
        k: spec.k,
        seed: spec.seed,
        n_trajectories: dataset.n_trajectories(),
        n_clusters: released.clusters.len(),
        total_loss_bits: reported_loss,
        per_attribute_loss: loss,
        avg_loss_per_cluster: reported_loss as f64 / released.clusters.len() as f64,
        avg_released_area_m2: avg_area,
        avg_length_increase,
        avg_achieved_k: achieved.avg_achieved_k,
        pct_under_k: achieved.pct_under_k,
        wall_time_s: WallTime {
            clustering: clustering_s,
            alignment: alignment_s,
            metrics: metrics_s,
            total: started.elapsed().as_secs_f64(),
        },
    };
    Ok((released, report))
}
