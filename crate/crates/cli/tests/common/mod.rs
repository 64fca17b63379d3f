//! Shared machinery for the acceptance suite: independent string-label
//! oracles, seeded pair generators, and one lazily-built clustering sweep
//! reused by several criteria.

use std::sync::LazyLock;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trajanon::align::{PairwiseAligner, ProgressivePolicy};
use trajanon::cluster::{
    generate_anonymized_dataset, AnonymizedDataset, CandidateEvaluation, ClusteringAlgorithm,
};
use trajanon::metrics::{achieved_k_stats, verify_k_anonymity};
use trajanon::model::{
    random_walk_dataset, Dataset, GeneralizedPoint, GridSpec, LengthDistribution,
};

/// Print one PASS/FAIL line per criterion while still failing the test on
/// panic, so the verdicts survive in captured output either way.
pub fn criterion<F: FnOnce()>(tag: &str, summary: &str, body: F) {
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(body));
    let verdict = if outcome.is_ok() { "PASS" } else { "FAIL" };
    println!("[{tag}] {verdict} - {summary}");
    if let Err(cause) = outcome {
        std::panic::resume_unwind(cause);
    }
}

// ---------------------------------------------------------------------------
// String-label oracle: re-derives alignment cost from bit strings alone,
// sharing no arithmetic with the library's packed-label implementation.

/// One point as plain bit strings, the oracle's only data type.
#[derive(Clone, Debug)]
pub struct StrPoint {
    pub x: String,
    pub y: String,
    pub t: String,
}

fn shared_prefix_len(a: &str, b: &str) -> usize {
    a.bytes().zip(b.bytes()).take_while(|(p, q)| p == q).count()
}

fn str_attr_pair_cost(a: &str, b: &str) -> u64 {
    (a.len() + b.len() - 2 * shared_prefix_len(a, b)) as u64
}

pub fn str_pair_cost(p: &StrPoint, q: &StrPoint) -> u64 {
    str_attr_pair_cost(&p.x, &q.x) + str_attr_pair_cost(&p.y, &q.y) + str_attr_pair_cost(&p.t, &q.t)
}

pub fn str_suppress_cost(p: &StrPoint) -> u64 {
    (p.x.len() + p.y.len() + p.t.len()) as u64
}

/// Minimum release cost over every order-preserving alignment of `a` and `b`,
/// found by enumerating all complete alignments (merge / gap-in-a / gap-in-b
/// at each step) and taking the cheapest full path. No memoization, no
/// pruning: at the tested lengths the walk is small and obviously exhaustive.
pub fn brute_force_pairwise_oracle(a: &[StrPoint], b: &[StrPoint]) -> u64 {
    fn walk(a: &[StrPoint], b: &[StrPoint], i: usize, j: usize, acc: u64, best: &mut u64) {
        if i == a.len() && j == b.len() {
            *best = (*best).min(acc);
            return;
        }
        if i < a.len() && j < b.len() {
            walk(a, b, i + 1, j + 1, acc + str_pair_cost(&a[i], &b[j]), best);
        }
        if i < a.len() {
            walk(a, b, i + 1, j, acc + str_suppress_cost(&a[i]), best);
        }
        if j < b.len() {
            walk(a, b, i, j + 1, acc + str_suppress_cost(&b[j]), best);
        }
    }
    let mut best = u64::MAX;
    walk(a, b, 0, 0, 0, &mut best);
    best
}

// ---------------------------------------------------------------------------
// Seeded pair generator shared by the alignment criteria.

/// One random leaf sequence in both representations: library points and the
/// oracle's strings. The string is rendered first and parsed into the packed
/// label, so the two views agree by construction.
fn random_sequence(
    rng: &mut ChaCha8Rng,
    len: usize,
    bits: (usize, usize, usize),
) -> (Vec<GeneralizedPoint>, Vec<StrPoint>) {
    let mut points = Vec::with_capacity(len);
    let mut strings = Vec::with_capacity(len);
    let attr = |rng: &mut ChaCha8Rng, width: usize| -> String {
        let v = rng.random_range(0..(1u64 << width));
        format!("{v:0width$b}")
    };
    for _ in 0..len {
        let (x, y, t) = (attr(rng, bits.0), attr(rng, bits.1), attr(rng, bits.2));
        points.push(GeneralizedPoint::new(
            x.parse().unwrap(),
            y.parse().unwrap(),
            t.parse().unwrap(),
        ));
        strings.push(StrPoint { x, y, t });
    }
    (points, strings)
}

pub struct PairCase {
    pub a: Vec<GeneralizedPoint>,
    pub b: Vec<GeneralizedPoint>,
    pub a_str: Vec<StrPoint>,
    pub b_str: Vec<StrPoint>,
}

/// Deterministic random pair cases on 3/3/3-bit trees.
pub fn seeded_pairs(
    seed: u64,
    count: usize,
    min_len: usize,
    max_len: usize,
) -> Vec<PairCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let la = rng.random_range(min_len..=max_len);
            let lb = rng.random_range(min_len..=max_len);
            let (a, a_str) = random_sequence(&mut rng, la, (3, 3, 3));
            let (b, b_str) = random_sequence(&mut rng, lb, (3, 3, 3));
            PairCase { a, b, a_str, b_str }
        })
        .collect()
}

/// Seed for the dominance/bound pair set, shared so two criteria see the
/// exact same instances.
pub const DOMINANCE_PAIRS_SEED: u64 = 2024;

// ---------------------------------------------------------------------------
// Naive per-point walker: independent recomputation of total loss from the
// released clusters, using rendered label strings instead of packed bits.

fn str_generalization_loss(original: &str, released: &str) -> u64 {
    assert!(
        original.starts_with(released),
        "released label {released:?} must be an ancestor of {original:?}"
    );
    (original.len() - released.len()) as u64
}

/// Walk every member point of every cluster, look up the released position
/// covering it, and sum the per-attribute bit distance to the released label.
pub fn naive_per_point_walker(dataset: &Dataset, released: &AnonymizedDataset) -> u64 {
    let mut total = 0u64;
    for cluster in &released.clusters {
        for (member_id, structure) in cluster.members.iter().zip(&cluster.structures) {
            let member = dataset.trajectory_by_id(member_id).expect("member exists in dataset");
            let mut seen = 0usize;
            for (slot, covered) in structure.positions().iter().enumerate() {
                let Some(idx) = covered else { continue };
                let original = &member.points[*idx];
                let head = &cluster.head[slot];
                total += str_generalization_loss(&original.x.to_string(), &head.x.to_string());
                total += str_generalization_loss(&original.y.to_string(), &head.y.to_string());
                total += str_generalization_loss(&original.t.to_string(), &head.t.to_string());
                seen += 1;
            }
            assert_eq!(seen, member.points.len(), "every original point must be released once");
        }
    }
    total
}

// ---------------------------------------------------------------------------
// Shared clustering sweep: n = 500 synthetic walks, three deterministic
// algorithms, k in {2, 5, 10, 15}, ten seeds each.

pub const SWEEP_KS: [usize; 4] = [2, 5, 10, 15];
pub const SWEEP_SEED_COUNT: usize = 10;
pub const SWEEP_ALGORITHMS: [ClusteringAlgorithm; 3] = [
    ClusteringAlgorithm::Heuristic,
    ClusteringAlgorithm::Kmeans,
    ClusteringAlgorithm::IterativeKmeans,
];

pub struct SweepRun {
    pub algorithm: ClusteringAlgorithm,
    pub k: usize,
    pub seed: u64,
    pub released: AnonymizedDataset,
    pub total_loss: u64,
    pub k_anonymity_holds: bool,
    pub avg_achieved_k: f64,
    pub pct_under_k: f64,
    pub secs: f64,
}

pub static SYNTH_DATASET: LazyLock<Dataset> = LazyLock::new(|| {
    let grid = GridSpec::new(0.0, 0.0, 10.0, 3600.0, 7, 7, 5).expect("valid grid");
    let lengths = LengthDistribution::Geometric { p: 0.35, min: 1, max: 12 };
    random_walk_dataset(&grid, 500, &lengths, 42).expect("valid synthetic dataset")
});

pub static SWEEP: LazyLock<Vec<SweepRun>> = LazyLock::new(|| {
    let dataset = &*SYNTH_DATASET;
    let mut runs = Vec::new();
    for algorithm in SWEEP_ALGORITHMS {
        for k in SWEEP_KS {
            for seed in 0..SWEEP_SEED_COUNT as u64 {
                let start = Instant::now();
                let assignment = algorithm
                    .run(dataset, k, PairwiseAligner::Dynamic, CandidateEvaluation::RunningHead, seed)
                    .expect("clustering succeeds");
                let (released, total_loss) = generate_anonymized_dataset(
                    dataset,
                    &assignment,
                    PairwiseAligner::Dynamic,
                    ProgressivePolicy::GreedyMinLoss,
                    seed,
                )
                .expect("alignment succeeds");
                let secs = start.elapsed().as_secs_f64();
                let sequences: Vec<&[GeneralizedPoint]> =
                    released.rows().map(|(_, _, points)| points).collect();
                let verdict = verify_k_anonymity(sequences.iter().copied(), k);
                let achieved = achieved_k_stats(sequences.iter().copied(), k).expect("non-empty");
                runs.push(SweepRun {
                    algorithm,
                    k,
                    seed,
                    released,
                    total_loss,
                    k_anonymity_holds: verdict.holds,
                    avg_achieved_k: achieved.avg_achieved_k,
                    pct_under_k: achieved.pct_under_k,
                    secs,
                });
            }
        }
    }
    runs
});
