//! Sequence alignment of trajectories into one shared released trajectory.
//!
//! The pairwise aligner is a dynamic program over point sequences. Aligning a
//! point of one sequence with a point of the other merges them into their
//! per-attribute lowest common ancestors; skipping a point (a gap on the other
//! side) costs its full suppression and releases a fully suppressed position,
//! so every member of a cluster can share the exact same released sequence.
//! Cluster-level alignment folds members progressively into a running result.

use std::cmp::Reverse;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dgh::{DghError, DghTree, Hierarchies, Label};
use crate::model::{GeneralizedPoint, Point, Trajectory};

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error(transparent)]
    Dgh(#[from] DghError),
    #[error("cannot align an empty cluster")]
    EmptyCluster,
}

/// Bits lost if the point is released fully suppressed (all attributes to root).
#[inline]
pub fn suppress_cost(p: &GeneralizedPoint) -> u64 {
    u64::from(p.x.bit_len()) + u64::from(p.y.bit_len()) + u64::from(p.t.bit_len())
}

/// Merge two points into their per-attribute lowest common ancestors, returning
/// the merged point and the total bits both lose reaching it.
#[inline]
pub fn point_pair_cost(p: &GeneralizedPoint, q: &GeneralizedPoint) -> (GeneralizedPoint, u64) {
    let x = Label::common_prefix(p.x, q.x);
    let y = Label::common_prefix(p.y, q.y);
    let t = Label::common_prefix(p.t, q.t);
    let cost = u64::from(p.x.bit_len() + q.x.bit_len() - 2 * x.bit_len())
        + u64::from(p.y.bit_len() + q.y.bit_len() - 2 * y.bit_len())
        + u64::from(p.t.bit_len() + q.t.bit_len() - 2 * t.bit_len());
    (GeneralizedPoint { x, y, t }, cost)
}

/// Where each input point went: `positions[o]` is the input index released at
/// output position `o`, or `None` where this input had a gap. Non-gap entries
/// are strictly increasing and cover every input point exactly once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlignmentStructure {
    positions: Vec<Option<usize>>,
}

impl AlignmentStructure {
    pub fn identity(len: usize) -> AlignmentStructure {
        AlignmentStructure { positions: (0..len).map(Some).collect() }
    }

    /// Build a structure from raw positions. For tests and tools that craft
    /// releases by hand; pipeline code derives structures from alignments.
    #[doc(hidden)]
    pub fn from_positions(positions: Vec<Option<usize>>) -> AlignmentStructure {
        AlignmentStructure { positions }
    }

    pub fn positions(&self) -> &[Option<usize>] {
        &self.positions
    }

    pub fn output_len(&self) -> usize {
        self.positions.len()
    }

    pub fn covered(&self) -> usize {
        self.positions.iter().filter(|s| s.is_some()).count()
    }

    /// Check monotone coverage of an input of `input_len` points.
    pub fn is_consistent(&self, input_len: usize) -> bool {
        let mut expect = 0usize;
        for i in self.positions.iter().flatten() {
            if *i != expect {
                return false;
            }
            expect += 1;
        }
        expect == input_len
    }

    /// Re-map through a newer alignment of the running result: `outer` maps new
    /// output positions to old ones, `self` maps old positions to input points.
    fn compose_with(&self, outer: &AlignmentStructure) -> AlignmentStructure {
        AlignmentStructure {
            positions: outer
                .positions
                .iter()
                .map(|slot| slot.and_then(|o| self.positions[o]))
                .collect(),
        }
    }
}

/// A pairwise alignment: the merged sequence, one structure per input (in
/// input order), and the bits lost, which equals the loss recomputed by
/// walking `gen` against the structures.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentResult {
    pub gen: Vec<GeneralizedPoint>,
    pub structures: Vec<AlignmentStructure>,
    pub total_loss: u64,
}

/// Pairwise alignment strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairwiseAligner {
    /// Minimum-loss alignment by dynamic programming.
    Dynamic,
    /// Match positions index-by-index, suppressing the longer tail.
    Static,
}

impl PairwiseAligner {
    pub fn align(
        self,
        hierarchies: &Hierarchies,
        a: &[GeneralizedPoint],
        b: &[GeneralizedPoint],
    ) -> Result<AlignmentResult, AlignError> {
        match self {
            PairwiseAligner::Dynamic => dynamic_sa(hierarchies, a, b),
            PairwiseAligner::Static => static_align(hierarchies, a, b),
        }
    }

    /// Alignment cost without materializing the merged sequence.
    pub fn loss(
        self,
        hierarchies: &Hierarchies,
        a: &[GeneralizedPoint],
        b: &[GeneralizedPoint],
    ) -> Result<u64, AlignError> {
        validate_sequence(hierarchies, a)?;
        validate_sequence(hierarchies, b)?;
        Ok(match self {
            PairwiseAligner::Dynamic => dynamic_loss_only(a, b),
            PairwiseAligner::Static => static_loss_only(a, b),
        })
    }
}

fn check_label(tree: &DghTree, label: Label) -> Result<(), AlignError> {
    if tree.contains(label) {
        Ok(())
    } else {
        Err(AlignError::Dgh(DghError::LabelTooDeep {
            label: label.to_string(),
            depth: tree.depth(),
        }))
    }
}

fn validate_sequence(h: &Hierarchies, seq: &[GeneralizedPoint]) -> Result<(), AlignError> {
    for p in seq {
        check_label(&h.x, p.x)?;
        check_label(&h.y, p.y)?;
        check_label(&h.t, p.t)?;
    }
    Ok(())
}

const DIAG: u8 = 0;
const LEFT: u8 = 1;
const UP: u8 = 2;

/// Minimum-loss pairwise alignment (dynamic programming).
///
/// Cell `(i, j)` holds the cheapest way to release the first `i` points of `a`
/// and `j` points of `b` as one shared sequence: merge both next points into
/// their LCAs, or suppress one side's next point against a gap. Ties prefer
/// merging, then a gap in `a`, then a gap in `b`, making results deterministic.
pub fn dynamic_sa(
    hierarchies: &Hierarchies,
    a: &[GeneralizedPoint],
    b: &[GeneralizedPoint],
) -> Result<AlignmentResult, AlignError> {
    validate_sequence(hierarchies, a)?;
    validate_sequence(hierarchies, b)?;
    let (m, n) = (a.len(), b.len());
    let w = n + 1;
    let mut cost = vec![0u64; (m + 1) * w];
    let mut dir = vec![DIAG; (m + 1) * w];
    for j in 1..=n {
        cost[j] = cost[j - 1] + suppress_cost(&b[j - 1]);
        dir[j] = LEFT;
    }
    for i in 1..=m {
        cost[i * w] = cost[(i - 1) * w] + suppress_cost(&a[i - 1]);
        dir[i * w] = UP;
        for j in 1..=n {
            let diag = cost[(i - 1) * w + j - 1] + point_pair_cost(&a[i - 1], &b[j - 1]).1;
            let left = cost[i * w + j - 1] + suppress_cost(&b[j - 1]);
            let up = cost[(i - 1) * w + j] + suppress_cost(&a[i - 1]);
            let (mut best, mut d) = (diag, DIAG);
            if left < best {
                (best, d) = (left, LEFT);
            }
            if up < best {
                (best, d) = (up, UP);
            }
            cost[i * w + j] = best;
            dir[i * w + j] = d;
        }
    }

    let mut gen = Vec::new();
    let mut pos_a = Vec::new();
    let mut pos_b = Vec::new();
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        match dir[i * w + j] {
            DIAG => {
                gen.push(point_pair_cost(&a[i - 1], &b[j - 1]).0);
                pos_a.push(Some(i - 1));
                pos_b.push(Some(j - 1));
                i -= 1;
                j -= 1;
            }
            LEFT => {
                gen.push(GeneralizedPoint::ROOT);
                pos_a.push(None);
                pos_b.push(Some(j - 1));
                j -= 1;
            }
            _ => {
                gen.push(GeneralizedPoint::ROOT);
                pos_a.push(Some(i - 1));
                pos_b.push(None);
                i -= 1;
            }
        }
    }
    gen.reverse();
    pos_a.reverse();
    pos_b.reverse();
    let structures =
        vec![AlignmentStructure { positions: pos_a }, AlignmentStructure { positions: pos_b }];
    let total_loss = cost[m * w + n];
    debug_assert!(structures[0].is_consistent(m) && structures[1].is_consistent(n));
    debug_assert_eq!(
        total_loss,
        structure_loss(&gen, &structures[0], |i| a[i])
            + structure_loss(&gen, &structures[1], |j| b[j])
    );
    Ok(AlignmentResult { gen, structures, total_loss })
}

fn dynamic_loss_only(a: &[GeneralizedPoint], b: &[GeneralizedPoint]) -> u64 {
    let (m, n) = (a.len(), b.len());
    let mut prev = vec![0u64; n + 1];
    let mut cur = vec![0u64; n + 1];
    for j in 1..=n {
        prev[j] = prev[j - 1] + suppress_cost(&b[j - 1]);
    }
    for i in 1..=m {
        cur[0] = prev[0] + suppress_cost(&a[i - 1]);
        for j in 1..=n {
            let diag = prev[j - 1] + point_pair_cost(&a[i - 1], &b[j - 1]).1;
            let left = cur[j - 1] + suppress_cost(&b[j - 1]);
            let up = prev[j] + suppress_cost(&a[i - 1]);
            cur[j] = diag.min(left).min(up);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[n]
}

/// Index-by-index alignment: position `i` of both sequences merges; trailing
/// unmatched points of the longer sequence are suppressed. The baseline the
/// dynamic aligner is measured against, and never cheaper than it.
pub fn static_align(
    hierarchies: &Hierarchies,
    a: &[GeneralizedPoint],
    b: &[GeneralizedPoint],
) -> Result<AlignmentResult, AlignError> {
    validate_sequence(hierarchies, a)?;
    validate_sequence(hierarchies, b)?;
    let (m, n) = (a.len(), b.len());
    let (short, long) = (m.min(n), m.max(n));
    let mut gen = Vec::with_capacity(long);
    let mut total_loss = 0u64;
    let mut pos_a = Vec::with_capacity(long);
    let mut pos_b = Vec::with_capacity(long);
    for i in 0..short {
        let (merged, cost) = point_pair_cost(&a[i], &b[i]);
        gen.push(merged);
        total_loss += cost;
        pos_a.push(Some(i));
        pos_b.push(Some(i));
    }
    for i in short..long {
        gen.push(GeneralizedPoint::ROOT);
        if m > n {
            total_loss += suppress_cost(&a[i]);
            pos_a.push(Some(i));
            pos_b.push(None);
        } else {
            total_loss += suppress_cost(&b[i]);
            pos_a.push(None);
            pos_b.push(Some(i));
        }
    }
    let structures =
        vec![AlignmentStructure { positions: pos_a }, AlignmentStructure { positions: pos_b }];
    Ok(AlignmentResult { gen, structures, total_loss })
}

fn static_loss_only(a: &[GeneralizedPoint], b: &[GeneralizedPoint]) -> u64 {
    let short = a.len().min(b.len());
    let mut loss: u64 = (0..short).map(|i| point_pair_cost(&a[i], &b[i]).1).sum();
    loss += a[short..].iter().map(suppress_cost).sum::<u64>();
    loss += b[short..].iter().map(suppress_cost).sum::<u64>();
    loss
}

/// Bits one input loses under a released sequence: at each position it
/// occupies, the label-length drop from its point to the released point.
fn structure_loss(
    gen: &[GeneralizedPoint],
    structure: &AlignmentStructure,
    input: impl Fn(usize) -> GeneralizedPoint,
) -> u64 {
    structure
        .positions
        .iter()
        .enumerate()
        .map(|(o, slot)| {
            slot.map_or(0, |i| {
                let p = input(i);
                let g = &gen[o];
                debug_assert!(
                    g.x.is_prefix_of(&p.x) && g.y.is_prefix_of(&p.y) && g.t.is_prefix_of(&p.t),
                    "released point must generalize the member point"
                );
                u64::from(p.x.bit_len() - g.x.bit_len())
                    + u64::from(p.y.bit_len() - g.y.bit_len())
                    + u64::from(p.t.bit_len() - g.t.bit_len())
            })
        })
        .sum()
}

/// How the next member to fold into the running cluster result is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProgressivePolicy {
    /// Fold the member whose pairwise alignment with the running result is
    /// cheapest (ties: smallest id).
    GreedyMinLoss,
    /// Fold members in seeded random order.
    Random,
}

/// A cluster folded into one shared released sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterAlignment {
    /// The released sequence every member shares.
    pub gen: Vec<GeneralizedPoint>,
    /// Per member (in input order), where each of its points ended up.
    pub structures: Vec<AlignmentStructure>,
    /// Bits lost by all members against the final `gen`, recomputed by the
    /// per-position walk (the definition of trajectory loss).
    pub total_loss: u64,
    /// Sum of the pairwise alignment costs accumulated while folding; can
    /// undercount `total_loss` because later folds generalize earlier members
    /// further without recharging them.
    pub stepwise_loss: u64,
}

enum FoldOrder {
    Policy(ProgressivePolicy, u64),
    Fixed(Vec<usize>),
}

/// Progressively align a cluster: start from its longest member (ties:
/// smallest id) and fold the remaining members in policy order.
pub fn progressive_sa(
    hierarchies: &Hierarchies,
    members: &[&Trajectory],
    aligner: PairwiseAligner,
    policy: ProgressivePolicy,
    seed: u64,
) -> Result<ClusterAlignment, AlignError> {
    fold_cluster(hierarchies, members, aligner, FoldOrder::Policy(policy, seed))
}

/// Progressive alignment folding non-base members in the given order
/// (indices into `members`, base excluded). Test and analysis hook.
#[doc(hidden)]
pub fn progressive_sa_with_order(
    hierarchies: &Hierarchies,
    members: &[&Trajectory],
    aligner: PairwiseAligner,
    order: Vec<usize>,
) -> Result<ClusterAlignment, AlignError> {
    fold_cluster(hierarchies, members, aligner, FoldOrder::Fixed(order))
}

fn fold_cluster(
    hierarchies: &Hierarchies,
    members: &[&Trajectory],
    aligner: PairwiseAligner,
    order: FoldOrder,
) -> Result<ClusterAlignment, AlignError> {
    if members.is_empty() {
        return Err(AlignError::EmptyCluster);
    }
    let sequences: Vec<Vec<GeneralizedPoint>> = members
        .iter()
        .map(|tr| tr.points.iter().map(Point::generalized).collect())
        .collect();
    for seq in &sequences {
        validate_sequence(hierarchies, seq)?;
    }

    let base = (0..members.len())
        .min_by_key(|&i| (Reverse(members[i].points.len()), members[i].id.as_str()))
        .expect("non-empty");
    let mut remaining: Vec<usize> = (0..members.len()).filter(|&i| i != base).collect();
    if let FoldOrder::Fixed(order) = &order {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, remaining, "fixed order must cover every non-base member once");
    }

    let mut gen = sequences[base].clone();
    let mut structures: Vec<Option<AlignmentStructure>> = vec![None; members.len()];
    structures[base] = Some(AlignmentStructure::identity(gen.len()));

    let (mut rng, mut fixed) = match &order {
        FoldOrder::Policy(ProgressivePolicy::Random, seed) => {
            (Some(ChaCha8Rng::seed_from_u64(*seed)), std::collections::VecDeque::new())
        }
        FoldOrder::Fixed(o) => (None, o.iter().copied().collect()),
        _ => (None, std::collections::VecDeque::new()),
    };

    let mut stepwise_loss = 0u64;
    while !remaining.is_empty() {
        let pick_slot = match &order {
            FoldOrder::Policy(ProgressivePolicy::GreedyMinLoss, _) => {
                let mut best: Option<(u64, &str, usize)> = None;
                for (slot, &cand) in remaining.iter().enumerate() {
                    let loss = aligner.loss(hierarchies, &gen, &sequences[cand])?;
                    let key = (loss, members[cand].id.as_str());
                    if best.is_none_or(|(l, id, _)| key < (l, id)) {
                        best = Some((key.0, key.1, slot));
                    }
                }
                best.expect("non-empty remaining").2
            }
            FoldOrder::Policy(ProgressivePolicy::Random, _) => {
                rng.as_mut().expect("seeded").random_range(0..remaining.len())
            }
            FoldOrder::Fixed(_) => {
                let next = fixed.pop_front().expect("order covers remaining");
                remaining.iter().position(|&i| i == next).expect("not yet folded")
            }
        };
        let member = remaining.swap_remove(pick_slot);
        let step = aligner.align(hierarchies, &gen, &sequences[member])?;
        stepwise_loss += step.total_loss;
        for s in structures.iter_mut().flatten() {
            *s = s.compose_with(&step.structures[0]);
        }
        structures[member] = Some(step.structures[1].clone());
        gen = step.gen;
    }

    let structures: Vec<AlignmentStructure> =
        structures.into_iter().map(|s| s.expect("every member folded")).collect();
    let total_loss = members
        .iter()
        .zip(&structures)
        .map(|(tr, s)| {
            debug_assert!(s.is_consistent(tr.points.len()));
            structure_loss(&gen, s, |i| tr.points[i].generalized())
        })
        .sum();
    Ok(ClusterAlignment { gen, structures, total_loss, stepwise_loss })
}
