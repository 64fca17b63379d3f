//! Binary generalization hierarchies over grid cells, with bit-count information loss.
//!
//! Each attribute (x, y, t) gets a perfect binary tree of depth `bits`. Nodes are
//! bit-prefix labels: the root is the empty prefix, leaves are full-width cell
//! indices, and generalizing a value truncates its prefix. Releasing node `g`
//! instead of data known to leaf precision under node `v` loses
//! `log2(leaf_count(g)) - log2(leaf_count(v))` bits, which for these trees is just
//! the label-length difference. Losses are therefore exact `u64` bit counts.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// The three generalized attributes of a trajectory point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attribute {
    X,
    Y,
    T,
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Attribute::X => write!(f, "x"),
            Attribute::Y => write!(f, "y"),
            Attribute::T => write!(f, "t"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DghError {
    #[error("tree depth must be between 1 and 32 bits, got {0}")]
    InvalidDepth(u32),
    #[error("label {0:?} is not a bit string of at most 32 '0'/'1' characters")]
    MalformedLabel(String),
    #[error("label '{label}' does not fit a tree of depth {depth}")]
    LabelTooDeep { label: String, depth: u8 },
    #[error("nodes belong to different trees")]
    TreeMismatch,
    #[error("'{ancestor}' is not an ancestor of '{node}'")]
    NotAnAncestor { node: String, ancestor: String },
}

/// A node of a binary hierarchy, identified by its bit-prefix path from the root.
///
/// Stored packed: the prefix bits right-aligned in `bits`, with `len` giving the
/// prefix length. The empty prefix is the root. Representation is canonical
/// (`bits < 2^len`), so derived equality and ordering are sound.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    len: u8,
    bits: u32,
}

/// Shift that tolerates a full-width (32) shift instead of overflowing.
#[inline]
fn shr32(bits: u32, n: u8) -> u32 {
    if n >= 32 {
        0
    } else {
        bits >> n
    }
}

impl Label {
    pub const ROOT: Label = Label { len: 0, bits: 0 };

    /// Leaf label for a cell index: the index written as `depth` bits, MSB first.
    ///
    /// Panics if the index does not fit in `depth` bits; callers bound-check
    /// indices when discretizing.
    pub fn leaf(index: u32, depth: u8) -> Label {
        assert!((1..=32).contains(&depth), "leaf depth out of range: {depth}");
        assert!(
            depth == 32 || u64::from(index) < (1u64 << depth),
            "cell index {index} does not fit in {depth} bits"
        );
        Label { len: depth, bits: index }
    }

    #[inline]
    fn from_raw(bits: u32, len: u8) -> Label {
        debug_assert!(len <= 32);
        debug_assert!(len == 32 || u64::from(bits) < (1u64 << len));
        Label { len, bits }
    }

    /// Prefix length in bits; 0 for the root.
    #[inline]
    pub fn bit_len(&self) -> u8 {
        self.len
    }

    /// Prefix bits, right-aligned. For a leaf this is the cell index.
    #[inline]
    pub fn bits(&self) -> u32 {
        self.bits
    }

    #[inline]
    pub fn is_root(&self) -> bool {
        self.len == 0
    }

    /// The node one generalization step up, or `None` at the root.
    pub fn parent(&self) -> Option<Label> {
        if self.len == 0 {
            None
        } else {
            Some(Label::from_raw(self.bits >> 1, self.len - 1))
        }
    }

    /// This label cut down to its first `new_len` bits.
    pub fn truncated(&self, new_len: u8) -> Label {
        assert!(new_len <= self.len, "cannot truncate {self} to {new_len} bits");
        Label::from_raw(shr32(self.bits, self.len - new_len), new_len)
    }

    /// Whether `self`'s prefix is a prefix of `other` (equality included).
    #[inline]
    pub fn is_prefix_of(&self, other: &Label) -> bool {
        self.len <= other.len && shr32(other.bits, other.len - self.len) == self.bits
    }

    /// Longest common prefix of two labels; the root when they share no bits.
    #[inline]
    pub fn common_prefix(a: Label, b: Label) -> Label {
        let l = a.len.min(b.len);
        let ah = shr32(a.bits, a.len - l);
        let bh = shr32(b.bits, b.len - l);
        let x = ah ^ bh;
        let common = if x == 0 {
            l
        } else {
            // Highest differing bit sits `32 - leading_zeros` bits up from the LSB;
            // everything above it (within the l-bit window) is shared.
            l + x.leading_zeros() as u8 - 32
        };
        Label::from_raw(shr32(ah, l - common), common)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.len).rev() {
            let bit = (shr32(self.bits, i)) & 1;
            write!(f, "{bit}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Label(\"{self}\")")
    }
}

impl FromStr for Label {
    type Err = DghError;

    fn from_str(s: &str) -> Result<Label, DghError> {
        if s.len() > 32 {
            return Err(DghError::MalformedLabel(s.to_string()));
        }
        let mut bits = 0u32;
        for c in s.chars() {
            let bit = match c {
                '0' => 0,
                '1' => 1,
                _ => return Err(DghError::MalformedLabel(s.to_string())),
            };
            bits = (bits << 1) | bit;
        }
        Ok(Label::from_raw(bits, s.len() as u8))
    }
}

/// A perfect binary domain generalization hierarchy for one attribute.
///
/// The tree is implicit: every bit string of length `<= depth` is a node, the
/// `2^depth` full-length strings are the leaves (grid cells).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DghTree {
    attribute: Attribute,
    depth: u8,
}

impl DghTree {
    /// Build the hierarchy for `attribute` over `2^bits` grid cells.
    pub fn new(attribute: Attribute, bits: u32) -> Result<DghTree, DghError> {
        if !(1..=32).contains(&bits) {
            return Err(DghError::InvalidDepth(bits));
        }
        Ok(DghTree { attribute, depth: bits as u8 })
    }

    pub fn attribute(&self) -> Attribute {
        self.attribute
    }

    pub fn depth(&self) -> u8 {
        self.depth
    }

    pub fn leaf_count(&self) -> u64 {
        1u64 << self.depth
    }

    pub fn node_count(&self) -> u64 {
        (1u64 << (self.depth + 1)) - 1
    }

    pub fn contains(&self, label: Label) -> bool {
        label.len <= self.depth
    }

    /// Checked handle to a node of this tree.
    pub fn node(&self, label: Label) -> Result<NodeRef<'_>, DghError> {
        if self.contains(label) {
            Ok(NodeRef { tree: self, label })
        } else {
            Err(DghError::LabelTooDeep { label: label.to_string(), depth: self.depth })
        }
    }

    /// Parse a bit-string label and resolve it as a node of this tree.
    pub fn parse_node(&self, s: &str) -> Result<NodeRef<'_>, DghError> {
        self.node(s.parse()?)
    }

    /// All node labels, shortest (most general) first.
    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        (0..=self.depth)
            .flat_map(|len| (0..(1u64 << len)).map(move |bits| Label::from_raw(bits as u32, len)))
    }

    pub fn leaves(&self) -> impl Iterator<Item = Label> + '_ {
        (0..self.leaf_count()).map(|bits| Label::from_raw(bits as u32, self.depth))
    }

    /// LF: number of leaves under the node (`2^(depth - |label|)`).
    #[inline]
    pub fn lf(&self, label: Label) -> u64 {
        debug_assert!(self.contains(label));
        1u64 << (self.depth - label.len)
    }

    /// Longest-common-ancestor of two nodes of this tree.
    #[inline]
    pub fn lca(&self, a: Label, b: Label) -> Label {
        debug_assert!(self.contains(a) && self.contains(b));
        Label::common_prefix(a, b)
    }

    /// LS: bits lost generalizing `node` up to `ancestor`
    /// (`log2 lf(ancestor) - log2 lf(node)` = label-length difference).
    pub fn ls(&self, node: Label, ancestor: Label) -> Result<u64, DghError> {
        if !ancestor.is_prefix_of(&node) {
            return Err(DghError::NotAnAncestor {
                node: node.to_string(),
                ancestor: ancestor.to_string(),
            });
        }
        Ok(u64::from(node.len - ancestor.len))
    }

    /// Total bits lost merging two nodes into their lowest common ancestor.
    #[inline]
    pub fn pair_loss(&self, a: Label, b: Label) -> u64 {
        let lca = self.lca(a, b);
        u64::from(a.len - lca.len) + u64::from(b.len - lca.len)
    }

    /// Bits lost generalizing the node all the way to the root.
    #[inline]
    pub fn suppression_loss(&self, label: Label) -> u64 {
        debug_assert!(self.contains(label));
        u64::from(label.len)
    }

    /// `|suppression_loss(a) - suppression_loss(b)|`: equals the generalization
    /// loss between `a` and `b` when one is an ancestor of the other, and is only
    /// a lower bound on `pair_loss` otherwise.
    #[inline]
    pub fn ancestor_loss_difference(&self, a: Label, b: Label) -> u64 {
        debug_assert!(self.contains(a) && self.contains(b));
        u64::from(a.len.abs_diff(b.len))
    }
}

/// A node bound to its tree; the checked API for cross-tree misuse.
#[derive(Clone, Copy, Debug)]
pub struct NodeRef<'t> {
    tree: &'t DghTree,
    label: Label,
}

impl<'t> NodeRef<'t> {
    pub fn tree(&self) -> &'t DghTree {
        self.tree
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn lf(&self) -> u64 {
        self.tree.lf(self.label)
    }

    pub fn suppression_loss(&self) -> u64 {
        self.tree.suppression_loss(self.label)
    }

    fn same_tree(&self, other: &NodeRef<'_>) -> Result<(), DghError> {
        if self.tree == other.tree {
            Ok(())
        } else {
            Err(DghError::TreeMismatch)
        }
    }

    pub fn lca(&self, other: NodeRef<'t>) -> Result<NodeRef<'t>, DghError> {
        self.same_tree(&other)?;
        Ok(NodeRef { tree: self.tree, label: self.tree.lca(self.label, other.label) })
    }

    pub fn ls(&self, ancestor: NodeRef<'_>) -> Result<u64, DghError> {
        self.same_tree(&ancestor)?;
        self.tree.ls(self.label, ancestor.label)
    }

    pub fn pair_loss(&self, other: NodeRef<'_>) -> Result<u64, DghError> {
        self.same_tree(&other)?;
        Ok(self.tree.pair_loss(self.label, other.label))
    }

    pub fn ancestor_loss_difference(&self, other: NodeRef<'_>) -> Result<u64, DghError> {
        self.same_tree(&other)?;
        Ok(self.tree.ancestor_loss_difference(self.label, other.label))
    }
}

/// The three hierarchies a grid induces, one per attribute.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hierarchies {
    pub x: DghTree,
    pub y: DghTree,
    pub t: DghTree,
}

impl Hierarchies {
    pub fn new(bits_x: u32, bits_y: u32, bits_t: u32) -> Result<Hierarchies, DghError> {
        Ok(Hierarchies {
            x: DghTree::new(Attribute::X, bits_x)?,
            y: DghTree::new(Attribute::Y, bits_y)?,
            t: DghTree::new(Attribute::T, bits_t)?,
        })
    }

    pub fn tree(&self, attribute: Attribute) -> &DghTree {
        match attribute {
            Attribute::X => &self.x,
            Attribute::Y => &self.y,
            Attribute::T => &self.t,
        }
    }
}
