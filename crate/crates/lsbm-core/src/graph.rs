//! Labelled graphs with hidden planted types, and their sampler.
//!
//! A graph is `n` nodes split into two equal blocks (the hidden types), an
//! edge list with one label per edge, and nothing else. Edges are stored in
//! canonical form `u < v`, sorted lexicographically, so a sampled graph is a
//! pure function of `(params, n, seed)` down to the byte level.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Binomial;

use crate::model::{LabelDistribution, LabelId, ModelParams};
use crate::rng::rng_from_seed;

/// Hidden node type: 0 or 1.
pub type NodeType = u8;

/// Above this node count, per-pair Bernoulli sampling (`O(n^2)`) is replaced
/// by drawing binomial edge counts and then uniform endpoints.
pub const PAIRWISE_SAMPLING_LIMIT: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphError {
    /// Node count must be even and at least 2 for sampling.
    InvalidNodeCount(usize),
    /// `a/n` or `b/n` exceeds 1 and cannot be an edge probability.
    EdgeProbabilityOverflow,
    /// Edge endpoints must satisfy `u < v < n`.
    BadEdge { u: u32, v: u32 },
    /// The same unordered pair appears twice.
    DuplicateEdge { u: u32, v: u32 },
    /// An edge label index is outside the model's label set.
    LabelOutOfRange(u32),
    /// The type vector length differs from `n`.
    TypesLengthMismatch { n: usize, got: usize },
    /// A type value other than 0/1.
    InvalidType(u8),
    /// The two blocks are not the same size.
    UnbalancedTypes,
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::InvalidNodeCount(n) => {
                write!(f, "node count {n} must be even and >= 2")
            }
            GraphError::EdgeProbabilityOverflow => {
                write!(f, "a/n or b/n exceeds 1; increase n or decrease a, b")
            }
            GraphError::BadEdge { u, v } => {
                write!(f, "edge ({u}, {v}) must satisfy u < v < n")
            }
            GraphError::DuplicateEdge { u, v } => write!(f, "duplicate edge ({u}, {v})"),
            GraphError::LabelOutOfRange(l) => write!(f, "label index {l} out of range"),
            GraphError::TypesLengthMismatch { n, got } => {
                write!(f, "expected {n} node types, got {got}")
            }
            GraphError::InvalidType(t) => write!(f, "node type {t} is not 0 or 1"),
            GraphError::UnbalancedTypes => write!(f, "blocks must have exactly n/2 nodes each"),
        }
    }
}

impl core::error::Error for GraphError {}

/// One undirected labelled edge, canonical form `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct LabelledEdge {
    pub u: u32,
    pub v: u32,
    pub label: LabelId,
}

/// A labelled graph, optionally carrying the hidden ground-truth types.
///
/// Types are optional so that inference code paths can operate on graphs
/// read from an edge file alone, without ever touching the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledGraph {
    n: usize,
    types: Option<Vec<NodeType>>,
    edges: Vec<LabelledEdge>,
}

impl LabelledGraph {
    /// Validates structure: canonical sorted edges without duplicates, label
    /// indices within `label_count`, and (when present) balanced 0/1 types.
    pub fn new(
        n: usize,
        types: Option<Vec<NodeType>>,
        edges: Vec<LabelledEdge>,
        label_count: usize,
    ) -> Result<Self, GraphError> {
        if let Some(t) = &types {
            if t.len() != n {
                return Err(GraphError::TypesLengthMismatch { n, got: t.len() });
            }
            if let Some(&bad) = t.iter().find(|&&v| v > 1) {
                return Err(GraphError::InvalidType(bad));
            }
            let ones = t.iter().filter(|&&v| v == 1).count();
            if 2 * ones != n {
                return Err(GraphError::UnbalancedTypes);
            }
        }
        for e in &edges {
            if e.u >= e.v || e.v as usize >= n {
                return Err(GraphError::BadEdge { u: e.u, v: e.v });
            }
            if e.label.index() >= label_count {
                return Err(GraphError::LabelOutOfRange(e.label.0));
            }
        }
        let mut seen = BTreeSet::new();
        for e in &edges {
            if !seen.insert((e.u, e.v)) {
                return Err(GraphError::DuplicateEdge { u: e.u, v: e.v });
            }
        }
        Ok(LabelledGraph { n, types, edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn types(&self) -> Option<&[NodeType]> {
        self.types.as_deref()
    }

    pub fn edges(&self) -> &[LabelledEdge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edges.len() as f64 / self.n as f64
    }

    /// Per-node degrees.
    pub fn degrees(&self) -> Vec<u32> {
        let mut degree = vec![0u32; self.n];
        for e in &self.edges {
            degree[e.u as usize] += 1;
            degree[e.v as usize] += 1;
        }
        degree
    }
}

/// Precomputed cumulative sampler for a label distribution.
struct LabelSampler {
    index: Option<WeightedIndex<f64>>,
}

impl LabelSampler {
    fn new(dist: &LabelDistribution) -> Self {
        // All-zero weights cannot happen for a validated distribution.
        LabelSampler {
            index: WeightedIndex::new(dist.probs().iter().copied()).ok(),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> LabelId {
        match &self.index {
            Some(ix) => LabelId(ix.sample(rng) as u32),
            None => LabelId(0),
        }
    }
}

/// Samples a labelled stochastic block model graph.
///
/// Types are a uniformly random balanced partition; each same-type pair is
/// an edge with probability `a/n` and each cross-type pair with `b/n`; edge
/// labels are drawn from `mu` or `nu` accordingly. Fully deterministic given
/// the seed. Rejects odd `n`, `n < 2`, and `a/n > 1` or `b/n > 1`.
pub fn sample_graph(
    params: &ModelParams,
    n: usize,
    seed: u64,
) -> Result<LabelledGraph, GraphError> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(GraphError::InvalidNodeCount(n));
    }
    let p_same = params.a() / n as f64;
    let p_diff = params.b() / n as f64;
    if p_same > 1.0 || p_diff > 1.0 {
        return Err(GraphError::EdgeProbabilityOverflow);
    }

    let mut rng = rng_from_seed(seed);

    // Balanced partition: shuffle node indices, first half becomes block 0.
    let mut perm: Vec<u32> = (0..n as u32).collect();
    perm.shuffle(&mut rng);
    let mut types = vec![1u8; n];
    for &i in &perm[..n / 2] {
        types[i as usize] = 0;
    }

    let mu = LabelSampler::new(params.mu());
    let nu = LabelSampler::new(params.nu());

    let edges = if n <= PAIRWISE_SAMPLING_LIMIT {
        sample_edges_pairwise(&types, p_same, p_diff, &mu, &nu, &mut rng)
    } else {
        sample_edges_binomial(&types, p_same, p_diff, &mu, &nu, &mut rng)
    };

    Ok(LabelledGraph {
        n,
        types: Some(types),
        edges,
    })
}

fn sample_edges_pairwise<R: Rng>(
    types: &[NodeType],
    p_same: f64,
    p_diff: f64,
    mu: &LabelSampler,
    nu: &LabelSampler,
    rng: &mut R,
) -> Vec<LabelledEdge> {
    let n = types.len();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let same = types[u] == types[v];
            let p = if same { p_same } else { p_diff };
            if rng.random::<f64>() < p {
                let label = if same { mu.sample(rng) } else { nu.sample(rng) };
                edges.push(LabelledEdge {
                    u: u as u32,
                    v: v as u32,
                    label,
                });
            }
        }
    }
    edges
}

/// Large-`n` path: draw the binomial number of within- and cross-block edges,
/// then place them on uniformly random distinct pairs.
fn sample_edges_binomial<R: Rng>(
    types: &[NodeType],
    p_same: f64,
    p_diff: f64,
    mu: &LabelSampler,
    nu: &LabelSampler,
    rng: &mut R,
) -> Vec<LabelledEdge> {
    let n = types.len();
    let half = n as u64 / 2;
    let mut block = [Vec::with_capacity(n / 2), Vec::with_capacity(n / 2)];
    for (i, &t) in types.iter().enumerate() {
        block[t as usize].push(i as u32);
    }

    let within_pairs = half * (half - 1); // two blocks of C(half, 2) pairs
    let cross_pairs = half * half;
    let n_within = Binomial::new(within_pairs, p_same).unwrap().sample(rng);
    let n_cross = Binomial::new(cross_pairs, p_diff).unwrap().sample(rng);

    let mut seen = BTreeSet::new();
    let mut edges = Vec::with_capacity((n_within + n_cross) as usize);
    let mut place = |count: u64,
                     sampler: &LabelSampler,
                     pick: &mut dyn FnMut(&mut R) -> (u32, u32),
                     rng: &mut R,
                     edges: &mut Vec<LabelledEdge>| {
        let mut placed = 0;
        while placed < count {
            let (u, v) = pick(rng);
            if seen.insert((u, v)) {
                edges.push(LabelledEdge {
                    u,
                    v,
                    label: sampler.sample(rng),
                });
                placed += 1;
            }
        }
    };

    place(
        n_within,
        mu,
        &mut |rng: &mut R| {
            let b = &block[rng.random_range(0..2usize)];
            let i = rng.random_range(0..b.len());
            let j = loop {
                let j = rng.random_range(0..b.len());
                if j != i {
                    break j;
                }
            };
            (b[i].min(b[j]), b[i].max(b[j]))
        },
        rng,
        &mut edges,
    );
    place(
        n_cross,
        nu,
        &mut |rng: &mut R| {
            let x = block[0][rng.random_range(0..block[0].len())];
            let y = block[1][rng.random_range(0..block[1].len())];
            (x.min(y), x.max(y))
        },
        rng,
        &mut edges,
    );

    edges.sort_unstable();
    edges
}
