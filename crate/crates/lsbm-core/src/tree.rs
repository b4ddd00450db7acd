//! Labelled Galton-Watson trees, the broadcast process, exact root
//! reconstruction, and the depth-`d` reconstruction-advantage machinery.
//!
//! The tree analogue of the graph model: starting from a root of uniform
//! random type, every node of type `t` spawns `Poi(a/2)` children of type `t`
//! and `Poi(b/2)` children of type `1-t`, with edge labels drawn from `mu`
//! (types equal) or `nu` (types differ). Equivalently — and this equivalence
//! is tested — one may first sample an unlabelled `Poi((a+b)/2)` skeleton
//! with i.i.d. edge labels from the observed distribution `m`, and then run
//! the broadcast process: each child copies its parent's type, flipping with
//! probability `eps(label)`.
//!
//! Reconstructing the root type from the types on the depth-`d` boundary
//! succeeds with probability `(1 + Delta(T, d))/2` under maximum likelihood.
//! [`estimate_delta`] measures `Delta` by Monte Carlo;
//! [`conductance_bounds`] computes the deterministic sandwich
//!
//! ```text
//! 1 / (1 + R_eff)  <=  Delta(T, d)  <=  sqrt(2 sum_{i in bd} Theta_i^2)
//! ```
//!
//! where `R_eff` is the effective resistance from the root to the (shorted)
//! boundary with edge resistances
//! `R_ij = (1 - theta_ij^2) * prod_{path(r~j)} theta_uv^{-2}`, and
//! `Theta_i` is the product of `theta` along the root-to-`i` path.
//! [`sensitivity_chi`] evaluates the linearized noise sensitivity of the
//! belief-propagation fixed point, `chi(d) = sum_{i in bd} Theta_i^2`,
//! whose growth rate distinguishes `tau > 1` from `tau < 1`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

// In builds where std is linked (tests, or downstream crates whose feature
// unification turns on rand/std), std's inherent f64 methods shadow these
// trait methods and the import goes unused; in pure no_std builds it is
// required. Allow both.
#[allow(unused_imports)]
use num_traits::Float;
use rand::prelude::Distribution;
use rand::Rng;
use rand_distr::Poisson;

use crate::bp::{sigmoid, EdgeKernel, DEFAULT_CLAMP};
use crate::graph::NodeType;
use crate::model::{derive_label_quantities, LabelId, ModelParams};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeError {
    /// A tree must contain at least the root.
    Empty,
    /// Parallel per-node vectors have different lengths.
    LengthMismatch,
    /// `parent[i] >= i`: nodes must be listed parents-first.
    BadParentOrder(u32),
    /// A node sits deeper than the declared depth cap.
    DeeperThanCap { node: u32, depth: u32, cap: u32 },
    /// An edge label index is outside the model's label set.
    LabelOutOfRange(u32),
    /// A type value other than 0/1.
    InvalidType(u8),
    /// A boundary node has no observation.
    MissingLeafObservation(u32),
    /// An observation refers to a node outside the boundary.
    UnexpectedObservation(u32),
    /// `estimate_delta` needs at least one replication.
    NoReplications,
}

impl fmt::Display for TreeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeError::Empty => write!(f, "tree must contain the root"),
            TreeError::LengthMismatch => write!(f, "per-node vectors have different lengths"),
            TreeError::BadParentOrder(i) => {
                write!(f, "node {i} must come after its parent")
            }
            TreeError::DeeperThanCap { node, depth, cap } => {
                write!(f, "node {node} at depth {depth} exceeds the cap {cap}")
            }
            TreeError::LabelOutOfRange(l) => write!(f, "label index {l} out of range"),
            TreeError::InvalidType(t) => write!(f, "node type {t} is not 0 or 1"),
            TreeError::MissingLeafObservation(i) => {
                write!(f, "boundary node {i} has no observed type")
            }
            TreeError::UnexpectedObservation(i) => {
                write!(f, "node {i} is not on the boundary")
            }
            TreeError::NoReplications => write!(f, "need at least one replication"),
        }
    }
}

impl core::error::Error for TreeError {}

/// A rooted labelled tree, depth-indexed, nodes listed parents-first.
///
/// Node 0 is the root. `depth_cap` records the depth the tree was generated
/// (or truncated) to; the boundary is the set of nodes at exactly that
/// depth, which may be empty if the branching process died early.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledTree {
    parent: Vec<u32>,
    depth: Vec<u32>,
    edge_label: Vec<LabelId>,
    types: Option<Vec<NodeType>>,
    depth_cap: u32,
}

impl LabelledTree {
    /// Builds a tree from per-node parent and edge-label vectors.
    /// Slot 0 of both vectors belongs to the root and is ignored.
    pub fn from_parts(
        parent: Vec<u32>,
        edge_label: Vec<LabelId>,
        types: Option<Vec<NodeType>>,
        depth_cap: u32,
        label_count: usize,
    ) -> Result<Self, TreeError> {
        let n = parent.len();
        if n == 0 {
            return Err(TreeError::Empty);
        }
        if edge_label.len() != n {
            return Err(TreeError::LengthMismatch);
        }
        if let Some(t) = &types {
            if t.len() != n {
                return Err(TreeError::LengthMismatch);
            }
            if let Some(&bad) = t.iter().find(|&&v| v > 1) {
                return Err(TreeError::InvalidType(bad));
            }
        }
        let mut depth = vec![0u32; n];
        for i in 1..n {
            let p = parent[i];
            if p as usize >= i {
                return Err(TreeError::BadParentOrder(i as u32));
            }
            if edge_label[i].index() >= label_count {
                return Err(TreeError::LabelOutOfRange(edge_label[i].0));
            }
            depth[i] = depth[p as usize] + 1;
            if depth[i] > depth_cap {
                return Err(TreeError::DeeperThanCap {
                    node: i as u32,
                    depth: depth[i],
                    cap: depth_cap,
                });
            }
        }
        Ok(LabelledTree {
            parent,
            depth,
            edge_label,
            types,
            depth_cap,
        })
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty trees
    }

    pub fn depth_cap(&self) -> u32 {
        self.depth_cap
    }

    pub fn parent(&self, node: usize) -> usize {
        self.parent[node] as usize
    }

    pub fn depth(&self, node: usize) -> u32 {
        self.depth[node]
    }

    /// Label on the edge from `node` to its parent. Meaningless for the root.
    pub fn label(&self, node: usize) -> LabelId {
        self.edge_label[node]
    }

    pub fn types(&self) -> Option<&[NodeType]> {
        self.types.as_deref()
    }

    pub fn max_depth(&self) -> u32 {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Nodes at depth exactly `depth_cap`.
    pub fn boundary(&self) -> impl Iterator<Item = usize> + '_ {
        let cap = self.depth_cap;
        self.depth
            .iter()
            .enumerate()
            .filter(move |(_, &d)| d == cap)
            .map(|(i, _)| i)
    }

    pub fn boundary_size(&self) -> usize {
        self.boundary().count()
    }

    /// The subtree of nodes at depth `<= d`, re-indexed, with `depth_cap = d`.
    pub fn truncate(&self, d: u32) -> LabelledTree {
        if self.max_depth() <= d {
            let mut t = self.clone();
            t.depth_cap = d;
            return t;
        }
        let n = self.len();
        let mut remap = vec![u32::MAX; n];
        let mut parent = Vec::new();
        let mut depth = Vec::new();
        let mut edge_label = Vec::new();
        let mut types = self.types.as_ref().map(|_| Vec::new());
        for i in 0..n {
            if self.depth[i] > d {
                continue;
            }
            remap[i] = parent.len() as u32;
            parent.push(if i == 0 { 0 } else { remap[self.parent(i)] });
            depth.push(self.depth[i]);
            edge_label.push(self.edge_label[i]);
            if let (Some(out), Some(src)) = (&mut types, &self.types) {
                out.push(src[i]);
            }
        }
        LabelledTree {
            parent,
            depth,
            edge_label,
            types,
            depth_cap: d,
        }
    }
}

/// Poisson sampler that tolerates a zero mean.
struct Offspring(Option<Poisson<f64>>);

impl Offspring {
    fn new(mean: f64) -> Self {
        Offspring(if mean > 0.0 {
            Some(Poisson::new(mean).expect("finite positive mean"))
        } else {
            None
        })
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        match &self.0 {
            Some(p) => p.sample(rng) as u64,
            None => 0,
        }
    }
}

/// Cumulative-probability label sampler (label sets are small).
struct LabelPicker {
    cumulative: Vec<f64>,
}

impl LabelPicker {
    fn new(probs: &[f64]) -> Self {
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in probs {
            acc += p;
            cumulative.push(acc);
        }
        LabelPicker { cumulative }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> LabelId {
        let r: f64 = rng.random::<f64>() * self.cumulative.last().copied().unwrap_or(1.0);
        for (i, &c) in self.cumulative.iter().enumerate() {
            if r < c {
                return LabelId(i as u32);
            }
        }
        LabelId(self.cumulative.len() as u32 - 1)
    }
}

/// Samples the typed labelled Galton-Watson tree down to depth `depth_d`:
/// uniform root type, `Poi(a/2)` same-type and `Poi(b/2)` opposite-type
/// children per node, labels from `mu`/`nu` by type agreement.
pub fn sample_gw_tree(params: &ModelParams, depth_d: u32, seed: u64) -> LabelledTree {
    let mut rng = rng_from_seed(seed);
    let same = Offspring::new(params.a() / 2.0);
    let diff = Offspring::new(params.b() / 2.0);
    let mu = LabelPicker::new(params.mu().probs());
    let nu = LabelPicker::new(params.nu().probs());

    let mut parent = vec![0u32];
    let mut depth = vec![0u32];
    let mut edge_label = vec![LabelId(0)];
    let mut types = vec![rng.random_range(0..=1u8)];

    let mut node = 0usize;
    while node < parent.len() {
        if depth[node] < depth_d {
            let t = types[node];
            let k_same = same.sample(&mut rng);
            let k_diff = diff.sample(&mut rng);
            for _ in 0..k_same {
                parent.push(node as u32);
                depth.push(depth[node] + 1);
                edge_label.push(mu.sample(&mut rng));
                types.push(t);
            }
            for _ in 0..k_diff {
                parent.push(node as u32);
                depth.push(depth[node] + 1);
                edge_label.push(nu.sample(&mut rng));
                types.push(1 - t);
            }
        }
        node += 1;
    }
    LabelledTree {
        parent,
        depth,
        edge_label,
        types: Some(types),
        depth_cap: depth_d,
    }
}

/// Samples the untyped skeleton: `Poi((a+b)/2)` offspring per node with
/// i.i.d. edge labels from the observed label distribution `m`.
pub fn sample_gw_skeleton(params: &ModelParams, depth_d: u32, seed: u64) -> LabelledTree {
    let mut rng = rng_from_seed(seed);
    let offspring = Offspring::new(params.mean_degree());
    let observed = crate::model::observed_label_dist(params);
    let m = LabelPicker::new(observed.probs());

    let mut parent = vec![0u32];
    let mut depth = vec![0u32];
    let mut edge_label = vec![LabelId(0)];

    let mut node = 0usize;
    while node < parent.len() {
        if depth[node] < depth_d {
            for _ in 0..offspring.sample(&mut rng) {
                parent.push(node as u32);
                depth.push(depth[node] + 1);
                edge_label.push(m.sample(&mut rng));
            }
        }
        node += 1;
    }
    LabelledTree {
        parent,
        depth,
        edge_label,
        types: None,
        depth_cap: depth_d,
    }
}

fn broadcast_into<R: Rng>(
    tree: &LabelledTree,
    eps_by_label: &[f64],
    rng: &mut R,
    out: &mut Vec<NodeType>,
) {
    out.clear();
    out.push(rng.random_range(0..=1u8));
    for i in 1..tree.len() {
        let parent_type = out[tree.parent(i)];
        let eps = eps_by_label[tree.label(i).index()];
        let flip = rng.random::<f64>() < eps;
        out.push(if flip { 1 - parent_type } else { parent_type });
    }
}

/// Runs the broadcast process on a skeleton: uniform root type, each child
/// copying its parent with probability `1 - eps(label)`. Returns the same
/// tree with types attached.
pub fn broadcast_types(skeleton: &LabelledTree, params: &ModelParams, seed: u64) -> LabelledTree {
    let q = derive_label_quantities(params);
    let eps: Vec<f64> = params.labels().ids().map(|l| q.get(l).eps).collect();
    let mut rng = rng_from_seed(seed);
    let mut types = Vec::with_capacity(skeleton.len());
    broadcast_into(skeleton, &eps, &mut rng, &mut types);
    let mut tree = skeleton.clone();
    tree.types = Some(types);
    tree
}

/// Root log belief ratio with the boundary pinned to `leaf_type`.
/// `+clamp`/`-clamp` stand in for the observed types' infinite evidence.
fn root_log_ratio<F: Fn(usize) -> NodeType>(
    tree: &LabelledTree,
    kernel: &EdgeKernel,
    clamp: f64,
    leaf_type: F,
) -> f64 {
    let n = tree.len();
    let cap = tree.depth_cap();
    if cap == 0 {
        return if leaf_type(0) == 1 { clamp } else { -clamp };
    }
    let mut acc = vec![0.0f64; n];
    for i in (1..n).rev() {
        let r = if tree.depth(i) == cap {
            if leaf_type(i) == 1 {
                clamp
            } else {
                -clamp
            }
        } else {
            acc[i]
        };
        acc[tree.parent(i)] += kernel.term(tree.label(i), r);
    }
    acc[0]
}

/// Exact posterior `P(root = 1 | labels, boundary types)` by the
/// log-domain message recursion with pinned leaves.
///
/// `leaf_types` must cover exactly the depth-`depth_cap` boundary.
/// Subtrees that died before the boundary are unobserved and contribute
/// nothing, as in the generative model.
pub fn ml_root_posterior(
    tree: &LabelledTree,
    leaf_types: &BTreeMap<u32, NodeType>,
    params: &ModelParams,
) -> Result<f64, TreeError> {
    let cap = tree.depth_cap();
    for (&node, &t) in leaf_types {
        if node as usize >= tree.len() || tree.depth(node as usize) != cap {
            return Err(TreeError::UnexpectedObservation(node));
        }
        if t > 1 {
            return Err(TreeError::InvalidType(t));
        }
    }
    for i in tree.boundary() {
        if !leaf_types.contains_key(&(i as u32)) {
            return Err(TreeError::MissingLeafObservation(i as u32));
        }
    }
    let kernel = EdgeKernel::new(params);
    let r = root_log_ratio(tree, &kernel, DEFAULT_CLAMP, |i| leaf_types[&(i as u32)]);
    Ok(sigmoid(r))
}

/// Monte Carlo estimate of the reconstruction advantage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEstimate {
    /// `2 * (fraction of correct root reconstructions) - 1`.
    pub delta_hat: f64,
    /// Standard error of `delta_hat`.
    pub std_err: f64,
}

/// Estimates `Delta(T, d)` on a fixed skeleton by repeated broadcast and
/// maximum-likelihood reconstruction. A posterior of exactly 1/2 counts as
/// half a success. Replications are accumulated in order, so the result is
/// a pure function of the arguments.
pub fn estimate_delta(
    skeleton: &LabelledTree,
    d: u32,
    reps: usize,
    params: &ModelParams,
    seed: u64,
) -> Result<DeltaEstimate, TreeError> {
    if reps == 0 {
        return Err(TreeError::NoReplications);
    }
    let tree = skeleton.truncate(d);
    let q = derive_label_quantities(params);
    let eps: Vec<f64> = params.labels().ids().map(|l| q.get(l).eps).collect();
    let kernel = EdgeKernel::new(params);
    let mut rng = rng_from_seed(seed);
    let mut types: Vec<NodeType> = Vec::with_capacity(tree.len());

    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    for _ in 0..reps {
        broadcast_into(&tree, &eps, &mut rng, &mut types);
        let r = root_log_ratio(&tree, &kernel, DEFAULT_CLAMP, |i| types[i]);
        let score = if r == 0.0 {
            0.5
        } else if u8::from(r > 0.0) == types[0] {
            1.0
        } else {
            0.0
        };
        sum += score;
        sum_sq += score * score;
    }
    let reps_f = reps as f64;
    let mean = sum / reps_f;
    let var = if reps > 1 {
        ((sum_sq - sum * sum / reps_f) / (reps_f - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(DeltaEstimate {
        delta_hat: 2.0 * mean - 1.0,
        std_err: 2.0 * (var / reps_f).sqrt(),
    })
}

/// Deterministic sandwich on `Delta(T, d)` from the electrical-network view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeBounds {
    /// Effective resistance between the root and the shorted depth-`d`
    /// boundary; `+inf` when no boundary node is electrically reachable.
    pub r_eff: f64,
    /// `1 / (1 + r_eff)`.
    pub lower: f64,
    /// `sqrt(2 * sum_{i in boundary} Theta_i^2)`.
    pub upper: f64,
}

/// Computes the conductance lower bound and the `Theta^2`-sum upper bound
/// at depth `d`. Edges with `theta = 0` are open circuits; if the whole
/// boundary is unreachable the lower bound degrades to 0.
pub fn conductance_bounds(tree: &LabelledTree, d: u32, params: &ModelParams) -> TreeBounds {
    let t = tree.truncate(d);
    let q = derive_label_quantities(params);
    let theta: Vec<f64> = params.labels().ids().map(|l| q.get(l).theta).collect();

    if d == 0 {
        // The boundary is the root itself: zero resistance, Theta_r = 1.
        return TreeBounds {
            r_eff: 0.0,
            lower: 1.0,
            upper: 2.0f64.sqrt(),
        };
    }

    let n = t.len();
    let mut theta_sq_path = vec![1.0f64; n];
    for i in 1..n {
        let th = theta[t.label(i).index()];
        theta_sq_path[i] = theta_sq_path[t.parent(i)] * th * th;
    }

    let upper_sq: f64 = t.boundary().map(|i| theta_sq_path[i]).sum();
    let upper = (2.0 * upper_sq).sqrt();

    // Leaf-to-root series/parallel reduction: conductances of child branches
    // add at each node; each branch is its edge resistance in series with
    // the child's subtree resistance.
    let mut conductance = vec![0.0f64; n];
    for i in (1..n).rev() {
        if theta_sq_path[i] == 0.0 {
            continue; // open branch; contributes no conductance
        }
        let r_sub = if t.depth(i) == d {
            0.0
        } else if conductance[i] > 0.0 {
            1.0 / conductance[i]
        } else {
            f64::INFINITY
        };
        let th = theta[t.label(i).index()];
        let r_edge = (1.0 - th * th) / theta_sq_path[i];
        let r_branch = r_edge + r_sub;
        if r_branch.is_finite() {
            conductance[t.parent(i)] += if r_branch > 0.0 {
                1.0 / r_branch
            } else {
                f64::INFINITY
            };
        }
    }
    let r_eff = if conductance[0] > 0.0 {
        1.0 / conductance[0]
    } else {
        f64::INFINITY
    };
    TreeBounds {
        r_eff,
        lower: 1.0 / (1.0 + r_eff),
        upper,
    }
}

/// `chi(d)` for every depth `0..=depth_cap` in one root-to-leaf pass:
/// entry `d` is the sum over depth-`d` nodes of `exp(2 sum_path W)`, i.e.
/// the squared product of `theta` along the path. Paths through a
/// `theta = 0` edge contribute zero.
pub fn chi_profile(tree: &LabelledTree, params: &ModelParams) -> Vec<f64> {
    let q = derive_label_quantities(params);
    let two_w: Vec<f64> = params
        .labels()
        .ids()
        .map(|l| 2.0 * q.get(l).weight)
        .collect();
    let n = tree.len();
    let mut chi = vec![0.0f64; tree.depth_cap() as usize + 1];
    chi[0] = 1.0;
    let mut path = vec![0.0f64; n];
    for i in 1..n {
        path[i] = path[tree.parent(i)] + two_w[tree.label(i).index()];
        if let Some(slot) = chi.get_mut(tree.depth(i) as usize) {
            *slot += path[i].exp();
        }
    }
    chi
}

/// The infinitesimal noise sensitivity of the root belief to perturbations
/// of the depth-`d` boundary beliefs around the uniform fixed point.
pub fn sensitivity_chi(tree: &LabelledTree, d: u32, params: &ModelParams) -> f64 {
    chi_profile(tree, params)
        .get(d as usize)
        .copied()
        .unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{tau, LabelDistribution, LabelSet};
    use crate::rng::derive_seed;
    use alloc::string::ToString;
    use alloc::vec::Vec;
    use approx::assert_abs_diff_eq;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn two_label(a: f64, b: f64, eps: f64) -> ModelParams {
        ModelParams::two_label(a, b, eps).unwrap()
    }

    /// Chain of `d` edges all labelled `label`.
    fn chain(d: u32, label: LabelId) -> LabelledTree {
        let parent: Vec<u32> = (0..=d).map(|i| i.saturating_sub(1)).collect();
        let labels = vec![label; d as usize + 1];
        LabelledTree::from_parts(parent, labels, None, d, 2).unwrap()
    }

    /// Root with `c` children, all edges labelled `label`.
    fn star(c: usize, label: LabelId) -> LabelledTree {
        let parent = vec![0u32; c + 1];
        let labels = vec![label; c + 1];
        LabelledTree::from_parts(parent, labels, None, 1, 2).unwrap()
    }

    #[test]
    fn no_offspring_means_single_root() {
        let p = ModelParams::new(
            0.0,
            1e-12,
            LabelSet::new(vec!["x".to_string()]).unwrap(),
            LabelDistribution::new(vec![1.0]).unwrap(),
            LabelDistribution::new(vec![1.0]).unwrap(),
        )
        .unwrap();
        let t = sample_gw_tree(&p, 6, 1);
        assert_eq!(t.len(), 1);
        assert_eq!(t.boundary_size(), 0);
        assert_eq!(t.max_depth(), 0);
    }

    #[test]
    fn generation_sizes_match_branching_mean() {
        // E|gen k| = lambda^k; check k = 3 by Monte Carlo within 3 SE.
        let p = two_label(2.0, 1.0, 0.2); // lambda = 1.5
        let trials = 3000u64;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..trials {
            let t = sample_gw_tree(&p, 3, derive_seed(11, i));
            let size = t.boundary_size() as f64;
            sum += size;
            sum_sq += size * size;
        }
        let mean = sum / trials as f64;
        let var = (sum_sq - sum * sum / trials as f64) / (trials as f64 - 1.0);
        let se = (var / trials as f64).sqrt();
        let expect = 1.5f64.powi(3);
        assert!(
            (mean - expect).abs() < 3.0 * se,
            "mean gen-3 size {mean} vs {expect} (se {se})"
        );
    }

    #[test]
    fn same_type_labels_follow_mu() {
        // Conditional on parent and child types equal, labels ~ mu.
        // Chi-square goodness of fit at the 1% level over >= 1e4 edges.
        let p = two_label(3.0, 3.0, 0.3); // mu = (0.8, 0.2)
        let mut counts = [0u64; 2];
        let mut total = 0u64;
        let mut seed = 0;
        while total < 10_000 {
            let t = sample_gw_tree(&p, 6, derive_seed(23, seed));
            seed += 1;
            let types = t.types().unwrap();
            for i in 1..t.len() {
                if types[i] == types[t.parent(i)] {
                    counts[t.label(i).index()] += 1;
                    total += 1;
                }
            }
        }
        let expected = [0.8 * total as f64, 0.2 * total as f64];
        let chi2: f64 = counts
            .iter()
            .zip(&expected)
            .map(|(&o, &e)| (o as f64 - e) * (o as f64 - e) / e)
            .sum();
        let crit = ChiSquared::new(1.0).unwrap().inverse_cdf(0.99);
        assert!(chi2 < crit, "chi2 {chi2} exceeds 1% critical value {crit}");
    }

    #[test]
    fn broadcast_noiseless_and_alternating_channels() {
        let skel = sample_gw_skeleton(&two_label(3.0, 1.0, 0.2), 5, 7);
        // b = 0 with mu full-support: eps = 0 on every label, so all nodes
        // share the root type.
        let noiseless = two_label(4.0, 0.0, 0.2);
        let t = broadcast_types(&skel, &noiseless, 3);
        let types = t.types().unwrap();
        assert!(types.iter().all(|&x| x == types[0]));
        // a = 0 with nu full-support: eps = 1, types alternate by depth parity.
        let alternating = two_label(0.0, 4.0, 0.2);
        let t = broadcast_types(&skel, &alternating, 3);
        let types = t.types().unwrap();
        for i in 1..t.len() {
            assert_eq!(types[i], types[0] ^ (t.depth(i) % 2) as u8);
        }
    }

    #[test]
    fn broadcast_over_skeleton_matches_typed_sampler() {
        // The joint (label, flip) frequencies on depth <= 2 edges follow
        // P(l, same) = a mu(l)/(a+b), P(l, diff) = b nu(l)/(a+b) for both
        // constructions; chi-square at the 1% level, df = 3.
        let p = two_label(2.5, 1.5, 0.3);
        let lam = p.mean_degree();
        let expect_probs = [
            p.a() * p.mu().prob(LabelId(0)) / (2.0 * lam),
            p.a() * p.mu().prob(LabelId(1)) / (2.0 * lam),
            p.b() * p.nu().prob(LabelId(0)) / (2.0 * lam),
            p.b() * p.nu().prob(LabelId(1)) / (2.0 * lam),
        ];
        let crit = ChiSquared::new(3.0).unwrap().inverse_cdf(0.99);

        let check = |collect: &mut dyn FnMut(u64, &mut [u64; 4]) -> u64| {
            let mut counts = [0u64; 4];
            let mut total = 0u64;
            let mut seed = 0u64;
            while total < 20_000 {
                total += collect(seed, &mut counts);
                seed += 1;
            }
            let chi2: f64 = counts
                .iter()
                .zip(&expect_probs)
                .map(|(&o, &q)| {
                    let e = q * total as f64;
                    (o as f64 - e) * (o as f64 - e) / e
                })
                .sum();
            assert!(chi2 < crit, "chi2 {chi2} vs {crit}");
        };

        check(&mut |seed, counts| {
            let t = sample_gw_tree(&p, 2, derive_seed(101, seed));
            let types = t.types().unwrap();
            let mut seen = 0;
            for i in 1..t.len() {
                let same = types[i] == types[t.parent(i)];
                counts[t.label(i).index() + if same { 0 } else { 2 }] += 1;
                seen += 1;
            }
            seen
        });
        check(&mut |seed, counts| {
            let skel = sample_gw_skeleton(&p, 2, derive_seed(202, seed));
            let t = broadcast_types(&skel, &p, derive_seed(303, seed));
            let types = t.types().unwrap();
            let mut seen = 0;
            for i in 1..t.len() {
                let same = types[i] == types[t.parent(i)];
                counts[t.label(i).index() + if same { 0 } else { 2 }] += 1;
                seen += 1;
            }
            seen
        });

        // Root offspring counts follow Poi(lambda) under both samplers:
        // Poi(a/2) + Poi(b/2) in the typed tree, Poi(lambda) directly in
        // the skeleton. Chi-square against the pmf, bins 0..=8 plus tail.
        let pmf = |k: u32| {
            let mut v = (-lam).exp();
            for i in 1..=k {
                v *= lam / i as f64;
            }
            v
        };
        let crit9 = ChiSquared::new(9.0).unwrap().inverse_cdf(0.99);
        let offspring_check = |sample_root_count: &mut dyn FnMut(u64) -> usize| {
            let trials = 20_000u64;
            let mut counts = [0u64; 10];
            for seed in 0..trials {
                let k = sample_root_count(seed).min(9);
                counts[k] += 1;
            }
            let mut chi2 = 0.0;
            for (k, &o) in counts.iter().enumerate() {
                let prob = if k < 9 {
                    pmf(k as u32)
                } else {
                    1.0 - (0..9).map(&pmf).sum::<f64>()
                };
                let e = prob * trials as f64;
                chi2 += (o as f64 - e) * (o as f64 - e) / e;
            }
            assert!(chi2 < crit9, "offspring chi2 {chi2} vs {crit9}");
        };
        offspring_check(&mut |seed| {
            sample_gw_tree(&p, 1, derive_seed(404, seed)).len() - 1
        });
        offspring_check(&mut |seed| {
            sample_gw_skeleton(&p, 1, derive_seed(505, seed)).len() - 1
        });
    }

    #[test]
    fn single_child_posterior_is_channel_flip() {
        // d = 1, one child observed as type 1: posterior = 1 - eps(label).
        let p = two_label(3.0, 1.0, 0.25);
        let q = derive_label_quantities(&p);
        let t = chain(1, LabelId(0));
        let mut obs = BTreeMap::new();
        obs.insert(1u32, 1u8);
        let post = ml_root_posterior(&t, &obs, &p).unwrap();
        assert_abs_diff_eq!(post, 1.0 - q.get(LabelId(0)).eps, epsilon = 1e-9);
    }

    #[test]
    fn uninformative_channel_gives_half() {
        // eps = 1/2 on every label: posterior exactly 1/2.
        let p = two_label(2.0, 2.0, 0.0);
        let t = chain(3, LabelId(0));
        let mut obs = BTreeMap::new();
        obs.insert(3u32, 1u8);
        assert_eq!(ml_root_posterior(&t, &obs, &p).unwrap(), 0.5);
    }

    #[test]
    fn posterior_requires_exact_boundary_cover() {
        let p = two_label(3.0, 1.0, 0.25);
        let t = star(2, LabelId(0));
        let mut obs = BTreeMap::new();
        obs.insert(1u32, 1u8);
        assert_eq!(
            ml_root_posterior(&t, &obs, &p),
            Err(TreeError::MissingLeafObservation(2))
        );
        obs.insert(2u32, 0u8);
        obs.insert(0u32, 0u8);
        assert_eq!(
            ml_root_posterior(&t, &obs, &p),
            Err(TreeError::UnexpectedObservation(0))
        );
    }

    /// Test oracle: posterior of the root by enumerating all type
    /// assignments of the broadcast measure, conditioned on the boundary.
    fn enumeration_posterior(
        tree: &LabelledTree,
        obs: &BTreeMap<u32, NodeType>,
        params: &ModelParams,
    ) -> f64 {
        let q = derive_label_quantities(params);
        let n = tree.len();
        assert!(n <= 16);
        let mut num = 0.0;
        let mut den = 0.0;
        'outer: for mask in 0u32..(1 << n) {
            let ty = |i: usize| ((mask >> i) & 1) as u8;
            for (&node, &t) in obs {
                if ty(node as usize) != t {
                    continue 'outer;
                }
            }
            let mut w = 0.5;
            for i in 1..n {
                let eps = q.get(tree.label(i)).eps;
                w *= if ty(i) == ty(tree.parent(i)) {
                    1.0 - eps
                } else {
                    eps
                };
            }
            den += w;
            if ty(0) == 1 {
                num += w;
            }
        }
        num / den
    }

    #[test]
    fn posterior_matches_enumeration_on_random_trees() {
        let p = two_label(2.6, 1.4, 0.3);
        let mut rng = rng_from_seed(404);
        for _ in 0..20 {
            // Random tree shape with <= 10 nodes (parents-first order).
            let n = rng.random_range(2..=10usize);
            let mut parent = vec![0u32];
            let mut labels = vec![LabelId(0)];
            for i in 1..n {
                parent.push(rng.random_range(0..i) as u32);
                labels.push(LabelId(rng.random_range(0..2u32)));
            }
            let mut depth = vec![0u32; n];
            for i in 1..n {
                depth[i] = depth[parent[i] as usize] + 1;
            }
            let cap = *depth.iter().max().unwrap();
            let t = LabelledTree::from_parts(parent, labels, None, cap, 2).unwrap();
            let mut obs = BTreeMap::new();
            for i in t.boundary() {
                obs.insert(i as u32, rng.random_range(0..=1u8));
            }
            let got = ml_root_posterior(&t, &obs, &p).unwrap();
            let want = enumeration_posterior(&t, &obs, &p);
            assert_abs_diff_eq!(got, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn delta_perfect_and_uninformative_channels() {
        let skel = sample_gw_skeleton(&two_label(3.0, 1.0, 0.2), 4, 5);
        // eps = 0: perfect reconstruction every replication.
        let perfect = two_label(4.0, 0.0, 0.2);
        let est = estimate_delta(&skel, 4, 200, &perfect, 8).unwrap();
        assert_eq!(est.delta_hat, 1.0);
        assert_eq!(est.std_err, 0.0);
        // eps = 1/2: posterior is exactly 1/2, ties score half credit.
        let blind = two_label(2.0, 2.0, 0.0);
        let est = estimate_delta(&skel, 4, 2000, &blind, 8).unwrap();
        assert_eq!(est.delta_hat, 0.0);
        assert!(estimate_delta(&skel, 4, 0, &blind, 8).is_err());
    }

    #[test]
    fn delta_on_chain_composes_channels() {
        // Chain of d identical edges: Delta = theta^d.
        let p = two_label(2.0, 2.0, 0.2); // theta(+) = 0.4
        let d = 3u32;
        let t = chain(d, LabelId(0));
        let expect = 0.4f64.powi(d as i32);
        let est = estimate_delta(&t, d, 4000, &p, 15).unwrap();
        assert!(
            (est.delta_hat - expect).abs() < 3.0 * est.std_err,
            "delta {} vs {} (se {})",
            est.delta_hat,
            expect,
            est.std_err
        );
    }

    #[test]
    fn bounds_single_edge_chain_and_star() {
        let p = two_label(2.0, 2.0, 0.3); // theta = 0.6 on both labels
        let th2 = 0.36f64;

        let b = conductance_bounds(&chain(1, LabelId(0)), 1, &p);
        assert_abs_diff_eq!(b.r_eff, (1.0 - th2) / th2, epsilon = 1e-12);
        assert_abs_diff_eq!(b.lower, th2, epsilon = 1e-12);
        assert_abs_diff_eq!(b.upper, 0.6 * 2.0f64.sqrt(), epsilon = 1e-12);
        // One-edge sandwich: theta^2 <= Delta = theta <= theta sqrt(2).
        assert!(b.lower <= 0.6 && 0.6 <= b.upper);

        let d = 4;
        let b = conductance_bounds(&chain(d, LabelId(0)), d, &p);
        let expect: f64 = (1..=d).map(|k| (1.0 - th2) / th2.powi(k as i32)).sum();
        assert_abs_diff_eq!(b.r_eff, expect, epsilon = 1e-9);

        let c = 5;
        let b = conductance_bounds(&star(c, LabelId(0)), 1, &p);
        assert_abs_diff_eq!(b.r_eff, (1.0 - th2) / (c as f64 * th2), epsilon = 1e-12);
    }

    #[test]
    fn zero_theta_opens_the_circuit() {
        // eps = 0 in the two-label family gives theta = 0 on both labels.
        let p = two_label(2.0, 2.0, 0.0);
        let t = chain(2, LabelId(0));
        let b = conductance_bounds(&t, 2, &p);
        assert_eq!(b.r_eff, f64::INFINITY);
        assert_eq!(b.lower, 0.0);
        assert_eq!(b.upper, 0.0);
        assert_eq!(sensitivity_chi(&t, 2, &p), 0.0);
    }

    #[test]
    fn depth_zero_boundary_is_the_root() {
        let p = two_label(2.0, 2.0, 0.3);
        let b = conductance_bounds(&chain(3, LabelId(0)), 0, &p);
        assert_eq!(b.r_eff, 0.0);
        assert_eq!(b.lower, 1.0);
        assert_abs_diff_eq!(b.upper, 2.0f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn chi_on_chain_is_path_product() {
        let p = two_label(2.0, 2.0, 0.35); // theta = 0.7
        let d = 5;
        let t = chain(d, LabelId(0));
        assert_abs_diff_eq!(
            sensitivity_chi(&t, d, &p),
            0.49f64.powi(d as i32),
            epsilon = 1e-12
        );
        assert_eq!(sensitivity_chi(&t, d + 3, &p), 0.0);
        let profile = chi_profile(&t, &p);
        assert_eq!(profile.len(), d as usize + 1);
        assert_abs_diff_eq!(profile[0], 1.0, epsilon = 0.0);
    }

    #[test]
    fn chi_grows_when_a_leaf_is_added() {
        let p = two_label(2.0, 2.0, 0.35);
        let before = sensitivity_chi(&star(2, LabelId(0)), 1, &p);
        let after = sensitivity_chi(&star(3, LabelId(0)), 1, &p);
        assert!(after > before);
    }

    #[test]
    fn chi_mean_matches_tau_power() {
        // E[chi(d)] = tau^d; check d = 4 within 3 SE over many trees.
        let p = two_label(2.0, 2.0, 0.3); // tau = 4 a eps^2 = 0.72
        let trials = 4000u64;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for i in 0..trials {
            let t = sample_gw_tree(&p, 4, derive_seed(71, i));
            let chi = sensitivity_chi(&t, 4, &p);
            sum += chi;
            sum_sq += chi * chi;
        }
        let mean = sum / trials as f64;
        let var = (sum_sq - sum * sum / trials as f64) / (trials as f64 - 1.0);
        let se = (var / trials as f64).sqrt();
        let expect = tau(&p).powi(4);
        assert!(
            (mean - expect).abs() < 3.0 * se,
            "mean chi(4) {mean} vs {expect} (se {se})"
        );
    }

    #[test]
    fn truncate_reindexes_and_preserves_structure() {
        let p = two_label(3.0, 1.0, 0.2);
        let t = sample_gw_tree(&p, 6, 42);
        let t3 = t.truncate(3);
        assert_eq!(t3.depth_cap(), 3);
        assert!(t3.max_depth() <= 3);
        assert_eq!(t3.len(), (0..t.len()).filter(|&i| t.depth(i) <= 3).count());
        // Types survive truncation aligned with their nodes.
        let (full, cut) = (t.types().unwrap(), t3.types().unwrap());
        let kept: Vec<u8> = (0..t.len())
            .filter(|&i| t.depth(i) <= 3)
            .map(|i| full[i])
            .collect();
        assert_eq!(cut, &kept[..]);
        // chi agrees between the full and truncated views at depth <= 3.
        for d in 0..=3 {
            assert_abs_diff_eq!(
                sensitivity_chi(&t, d, &p),
                sensitivity_chi(&t3, d, &p),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn from_parts_validates() {
        assert_eq!(
            LabelledTree::from_parts(vec![], vec![], None, 0, 1),
            Err(TreeError::Empty)
        );
        assert_eq!(
            LabelledTree::from_parts(vec![0, 0], vec![LabelId(0); 2], None, 0, 1),
            Err(TreeError::DeeperThanCap {
                node: 1,
                depth: 1,
                cap: 0
            })
        );
        assert_eq!(
            LabelledTree::from_parts(vec![0, 2, 1], vec![LabelId(0); 3], None, 5, 1),
            Err(TreeError::BadParentOrder(1))
        );
        assert_eq!(
            LabelledTree::from_parts(vec![0, 0], vec![LabelId(0), LabelId(7)], None, 1, 1),
            Err(TreeError::LabelOutOfRange(7))
        );
    }
}
