//! Sum-product belief propagation on labelled graphs.
//!
//! Messages are directed-edge log belief ratios `log R_{i->j}`, where
//! `R = P(type 1) / P(type 0)` given the subtree hanging off the edge. One
//! synchronous sweep maps every message through
//!
//! ```text
//! log R_{i->j} = sum_{k in N(i), k != j}
//!     log[ (R_{k->i} a mu(L_ik) + b nu(L_ik)) /
//!          (R_{k->i} b nu(L_ik) + a mu(L_ik)) ]
//! ```
//!
//! evaluated stably in the log domain. Exactly uniform messages (all zeros)
//! are a fixed point of this map, bit for bit, so initial messages carry a
//! small uniform perturbation to let the iteration break symmetry. Updates
//! are damped (`new = (1-damping)*update + damping*old`) and clamped to
//! `[-clamp, clamp]`; the reported per-sweep change is the undamped residual
//! `max |update - old|`.
//!
//! Only present edges contribute: with two symmetric equal-size blocks the
//! absent-edge field is the same for both types and cancels from the belief
//! ratio, so it is not modelled. Node marginals use the full neighborhood
//! product (no exclusion) converted through the logistic function.
//!
//! [`brute_force_marginals`] is the exact-enumeration oracle for tiny
//! instances: the posterior over all `2^n` type assignments under a uniform
//! independent prior, with `a mu(L)/n`, `b nu(L)/n` factors on edges and
//! `1 - a/n`, `1 - b/n` factors on non-edges.

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
use rand::Rng;

use crate::graph::{LabelledGraph, NodeType};
use crate::model::{LabelId, ModelParams};
use crate::rng::rng_from_seed;

/// Half-width of the uniform initial perturbation of log ratios.
pub const DEFAULT_INIT_NOISE: f64 = 0.1;
/// Damping weight on the previous message.
pub const DEFAULT_DAMPING: f64 = 0.2;
/// Sweep budget.
pub const DEFAULT_MAX_ITERS: usize = 200;
/// Convergence threshold on the undamped max message change.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Log-ratio clamp `M`; `e^30` dwarfs any realistic evidence while keeping
/// every intermediate finite.
pub const DEFAULT_CLAMP: f64 = 30.0;

/// Knobs for a BP run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpConfig {
    /// Half-width of the uniform initial log-ratio perturbation (>= 0; zero
    /// starts exactly at the uniform fixed point and never moves).
    pub init_noise: f64,
    /// In `[0, 1)`.
    pub damping: f64,
    pub max_iters: usize,
    /// Strictly positive threshold on the max absolute message change.
    pub tol: f64,
    /// Log-ratio clamp `M > 0`.
    pub clamp: f64,
}

impl Default for BpConfig {
    fn default() -> Self {
        BpConfig {
            init_noise: DEFAULT_INIT_NOISE,
            damping: DEFAULT_DAMPING,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            clamp: DEFAULT_CLAMP,
        }
    }
}

impl BpConfig {
    pub fn validate(&self) -> Result<(), BpError> {
        let ok = self.init_noise >= 0.0
            && self.init_noise.is_finite()
            && (0.0..1.0).contains(&self.damping)
            && self.max_iters >= 1
            && self.tol > 0.0
            && self.clamp > 0.0
            && self.clamp.is_finite();
        if ok {
            Ok(())
        } else {
            Err(BpError::InvalidConfig)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BpError {
    /// A [`BpConfig`] field is out of range.
    InvalidConfig,
    /// Exhaustive enumeration is capped at 16 nodes.
    TooLargeForEnumeration(usize),
    /// `a/n` or `b/n` exceeds 1, so the pair-level likelihood is undefined.
    EdgeProbabilityOverflow,
    /// Every type assignment has probability zero under the model.
    ZeroLikelihood,
    /// A pinned node index is out of range.
    PinnedNodeOutOfRange(u32),
    /// `overlap` got sequences of different lengths.
    LengthMismatch { left: usize, right: usize },
}

impl fmt::Display for BpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BpError::InvalidConfig => write!(f, "invalid BP configuration"),
            BpError::TooLargeForEnumeration(n) => {
                write!(f, "exhaustive enumeration supports n <= 16, got {n}")
            }
            BpError::EdgeProbabilityOverflow => {
                write!(f, "a/n or b/n exceeds 1; likelihood undefined")
            }
            BpError::ZeroLikelihood => {
                write!(f, "graph has zero likelihood under the model")
            }
            BpError::PinnedNodeOutOfRange(i) => write!(f, "pinned node {i} out of range"),
            BpError::LengthMismatch { left, right } => {
                write!(f, "sequence lengths differ: {left} vs {right}")
            }
        }
    }
}

impl core::error::Error for BpError {}

/// `log(e^x + e^y)` without overflow; `-inf` arguments behave as `e^{-inf}=0`.
pub(crate) fn logaddexp(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    hi + (lo - hi).exp().ln_1p()
}

/// Logistic function, stable on both tails.
pub(crate) fn sigmoid(r: f64) -> f64 {
    if r >= 0.0 {
        1.0 / (1.0 + (-r).exp())
    } else {
        let e = r.exp();
        e / (1.0 + e)
    }
}

/// Per-label `log(a mu)` and `log(b nu)` tables for the message map.
pub(crate) struct EdgeKernel {
    log_am: Vec<f64>,
    log_bn: Vec<f64>,
}

impl EdgeKernel {
    pub(crate) fn new(params: &ModelParams) -> Self {
        let ln_or_neg_inf = |x: f64| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY };
        EdgeKernel {
            log_am: params
                .labels()
                .ids()
                .map(|l| ln_or_neg_inf(params.a() * params.mu().prob(l)))
                .collect(),
            log_bn: params
                .labels()
                .ids()
                .map(|l| ln_or_neg_inf(params.b() * params.nu().prob(l)))
                .collect(),
        }
    }

    /// The per-edge message term
    /// `log[(R a mu + b nu) / (R b nu + a mu)]` with `R = e^log_ratio`.
    ///
    /// Labels with `a mu = b nu = 0` can never be observed; their term is 0
    /// by convention (an uninformative edge).
    pub(crate) fn term(&self, label: LabelId, log_ratio: f64) -> f64 {
        let lam = self.log_am[label.index()];
        let lbn = self.log_bn[label.index()];
        if lam == f64::NEG_INFINITY && lbn == f64::NEG_INFINITY {
            return 0.0;
        }
        logaddexp(log_ratio + lam, lbn) - logaddexp(log_ratio + lbn, lam)
    }
}

/// Directed-edge log-belief-ratio state: two messages per undirected edge.
///
/// For edge index `e` joining `u < v`, slot `2e` is the message `u -> v` and
/// slot `2e + 1` the message `v -> u`.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageSet {
    values: Vec<f64>,
}

impl MessageSet {
    /// The exactly-uniform message set (all log ratios zero).
    pub fn uniform(graph: &LabelledGraph) -> Self {
        MessageSet {
            values: vec![0.0; 2 * graph.edge_count()],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Directed slot for the message flowing across edge `e` from `from`.
    /// `from_lower` selects the `u -> v` direction.
    pub fn slot(edge: usize, from_lower: bool) -> usize {
        2 * edge + usize::from(!from_lower)
    }
}

/// Estimated per-node probabilities of type 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    probs: Vec<f64>,
}

impl Marginals {
    pub fn new(probs: Vec<f64>) -> Self {
        Marginals { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Result of a BP run.
#[derive(Debug, Clone)]
pub struct BpOutcome {
    pub marginals: Marginals,
    /// Sweeps executed.
    pub iters: usize,
    /// Whether the last sweep's max change fell below `tol`.
    pub converged: bool,
    /// Max message change after each sweep, for convergence diagnostics.
    pub trace: Vec<f64>,
}

/// Draws every directed message independently uniform on
/// `[-init_noise, +init_noise]`. Deterministic given the seed.
pub fn init_messages(graph: &LabelledGraph, cfg: &BpConfig, seed: u64) -> MessageSet {
    cfg.validate().expect("invalid BP configuration");
    let mut msgs = MessageSet::uniform(graph);
    if cfg.init_noise > 0.0 {
        let mut rng = rng_from_seed(seed);
        for m in msgs.values_mut() {
            *m = rng.random_range(-cfg.init_noise..=cfg.init_noise);
        }
    }
    msgs
}

struct SweepState {
    /// f(message) cache, one entry per directed slot.
    terms: Vec<f64>,
    /// Full-neighborhood sums, one per node.
    totals: Vec<f64>,
}

impl SweepState {
    fn new(graph: &LabelledGraph) -> Self {
        SweepState {
            terms: vec![0.0; 2 * graph.edge_count()],
            totals: vec![0.0; graph.n()],
        }
    }

    /// Fills `terms` and `totals` from the current messages.
    fn refresh(&mut self, graph: &LabelledGraph, kernel: &EdgeKernel, msgs: &MessageSet) {
        let values = msgs.values();
        for (idx, e) in graph.edges().iter().enumerate() {
            self.terms[2 * idx] = kernel.term(e.label, values[2 * idx]);
            self.terms[2 * idx + 1] = kernel.term(e.label, values[2 * idx + 1]);
        }
        self.totals.iter_mut().for_each(|t| *t = 0.0);
        for (idx, e) in graph.edges().iter().enumerate() {
            // terms[2*idx] travels u -> v and lands on v.
            self.totals[e.v as usize] += self.terms[2 * idx];
            self.totals[e.u as usize] += self.terms[2 * idx + 1];
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn sweep_once(
    graph: &LabelledGraph,
    kernel: &EdgeKernel,
    state: &mut SweepState,
    old: &MessageSet,
    new: &mut MessageSet,
    damping: f64,
    clamp: f64,
    pinned: &[bool],
) -> f64 {
    state.refresh(graph, kernel, old);
    let old_vals = old.values();
    let new_vals = new.values_mut();
    let mut max_change = 0.0f64;
    for (idx, e) in graph.edges().iter().enumerate() {
        let (u, v) = (e.u as usize, e.v as usize);
        // Message src -> dst excludes dst's own term from src's total.
        for (src, out, inc) in [(u, 2 * idx, 2 * idx + 1), (v, 2 * idx + 1, 2 * idx)] {
            if pinned[src] {
                new_vals[out] = old_vals[out];
                continue;
            }
            let update = state.totals[src] - state.terms[inc];
            let change = (update - old_vals[out]).abs();
            if change > max_change {
                max_change = change;
            }
            new_vals[out] = ((1.0 - damping) * update + damping * old_vals[out])
                .clamp(-clamp, clamp);
        }
    }
    max_change
}

/// One synchronous damped sweep over all messages.
///
/// Returns the updated message set and the maximum absolute change
/// `|update - old|` measured before damping and clamping.
pub fn bp_sweep(
    graph: &LabelledGraph,
    messages: &MessageSet,
    params: &ModelParams,
) -> (MessageSet, f64) {
    bp_sweep_with(graph, messages, params, DEFAULT_DAMPING, DEFAULT_CLAMP)
}

/// [`bp_sweep`] with explicit damping and clamp.
pub fn bp_sweep_with(
    graph: &LabelledGraph,
    messages: &MessageSet,
    params: &ModelParams,
    damping: f64,
    clamp: f64,
) -> (MessageSet, f64) {
    let kernel = EdgeKernel::new(params);
    let mut state = SweepState::new(graph);
    let mut next = MessageSet::uniform(graph);
    let pinned = vec![false; graph.n()];
    let change = sweep_once(
        graph, &kernel, &mut state, messages, &mut next, damping, clamp, &pinned,
    );
    (next, change)
}

/// Runs BP from noisy uniform messages until the max change drops below
/// `cfg.tol` or `cfg.max_iters` sweeps have run. Non-convergence is reported
/// through the flag; marginals are returned either way.
pub fn run_bp(
    graph: &LabelledGraph,
    params: &ModelParams,
    cfg: &BpConfig,
    seed: u64,
) -> BpOutcome {
    run_bp_pinned(graph, params, cfg, seed, &BTreeMap::new()).expect("no pinned nodes")
}

/// [`run_bp`] with a set of nodes whose types are observed.
///
/// A pinned node's outgoing messages are held at `±cfg.clamp` for the whole
/// run (the log-ratio representation of a hard observation) and its marginal
/// is reported as exactly 0 or 1.
pub fn run_bp_pinned(
    graph: &LabelledGraph,
    params: &ModelParams,
    cfg: &BpConfig,
    seed: u64,
    pinned_types: &BTreeMap<u32, NodeType>,
) -> Result<BpOutcome, BpError> {
    cfg.validate()?;
    for &i in pinned_types.keys() {
        if i as usize >= graph.n() {
            return Err(BpError::PinnedNodeOutOfRange(i));
        }
    }

    let kernel = EdgeKernel::new(params);
    let mut state = SweepState::new(graph);
    let mut pinned = vec![false; graph.n()];
    for &i in pinned_types.keys() {
        pinned[i as usize] = true;
    }

    let mut current = init_messages(graph, cfg, seed);
    // Overwrite outgoing messages of pinned nodes with their observation.
    for (idx, e) in graph.edges().iter().enumerate() {
        if let Some(&t) = pinned_types.get(&e.u) {
            current.values_mut()[MessageSet::slot(idx, true)] =
                if t == 1 { cfg.clamp } else { -cfg.clamp };
        }
        if let Some(&t) = pinned_types.get(&e.v) {
            current.values_mut()[MessageSet::slot(idx, false)] =
                if t == 1 { cfg.clamp } else { -cfg.clamp };
        }
    }

    let mut next = MessageSet::uniform(graph);
    let mut trace = Vec::new();
    let mut iters = 0;
    let mut converged = false;
    while iters < cfg.max_iters {
        let change = sweep_once(
            graph,
            &kernel,
            &mut state,
            &current,
            &mut next,
            cfg.damping,
            cfg.clamp,
            &pinned,
        );
        core::mem::swap(&mut current, &mut next);
        iters += 1;
        trace.push(change);
        if change < cfg.tol {
            converged = true;
            break;
        }
    }

    // Node marginals: full-neighborhood product, logistic transform.
    state.refresh(graph, &kernel, &current);
    let probs = (0..graph.n())
        .map(|i| match pinned_types.get(&(i as u32)) {
            Some(&t) => f64::from(t),
            None => sigmoid(state.totals[i]),
        })
        .collect();

    Ok(BpOutcome {
        marginals: Marginals::new(probs),
        iters,
        converged,
        trace,
    })
}

/// Exact posterior over all `2^n` type assignments (uniform independent
/// prior), as a probability vector indexed by the assignment bitmask.
pub fn brute_force_posterior(
    graph: &LabelledGraph,
    params: &ModelParams,
) -> Result<Vec<f64>, BpError> {
    let n = graph.n();
    if n > 16 {
        return Err(BpError::TooLargeForEnumeration(n));
    }
    let nf = n as f64;
    let (pa, pb) = (params.a() / nf, params.b() / nf);
    if pa > 1.0 || pb > 1.0 {
        return Err(BpError::EdgeProbabilityOverflow);
    }
    let ln_or_neg_inf = |x: f64| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY };
    let log_no_same = ln_or_neg_inf(1.0 - pa);
    let log_no_diff = ln_or_neg_inf(1.0 - pb);
    let edge_log_same: Vec<f64> = graph
        .edges()
        .iter()
        .map(|e| ln_or_neg_inf(pa * params.mu().prob(e.label)))
        .collect();
    let edge_log_diff: Vec<f64> = graph
        .edges()
        .iter()
        .map(|e| ln_or_neg_inf(pb * params.nu().prob(e.label)))
        .collect();

    let total_pairs = (n * (n - 1) / 2) as f64;
    let mut log_weights = Vec::with_capacity(1usize << n);
    for mask in 0u32..(1u32 << n) {
        let ones = mask.count_ones() as f64;
        let zeros = n as f64 - ones;
        let same_pairs = ones * (ones - 1.0) / 2.0 + zeros * (zeros - 1.0) / 2.0;
        let mut same_edges = 0.0;
        let mut ll = 0.0;
        for (idx, e) in graph.edges().iter().enumerate() {
            let same = (mask >> e.u) & 1 == (mask >> e.v) & 1;
            if same {
                ll += edge_log_same[idx];
                same_edges += 1.0;
            } else {
                ll += edge_log_diff[idx];
            }
        }
        let diff_edges = graph.edge_count() as f64 - same_edges;
        ll += (same_pairs - same_edges) * log_no_same;
        ll += (total_pairs - same_pairs - diff_edges) * log_no_diff;
        log_weights.push(ll);
    }

    let max_ll = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max_ll == f64::NEG_INFINITY {
        return Err(BpError::ZeroLikelihood);
    }
    let mut posterior: Vec<f64> = log_weights.iter().map(|ll| (ll - max_ll).exp()).collect();
    let z: f64 = posterior.iter().sum();
    posterior.iter_mut().for_each(|p| *p /= z);
    Ok(posterior)
}

/// Exact marginals by exhaustive enumeration. Rejects `n > 16`.
pub fn brute_force_marginals(
    graph: &LabelledGraph,
    params: &ModelParams,
) -> Result<Marginals, BpError> {
    let posterior = brute_force_posterior(graph, params)?;
    let n = graph.n();
    let mut probs = vec![0.0; n];
    for (mask, p) in posterior.iter().enumerate() {
        for (i, prob) in probs.iter_mut().enumerate() {
            if (mask >> i) & 1 == 1 {
                *prob += p;
            }
        }
    }
    Ok(Marginals::new(probs))
}

/// Thresholds marginals at 1/2; exact ties go to type 0.
pub fn estimate_types(marginals: &Marginals) -> Vec<NodeType> {
    marginals
        .probs()
        .iter()
        .map(|&p| u8::from(p > 0.5))
        .collect()
}

/// Permutation-maximized overlap `Q = 2 max(f, 1 - f) - 1` where `f` is the
/// agreement fraction. Scores 0 for constant or random guessing on balanced
/// types and 1 for exact recovery up to a global flip.
pub fn overlap(true_types: &[NodeType], est_types: &[NodeType]) -> Result<f64, BpError> {
    if true_types.len() != est_types.len() || true_types.is_empty() {
        return Err(BpError::LengthMismatch {
            left: true_types.len(),
            right: est_types.len(),
        });
    }
    let n = true_types.len();
    let agree = true_types
        .iter()
        .zip(est_types)
        .filter(|(a, b)| a == b)
        .count();
    // Integer max first, so the score is exactly invariant under flips.
    let best = agree.max(n - agree);
    Ok(2.0 * best as f64 / n as f64 - 1.0)
}
