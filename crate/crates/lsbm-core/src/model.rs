//! Model parameters and the closed-form per-label quantities.
//!
//! A model is a connectivity pair `(a, b)` plus two label distributions
//! `mu` (same-type edges) and `nu` (cross-type edges) over a shared finite
//! label set. Everything else is derived: the observed label distribution
//! `m(l) = (a mu(l) + b nu(l)) / (a + b)`, the per-label flip probability
//! `eps(l) = b nu(l) / (a mu(l) + b nu(l))`, the channel parameter
//! `theta(l) = 1 - 2 eps(l)`, the path weight `W(l) = log|theta(l)|`, and
//! the detectability threshold
//!
//! ```text
//! tau = lambda * sum_l m(l) * theta(l)^2,      lambda = (a + b) / 2.
//! ```
//!
//! `tau > 1` is the conjectured feasibility condition for reconstructing the
//! hidden partition; with uninformative labels (`mu == nu`) it reduces to the
//! classical `(a - b)^2 > 2 (a + b)`.
//!
//! Note on ranges: `eps(l)` lives in `[0, 1]`, not `[0, 1/2]` — labels that
//! are more likely across blocks than within (`b nu(l) > a mu(l)`) give
//! `eps > 1/2` and a negative `theta`. All downstream formulas depend on
//! `theta^2` or `|theta|` only, so negative channels are supported
//! throughout. Labels that can never be observed (`a mu(l) + b nu(l) = 0`)
//! get the convention `eps = 1/2`, `theta = 0`, `W = -inf` and are flagged.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

// In builds where std is linked (tests, or downstream crates whose feature
// unification turns on rand/std), std's inherent f64 methods shadow these
// trait methods and the import goes unused; in pure no_std builds it is
// required. Allow both.
#[allow(unused_imports)]
use num_traits::Float;

/// Tolerance for "probabilities sum to one" checks. Inputs further away than
/// this are rejected rather than silently renormalized.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// Index of a label in its [`LabelSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelId(pub u32);

impl LabelId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Errors from model construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelError {
    /// The label set is empty.
    EmptyLabelSet,
    /// Two labels share the same identifier.
    DuplicateLabel(String),
    /// A probability is negative or not finite.
    InvalidProbability,
    /// Probabilities do not sum to one within [`PROB_SUM_TOL`].
    ProbabilitiesDoNotSumToOne,
    /// A distribution's length differs from the label set's.
    DomainMismatch { labels: usize, probs: usize },
    /// `a` or `b` is negative or not finite, or `a + b == 0`.
    InvalidConnectivity,
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::EmptyLabelSet => write!(f, "label set must be non-empty"),
            ModelError::DuplicateLabel(l) => write!(f, "duplicate label identifier {l:?}"),
            ModelError::InvalidProbability => {
                write!(f, "probabilities must be finite and non-negative")
            }
            ModelError::ProbabilitiesDoNotSumToOne => {
                write!(f, "probabilities must sum to 1 within {PROB_SUM_TOL:e}")
            }
            ModelError::DomainMismatch { labels, probs } => write!(
                f,
                "distribution has {probs} entries but the label set has {labels}"
            ),
            ModelError::InvalidConnectivity => {
                write!(f, "need finite a >= 0, b >= 0 with a + b > 0")
            }
        }
    }
}

impl core::error::Error for ModelError {}

/// Ordered set of distinct label identifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    names: Vec<String>,
}

impl LabelSet {
    pub fn new(names: Vec<String>) -> Result<Self, ModelError> {
        if names.is_empty() {
            return Err(ModelError::EmptyLabelSet);
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(ModelError::DuplicateLabel(name.clone()));
            }
        }
        Ok(LabelSet { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty sets
    }

    pub fn name(&self, id: LabelId) -> &str {
        &self.names[id.index()]
    }

    /// Looks a label up by identifier.
    pub fn id_of(&self, name: &str) -> Option<LabelId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| LabelId(i as u32))
    }

    pub fn ids(&self) -> impl Iterator<Item = LabelId> {
        (0..self.names.len() as u32).map(LabelId)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// A probability distribution over a [`LabelSet`], stored as a probability
/// list parallel to the set's label order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistribution {
    probs: Vec<f64>,
}

impl LabelDistribution {
    /// Validates and renormalizes exactly (the input must already sum to one
    /// within [`PROB_SUM_TOL`]; anything further off is rejected).
    pub fn new(probs: Vec<f64>) -> Result<Self, ModelError> {
        if probs.is_empty() {
            return Err(ModelError::EmptyLabelSet);
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(ModelError::InvalidProbability);
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(ModelError::ProbabilitiesDoNotSumToOne);
        }
        let probs = probs.into_iter().map(|p| p / sum).collect();
        Ok(LabelDistribution { probs })
    }

    pub fn prob(&self, id: LabelId) -> f64 {
        self.probs[id.index()]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Full parameter set of the labelled stochastic block model. Immutable
/// after construction and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    a: f64,
    b: f64,
    labels: LabelSet,
    mu: LabelDistribution,
    nu: LabelDistribution,
}

impl ModelParams {
    pub fn new(
        a: f64,
        b: f64,
        labels: LabelSet,
        mu: LabelDistribution,
        nu: LabelDistribution,
    ) -> Result<Self, ModelError> {
        if !a.is_finite() || !b.is_finite() || a < 0.0 || b < 0.0 || a + b <= 0.0 {
            return Err(ModelError::InvalidConnectivity);
        }
        for dist in [&mu, &nu] {
            if dist.len() != labels.len() {
                return Err(ModelError::DomainMismatch {
                    labels: labels.len(),
                    probs: dist.len(),
                });
            }
        }
        Ok(ModelParams { a, b, labels, mu, nu })
    }

    /// The symmetric two-label family used in the numerical experiments:
    /// labels `{+, -}` with `mu(+) = 1/2 + eps` and `nu(+) = 1/2 - eps`.
    pub fn two_label(a: f64, b: f64, eps: f64) -> Result<Self, ModelError> {
        if !(0.0..=0.5).contains(&eps) {
            return Err(ModelError::InvalidProbability);
        }
        let labels = LabelSet::new(alloc::vec![String::from("+"), String::from("-")])?;
        let mu = LabelDistribution::new(alloc::vec![0.5 + eps, 0.5 - eps])?;
        let nu = LabelDistribution::new(alloc::vec![0.5 - eps, 0.5 + eps])?;
        ModelParams::new(a, b, labels, mu, nu)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn mu(&self) -> &LabelDistribution {
        &self.mu
    }

    pub fn nu(&self) -> &LabelDistribution {
        &self.nu
    }

    /// Mean degree `lambda = (a + b) / 2`.
    pub fn mean_degree(&self) -> f64 {
        (self.a + self.b) / 2.0
    }
}

/// Per-label derived record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelQuantity {
    /// Flip probability `eps(l) = b nu / (a mu + b nu)`, in `[0, 1]`.
    pub eps: f64,
    /// Channel parameter `theta(l) = 1 - 2 eps(l)`, in `[-1, 1]`.
    pub theta: f64,
    /// Observed-label probability `m(l) = (a mu + b nu) / (a + b)`.
    pub obs_prob: f64,
    /// Path weight `W(l) = log|theta(l)|` (`-inf` when `theta == 0`).
    pub weight: f64,
    /// False when `a mu(l) + b nu(l) == 0`: the label never appears and the
    /// other fields hold the zero-probability conventions.
    pub reachable: bool,
}

/// Derived quantities for every label of a model, in label order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelQuantities {
    per_label: Vec<LabelQuantity>,
}

impl LabelQuantities {
    pub fn get(&self, id: LabelId) -> &LabelQuantity {
        &self.per_label[id.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (LabelId, &LabelQuantity)> {
        self.per_label
            .iter()
            .enumerate()
            .map(|(i, q)| (LabelId(i as u32), q))
    }

    pub fn len(&self) -> usize {
        self.per_label.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Computes `eps`, `theta`, `m` and `W` for every label.
///
/// Unreachable labels (`a mu + b nu == 0`) get `eps = 1/2`, `theta = 0`,
/// `weight = -inf`, `obs_prob = 0` and `reachable = false`.
pub fn derive_label_quantities(params: &ModelParams) -> LabelQuantities {
    let total = params.a() + params.b();
    let per_label = params
        .labels()
        .ids()
        .map(|id| {
            let am = params.a() * params.mu().prob(id);
            let bn = params.b() * params.nu().prob(id);
            let mass = am + bn;
            if mass <= 0.0 {
                return LabelQuantity {
                    eps: 0.5,
                    theta: 0.0,
                    obs_prob: 0.0,
                    weight: f64::NEG_INFINITY,
                    reachable: false,
                };
            }
            let eps = bn / mass;
            let theta = (am - bn) / mass;
            let weight = if theta == 0.0 {
                f64::NEG_INFINITY
            } else {
                theta.abs().ln()
            };
            LabelQuantity {
                eps,
                theta,
                obs_prob: mass / total,
                weight,
                reachable: true,
            }
        })
        .collect();
    LabelQuantities { per_label }
}

/// The detectability threshold `tau = lambda * sum_l m(l) theta(l)^2`.
pub fn tau(params: &ModelParams) -> f64 {
    let q = derive_label_quantities(params);
    let second_moment: f64 = q
        .iter()
        .map(|(_, lq)| lq.obs_prob * lq.theta * lq.theta)
        .sum();
    params.mean_degree() * second_moment
}

/// The unlabelled reconstruction condition `(a - b)^2 > 2 (a + b)`.
///
/// Agrees with `tau(params) > 1` whenever `mu == nu`.
pub fn unlabelled_condition(a: f64, b: f64) -> bool {
    (a - b) * (a - b) > 2.0 * (a + b)
}

/// The distribution of observed edge labels, `m(l) = (a mu + b nu) / (a + b)`.
pub fn observed_label_dist(params: &ModelParams) -> LabelDistribution {
    let total = params.a() + params.b();
    let probs = params
        .labels()
        .ids()
        .map(|id| (params.a() * params.mu().prob(id) + params.b() * params.nu().prob(id)) / total)
        .collect();
    LabelDistribution { probs }
}
