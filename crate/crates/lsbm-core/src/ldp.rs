//! Cramér rate function for the path weights of the branching random walk.
//!
//! Edge weights are `W(l) = log|theta(l)|` with `l` drawn from the observed
//! label distribution `m`, so the weight distribution is finitely supported
//! on non-positive values, possibly with an atom at `-inf` (labels whose
//! `theta` vanishes). For a `Poi(lambda)` tree with i.i.d. edge weights, the
//! number `N+(d, x)` of depth-`d` descendants whose path weight sum is at
//! least `x d` grows like `(lambda e^{-h(x)})^d`, where
//!
//! ```text
//! h0(x) = sup_y ( x y - log phi(y) ),     phi(y) = E[e^{y W}],
//! h(x)  = h0(x) on [w-, w+],  +inf outside,
//! w+    = inf{ x >= wbar : h0(x) >= log lambda },
//! w-    = sup{ x <= wbar : h0(x) >= log lambda }.
//! ```
//!
//! The supremum is solved by bisection on the strictly increasing tilted
//! mean `psi(y) = phi'(y)/phi(y)`, with bracket expansion by doubling. An
//! atom at `-inf` restricts the transform to `y >= 0`; its mass `p` folds
//! into `log phi` as `log(1 - p)`, which makes `h0` flat at `-log(1 - p)`
//! left of the conditional mean (the cost per generation of avoiding dead
//! edges).
//!
//! Everything here is exercised against closed forms: the two-point
//! distribution has `h0 = binary KL`, and `sup_x (2x - h0(x)) = log E[e^{2W}]`
//! by convex duality, which ties the rate function back to `tau` through
//! `log tau = log lambda + log E[e^{2W}]`.

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

use crate::model::{derive_label_quantities, observed_label_dist, ModelParams, PROB_SUM_TOL};
use crate::rng::rng_from_seed;

/// Bisection/bracket-expansion iteration cap.
const MAX_SOLVER_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub enum LdpError {
    /// An atom value is NaN or `+inf`, or a probability is invalid.
    InvalidAtom,
    /// Probabilities do not sum to one within the model tolerance.
    ProbabilitiesDoNotSumToOne,
    /// `log_mgf` at `y < 0` diverges when mass sits at `-inf`.
    NegativeArgumentWithInfiniteAtoms,
    /// `empirical_growth` needs a supercritical mean degree.
    SubcriticalMeanDegree(f64),
}

impl fmt::Display for LdpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LdpError::InvalidAtom => write!(f, "atom values must be finite or -inf"),
            LdpError::ProbabilitiesDoNotSumToOne => {
                write!(f, "atom probabilities must sum to 1 within {PROB_SUM_TOL:e}")
            }
            LdpError::NegativeArgumentWithInfiniteAtoms => {
                write!(f, "E[e^(yW)] diverges for y < 0 with mass at -inf")
            }
            LdpError::SubcriticalMeanDegree(l) => {
                write!(f, "mean degree {l} must exceed 1")
            }
        }
    }
}

impl core::error::Error for LdpError {}

/// Finitely supported weight distribution, with the `-inf` mass tracked
/// separately from the (sorted, deduplicated) finite atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightDistribution {
    /// `(value, prob)` with strictly increasing finite values, probs > 0.
    atoms: Vec<(f64, f64)>,
    neg_inf_mass: f64,
}

impl WeightDistribution {
    pub fn new(raw: Vec<(f64, f64)>) -> Result<Self, LdpError> {
        let mut neg_inf_mass = 0.0;
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut total = 0.0;
        for (value, prob) in raw {
            if value.is_nan() || value == f64::INFINITY || !prob.is_finite() || prob < 0.0 {
                return Err(LdpError::InvalidAtom);
            }
            total += prob;
            if prob == 0.0 {
                continue;
            }
            if value == f64::NEG_INFINITY {
                neg_inf_mass += prob;
            } else {
                atoms.push((value, prob));
            }
        }
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(LdpError::ProbabilitiesDoNotSumToOne);
        }
        atoms.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite values"));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (value, prob) in atoms {
            match merged.last_mut() {
                Some((v, p)) if *v == value => *p += prob,
                _ => merged.push((value, prob)),
            }
        }
        // Exact renormalization after the tolerance check.
        for (_, p) in merged.iter_mut() {
            *p /= total;
        }
        neg_inf_mass /= total;
        Ok(WeightDistribution {
            atoms: merged,
            neg_inf_mass,
        })
    }

    /// Weight distribution of a model: `W(l) = log|theta(l)|` carrying mass
    /// `m(l)`. Labels with `theta = 0` contribute to the `-inf` atom.
    pub fn from_params(params: &ModelParams) -> Self {
        let q = derive_label_quantities(params);
        let raw: Vec<(f64, f64)> = q
            .iter()
            .filter(|(_, lq)| lq.obs_prob > 0.0)
            .map(|(_, lq)| (lq.weight, lq.obs_prob))
            .collect();
        WeightDistribution::new(raw).expect("model quantities form a distribution")
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn neg_inf_mass(&self) -> f64 {
        self.neg_inf_mass
    }

    /// `wbar`: the mean, `-inf` if any mass sits at `-inf`.
    pub fn mean(&self) -> f64 {
        if self.neg_inf_mass > 0.0 {
            f64::NEG_INFINITY
        } else {
            self.finite_mean()
        }
    }

    /// Mean of the finite part, normalized to its own mass.
    fn finite_mean(&self) -> f64 {
        let mass: f64 = self.atoms.iter().map(|(_, p)| p).sum();
        self.atoms.iter().map(|(w, p)| w * p).sum::<f64>() / mass
    }

    fn support(&self) -> Option<(f64, f64)> {
        match (self.atoms.first(), self.atoms.last()) {
            (Some(&(lo, _)), Some(&(hi, _))) => Some((lo, hi)),
            _ => None,
        }
    }
}

/// `log Sigma p_k e^{y w_k}` over the finite atoms, computed with the usual
/// max shift. Empty input gives `-inf`.
fn log_sum_tilted(atoms: &[(f64, f64)], y: f64) -> f64 {
    let shift = atoms
        .iter()
        .map(|&(w, p)| p.ln() + y * w)
        .fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = atoms
        .iter()
        .map(|&(w, p)| (p.ln() + y * w - shift).exp())
        .sum();
    shift + sum.ln()
}

/// Tilted mean `psi(y) = Sigma p w e^{yw} / Sigma p e^{yw}`; strictly
/// increasing in `y` for non-degenerate distributions.
fn tilted_mean(atoms: &[(f64, f64)], y: f64) -> f64 {
    let shift = atoms
        .iter()
        .map(|&(w, p)| p.ln() + y * w)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for &(w, p) in atoms {
        let e = (p.ln() + y * w - shift).exp();
        num += w * e;
        den += e;
    }
    num / den
}

/// Log moment generating function `log E[e^{y W}]`.
///
/// At `y = 0` the full mass counts and the result is exactly 0; for `y > 0`
/// atoms at `-inf` contribute nothing. Rejects `y < 0` when such atoms are
/// present, because the expectation is then infinite.
pub fn log_mgf(dist: &WeightDistribution, y: f64) -> Result<f64, LdpError> {
    if y < 0.0 && dist.neg_inf_mass > 0.0 {
        return Err(LdpError::NegativeArgumentWithInfiniteAtoms);
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    Ok(log_sum_tilted(&dist.atoms, y))
}

/// Solves `psi(y) = x` on the normalized atoms by doubling the bracket and
/// bisecting. Caller guarantees `x` strictly inside the open support hull.
fn solve_tilt(atoms: &[(f64, f64)], x: f64) -> f64 {
    let mean = tilted_mean(atoms, 0.0);
    let (mut lo, mut hi);
    if x >= mean {
        lo = 0.0;
        hi = 1.0;
        let mut i = 0;
        while tilted_mean(atoms, hi) < x && i < MAX_SOLVER_ITERS {
            hi *= 2.0;
            i += 1;
        }
    } else {
        hi = 0.0;
        lo = -1.0;
        let mut i = 0;
        while tilted_mean(atoms, lo) > x && i < MAX_SOLVER_ITERS {
            lo *= 2.0;
            i += 1;
        }
    }
    for _ in 0..MAX_SOLVER_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if tilted_mean(atoms, mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The Cramér transform `h0(x) = sup_y (x y - log phi(y))`, with the
/// conventions: `+inf` outside the closed support hull, `-log p` exactly at
/// a boundary atom of probability `p`, and — when mass `p_inf` sits at
/// `-inf` — the flat value `-log(1 - p_inf)` for every `x` at or below the
/// conditional finite mean.
pub fn cramer_transform(dist: &WeightDistribution, x: f64) -> f64 {
    let Some((wmin, wmax)) = dist.support() else {
        return f64::INFINITY; // all mass at -inf: no finite empirical mean
    };
    if x.is_nan() {
        return f64::NAN;
    }
    if x > wmax {
        return f64::INFINITY;
    }
    let pmax = dist.atoms.last().expect("non-empty").1;
    if x == wmax {
        return -pmax.ln();
    }
    let q = 1.0 - dist.neg_inf_mass;
    if q >= 1.0 {
        if x < wmin {
            return f64::INFINITY;
        }
        let pmin = dist.atoms.first().expect("non-empty").1;
        if x == wmin {
            return -pmin.ln();
        }
        let mean = dist.finite_mean();
        if x == mean {
            return 0.0;
        }
        let y = solve_tilt(&dist.atoms, x);
        (x * y - log_sum_tilted(&dist.atoms, y)).max(0.0)
    } else {
        // Conditional distribution given a finite weight.
        let cond: Vec<(f64, f64)> = dist.atoms.iter().map(|&(w, p)| (w, p / q)).collect();
        let base = -q.ln();
        let cond_mean = tilted_mean(&cond, 0.0);
        if x <= cond_mean {
            return base;
        }
        let y = solve_tilt(&cond, x);
        base + (x * y - log_sum_tilted(&cond, y)).max(0.0)
    }
}

/// The window `[w-, w+]` where the depth-`d` population with the given
/// empirical mean is non-trivial. If `h0` never reaches `log lambda` on a
/// side, that side's bound is the corresponding support endpoint (which is
/// `-inf` when mass sits at `-inf`).
pub fn rate_window(dist: &WeightDistribution, lambda: f64) -> (f64, f64) {
    assert!(
        lambda > 1.0 && lambda.is_finite(),
        "rate window requires lambda > 1"
    );
    let log_lam = lambda.ln();
    let Some((wmin, wmax)) = dist.support() else {
        return (f64::NEG_INFINITY, f64::NEG_INFINITY);
    };
    let q = 1.0 - dist.neg_inf_mass;

    // Left anchor of the increasing branch and the value of h0 there.
    let anchor = if q >= 1.0 {
        dist.finite_mean()
    } else {
        tilted_mean(&dist.atoms, 0.0)
    };
    let left_value = if q >= 1.0 { 0.0 } else { -q.ln() };

    if left_value >= log_lam {
        // The whole axis already satisfies h0 >= log lambda.
        return (f64::NEG_INFINITY, f64::NEG_INFINITY);
    }

    let w_plus = if cramer_transform(dist, wmax) < log_lam {
        wmax
    } else {
        bisect_level(dist, log_lam, anchor, wmax, true)
    };

    let w_minus = if q < 1.0 {
        f64::NEG_INFINITY
    } else if cramer_transform(dist, wmin) < log_lam {
        wmin
    } else {
        bisect_level(dist, log_lam, wmin, anchor, false)
    };

    (w_minus, w_plus)
}

/// Finds `h0(x) = level` on a monotone branch of `h0`.
fn bisect_level(
    dist: &WeightDistribution,
    level: f64,
    mut lo: f64,
    mut hi: f64,
    rising: bool,
) -> f64 {
    for _ in 0..MAX_SOLVER_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let above = cramer_transform(dist, mid) >= level;
        if above == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The truncated rate function `h`: `h0` inside `[w-, w+]`, `+inf` outside.
pub fn rate_h(dist: &WeightDistribution, lambda: f64, x: f64) -> f64 {
    let (w_minus, w_plus) = rate_window(dist, lambda);
    if x < w_minus || x > w_plus {
        f64::INFINITY
    } else {
        cramer_transform(dist, x)
    }
}

/// The predicted per-generation growth factor `lambda e^{-h(x)}` of
/// `N+(d, x)`; zero outside the window.
pub fn growth_prediction(dist: &WeightDistribution, lambda: f64, x: f64) -> f64 {
    let h = rate_h(dist, lambda, x);
    if h == f64::INFINITY {
        0.0
    } else {
        lambda * (-h).exp()
    }
}

/// Per-depth summary of the simulated boundary population `N+(d, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthPoint {
    pub depth: u32,
    /// Trials whose generation `depth` was non-empty.
    pub surviving: usize,
    /// Surviving trials with `N+ > 0`.
    pub positive: usize,
    /// Arithmetic mean of `N+^{1/d}` over surviving trials (zeros included).
    pub mean_root: f64,
    /// Geometric mean of `N+^{1/d}` over the positive trials; 0 if none.
    pub geo_mean_root: f64,
}

/// Simulates `trials` independent `Poi(lambda)` trees with i.i.d. edge
/// weights drawn from the model's weight distribution and tallies
/// `N+(d, x)`, the number of depth-`d` nodes whose path weight sum is at
/// least `x d`. Trials extinct at a given depth are excluded from that
/// depth onwards. Rejects `lambda <= 1`; depth is capped at 14 because the
/// live generation holds order `lambda^d` nodes.
pub fn empirical_growth(
    params: &ModelParams,
    x: f64,
    d_max: u32,
    trials: usize,
    seed: u64,
) -> Result<Vec<GrowthPoint>, LdpError> {
    let lambda = params.mean_degree();
    if lambda <= 1.0 {
        return Err(LdpError::SubcriticalMeanDegree(lambda));
    }
    assert!(d_max <= 14, "generation d holds ~lambda^d nodes; cap d at 14");

    let q = derive_label_quantities(params);
    let weight_of: Vec<f64> = params.labels().ids().map(|l| q.get(l).weight).collect();
    let observed = observed_label_dist(params);
    let mut cumulative = Vec::with_capacity(weight_of.len());
    let mut acc = 0.0;
    for p in observed.probs() {
        acc += p;
        cumulative.push(acc);
    }
    let offspring = Poisson::new(lambda).expect("lambda > 1");

    let mut rng = rng_from_seed(seed);
    let d_max = d_max as usize;
    let mut surviving = alloc::vec![0usize; d_max + 1];
    let mut positive = alloc::vec![0usize; d_max + 1];
    let mut sum_root = alloc::vec![0.0f64; d_max + 1];
    let mut sum_log = alloc::vec![0.0f64; d_max + 1];

    let mut current: Vec<f64> = Vec::new();
    let mut next: Vec<f64> = Vec::new();
    for _ in 0..trials {
        current.clear();
        current.push(0.0);
        for d in 1..=d_max {
            next.clear();
            for &sum in &current {
                let children = offspring.sample(&mut rng) as u64;
                for _ in 0..children {
                    let r: f64 = rng.random::<f64>();
                    let mut label = cumulative.len() - 1;
                    for (i, &c) in cumulative.iter().enumerate() {
                        if r < c {
                            label = i;
                            break;
                        }
                    }
                    next.push(sum + weight_of[label]);
                }
            }
            core::mem::swap(&mut current, &mut next);
            if current.is_empty() {
                break;
            }
            let count = current.iter().filter(|&&s| s >= x * d as f64).count();
            surviving[d] += 1;
            if count > 0 {
                positive[d] += 1;
                sum_log[d] += (count as f64).ln();
            }
            sum_root[d] += (count as f64).powf(1.0 / d as f64);
        }
    }

    Ok((1..=d_max)
        .map(|d| GrowthPoint {
            depth: d as u32,
            surviving: surviving[d],
            positive: positive[d],
            mean_root: if surviving[d] > 0 {
                sum_root[d] / surviving[d] as f64
            } else {
                0.0
            },
            geo_mean_root: if positive[d] > 0 {
                (sum_log[d] / positive[d] as f64 / d as f64).exp()
            } else {
                0.0
            },
        })
        .collect())
}
