//! Overlap-vs-eps parameter sweeps over the symmetric two-label family
//! `mu(+) = 1/2 + eps`, `nu(+) = 1/2 - eps`.
//!
//! Each cell of a sweep (one `(a, b)` pair, one `eps`, one seed) samples a
//! fresh graph, runs belief propagation and scores the overlap against the
//! hidden types. Cells are independent, so they run in parallel, but rows
//! are emitted in the deterministic `pairs x eps_grid x seeds` order and
//! every per-cell random stream is derived from the cell coordinates with
//! SplitMix64 — reruns produce byte-identical CSVs on any machine.

use rayon::prelude::*;

use lsbm_core::bp::{estimate_types, overlap, run_bp, BpConfig};
use lsbm_core::graph::sample_graph;
use lsbm_core::model::{tau, ModelParams};
use lsbm_core::rng::{derive_seed, splitmix64};

/// Stream tags for the two independent draws a cell makes.
const GRAPH_STREAM: u64 = 0x4752_4150;
const BP_STREAM: u64 = 0x4250_0000;

/// `tau` of the two-label family at `(a, b, eps)`.
pub fn tau_two_label(a: f64, b: f64, eps: f64) -> f64 {
    tau(&ModelParams::two_label(a, b, eps).expect("valid two-label parameters"))
}

/// The critical `eps` where `tau` crosses 1 on the two-label family.
///
/// For `a == b` the closed form is `1 / (2 sqrt(a))`. Otherwise bisection
/// on `tau(eps) - 1` to 1e-9. Sentinels: 0 when `tau(0) >= 1` (the
/// unlabelled condition already holds at the boundary), 1/2 when `tau`
/// never reaches 1 on `[0, 1/2]`.
pub fn critical_eps(a: f64, b: f64) -> f64 {
    if a == b {
        return if a >= 1.0 { 1.0 / (2.0 * a.sqrt()) } else { 0.5 };
    }
    if tau_two_label(a, b, 0.0) >= 1.0 {
        return 0.0;
    }
    if tau_two_label(a, b, 0.5) <= 1.0 {
        return 0.5;
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if tau_two_label(a, b, mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Full specification of a sweep.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub pairs: Vec<(f64, f64)>,
    /// Strictly ascending, within `[0, 1/2]`.
    pub eps_grid: Vec<f64>,
    pub n: usize,
    pub seeds: Vec<u64>,
    pub bp: BpConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.pairs.is_empty() {
            anyhow::bail!("sweep needs at least one (a, b) pair");
        }
        if self.seeds.is_empty() {
            anyhow::bail!("sweep needs at least one seed");
        }
        if self.n < 2 || !self.n.is_multiple_of(2) {
            anyhow::bail!("sweep n must be even and >= 2");
        }
        if self.eps_grid.is_empty() {
            anyhow::bail!("sweep eps grid must be non-empty");
        }
        if !self.eps_grid.windows(2).all(|w| w[0] < w[1]) {
            anyhow::bail!("sweep eps grid must be strictly ascending");
        }
        if self
            .eps_grid
            .iter()
            .any(|e| !(0.0..=0.5).contains(e) || !e.is_finite())
        {
            anyhow::bail!("sweep eps values must lie in [0, 0.5]");
        }
        self.bp
            .validate()
            .map_err(|e| anyhow::anyhow!("invalid BP configuration: {e}"))
    }
}

/// One `(pair, eps, seed)` cell's outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub seed: u64,
    pub tau: f64,
    /// NaN when the cell failed (e.g. `a/n > 1`); `converged` is then false.
    pub overlap: f64,
    pub iters: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// Mixes the replicate seed with the cell coordinates. The `eps` index is
/// used rather than its float value so that grids refined later keep old
/// cells' streams distinct.
fn cell_seed(seed: u64, a: f64, b: f64, eps_idx: usize) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ a.to_bits());
    h = splitmix64(h ^ b.to_bits());
    splitmix64(h ^ eps_idx as u64)
}

fn run_cell(spec: &SweepSpec, a: f64, b: f64, eps_idx: usize, seed: u64) -> SweepRow {
    let eps = spec.eps_grid[eps_idx];
    let params = ModelParams::two_label(a, b, eps).expect("validated spec");
    let t = tau(&params);
    let cell = cell_seed(seed, a, b, eps_idx);
    let base = SweepRow {
        a,
        b,
        eps,
        seed,
        tau: t,
        overlap: f64::NAN,
        iters: 0,
        converged: false,
    };
    let graph = match sample_graph(&params, spec.n, derive_seed(cell, GRAPH_STREAM)) {
        Ok(g) => g,
        Err(_) => return base, // recorded as a failed cell, never aborts the sweep
    };
    let out = run_bp(&graph, &params, &spec.bp, derive_seed(cell, BP_STREAM));
    let est = estimate_types(&out.marginals);
    let q = overlap(graph.types().expect("sampled graphs carry types"), &est)
        .expect("lengths match");
    SweepRow {
        overlap: q,
        iters: out.iters,
        converged: out.converged,
        ..base
    }
}

/// Runs every cell (in parallel) and returns rows in deterministic order.
pub fn run_sweep(spec: &SweepSpec) -> SweepResult {
    let mut cells = Vec::with_capacity(spec.pairs.len() * spec.eps_grid.len() * spec.seeds.len());
    for &(a, b) in &spec.pairs {
        for eps_idx in 0..spec.eps_grid.len() {
            for &seed in &spec.seeds {
                cells.push((a, b, eps_idx, seed));
            }
        }
    }
    let rows = cells
        .par_iter()
        .map(|&(a, b, eps_idx, seed)| run_cell(spec, a, b, eps_idx, seed))
        .collect();
    SweepResult { rows }
}

/// Mean and standard error of the overlap across seeds, one point per
/// `(pair, eps)` cell group (failed cells excluded from the average).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub eps: f64,
    pub mean_q: f64,
    pub se_q: f64,
    pub seeds: usize,
}

/// One curve of the overlap figure: a single `(a, b)` pair.
#[derive(Debug, Clone)]
pub struct Series {
    pub a: f64,
    pub b: f64,
    pub eps_star: f64,
    pub points: Vec<SeriesPoint>,
}

/// Groups rows by pair (in first-appearance order) and averages over seeds.
pub fn summarize(result: &SweepResult) -> Vec<Series> {
    let mut series: Vec<Series> = Vec::new();
    for row in &result.rows {
        if !series.iter().any(|s| s.a == row.a && s.b == row.b) {
            series.push(Series {
                a: row.a,
                b: row.b,
                eps_star: critical_eps(row.a, row.b),
                points: Vec::new(),
            });
        }
    }
    for s in &mut series {
        let mut eps_values: Vec<f64> = Vec::new();
        for row in &result.rows {
            if row.a == s.a && row.b == s.b && !eps_values.contains(&row.eps) {
                eps_values.push(row.eps);
            }
        }
        for eps in eps_values {
            let overlaps: Vec<f64> = result
                .rows
                .iter()
                .filter(|r| r.a == s.a && r.b == s.b && r.eps == eps && r.overlap.is_finite())
                .map(|r| r.overlap)
                .collect();
            let k = overlaps.len();
            if k == 0 {
                s.points.push(SeriesPoint {
                    eps,
                    mean_q: f64::NAN,
                    se_q: f64::NAN,
                    seeds: 0,
                });
                continue;
            }
            let mean = overlaps.iter().sum::<f64>() / k as f64;
            let var = if k > 1 {
                overlaps.iter().map(|q| (q - mean) * (q - mean)).sum::<f64>() / (k as f64 - 1.0)
            } else {
                0.0
            };
            s.points.push(SeriesPoint {
                eps,
                mean_q: mean,
                se_q: (var / k as f64).sqrt(),
                seeds: k,
            });
        }
    }
    series
}
