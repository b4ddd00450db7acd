//! `lsbm`: sampling, inference and threshold experiments for the labelled
//! stochastic block model, driven by a TOML config.
//!
//! Data goes to files (deterministically, byte-for-byte given the same
//! config and seed); progress notes go to stderr.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use lsbm_cli::config::Config;
use lsbm_cli::graph_io::{read_graph, read_types, write_graph, write_marginals, write_types};
use lsbm_cli::plot::{emit_plot_data, render_svg};
use lsbm_cli::sweep::{critical_eps, run_sweep, summarize, SweepSpec};
use lsbm_cli::textfmt::sig9;

use lsbm_core::bp::{estimate_types, overlap, run_bp};
use lsbm_core::graph::sample_graph;
use lsbm_core::ldp::{
    cramer_transform, empirical_growth, growth_prediction, rate_h, rate_window,
    WeightDistribution,
};
use lsbm_core::model::{tau, unlabelled_condition};
use lsbm_core::rng::derive_seed;
use lsbm_core::tree::{chi_profile, conductance_bounds, estimate_delta, sample_gw_skeleton};

#[derive(Parser)]
#[command(
    name = "lsbm",
    version,
    about = "Labelled stochastic block model: sampling, belief propagation, trees, thresholds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; every random stream is derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (or path stem for multi-file outputs).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print tau, the unlabelled condition and the critical two-label eps.
    Threshold(Common),
    /// Sample a graph; writes <out>.edges and the hidden types to <out>.types.
    GenGraph {
        #[command(flatten)]
        common: Common,
        /// Override [graph].n from the config.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run belief propagation on an edge-list file; writes <out>.marginals,
    /// <out>.assign and <out>.summary.
    Bp {
        #[command(flatten)]
        common: Common,
        /// Edge-list file produced by gen-graph.
        #[arg(long)]
        graph: PathBuf,
        /// Optional ground-truth types file; adds the overlap to the summary.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Optional CSV convergence trace (iter, max_change).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Overlap-vs-eps sweep; writes <out>.rows.csv and per-pair series CSVs.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Also render the curves to an SVG file.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Reconstruction advantage and conductance bounds on sampled trees.
    TreeDelta(Common),
    /// Sensitivity profile chi(d) on sampled trees.
    TreeChi(Common),
    /// Tabulate the rate function; optionally compare to simulated growth.
    RateFn(Common),
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Threshold(c) => cmd_threshold(&c),
        Command::GenGraph { common, n } => cmd_gen_graph(&common, n),
        Command::Bp {
            common,
            graph,
            truth,
            trace,
        } => cmd_bp(&common, &graph, truth.as_deref(), trace.as_deref()),
        Command::Sweep { common, svg } => cmd_sweep(&common, svg.as_deref()),
        Command::TreeDelta(c) => cmd_tree_delta(&c),
        Command::TreeChi(c) => cmd_tree_chi(&c),
        Command::RateFn(c) => cmd_rate_fn(&c),
    }
}

fn out_path(common: &Common) -> Result<&Path> {
    common
        .out
        .as_deref()
        .context("--out is required for this subcommand")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("creating {}", path.display())
    })?))
}

fn cmd_threshold(common: &Common) -> Result<()> {
    let cfg = Config::load(&common.config)?;
    let model = cfg.model()?;
    let params = model.to_params()?;
    let t = tau(&params);
    let star = critical_eps(model.a, model.b);
    let mut text = String::new();
    text.push_str(&format!("a {}\n", sig9(model.a)));
    text.push_str(&format!("b {}\n", sig9(model.b)));
    text.push_str(&format!("lambda {}\n", sig9(params.mean_degree())));
    text.push_str(&format!("tau {}\n", sig9(t)));
    text.push_str(&format!("tau_gt_1 {}\n", t > 1.0));
    text.push_str(&format!(
        "unlabelled_condition {}\n",
        unlabelled_condition(model.a, model.b)
    ));
    text.push_str(&format!("eps_star {}\n", sig9(star)));
    match &common.out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_gen_graph(common: &Common, n_override: Option<usize>) -> Result<()> {
    let cfg = Config::load(&common.config)?;
    let params = cfg.model()?.to_params()?;
    let n = match n_override {
        Some(n) => n,
        None => cfg.graph()?.n,
    };
    let out = out_path(common)?;
    let graph = sample_graph(&params, n, common.seed)
        .with_context(|| format!("sampling a graph with n = {n}"))?;
    let edges_path = out.with_extension("edges");
    let types_path = out.with_extension("types");
    write_graph(&graph, params.labels(), &edges_path, Some(&types_path))?;
    eprintln!(
        "sampled n={} edges={} -> {} / {}",
        n,
        graph.edge_count(),
        edges_path.display(),
        types_path.display()
    );
    Ok(())
}

fn cmd_bp(
    common: &Common,
    graph_path: &Path,
    truth: Option<&Path>,
    trace: Option<&Path>,
) -> Result<()> {
    let cfg = Config::load(&common.config)?;
    let params = cfg.model()?.to_params()?;
    let bp_cfg = cfg.bp_config()?;
    let out = out_path(common)?;

    let graph = read_graph(graph_path, None, params.labels())?;
    let outcome = run_bp(&graph, &params, &bp_cfg, common.seed);
    let assignment = estimate_types(&outcome.marginals);

    write_marginals(&out.with_extension("marginals"), &outcome.marginals)?;
    write_types(&out.with_extension("assign"), &assignment)?;

    let mut summary = String::new();
    summary.push_str(&format!("iters {}\n", outcome.iters));
    summary.push_str(&format!("converged {}\n", outcome.converged));
    if let Some(truth_path) = truth {
        let truth_types = read_types(truth_path, graph.n())?;
        let q = overlap(&truth_types, &assignment).context("scoring overlap")?;
        summary.push_str(&format!("overlap {}\n", sig9(q)));
    }
    std::fs::write(out.with_extension("summary"), summary)?;

    if let Some(trace_path) = trace {
        let mut w = create(trace_path)?;
        writeln!(w, "iter,max_change")?;
        for (i, change) in outcome.trace.iter().enumerate() {
            writeln!(w, "{},{}", i + 1, sig9(*change))?;
        }
        w.flush()?;
    }
    eprintln!(
        "bp: {} iters, converged={}",
        outcome.iters, outcome.converged
    );
    Ok(())
}

fn cmd_sweep(common: &Common, svg: Option<&Path>) -> Result<()> {
    let cfg = Config::load(&common.config)?;
    let section = cfg.sweep()?;
    let out = out_path(common)?;
    let spec = SweepSpec {
        pairs: section.pairs.iter().map(|p| (p[0], p[1])).collect(),
        eps_grid: section.eps_grid.clone(),
        n: section.n,
        seeds: section
            .seeds
            .iter()
            .map(|&s| derive_seed(common.seed, s))
            .collect(),
        bp: cfg.bp_config()?,
    };
    spec.validate().context("invalid [sweep] section")?;
    eprintln!(
        "sweep: {} pairs x {} eps x {} seeds at n={}",
        spec.pairs.len(),
        spec.eps_grid.len(),
        spec.seeds.len(),
        spec.n
    );
    let result = run_sweep(&spec);

    let rows_path = PathBuf::from(format!("{}.rows.csv", out.display()));
    let mut w = create(&rows_path)?;
    writeln!(w, "a,b,eps,seed,tau,overlap,iters,converged")?;
    // Report the configured seed values, not the derived streams.
    let per_cell_seeds: Vec<u64> = section
        .seeds
        .iter()
        .cycle()
        .take(result.rows.len())
        .copied()
        .collect();
    for (row, cfg_seed) in result.rows.iter().zip(per_cell_seeds) {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            sig9(row.a),
            sig9(row.b),
            sig9(row.eps),
            cfg_seed,
            sig9(row.tau),
            sig9(row.overlap),
            row.iters,
            row.converged
        )?;
    }
    w.flush()?;

    let series = summarize(&result);
    let files = emit_plot_data(&series, out)?;
    if let Some(svg_path) = svg {
        render_svg(&series, svg_path)?;
    }
    eprintln!(
        "sweep: wrote {} and {} series files",
        rows_path.display(),
        files.len()
    );
    Ok(())
}

fn cmd_tree_delta(common: &Common) -> Result<()> {
    let cfg = Config::load(&common.config)?;
    let params = cfg.model()?.to_params()?;
    let section = cfg.tree()?;
    let depths = section.eval_depths()?;
    let out = out_path(common)?;

    let rows: Vec<String> = (0..section.trees as u64)
        .into_par_iter()
        .map(|t| {
            let tree_seed = derive_seed(common.seed, 2 * t);
            let skeleton = sample_gw_skeleton(&params, section.depth, tree_seed);
            let broadcast_base = derive_seed(common.seed, 2 * t + 1);
            let mut lines = String::new();
            for &d in &depths {
                let bounds = conductance_bounds(&skeleton, d, &params);
                let est = estimate_delta(
                    &skeleton,
                    d,
                    section.reps,
                    &params,
                    derive_seed(broadcast_base, d as u64),
                )
                .expect("reps >= 1 is validated");
                let boundary = skeleton.truncate(d).boundary_size();
                lines.push_str(&format!(
                    "{t},{tree_seed},{d},{boundary},{},{},{},{},{}\n",
                    sig9(est.delta_hat),
                    sig9(est.std_err),
                    sig9(bounds.lower),
                    sig9(bounds.upper),
                    sig9(bounds.r_eff),
                ));
            }
            lines
        })
        .collect();

    let mut w = create(out)?;
    writeln!(w, "tree,seed,d,boundary,delta_hat,std_err,lower,upper,r_eff")?;
    for block in rows {
        w.write_all(block.as_bytes())?;
    }
    w.flush()?;
    eprintln!(
        "tree-delta: {} trees x {} depths, {} reps each -> {}",
        section.trees,
        depths.len(),
        section.reps,
        out.display()
    );
    Ok(())
}

fn cmd_tree_chi(common: &Common) -> Result<()> {
    let cfg = Config::load(&common.config)?;
    let params = cfg.model()?.to_params()?;
    let section = cfg.tree()?;
    let out = out_path(common)?;

    let rows: Vec<String> = (0..section.trees as u64)
        .into_par_iter()
        .map(|t| {
            let tree_seed = derive_seed(common.seed, t);
            let tree = sample_gw_skeleton(&params, section.depth, tree_seed);
            let profile = chi_profile(&tree, &params);
            let mut by_depth = vec![0usize; section.depth as usize + 1];
            for i in 0..tree.len() {
                by_depth[tree.depth(i) as usize] += 1;
            }
            let mut lines = String::new();
            for (d, chi) in profile.iter().enumerate() {
                lines.push_str(&format!("{t},{tree_seed},{d},{},{}\n", by_depth[d], sig9(*chi)));
            }
            lines
        })
        .collect();

    let mut w = create(out)?;
    writeln!(w, "tree,seed,d,boundary,chi")?;
    for block in rows {
        w.write_all(block.as_bytes())?;
    }
    w.flush()?;
    eprintln!(
        "tree-chi: {} trees to depth {} -> {}",
        section.trees,
        section.depth,
        out.display()
    );
    Ok(())
}

fn cmd_rate_fn(common: &Common) -> Result<()> {
    let cfg = Config::load(&common.config)?;
    let params = cfg.model()?.to_params()?;
    let section = cfg.rate()?;
    let out = out_path(common)?;
    if section.points < 2 {
        bail!("rate.points must be at least 2");
    }
    let lambda = params.mean_degree();
    if lambda <= 1.0 {
        bail!("the rate window needs mean degree (a+b)/2 > 1, got {lambda}");
    }
    let dist = WeightDistribution::from_params(&params);
    let (w_minus, w_plus) = rate_window(&dist, lambda);

    let mut w = create(out)?;
    writeln!(w, "# lambda={} w_minus={} w_plus={}", sig9(lambda), sig9(w_minus), sig9(w_plus))?;
    writeln!(w, "x,h0,h,prediction")?;
    for i in 0..section.points {
        let x = section.x_min
            + (section.x_max - section.x_min) * i as f64 / (section.points - 1) as f64;
        writeln!(
            w,
            "{},{},{},{}",
            sig9(x),
            sig9(cramer_transform(&dist, x)),
            sig9(rate_h(&dist, lambda, x)),
            sig9(growth_prediction(&dist, lambda, x))
        )?;
    }
    w.flush()?;

    if let Some(x) = section.growth_x {
        let d_max = section.growth_d_max.unwrap_or(12);
        let trials = section.growth_trials.unwrap_or(200);
        let points = empirical_growth(&params, x, d_max, trials, common.seed)
            .context("running the growth simulation")?;
        let growth_path = PathBuf::from(format!("{}.growth.csv", out.display()));
        let mut w = create(&growth_path)?;
        writeln!(w, "# x={} prediction={}", sig9(x), sig9(growth_prediction(&dist, lambda, x)))?;
        writeln!(w, "d,surviving,positive,mean_root,geo_mean_root")?;
        for p in points {
            writeln!(
                w,
                "{},{},{},{},{}",
                p.depth,
                p.surviving,
                p.positive,
                sig9(p.mean_root),
                sig9(p.geo_mean_root)
            )?;
        }
        w.flush()?;
        eprintln!("rate-fn: wrote {} and {}", out.display(), growth_path.display());
    } else {
        eprintln!("rate-fn: wrote {}", out.display());
    }
    Ok(())
}
