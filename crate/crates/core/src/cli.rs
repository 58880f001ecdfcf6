//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis::{predict_abundance, probabilistic_coherence, CoherenceScope, DEFAULT_COHERENCE_M};
use crate::error::{Error, Result};
use crate::exec::{with_thread_cap, Exec};
use crate::inference::{self, fit_with, FitConfig};
use crate::io::{self, format_sig, RunSummaries};
use crate::model::{CountData, FitMode};
use crate::simgen::{SimDesign, SimSet};

pub const THREADS_ENV: &str = "COVLDA_THREADS";

#[derive(Debug, Parser)]
#[command(name = "covlda", version, about = "LDA with negative-binomial covariate regression")]
pub struct Cli {
    /// Suppress progress output on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model and write the artifact directory.
    Fit(FitArgs),
    /// Expected abundances for new covariate rows.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        covariates: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset with known truth.
    Simulate {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        set: u8,
        #[arg(long)]
        l: usize,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write this many held-out instances (files prefixed `holdout_`).
        #[arg(long, default_value_t = 0)]
        holdout: usize,
    },
    /// Probabilistic coherence of a fitted model on a count table.
    Coherence {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        counts: PathBuf,
        #[arg(long, default_value_t = DEFAULT_COHERENCE_M)]
        m: usize,
        /// Count co-occurrence over every instance rather than the ones each cluster dominates.
        #[arg(long)]
        whole_corpus: bool,
    },
    /// Print the summaries of a fitted model.
    Report {
        #[arg(long)]
        model: PathBuf,
    },
}

#[derive(Debug, clap::Args)]
pub struct FitArgs {
    /// Count table: `instance_id,<category>...`.
    #[arg(long)]
    pub counts: PathBuf,
    /// Covariate table: `instance_id,<covariate>...`.
    #[arg(long)]
    pub covariates: PathBuf,
    /// Do not prepend an intercept column.
    #[arg(long)]
    pub no_intercept: bool,
    /// Number of clusters.
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value = "two-stage", value_parser = ["two-stage", "joint"])]
    pub mode: String,
    #[arg(long, default_value_t = inference::DEFAULT_ITERS)]
    pub iters: usize,
    #[arg(long, default_value_t = inference::DEFAULT_BURNIN)]
    pub burnin: usize,
    #[arg(long, default_value_t = inference::DEFAULT_THIN)]
    pub thin: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Symmetric Dirichlet concentration of the cluster compositions [default: 0.1].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Prior variance of every regression coefficient [default: 10].
    #[arg(long)]
    pub prior_var: Option<f64>,
    /// Upper bound of the uniform prior on the overdispersion [default: 1000].
    #[arg(long)]
    pub n0: Option<f64>,
    /// Credible-interval level [default: 0.95].
    #[arg(long)]
    pub ci: Option<f64>,
    /// Artifact directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Worker threads allowed by the environment (default 1).
pub fn thread_cap() -> usize {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()).filter(|&n| n > 0).unwrap_or(1)
}

/// Parse `argv`, run the command and return the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let threads = thread_cap();
    match with_thread_cap(threads, || run(cli, threads)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, threads: usize) -> Result<()> {
    let exec = if threads > 1 { Exec::Parallel } else { Exec::Sequential };
    match cli.command {
        Command::Fit(args) => fit_cmd(&args, exec, cli.quiet),
        Command::Predict { model, covariates, out } => predict_cmd(&model, &covariates, &out, exec),
        Command::Simulate { set, l, s, k, seed, out, holdout } => simulate_cmd(set, l, s, k, seed, &out, holdout),
        Command::Coherence { model, counts, m, whole_corpus } => coherence_cmd(&model, &counts, m, whole_corpus, exec),
        Command::Report { model } => report_cmd(&model),
    }
}

fn fit_cmd(args: &FitArgs, exec: Exec, quiet: bool) -> Result<()> {
    let (data, x) = io::load_dataset(&args.counts, &args.covariates, !args.no_intercept)?;
    let mut cfg = FitConfig::new(data.n_categories(), args.k);
    cfg.mode = args.mode.parse::<FitMode>()?;
    cfg.iters = args.iters;
    cfg.burnin = args.burnin;
    cfg.thin = args.thin;
    cfg.seed = args.seed;
    cfg.exec = exec;
    if let Some(g) = args.gamma {
        cfg.hp.gamma = vec![g; data.n_categories()];
    }
    if let Some(v) = args.prior_var {
        cfg.hp.prior_var = v;
    }
    if let Some(n0) = args.n0 {
        cfg.hp.n_upper = n0;
    }
    if let Some(ci) = args.ci {
        cfg.hp.ci_level = ci;
    }
    cfg.validate()?;
    if data.n_categories() < args.k {
        return Err(Error::InvalidConfig(format!("K = {} exceeds the {} categories", args.k, data.n_categories())));
    }

    let every = (cfg.iters / 20).max(1);
    let total = cfg.iters;
    let mut progress = |t: usize, ld: f64| {
        if !quiet && (t.is_multiple_of(every) || t == total) {
            eprintln!("iteration {t}/{total} log density {}", format_sig(ld));
        }
    };
    let trace = fit_with(&data, &x, &cfg, &mut progress)?;
    let summaries = RunSummaries::compute(&trace, &data, &x, &cfg.hp, exec)?;
    let art = io::write_artifacts(&trace, &summaries, &args.out)?;
    if summaries.convergence.flagged && !quiet {
        eprintln!("warning: log density still drifting after burn-in; consider more iterations");
    }
    if !quiet {
        eprintln!("wrote {}", art.dir.display());
    }
    Ok(())
}

fn predict_cmd(model_dir: &Path, covariates: &Path, out: &Path, exec: Exec) -> Result<()> {
    let model = io::load_model(model_dir)?;
    let (ids, x) = io::load_covariates(covariates, model.intercept)?;
    let x = io::select_columns(&x, &model.covariate_names)?;
    let pred = predict_abundance(&model.beta_mean, &model.phi_mean, &x, exec)?;
    io::write_predictions(out, &ids, &model.category_names, &pred)
}

fn simulate_cmd(set: u8, l: usize, s: usize, k: usize, seed: u64, out: &Path, holdout: usize) -> Result<()> {
    if l == 0 {
        return Err(Error::InvalidConfig("--l must be positive".into()));
    }
    let set = if set == 1 { SimSet::One } else { SimSet::Two };
    let design = SimDesign::build(set, s, k, seed, Default::default())?;
    let truth = design.simulate(l, seed)?;
    let meta = [("set", set_name(set).to_string()), ("l", l.to_string()), ("s", s.to_string()), ("k", k.to_string())];
    io::write_simulation(out, "", &truth, &meta)?;
    if holdout > 0 {
        let mut hold = design.simulate(holdout, seed.wrapping_add(1_000_003))?;
        hold.data.instance_ids = (1..=holdout).map(|i| format!("holdout{i}")).collect();
        io::write_simulation(out, "holdout_", &hold, &meta)?;
    }
    Ok(())
}

fn set_name(set: SimSet) -> &'static str {
    match set {
        SimSet::One => "1",
        SimSet::Two => "2",
    }
}

/// Rows of the saved Θ in the order of `data`'s instances.
fn theta_for(model: &io::SavedModel, data: &CountData) -> Result<ndarray::Array2<f64>> {
    let mut theta = ndarray::Array2::zeros((data.n_instances(), model.theta_mean.ncols()));
    for (l, id) in data.instance_ids.iter().enumerate() {
        let i = model
            .instance_ids
            .iter()
            .position(|m| m == id)
            .ok_or_else(|| Error::MissingInstance(id.clone(), "the fitted model (use --whole-corpus)".into()))?;
        theta.row_mut(l).assign(&model.theta_mean.row(i));
    }
    Ok(theta)
}

fn coherence_cmd(model_dir: &Path, counts: &Path, m: usize, whole_corpus: bool, exec: Exec) -> Result<()> {
    let model = io::load_model(model_dir)?;
    let data = io::load_counts(counts)?;
    if data.category_names != model.category_names {
        return Err(Error::DimensionMismatch("count columns differ from the model's categories".into()));
    }
    let (scope, theta) = if whole_corpus {
        (CoherenceScope::WholeCorpus, model.theta_mean.clone())
    } else {
        (CoherenceScope::AssignedInstances, theta_for(&model, &data)?)
    };
    let rep = probabilistic_coherence(&model.phi_mean, &data, &theta, m, scope, exec)?;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "cluster,coherence");
    for (k, v) in rep.per_cluster.iter().enumerate() {
        let _ = writeln!(out, "{},{}", k + 1, format_sig(*v));
    }
    let _ = writeln!(out, "total,{}", format_sig(rep.total));
    Ok(())
}

fn report_cmd(model_dir: &Path) -> Result<()> {
    let model = io::load_model(model_dir)?;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "model {}", model_dir.display());
    for (k, v) in &model.meta {
        let _ = writeln!(out, "  {k} = {v}");
    }
    let _ = writeln!(out, "\ncoefficients ({} credible intervals, * = excludes zero)", format_sig(model.beta.level));
    let _ = writeln!(out, "{:>7}  {:<16} {:>12} {:>12} {:>12}", "cluster", "covariate", "mean", "lower", "upper");
    for r in &model.beta.rows {
        let s = &r.summary;
        let _ = writeln!(
            out,
            "{:>7}  {:<16} {:>12} {:>12} {:>12} {}",
            r.cluster + 1,
            r.covariate,
            format_sig(s.mean),
            format_sig(s.lower),
            format_sig(s.upper),
            if s.significant { "*" } else { "" }
        );
    }
    let relevant = std::fs::read_to_string(model_dir.join("relevant.txt")).map_err(|e| Error::io(model_dir, e))?;
    let _ = writeln!(out, "\nrelevant categories\n{relevant}");
    let coherence = std::fs::read_to_string(model_dir.join("coherence.csv")).map_err(|e| Error::io(model_dir, e))?;
    let _ = writeln!(out, "coherence\n{coherence}");
    Ok(())
}
