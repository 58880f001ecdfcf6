//! Chain orchestration: the joint Gibbs cycle, the two-stage estimator,
//! multi-chain runs and trace diagnostics.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{
    joint_log_density, theta_from_counts, CountData, CovariateMatrix, FitMode, Hyperparams,
    LatentState, ModelParams, Trace, TraceMeta,
};
use crate::rng::ChainRng;
use crate::samplers::{sample_beta, sample_overdispersion, sample_z_sweep, RegressionContext, SliceConfig};
use crate::vanilla::{
    self, draw_phi, is_retained, occupancy_from_totals, run_vanilla_with, validate_schedule, VanillaConfig,
};

pub const DEFAULT_ITERS: usize = 5000;
pub const DEFAULT_BURNIN: usize = 2500;
pub const DEFAULT_THIN: usize = 5;
pub const DEFAULT_STAGE2_INNER: usize = 20;
pub const DEFAULT_STAGE2_WARMUP: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub mode: FitMode,
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub hp: Hyperparams,
    pub slice: SliceConfig,
    /// Θ concentration of the covariate-free first stage.
    pub stage1_alpha: f64,
    /// Slice iterations per retained first-stage snapshot.
    pub stage2_inner: usize,
    /// Extra slice iterations on the first snapshot before any draw is kept.
    pub stage2_warmup: usize,
    pub random_scan: bool,
    pub exec: Exec,
}

impl FitConfig {
    pub fn new(s: usize, k: usize) -> Self {
        Self {
            mode: FitMode::TwoStage,
            iters: DEFAULT_ITERS,
            burnin: DEFAULT_BURNIN,
            thin: DEFAULT_THIN,
            seed: 1,
            hp: Hyperparams::new(s, k),
            slice: SliceConfig::default(),
            stage1_alpha: vanilla::DEFAULT_ALPHA,
            stage2_inner: DEFAULT_STAGE2_INNER,
            stage2_warmup: DEFAULT_STAGE2_WARMUP,
            random_scan: false,
            exec: Exec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_schedule(self.iters, self.burnin, self.thin)?;
        self.hp.validate()?;
        self.slice.validate()?;
        if self.stage2_inner == 0 {
            return Err(Error::InvalidConfig("stage-2 inner iterations must be positive".into()));
        }
        if !(self.stage1_alpha > 0.0) {
            return Err(Error::InvalidConfig("stage-1 alpha must be positive".into()));
        }
        Ok(())
    }

    /// Retained draws: `floor((iters - burnin) / thin)`.
    pub fn n_retained(&self) -> usize {
        (self.iters - self.burnin) / self.thin
    }

    pub fn stage1(&self) -> VanillaConfig {
        VanillaConfig {
            k_max: self.hp.k,
            alpha: self.stage1_alpha,
            gamma: self.hp.gamma.clone(),
            iters: self.iters,
            burnin: self.burnin,
            thin: self.thin,
            seed: self.seed,
            random_scan: self.random_scan,
            relabel_moves: true,
        }
    }

    fn meta(&self) -> TraceMeta {
        TraceMeta {
            mode: self.mode,
            iters: self.iters,
            burnin: self.burnin,
            thin: self.thin,
            seed: self.seed,
        }
    }

    fn check_inputs(&self, data: &CountData, x: &CovariateMatrix) -> Result<()> {
        self.validate()?;
        x.check_aligned(data)?;
        if self.hp.gamma.len() != data.n_categories() {
            return Err(Error::DimensionMismatch(format!(
                "{} gamma entries for {} categories",
                self.hp.gamma.len(),
                data.n_categories()
            )));
        }
        Ok(())
    }
}

/// Running sums for Θ and occupancy over retained iterations.
struct ThetaAccumulator {
    sum: Array2<f64>,
    occupancy: Vec<f64>,
    n: usize,
    degenerate: Vec<usize>,
}

impl ThetaAccumulator {
    fn new(l: usize, k: usize) -> Self {
        Self { sum: Array2::zeros((l, k)), occupancy: vec![0.0; k], n: 0, degenerate: Vec::new() }
    }

    fn push(&mut self, n_lk: &Array2<u32>) {
        let first = self.n == 0;
        for (l, row) in n_lk.rows().into_iter().enumerate() {
            let theta = theta_from_counts(row.as_slice().expect("row-major"));
            if first && theta.degenerate {
                self.degenerate.push(l);
            }
            self.sum.row_mut(l).scaled_add(1.0, &Array1::from(theta.values));
            for (acc, &c) in self.occupancy.iter_mut().zip(row.iter()) {
                *acc += c as f64;
            }
        }
        self.n += 1;
    }

    fn finish(self) -> (Array2<f64>, Vec<f64>, Vec<usize>) {
        let occ = occupancy_from_totals(&self.occupancy, 0.0);
        let mut by_cluster = vec![0.0; self.occupancy.len()];
        for (f, &k) in occ.fractions.iter().zip(&occ.clusters) {
            by_cluster[k] = *f;
        }
        (self.sum / self.n.max(1) as f64, by_cluster, self.degenerate)
    }
}

/// Progress hook: `(iteration, log density)`.
pub type Progress<'a> = &'a mut dyn FnMut(usize, f64);

/// Fit with the configured mode.
pub fn fit(data: &CountData, x: &CovariateMatrix, cfg: &FitConfig) -> Result<Trace> {
    fit_with(data, x, cfg, &mut |_, _| {})
}

pub fn fit_with(data: &CountData, x: &CovariateMatrix, cfg: &FitConfig, progress: Progress<'_>) -> Result<Trace> {
    match cfg.mode {
        FitMode::Joint => run_joint_with(data, x, cfg, progress),
        FitMode::TwoStage => run_two_stage_with(data, x, cfg, progress),
    }
}

/// Joint Gibbs sampler over all four full conditionals.
pub fn run_joint(data: &CountData, x: &CovariateMatrix, cfg: &FitConfig) -> Result<Trace> {
    run_joint_with(data, x, cfg, &mut |_, _| {})
}

pub fn run_joint_with(
    data: &CountData,
    x: &CovariateMatrix,
    cfg: &FitConfig,
    progress: Progress<'_>,
) -> Result<Trace> {
    cfg.check_inputs(data, x)?;
    let hp = &cfg.hp;
    let k = hp.k;
    let mut rng = ChainRng::seed_from_u64(cfg.seed);
    let mut state = LatentState::random(data, k, &mut rng)?;
    let mut params = ModelParams {
        phi: draw_phi(&state, &hp.gamma, &mut rng),
        beta: Array2::zeros((k, x.n_cols())),
        n_disp: hp.n_upper / 2.0,
    };
    let ctx = RegressionContext {
        x,
        prior_var: hp.prior_var,
        n_upper: hp.n_upper,
        slice: &cfg.slice,
        random_scan: cfg.random_scan,
        exec: cfg.exec,
    };

    let n_keep = cfg.n_retained();
    let mut phi_draws = Vec::with_capacity(n_keep);
    let mut beta_draws = Vec::with_capacity(n_keep);
    let mut n_draws = Vec::with_capacity(n_keep);
    let mut logdens = Vec::with_capacity(cfg.iters);
    let mut theta = ThetaAccumulator::new(data.n_instances(), k);
    let mut clamp_events = 0;

    for t in 1..=cfg.iters {
        sample_z_sweep(&mut state, &params.beta, params.n_disp, x, hp, cfg.random_scan, &mut rng)?;
        params.phi = draw_phi(&state, &hp.gamma, &mut rng);
        let (beta, c1) = sample_beta(&ctx, state.n_lk.view(), &params.beta, params.n_disp, &mut rng)?;
        params.beta = beta;
        let (n_disp, c2) = sample_overdispersion(&ctx, state.n_lk.view(), &params.beta, params.n_disp, &mut rng)?;
        params.n_disp = n_disp;
        clamp_events += c1 + c2;

        let ld = joint_log_density(&state, &params, data, x, hp)?;
        logdens.push(ld);
        progress(t, ld);

        if is_retained(t, cfg.burnin, cfg.thin) {
            state.check_conservation(data)?;
            phi_draws.push(params.phi.clone());
            beta_draws.push(params.beta.clone());
            n_draws.push(params.n_disp);
            theta.push(&state.n_lk);
        }
    }
    let (theta_mean, occupancy, degenerate_instances) = theta.finish();
    Ok(Trace {
        phi_draws,
        beta_draws,
        n_draws,
        theta_mean,
        degenerate_instances,
        logdens,
        occupancy,
        clamp_events,
        meta: cfg.meta(),
    })
}

/// Two-stage estimator: covariate-free LDA for Φ and the latent
/// abundances, then the regression refreshed on every retained snapshot.
pub fn run_two_stage(data: &CountData, x: &CovariateMatrix, cfg: &FitConfig) -> Result<Trace> {
    run_two_stage_with(data, x, cfg, &mut |_, _| {})
}

pub fn run_two_stage_with(
    data: &CountData,
    x: &CovariateMatrix,
    cfg: &FitConfig,
    progress: Progress<'_>,
) -> Result<Trace> {
    cfg.check_inputs(data, x)?;
    let hp = &cfg.hp;
    let k = hp.k;
    let mut rng = ChainRng::seed_from_u64(cfg.seed);
    let mut stage1_rng = rng.branch(0);
    let mut stage2_rng = rng.branch(1);

    let stage1 = run_vanilla_with(data, &cfg.stage1(), &mut stage1_rng, progress)?;

    let ctx = RegressionContext {
        x,
        prior_var: hp.prior_var,
        n_upper: hp.n_upper,
        slice: &cfg.slice,
        random_scan: cfg.random_scan,
        exec: cfg.exec,
    };
    let mut beta = Array2::zeros((k, x.n_cols()));
    let mut n_disp = hp.n_upper / 2.0;
    let mut clamp_events = 0;
    let mut beta_draws = Vec::with_capacity(stage1.abundance_snapshots.len());
    let mut n_draws = Vec::with_capacity(stage1.abundance_snapshots.len());
    let mut theta = ThetaAccumulator::new(data.n_instances(), k);

    for (i, n_lk) in stage1.abundance_snapshots.iter().enumerate() {
        let sweeps = cfg.stage2_inner + if i == 0 { cfg.stage2_warmup } else { 0 };
        for _ in 0..sweeps {
            let (b, c1) = sample_beta(&ctx, n_lk.view(), &beta, n_disp, &mut stage2_rng)?;
            beta = b;
            let (n, c2) = sample_overdispersion(&ctx, n_lk.view(), &beta, n_disp, &mut stage2_rng)?;
            n_disp = n;
            clamp_events += c1 + c2;
        }
        beta_draws.push(beta.clone());
        n_draws.push(n_disp);
        theta.push(n_lk);
    }
    let (theta_mean, occupancy, degenerate_instances) = theta.finish();
    Ok(Trace {
        phi_draws: stage1.phi_draws,
        beta_draws,
        n_draws,
        theta_mean,
        degenerate_instances,
        logdens: stage1.logdens,
        occupancy,
        clamp_events,
        meta: cfg.meta(),
    })
}

/// Independent chains with seeds `cfg.seed, cfg.seed + 1, ...`, run
/// concurrently under [`Exec::Parallel`].
pub fn run_chains(
    data: &CountData,
    x: &CovariateMatrix,
    cfg: &FitConfig,
    n_chains: usize,
    exec: Exec,
) -> Result<Vec<Trace>> {
    exec.try_map(n_chains, |i| {
        let mut c = cfg.clone();
        c.seed = cfg.seed.wrapping_add(i as u64);
        fit(data, x, &c)
    })
}

/// Stationarity summary of a log-density series.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSummary {
    pub logdens: Vec<f64>,
    pub running_mean: Vec<f64>,
    /// Index of the first iteration included in the split-half comparison.
    pub analysed_from: usize,
    /// Mean of the second half minus mean of the first half.
    pub split_half_diff: f64,
    /// Batch-means standard error of the second-half mean.
    pub second_half_se: f64,
    /// `|split_half_diff| > 2 * second_half_se`.
    pub flagged: bool,
}

const BATCHES: usize = 20;

pub fn convergence_summary(trace: &Trace) -> Result<ConvergenceSummary> {
    summarize_series(&trace.logdens, trace.meta.burnin)
}

/// Split-half diagnostic of `series` after discarding `burnin` points (the
/// whole series is used when it is not longer than the burn-in).
pub fn summarize_series(series: &[f64], burnin: usize) -> Result<ConvergenceSummary> {
    if series.is_empty() {
        return Err(Error::InvalidData("empty trace".into()));
    }
    let mut running_mean = Vec::with_capacity(series.len());
    let mut acc = 0.0;
    for (i, v) in series.iter().enumerate() {
        acc += v;
        running_mean.push(acc / (i + 1) as f64);
    }
    let analysed_from = if series.len() > burnin + 1 { burnin } else { 0 };
    let tail = &series[analysed_from..];
    let half = tail.len() / 2;
    let (first, second) = (&tail[..half], &tail[half..]);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let split_half_diff = if first.is_empty() { 0.0 } else { mean(second) - mean(first) };
    let second_half_se = batch_means_se(second);
    Ok(ConvergenceSummary {
        logdens: series.to_vec(),
        running_mean,
        analysed_from,
        split_half_diff,
        second_half_se,
        flagged: split_half_diff.abs() > 2.0 * second_half_se,
    })
}

fn batch_means_se(v: &[f64]) -> f64 {
    let batches = BATCHES.min(v.len() / 2);
    if batches < 2 {
        return 0.0;
    }
    let size = v.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| v[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy() -> (CountData, CovariateMatrix) {
        let data = CountData::from_counts(array![[4u32, 0, 2], [1, 5, 0], [0, 2, 6], [3, 3, 3]]).unwrap();
        let x = CovariateMatrix::new(array![[0.1], [0.8], [-0.5], [0.0]], vec!["a".into()]).unwrap().with_intercept();
        (data, x)
    }

    #[test]
    fn retained_draw_arithmetic() {
        let (data, x) = toy();
        let mut cfg = FitConfig::new(3, 2);
        cfg.mode = FitMode::Joint;
        cfg.iters = 10;
        cfg.burnin = 5;
        cfg.thin = 5;
        let t = run_joint(&data, &x, &cfg).unwrap();
        assert_eq!(t.n_retained(), 1);
        assert_eq!(t.logdens.len(), 10);
    }

    #[test]
    fn joint_is_deterministic() {
        let (data, x) = toy();
        let mut cfg = FitConfig::new(3, 2);
        cfg.iters = 30;
        cfg.burnin = 10;
        cfg.thin = 3;
        cfg.mode = FitMode::Joint;
        assert_eq!(run_joint(&data, &x, &cfg).unwrap(), run_joint(&data, &x, &cfg).unwrap());
    }

    #[test]
    fn two_stage_is_deterministic_and_valid() {
        let (data, x) = toy();
        let mut cfg = FitConfig::new(3, 2);
        cfg.iters = 30;
        cfg.burnin = 10;
        cfg.thin = 3;
        cfg.stage2_warmup = 5;
        let a = run_two_stage(&data, &x, &cfg).unwrap();
        let b = run_two_stage(&data, &x, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_retained(), 6);
        for (phi, &n) in a.phi_draws.iter().zip(&a.n_draws) {
            ModelParams { phi: phi.clone(), beta: Array2::zeros((2, 2)), n_disp: n }
                .validate(cfg.hp.n_upper)
                .unwrap();
        }
    }

    #[test]
    fn burnin_not_below_iters_is_rejected() {
        let (data, x) = toy();
        let mut cfg = FitConfig::new(3, 2);
        cfg.iters = 10;
        cfg.burnin = 10;
        assert!(matches!(fit(&data, &x, &cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn constant_series_has_zero_split_difference() {
        let s = summarize_series(&[3.0; 100], 10).unwrap();
        assert_eq!(s.split_half_diff, 0.0);
        assert!(!s.flagged);
    }

    #[test]
    fn increasing_series_is_flagged() {
        let v: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let s = summarize_series(&v, 0).unwrap();
        assert!(s.split_half_diff > 0.0);
        assert!(s.flagged);
        assert_eq!(s.running_mean[3], 1.5);
    }

    #[test]
    fn empty_series_is_an_error() {
        assert!(summarize_series(&[], 0).is_err());
    }

    #[test]
    fn chains_use_distinct_seeds() {
        let (data, x) = toy();
        let mut cfg = FitConfig::new(3, 2);
        cfg.iters = 12;
        cfg.burnin = 2;
        cfg.thin = 5;
        cfg.stage2_warmup = 2;
        let chains = run_chains(&data, &x, &cfg, 3, Exec::Parallel).unwrap();
        let seq = run_chains(&data, &x, &cfg, 3, Exec::Sequential).unwrap();
        assert_eq!(chains, seq);
        assert_eq!(chains[1].meta.seed, cfg.seed + 1);
        assert_ne!(chains[0].logdens, chains[1].logdens);
    }
}
