//! Covariate-free collapsed Gibbs LDA.
//!
//! Used for the first stage of two-stage fitting (Φ and the latent
//! abundances) and, with an oversized `k_max`, to guide the choice of K
//! through [`occupancy_report`].

use ndarray::Array2;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{CountData, LatentState};
use crate::rng::ChainRng;
use crate::samplers::{categorical_from_log, sample_phi_row};

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_OCCUPANCY_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct VanillaConfig {
    pub k_max: usize,
    /// Symmetric Dirichlet concentration on Θ rows.
    pub alpha: f64,
    pub gamma: Vec<f64>,
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub random_scan: bool,
    /// Follow each sweep with the instance-level relabel moves.
    pub relabel_moves: bool,
}

impl VanillaConfig {
    pub fn new(k_max: usize, s: usize) -> Self {
        Self {
            k_max,
            alpha: DEFAULT_ALPHA,
            gamma: vec![crate::model::DEFAULT_GAMMA; s],
            iters: 1000,
            burnin: 500,
            thin: 5,
            seed: 1,
            random_scan: false,
            relabel_moves: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(Error::InvalidConfig("k_max must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig("alpha must be positive".into()));
        }
        if self.gamma.is_empty() || self.gamma.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidConfig("gamma entries must be positive".into()));
        }
        validate_schedule(self.iters, self.burnin, self.thin)
    }
}

pub(crate) fn validate_schedule(iters: usize, burnin: usize, thin: usize) -> Result<()> {
    if iters == 0 || thin == 0 {
        return Err(Error::InvalidConfig("iters and thin must be positive".into()));
    }
    if burnin >= iters {
        return Err(Error::InvalidConfig(format!("burn-in {burnin} must be below iters {iters}")));
    }
    Ok(())
}

/// Iteration `t` (1-based) is kept when it is past burn-in and on the stride.
pub(crate) fn is_retained(t: usize, burnin: usize, thin: usize) -> bool {
    t > burnin && (t - burnin).is_multiple_of(thin)
}

/// Log weights of the standard collapsed LDA conditional; `state` must
/// exclude the token.
#[inline]
pub fn vanilla_log_weights(state: &LatentState, l: usize, s: usize, alpha: f64, gamma_s: f64, gamma_sum: f64, out: &mut [f64]) {
    for (k, w) in out.iter_mut().enumerate() {
        *w = (state.n_lk[[l, k]] as f64 + alpha).ln() + (state.n_sk[[s, k]] as f64 + gamma_s).ln()
            - (state.n_k[k] as f64 + gamma_sum).ln();
    }
}

/// Normalized collapsed LDA conditional for one token.
pub fn vanilla_z_weights(state: &LatentState, l: usize, s: usize, alpha: f64, gamma: &[f64]) -> Result<Vec<f64>> {
    if s >= gamma.len() || l >= state.n_instances() {
        return Err(Error::DimensionMismatch("vanilla_z_weights arguments disagree".into()));
    }
    let mut w = vec![0.0; state.n_clusters()];
    vanilla_log_weights(state, l, s, alpha, gamma[s], gamma.iter().sum(), &mut w);
    crate::samplers::z::normalize_log_weights(&mut w)?;
    Ok(w)
}

/// One collapsed Gibbs sweep of the covariate-free model.
pub fn vanilla_sweep(state: &mut LatentState, alpha: f64, gamma: &[f64], random_scan: bool, rng: &mut ChainRng) -> Result<()> {
    let k_n = state.n_clusters();
    if k_n == 1 {
        return Ok(());
    }
    let gamma_sum: f64 = gamma.iter().sum();
    let mut w = vec![0.0; k_n];
    let mut order = Vec::new();
    for l in 0..state.n_instances() {
        let n_tokens = state.tokens[l].len();
        order.clear();
        order.extend(0..n_tokens);
        if random_scan {
            rng.shuffle(&mut order);
        }
        for &i in &order {
            let s = state.tokens[l][i] as usize;
            let from = state.assignments[l][i] as usize;
            state.remove(l, s, from)?;
            vanilla_log_weights(state, l, s, alpha, gamma[s], gamma_sum, &mut w);
            let to = categorical_from_log(&mut w, rng)?;
            state.add(l, s, to);
            state.assignments[l][i] = to as u32;
        }
    }
    Ok(())
}

/// Change in the collapsed log joint when every token of instance `l` in
/// cluster `a` moves to cluster `b`.
pub fn relabel_log_ratio(state: &LatentState, l: usize, a: usize, b: usize, alpha: f64, gamma: &[f64]) -> f64 {
    let gamma_sum: f64 = gamma.iter().sum();
    let m = state.n_lk[[l, a]] as f64;
    let (n_la, n_lb) = (m, state.n_lk[[l, b]] as f64);
    let mut delta = ln_gamma(alpha) + ln_gamma(n_la + n_lb + alpha) - ln_gamma(n_la + alpha) - ln_gamma(n_lb + alpha);
    for (s, &g) in gamma.iter().enumerate() {
        let c = state.n_lsk[[l, s, a]] as f64;
        if c > 0.0 {
            let (sa, sb) = (state.n_sk[[s, a]] as f64, state.n_sk[[s, b]] as f64);
            delta += ln_gamma(sa - c + g) - ln_gamma(sa + g) + ln_gamma(sb + c + g) - ln_gamma(sb + g);
        }
    }
    let (ka, kb) = (state.n_k[a] as f64, state.n_k[b] as f64);
    delta + ln_gamma(ka + gamma_sum) - ln_gamma(ka - m + gamma_sum) + ln_gamma(kb + gamma_sum) - ln_gamma(kb + m + gamma_sum)
}

/// Move every token of instance `l` in cluster `a` to `b`.
fn relabel_block(state: &mut LatentState, l: usize, a: usize, b: usize) -> Result<()> {
    for i in 0..state.tokens[l].len() {
        if state.assignments[l][i] as usize == a {
            state.move_token(l, i, b)?;
        }
    }
    Ok(())
}

/// Instance-level relabel moves, one round per instance. Single-token Gibbs
/// cannot merge clusters that duplicate one composition across different
/// instances; these moves can.
///
/// First the tokens of a random occupied cluster `a` are relabelled by a
/// Gibbs draw over `a` and the clusters the instance leaves empty, which
/// keeps the instance's partition of tokens fixed. Then a Metropolis-Hastings
/// proposal moves a random occupied block onto any other cluster, which can
/// merge blocks. Returns the number of label changes.
pub fn relabel_moves(state: &mut LatentState, alpha: f64, gamma: &[f64], rng: &mut ChainRng) -> Result<usize> {
    let k_n = state.n_clusters();
    if k_n < 2 {
        return Ok(0);
    }
    let mut changed = 0;
    let mut occupied = Vec::with_capacity(k_n);
    let mut targets = Vec::with_capacity(k_n);
    let mut logw = Vec::with_capacity(k_n);
    for l in 0..state.n_instances() {
        occupied.clear();
        occupied.extend((0..k_n).filter(|&k| state.n_lk[[l, k]] > 0));
        if occupied.is_empty() {
            continue;
        }

        let a = occupied[rng.index(occupied.len())];
        targets.clear();
        targets.extend((0..k_n).filter(|&k| k == a || state.n_lk[[l, k]] == 0));
        if targets.len() > 1 {
            logw.clear();
            logw.extend(targets.iter().map(|&k| if k == a { 0.0 } else { relabel_log_ratio(state, l, a, k, alpha, gamma) }));
            let b = targets[categorical_from_log(&mut logw, rng)?];
            if b != a {
                relabel_block(state, l, a, b)?;
                changed += 1;
            }
        }

        occupied.clear();
        occupied.extend((0..k_n).filter(|&k| state.n_lk[[l, k]] > 0));
        let a = occupied[rng.index(occupied.len())];
        let b = (a + 1 + rng.index(k_n - 1)) % k_n;
        let after = occupied.len() - usize::from(state.n_lk[[l, b]] > 0);
        let log_accept = relabel_log_ratio(state, l, a, b, alpha, gamma) + (occupied.len() as f64 / after as f64).ln();
        if rng.uniform_open().ln() < log_accept {
            relabel_block(state, l, a, b)?;
            changed += 1;
        }
    }
    Ok(changed)
}

/// Initial state built one token at a time, each drawn from the collapsed
/// conditional given the tokens already placed. Occupied clusters attract
/// later tokens, so blocks are not scattered over duplicate clusters the
/// way a uniform start leaves them.
pub fn sequential_init(data: &CountData, k: usize, alpha: f64, gamma: &[f64], rng: &mut ChainRng) -> Result<LatentState> {
    let zeros = (0..data.n_instances()).map(|l| vec![0; data.instance_total(l) as usize]).collect();
    let mut state = LatentState::from_assignments(data, k, zeros)?;
    state.n_lsk.fill(0);
    state.n_lk.fill(0);
    state.n_sk.fill(0);
    state.n_k.fill(0);
    let gamma_sum: f64 = gamma.iter().sum();
    let mut w = vec![0.0; k];
    for l in 0..state.n_instances() {
        for i in 0..state.tokens[l].len() {
            let s = state.tokens[l][i] as usize;
            vanilla_log_weights(&state, l, s, alpha, gamma[s], gamma_sum, &mut w);
            let to = categorical_from_log(&mut w, rng)?;
            state.add(l, s, to);
            state.assignments[l][i] = to as u32;
        }
    }
    debug_assert!(state.caches_coherent());
    Ok(state)
}

/// Collapsed log joint of the covariate-free model (Θ and Φ integrated out).
pub fn vanilla_log_joint(state: &LatentState, alpha: f64, gamma: &[f64]) -> f64 {
    let (l_n, s_n, k_n) = state.n_lsk.dim();
    let gamma_sum: f64 = gamma.iter().sum();
    let lg_gamma: Vec<f64> = gamma.iter().map(|&g| ln_gamma(g)).collect();
    let mut total = 0.0;
    for k in 0..k_n {
        total += ln_gamma(gamma_sum) - ln_gamma(state.n_k[k] as f64 + gamma_sum);
        for s in 0..s_n {
            let c = state.n_sk[[s, k]];
            if c > 0 {
                total += ln_gamma(c as f64 + gamma[s]) - lg_gamma[s];
            }
        }
    }
    let alpha_sum = alpha * k_n as f64;
    let lg_alpha = ln_gamma(alpha);
    for l in 0..l_n {
        let n_l: u64 = state.n_lk.row(l).iter().map(|&c| c as u64).sum();
        total += ln_gamma(alpha_sum) - ln_gamma(n_l as f64 + alpha_sum);
        for k in 0..k_n {
            let c = state.n_lk[[l, k]];
            if c > 0 {
                total += ln_gamma(c as f64 + alpha) - lg_alpha;
            }
        }
    }
    total
}

/// Cluster occupancy, largest first.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyReport {
    /// Fractions sorted in descending order.
    pub fractions: Vec<f64>,
    /// Cluster id of each entry in `fractions`.
    pub clusters: Vec<usize>,
    pub threshold: f64,
    /// Number of clusters whose occupancy exceeds `threshold`.
    pub suggested_k: usize,
}

impl OccupancyReport {
    /// Smallest number of leading clusters that jointly hold at least `mass`.
    pub fn dominant_count(&self, mass: f64) -> usize {
        let mut acc = 0.0;
        for (i, f) in self.fractions.iter().enumerate() {
            acc += f;
            if acc >= mass {
                return i + 1;
            }
        }
        self.fractions.len()
    }
}

pub fn occupancy_from_totals(n_k: &[f64], threshold: f64) -> OccupancyReport {
    let total: f64 = n_k.iter().sum();
    let raw: Vec<f64> = n_k.iter().map(|&c| if total > 0.0 { c / total } else { 0.0 }).collect();
    let mut clusters: Vec<usize> = (0..raw.len()).collect();
    clusters.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]).then(a.cmp(&b)));
    let fractions: Vec<f64> = clusters.iter().map(|&k| raw[k]).collect();
    let suggested_k = fractions.iter().filter(|&&f| f > threshold).count();
    OccupancyReport { fractions, clusters, threshold, suggested_k }
}

pub fn occupancy_report(state: &LatentState, threshold: f64) -> OccupancyReport {
    let n_k: Vec<f64> = state.n_k.iter().map(|&c| c as f64).collect();
    occupancy_from_totals(&n_k, threshold)
}

/// Output of [`run_vanilla`].
#[derive(Debug, Clone, PartialEq)]
pub struct VanillaRun {
    pub phi_draws: Vec<Array2<f64>>,
    /// `n_{l,.,k}` at every retained iteration.
    pub abundance_snapshots: Vec<Array2<u32>>,
    pub state: LatentState,
    pub occupancy: OccupancyReport,
    /// Collapsed log joint at every iteration.
    pub logdens: Vec<f64>,
}

/// Draw a Φ matrix from its full conditional given the current counts.
pub(crate) fn draw_phi(state: &LatentState, gamma: &[f64], rng: &mut ChainRng) -> Array2<f64> {
    let (s_n, k_n) = state.n_sk.dim();
    let mut phi = Array2::zeros((k_n, s_n));
    for k in 0..k_n {
        let row = sample_phi_row(state.n_sk.column(k), gamma, rng);
        phi.row_mut(k).assign(&ndarray::Array1::from(row));
    }
    phi
}

pub fn run_vanilla(data: &CountData, cfg: &VanillaConfig, rng: &mut ChainRng) -> Result<VanillaRun> {
    run_vanilla_with(data, cfg, rng, &mut |_, _| {})
}

/// [`run_vanilla`] with a per-iteration `(iteration, log density)` hook.
pub fn run_vanilla_with(
    data: &CountData,
    cfg: &VanillaConfig,
    rng: &mut ChainRng,
    progress: &mut dyn FnMut(usize, f64),
) -> Result<VanillaRun> {
    cfg.validate()?;
    if cfg.gamma.len() != data.n_categories() {
        return Err(Error::DimensionMismatch(format!(
            "{} gamma entries for {} categories",
            cfg.gamma.len(),
            data.n_categories()
        )));
    }
    let mut state = sequential_init(data, cfg.k_max, cfg.alpha, &cfg.gamma, rng)?;
    let mut phi_draws = Vec::new();
    let mut abundance_snapshots = Vec::new();
    let mut logdens = Vec::with_capacity(cfg.iters);
    let mut occupancy_acc = vec![0.0; cfg.k_max];
    for t in 1..=cfg.iters {
        vanilla_sweep(&mut state, cfg.alpha, &cfg.gamma, cfg.random_scan, rng)?;
        if cfg.relabel_moves {
            relabel_moves(&mut state, cfg.alpha, &cfg.gamma, rng)?;
        }
        let ld = vanilla_log_joint(&state, cfg.alpha, &cfg.gamma);
        logdens.push(ld);
        progress(t, ld);
        if is_retained(t, cfg.burnin, cfg.thin) {
            state.check_conservation(data)?;
            phi_draws.push(draw_phi(&state, &cfg.gamma, rng));
            abundance_snapshots.push(state.n_lk.clone());
            for (acc, &c) in occupancy_acc.iter_mut().zip(&state.n_k) {
                *acc += c as f64;
            }
        }
    }
    let occupancy = occupancy_from_totals(&occupancy_acc, DEFAULT_OCCUPANCY_THRESHOLD);
    Ok(VanillaRun { phi_draws, abundance_snapshots, state, occupancy, logdens })
}
