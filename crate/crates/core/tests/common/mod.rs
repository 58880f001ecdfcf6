//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use covlda::model::{CountData, Hyperparams, LatentState};
use covlda::ChainRng;
use ndarray::{Array2, Array3};
use statrs::function::gamma::ln_gamma;

/// Negative-binomial log pmf from the rising-factorial product, no log-gamma.
pub fn nb_log_pmf_product(n: u64, lambda: f64, size: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        acc += (size + i as f64).ln() - (i as f64 + 1.0).ln();
    }
    acc + size * (size / (size + lambda)).ln() + n as f64 * (lambda / (size + lambda)).ln()
}

/// Count tables of a token-level assignment.
pub fn tables(data: &CountData, k_n: usize, assignments: &[Vec<u32>]) -> Array3<u32> {
    let (l_n, s_n) = data.counts.dim();
    let mut t = Array3::zeros((l_n, s_n, k_n));
    for l in 0..l_n {
        for (&s, &k) in data.tokens(l).iter().zip(&assignments[l]) {
            t[[l, s as usize, k as usize]] += 1;
        }
    }
    t
}

/// Collapsed joint over the count tables `n_{l,s,k}` with Φ integrated out:
/// multinomial split of each abundance, NB abundances, Dirichlet-multinomial
/// per cluster. Additive constants that do not depend on the tables are dropped.
pub fn collapsed_count_joint(n_lsk: &Array3<u32>, lambda: &Array2<f64>, size: f64, gamma: &[f64]) -> f64 {
    let (l_n, s_n, k_n) = n_lsk.dim();
    let gamma_sum: f64 = gamma.iter().sum();
    let mut total = 0.0;
    for l in 0..l_n {
        for k in 0..k_n {
            let n_lk: u32 = (0..s_n).map(|s| n_lsk[[l, s, k]]).sum();
            total += nb_log_pmf_product(n_lk as u64, lambda[[l, k]], size);
            total += ln_gamma(n_lk as f64 + 1.0);
            for s in 0..s_n {
                total -= ln_gamma(n_lsk[[l, s, k]] as f64 + 1.0);
            }
        }
    }
    for k in 0..k_n {
        let mut n_k = 0.0;
        for (s, &g) in gamma.iter().enumerate() {
            let n_sk: u32 = (0..l_n).map(|l| n_lsk[[l, s, k]]).sum();
            total += ln_gamma(n_sk as f64 + g);
            n_k += n_sk as f64;
        }
        total -= ln_gamma(n_k + gamma_sum);
    }
    total
}

/// Token-level collapsed joint of the covariate-free model (Θ and Φ integrated out).
pub fn collapsed_lda_joint(n_lsk: &Array3<u32>, alpha: f64, gamma: &[f64]) -> f64 {
    let (l_n, s_n, k_n) = n_lsk.dim();
    let gamma_sum: f64 = gamma.iter().sum();
    let mut total = 0.0;
    for l in 0..l_n {
        let mut n_l = 0.0;
        for k in 0..k_n {
            let n_lk: u32 = (0..s_n).map(|s| n_lsk[[l, s, k]]).sum();
            total += ln_gamma(n_lk as f64 + alpha);
            n_l += n_lk as f64;
        }
        total -= ln_gamma(n_l + k_n as f64 * alpha);
    }
    for k in 0..k_n {
        let mut n_k = 0.0;
        for (s, &g) in gamma.iter().enumerate() {
            let n_sk: u32 = (0..l_n).map(|l| n_lsk[[l, s, k]]).sum();
            total += ln_gamma(n_sk as f64 + g);
            n_k += n_sk as f64;
        }
        total -= ln_gamma(n_k + gamma_sum);
    }
    total
}

/// Normalize log weights with a plain log-sum-exp.
pub fn normalize(logw: &[f64]) -> Vec<f64> {
    let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logw.iter().map(|w| (w - m).exp()).sum();
    logw.iter().map(|w| (w - m).exp() / z).collect()
}

/// A tiny random problem with one token singled out for resampling.
#[derive(Debug, Clone)]
pub struct TinyCase {
    pub data: CountData,
    pub k: usize,
    pub assignments: Vec<Vec<u32>>,
    /// Instance and position of the resampled token.
    pub l: usize,
    pub i: usize,
    pub s: usize,
    pub lambda: Array2<f64>,
    pub size: f64,
    pub gamma: Vec<f64>,
}

impl TinyCase {
    /// `L <= 2, S <= 3, K <= 3`, between 2 and 12 tokens.
    pub fn draw(seed: u64) -> Self {
        let mut rng = ChainRng::seed_from_u64(seed);
        let l_n = 1 + rng.index(2);
        let s_n = 1 + rng.index(3);
        let k = 1 + rng.index(3);
        let n_tokens = 2 + rng.index(11);
        let mut counts = Array2::<u32>::zeros((l_n, s_n));
        for _ in 0..n_tokens {
            counts[[rng.index(l_n), rng.index(s_n)]] += 1;
        }
        let data = CountData::from_counts(counts).expect("positive counts");
        let assignments: Vec<Vec<u32>> = (0..l_n)
            .map(|l| (0..data.instance_total(l)).map(|_| rng.index(k) as u32).collect())
            .collect();
        let candidates: Vec<(usize, usize)> =
            (0..l_n).flat_map(|l| (0..assignments[l].len()).map(move |i| (l, i))).collect();
        let (l, i) = candidates[rng.index(candidates.len())];
        let s = data.tokens(l)[i] as usize;
        let lambda = Array2::from_shape_fn((l_n, k), |_| (rng.uniform() * 6.0 - 3.0).exp() * 3.0);
        let size = (rng.uniform() * 7.0 - 2.5).exp();
        let gamma = (0..s_n).map(|_| 0.05 + 2.0 * rng.uniform()).collect();
        Self { data, k, assignments, l, i, s, lambda, size, gamma }
    }

    /// Latent state with the singled-out token removed.
    pub fn state_without_token(&self) -> LatentState {
        let mut counts = self.data.counts.clone();
        counts[[self.l, self.s]] -= 1;
        let data = CountData::from_counts(counts).expect("at least one token remains");
        let mut assignments = self.assignments.clone();
        assignments[self.l].remove(self.i);
        LatentState::from_assignments(&data, self.k, assignments).expect("valid state")
    }

    pub fn hyperparams(&self) -> Hyperparams {
        let mut hp = Hyperparams::new(self.data.n_categories(), self.k);
        hp.gamma = self.gamma.clone();
        hp
    }

    /// Brute-force conditional of the token: the collapsed joint with the
    /// token placed in each cluster, normalized.
    pub fn brute_force_z(&self) -> Vec<f64> {
        let logw: Vec<f64> = (0..self.k)
            .map(|k| {
                let mut a = self.assignments.clone();
                a[self.l][self.i] = k as u32;
                collapsed_count_joint(&tables(&self.data, self.k, &a), &self.lambda, self.size, &self.gamma)
            })
            .collect();
        normalize(&logw)
    }

    pub fn brute_force_vanilla(&self, alpha: f64) -> Vec<f64> {
        let logw: Vec<f64> = (0..self.k)
            .map(|k| {
                let mut a = self.assignments.clone();
                a[self.l][self.i] = k as u32;
                collapsed_lda_joint(&tables(&self.data, self.k, &a), alpha, &self.gamma)
            })
            .collect();
        normalize(&logw)
    }

    /// `p_{l,k} = N / (N + lambda_{l,k})` for the token's instance.
    pub fn p_row(&self) -> Vec<f64> {
        self.lambda.row(self.l).iter().map(|&lam| self.size / (self.size + lam)).collect()
    }
}

/// Largest absolute difference between two vectors.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Kolmogorov-Smirnov statistic of `sample` against `cdf`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of a KS statistic `d` on `n` points.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lam = (sn + 0.12 + 0.11 / sn) * d;
    if lam < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let j = j as f64;
        let term = 2.0 * (-1f64).powf(j - 1.0) * (-2.0 * j * j * lam * lam).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// `thin`-spaced draws from a chained slice sampler.
pub fn slice_chain(
    log_target: impl Fn(f64) -> f64,
    x0: f64,
    cfg: &covlda::samplers::SliceConfig,
    draws: usize,
    thin: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChainRng::seed_from_u64(seed);
    let mut x = x0;
    let mut out = Vec::with_capacity(draws);
    for _ in 0..draws {
        for _ in 0..thin {
            x = covlda::samplers::slice_sample(&log_target, x, cfg, &mut rng).expect("slice step");
        }
        out.push(x);
    }
    out
}

/// Total mass and mean of the NB pmf, summed until the tail is negligible.
pub fn nb_mass_and_mean(lambda: f64, size: f64) -> (f64, f64) {
    let mut mass = 0.0;
    let mut mean = 0.0;
    let mut n = 0u64;
    loop {
        let p = covlda::model::nb_log_pmf(n, lambda, size).expect("valid parameters").exp();
        mass += p;
        mean += n as f64 * p;
        n += 1;
        if n as f64 > lambda && p < 1e-20 && n > 10 {
            break;
        }
    }
    (mass, mean)
}
