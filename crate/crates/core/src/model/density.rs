use ndarray::ArrayView1;
use statrs::function::gamma::ln_gamma;

use super::{CountData, CovariateMatrix, Hyperparams, LatentState, ModelParams};
use crate::error::{Error, Result};

/// Mean abundance `exp(x · beta_k)`.
pub fn compute_lambda(x: ArrayView1<'_, f64>, beta_k: ArrayView1<'_, f64>) -> Result<f64> {
    if x.len() != beta_k.len() {
        return Err(Error::DimensionMismatch(format!(
            "covariate row has {} entries, coefficient vector {}",
            x.len(),
            beta_k.len()
        )));
    }
    let lambda = x.dot(&beta_k).exp();
    if lambda.is_finite() && lambda > 0.0 {
        Ok(lambda)
    } else {
        Err(Error::NonFinite(format!("lambda = exp({})", x.dot(&beta_k))))
    }
}

/// `ln(e^a + e^b)` without overflow.
#[inline]
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Negative-binomial log pmf with mean `lambda` and size `n_disp`
/// (success probability `p = N / (N + lambda)`).
pub fn nb_log_pmf(n: u64, lambda: f64, n_disp: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite() && n_disp > 0.0 && n_disp.is_finite()) {
        return Err(Error::NonFinite(format!("nb_log_pmf(lambda={lambda}, N={n_disp})")));
    }
    let v = nb_log_pmf_eta(n as f64, lambda.ln(), n_disp, n_disp.ln());
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("nb_log_pmf(n={n}, lambda={lambda}, N={n_disp})")))
    }
}

/// Log pmf from the linear predictor `eta = ln(lambda)`.
#[inline]
pub(crate) fn nb_log_pmf_eta(n: f64, eta: f64, n_disp: f64, ln_n_disp: f64) -> f64 {
    ln_gamma(n + n_disp) - ln_gamma(n_disp) - ln_gamma(n + 1.0)
        + nb_kernel_eta(n, eta, n_disp, ln_n_disp)
}

/// `N ln p + n ln(1 - p)`, the part of the log pmf that depends on `eta`.
#[inline]
pub(crate) fn nb_kernel_eta(n: f64, eta: f64, n_disp: f64, ln_n_disp: f64) -> f64 {
    let ln_total = log_add_exp(ln_n_disp, eta);
    n_disp * (ln_n_disp - ln_total) + if n > 0.0 { n * (eta - ln_total) } else { 0.0 }
}

/// Θ row derived from cluster abundances.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    pub values: Vec<f64>,
    /// Set when the instance has no tokens; `values` is then uniform.
    pub degenerate: bool,
}

pub fn theta_from_counts(n_lk_row: &[u32]) -> Theta {
    let k = n_lk_row.len();
    let total: u64 = n_lk_row.iter().map(|&c| c as u64).sum();
    if total == 0 {
        return Theta { values: vec![1.0 / k as f64; k], degenerate: true };
    }
    Theta {
        values: n_lk_row.iter().map(|&c| c as f64 / total as f64).collect(),
        degenerate: false,
    }
}

/// The five additive pieces of the joint log density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityTerms {
    pub multinomial: f64,
    pub negbin: f64,
    pub dirichlet: f64,
    pub normal: f64,
    pub uniform: f64,
}

impl DensityTerms {
    pub fn total(&self) -> f64 {
        self.multinomial + self.negbin + self.dirichlet + self.normal + self.uniform
    }
}

/// Unnormalized log joint of latent counts, Φ, B and N given the data.
pub fn joint_log_density(
    state: &LatentState,
    params: &ModelParams,
    data: &CountData,
    x: &CovariateMatrix,
    hp: &Hyperparams,
) -> Result<f64> {
    let terms = joint_log_density_terms(state, params, data, x, hp)?;
    let total = terms.total();
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::NonFinite("joint log density".into()))
    }
}

pub fn joint_log_density_terms(
    state: &LatentState,
    params: &ModelParams,
    data: &CountData,
    x: &CovariateMatrix,
    hp: &Hyperparams,
) -> Result<DensityTerms> {
    let (l_n, s_n) = data.counts.dim();
    let k_n = state.n_clusters();
    let d = x.n_cols();
    if state.n_instances() != l_n || state.n_categories() != s_n {
        return Err(Error::DimensionMismatch("latent state does not match data".into()));
    }
    if params.phi.dim() != (k_n, s_n) || params.beta.dim() != (k_n, d) || hp.gamma.len() != s_n {
        return Err(Error::DimensionMismatch("parameters do not match latent state".into()));
    }
    x.check_aligned(data)?;
    for l in 0..l_n {
        for s in 0..s_n {
            let sum: u64 = (0..k_n).map(|k| state.n_lsk[[l, s, k]] as u64).sum();
            if sum != data.counts[[l, s]] as u64 {
                return Err(Error::ConstraintViolation(format!(
                    "instance {l}, category {s}: clusters hold {sum}, data has {}",
                    data.counts[[l, s]]
                )));
            }
        }
    }

    let mut multinomial = 0.0;
    let mut negbin = 0.0;
    let ln_n = params.n_disp.ln();
    for l in 0..l_n {
        let xl = x.row(l);
        for k in 0..k_n {
            let n_lk = state.n_lk[[l, k]] as f64;
            multinomial += ln_gamma(n_lk + 1.0);
            for s in 0..s_n {
                let c = state.n_lsk[[l, s, k]];
                if c > 0 {
                    let c = c as f64;
                    multinomial += c * params.phi[[k, s]].ln() - ln_gamma(c + 1.0);
                }
            }
            let eta = xl.dot(&params.beta.row(k));
            negbin += nb_log_pmf_eta(n_lk, eta, params.n_disp, ln_n);
        }
    }

    let gamma_sum = hp.gamma_sum();
    let dir_norm = ln_gamma(gamma_sum) - hp.gamma.iter().map(|&g| ln_gamma(g)).sum::<f64>();
    let mut dirichlet = 0.0;
    for k in 0..k_n {
        dirichlet += dir_norm;
        for (s, &g) in hp.gamma.iter().enumerate() {
            if g != 1.0 {
                dirichlet += (g - 1.0) * params.phi[[k, s]].ln();
            }
        }
    }

    let half_log_2pi_var = 0.5 * (2.0 * std::f64::consts::PI * hp.prior_var).ln();
    let normal: f64 = params
        .beta
        .iter()
        .map(|b| -half_log_2pi_var - b * b / (2.0 * hp.prior_var))
        .sum();

    if !(params.n_disp > 0.0 && params.n_disp <= hp.n_upper) {
        return Err(Error::InvalidData(format!(
            "overdispersion {} outside (0, {}]",
            params.n_disp, hp.n_upper
        )));
    }
    let uniform = -hp.n_upper.ln();

    let terms = DensityTerms { multinomial, negbin, dirichlet, normal, uniform };
    for (name, v) in [
        ("multinomial", multinomial),
        ("negative binomial", negbin),
        ("dirichlet", dirichlet),
        ("normal", normal),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("{name} term of the joint density")));
        }
    }
    Ok(terms)
}
