use ndarray::ArrayView1;
use rand_distr::{Distribution, Gamma};

use crate::rng::ChainRng;

/// Draw `phi_k ~ Dirichlet(n_{.,s,k} + gamma_s)`.
///
/// Gamma variates are produced on the log scale (shape < 1 uses
/// `G(a) = G(a + 1) U^{1/a}`) so that tiny concentrations never underflow
/// to an all-zero row.
pub fn sample_phi_row(n_sk_col: ArrayView1<'_, u32>, gamma: &[f64], rng: &mut ChainRng) -> Vec<f64> {
    debug_assert_eq!(n_sk_col.len(), gamma.len());
    let log_g: Vec<f64> = n_sk_col
        .iter()
        .zip(gamma)
        .map(|(&n, &g)| log_gamma_variate(n as f64 + g, rng))
        .collect();
    let max = log_g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = log_g.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

fn log_gamma_variate(shape: f64, rng: &mut ChainRng) -> f64 {
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        g.ln()
    } else {
        let g = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        g.ln() + rng.uniform_open().ln() / shape
    }
}
