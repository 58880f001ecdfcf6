use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::density::log_add_exp;
use crate::model::{CovariateMatrix, Hyperparams, LatentState};
use crate::rng::ChainRng;

/// Unnormalized log weights of the collapsed cluster conditional for one
/// token of category `s` in instance `l`.
///
/// `state` must already exclude the token. `log_q[k]` is `ln(1 - p_{l,k})`.
/// Weight k is
/// `(n_{l,.,k} + N)(n_{.,s,k} + g_s) / ((n_{l,s,k} + 1)(n_{.,.,k} + sum g)) * (1 - p_{l,k})`.
#[inline]
pub fn z_log_weights(
    state: &LatentState,
    l: usize,
    s: usize,
    log_q: &[f64],
    n_disp: f64,
    gamma_s: f64,
    gamma_sum: f64,
    out: &mut [f64],
) {
    for (k, w) in out.iter_mut().enumerate() {
        let n_lk = state.n_lk[[l, k]] as f64;
        let n_sk = state.n_sk[[s, k]] as f64;
        let n_lsk = state.n_lsk[[l, s, k]] as f64;
        let n_k = state.n_k[k] as f64;
        *w = (n_lk + n_disp).ln() + (n_sk + gamma_s).ln()
            - (n_lsk + 1.0).ln()
            - (n_k + gamma_sum).ln()
            + log_q[k];
    }
}

/// Normalized collapsed conditional of the cluster of one token.
///
/// `p_row[k] = N / (N + lambda_{l,k})`; `state` must already exclude the
/// token being resampled.
pub fn z_fcd_weights(
    state: &LatentState,
    l: usize,
    s: usize,
    p_row: &[f64],
    n_disp: f64,
    hp: &Hyperparams,
) -> Result<Vec<f64>> {
    let k_n = state.n_clusters();
    if p_row.len() != k_n || s >= hp.gamma.len() || l >= state.n_instances() {
        return Err(Error::DimensionMismatch("z_fcd_weights arguments disagree".into()));
    }
    let log_q: Vec<f64> = p_row.iter().map(|&p| (-p).ln_1p()).collect();
    let mut w = vec![0.0; k_n];
    z_log_weights(state, l, s, &log_q, n_disp, hp.gamma[s], hp.gamma_sum(), &mut w);
    normalize_log_weights(&mut w)?;
    Ok(w)
}

/// Turn log weights into probabilities in place (max-subtracted).
pub(crate) fn normalize_log_weights(w: &mut [f64]) -> Result<()> {
    let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NonFinite("all cluster weights vanished".into()));
    }
    let mut total = 0.0;
    for v in w.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::NonFinite("cluster weights do not normalize".into()));
    }
    w.iter_mut().for_each(|v| *v /= total);
    Ok(())
}

/// Draw an index from unnormalized log weights. Overwrites `w`.
pub fn categorical_from_log(w: &mut [f64], rng: &mut ChainRng) -> Result<usize> {
    let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NonFinite("all cluster weights vanished".into()));
    }
    let mut total = 0.0;
    for v in w.iter_mut() {
        total += (*v - max).exp();
        *v = total;
    }
    let u = rng.uniform() * total;
    Ok(w.iter().position(|&c| u < c).unwrap_or(w.len() - 1))
}

/// `ln(1 - p_{l,k})` for every instance and cluster.
pub(crate) fn log_q_matrix(x: &CovariateMatrix, beta: &Array2<f64>, n_disp: f64) -> Array2<f64> {
    let ln_n = n_disp.ln();
    x.design.dot(&beta.t()).mapv(|eta| eta - log_add_exp(ln_n, eta))
}

/// Resample the cluster of every token once, instance by instance.
pub fn sample_z_sweep(
    state: &mut LatentState,
    beta: &Array2<f64>,
    n_disp: f64,
    x: &CovariateMatrix,
    hp: &Hyperparams,
    random_scan: bool,
    rng: &mut ChainRng,
) -> Result<()> {
    let k_n = state.n_clusters();
    if beta.dim() != (k_n, x.n_cols()) || x.n_rows() != state.n_instances() {
        return Err(Error::DimensionMismatch("sample_z_sweep arguments disagree".into()));
    }
    if k_n == 1 {
        return Ok(());
    }
    let log_q = log_q_matrix(x, beta, n_disp);
    let gamma_sum = hp.gamma_sum();
    let mut w = vec![0.0; k_n];
    let mut order: Vec<usize> = Vec::new();
    for l in 0..state.n_instances() {
        let n_tokens = state.tokens[l].len();
        if n_tokens == 0 {
            continue;
        }
        let q_row = log_q.row(l);
        let q_row = q_row.as_slice().expect("row-major");
        order.clear();
        order.extend(0..n_tokens);
        if random_scan {
            rng.shuffle(&mut order);
        }
        for &i in &order {
            let s = state.tokens[l][i] as usize;
            let from = state.assignments[l][i] as usize;
            state.remove(l, s, from)?;
            z_log_weights(state, l, s, q_row, n_disp, hp.gamma[s], gamma_sum, &mut w);
            let to = categorical_from_log(&mut w, rng)?;
            state.add(l, s, to);
            state.assignments[l][i] = to as u32;
        }
    }
    debug_assert!(state.caches_coherent());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CountData;
    use ndarray::array;

    #[test]
    fn single_cluster_is_certain() {
        let data = CountData::from_counts(array![[2u32, 1]]).unwrap();
        let mut st = LatentState::from_assignments(&data, 1, vec![vec![0, 0, 0]]).unwrap();
        st.remove(0, 0, 0).unwrap();
        let w = z_fcd_weights(&st, 0, 0, &[0.3], 2.0, &Hyperparams::new(2, 1)).unwrap();
        assert_eq!(w, vec![1.0]);
    }

    #[test]
    fn symmetric_state_gives_uniform_weights() {
        let data = CountData::from_counts(array![[2u32, 2, 1]]).unwrap();
        // Clusters 0 and 1 hold mirror-image tokens; the extra token is removed.
        let mut st = LatentState::from_assignments(&data, 2, vec![vec![0, 1, 0, 1, 0]]).unwrap();
        st.remove(0, 2, 0).unwrap();
        let w = z_fcd_weights(&st, 0, 2, &[0.4, 0.4], 3.0, &Hyperparams::new(3, 2)).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn weights_are_a_distribution() {
        let data = CountData::from_counts(array![[5u32, 1, 3], [0, 4, 2]]).unwrap();
        let mut rng = ChainRng::seed_from_u64(1);
        let mut st = LatentState::random(&data, 3, &mut rng).unwrap();
        st.remove(1, 1, st.assignments[1][0] as usize).unwrap();
        let w = z_fcd_weights(&st, 1, 1, &[0.2, 0.9, 0.5], 1.5, &Hyperparams::new(3, 3)).unwrap();
        assert!(w.iter().all(|&v| v >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_skips_empty_instances_and_conserves_counts() {
        let data = CountData::from_counts(array![[3u32, 0, 2], [0, 0, 0], [1, 6, 1]]).unwrap();
        let x = CovariateMatrix::new(array![[1.0, 0.2], [1.0, 0.0], [1.0, -1.0]], vec!["i".into(), "a".into()])
            .unwrap();
        let hp = Hyperparams::new(3, 3);
        let mut rng = ChainRng::seed_from_u64(5);
        let mut st = LatentState::random(&data, 3, &mut rng).unwrap();
        let beta = array![[0.5, 0.1], [1.0, -0.3], [0.0, 0.0]];
        for scan in [false, true] {
            for _ in 0..20 {
                sample_z_sweep(&mut st, &beta, 4.0, &x, &hp, scan, &mut rng).unwrap();
                assert!(st.caches_coherent());
                st.check_conservation(&data).unwrap();
            }
        }
    }

    #[test]
    fn sweep_with_one_cluster_is_identity() {
        let data = CountData::from_counts(array![[3u32, 1]]).unwrap();
        let x = CovariateMatrix::intercept_only(1);
        let mut rng = ChainRng::seed_from_u64(5);
        let mut st = LatentState::random(&data, 1, &mut rng).unwrap();
        let before = st.clone();
        sample_z_sweep(&mut st, &array![[0.0]], 4.0, &x, &Hyperparams::new(2, 1), false, &mut rng).unwrap();
        assert_eq!(st, before);
    }

    #[test]
    fn categorical_matches_probabilities() {
        let mut rng = ChainRng::seed_from_u64(6);
        let probs = [0.2, 0.5, 0.3];
        let mut hits = [0usize; 3];
        let n = 60000;
        for _ in 0..n {
            let mut w: Vec<f64> = probs.iter().map(|p: &f64| p.ln() + 100.0).collect();
            hits[categorical_from_log(&mut w, &mut rng).unwrap()] += 1;
        }
        for i in 0..3 {
            let f = hits[i] as f64 / n as f64;
            assert!((f - probs[i]).abs() < 0.01, "{f}");
        }
    }
}
