//! Slice-sampled updates of the regression coefficients and the
//! overdispersion, both conditioned on the latent cluster abundances
//! `n_{l,.,k}`.

use std::cell::Cell;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use statrs::function::gamma::ln_gamma;

use super::slice::{slice_sample, SliceConfig};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{compute_lambda, nb_log_pmf, CovariateMatrix};
use crate::rng::ChainRng;

use crate::model::density::{log_add_exp, nb_kernel_eta};

/// Linear predictors are clamped to this value inside slice targets.
pub const LINEAR_PREDICTOR_CAP: f64 = 700.0;

/// Log of the unnormalized full conditional of `beta_k` as a function of
/// coordinate `coord`, with the other coordinates held at `beta_k`.
pub fn beta_log_fcd(
    beta_k: ArrayView1<'_, f64>,
    coord: usize,
    value: f64,
    n_lk_col: ArrayView1<'_, u32>,
    x: &CovariateMatrix,
    n_disp: f64,
    prior_var: f64,
) -> Result<f64> {
    if coord >= beta_k.len() || beta_k.len() != x.n_cols() || n_lk_col.len() != x.n_rows() {
        return Err(Error::DimensionMismatch("beta_log_fcd arguments disagree".into()));
    }
    let mut b = beta_k.to_owned();
    b[coord] = value;
    let mut total = -value * value / (2.0 * prior_var);
    for (l, &n) in n_lk_col.iter().enumerate() {
        let lambda = compute_lambda(x.row(l), b.view())?;
        total += nb_log_pmf(n as u64, lambda, n_disp)?;
    }
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::NonFinite("beta full conditional".into()))
    }
}

/// Fixed inputs shared by the regression updates.
#[derive(Debug, Clone, Copy)]
pub struct RegressionContext<'a> {
    pub x: &'a CovariateMatrix,
    pub prior_var: f64,
    pub n_upper: f64,
    pub slice: &'a SliceConfig,
    pub random_scan: bool,
    pub exec: Exec,
}

/// One coordinate-wise slice pass over every row of `beta`.
///
/// Rows are conditionally independent given the abundances, so they are
/// updated on separate random streams (and in parallel under
/// [`Exec::Parallel`]). Returns the new matrix and the number of clamped
/// linear-predictor evaluations.
pub fn sample_beta(
    ctx: &RegressionContext<'_>,
    n_lk: ArrayView2<'_, u32>,
    beta: &Array2<f64>,
    n_disp: f64,
    rng: &mut ChainRng,
) -> Result<(Array2<f64>, u64)> {
    let (k_n, d) = beta.dim();
    if n_lk.dim() != (ctx.x.n_rows(), k_n) || d != ctx.x.n_cols() {
        return Err(Error::DimensionMismatch("sample_beta arguments disagree".into()));
    }
    let streams = rng.branches(k_n);
    let rows = ctx.exec.try_map(k_n, |k| {
        let mut rng = streams[k].clone();
        update_beta_row(ctx, n_lk.column(k), beta.row(k), n_disp, &mut rng)
    })?;
    let mut out = Array2::zeros((k_n, d));
    let mut clamps = 0;
    for (k, (row, c)) in rows.into_iter().enumerate() {
        out.row_mut(k).assign(&row);
        clamps += c;
    }
    Ok((out, clamps))
}

fn update_beta_row(
    ctx: &RegressionContext<'_>,
    counts: ArrayView1<'_, u32>,
    beta_k: ArrayView1<'_, f64>,
    n_disp: f64,
    rng: &mut ChainRng,
) -> Result<(Array1<f64>, u64)> {
    let x = &ctx.x.design;
    let mut b = beta_k.to_owned();
    let mut eta: Array1<f64> = x.dot(&b);
    let ln_n = n_disp.ln();
    let counts: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let clamps = Cell::new(0u64);
    let mut order: Vec<usize> = (0..b.len()).collect();
    if ctx.random_scan {
        rng.shuffle(&mut order);
    }
    for &j in &order {
        let col = x.column(j);
        let base: Vec<f64> = eta.iter().zip(col.iter()).map(|(e, xj)| e - xj * b[j]).collect();
        let target = |v: f64| {
            let mut total = -v * v / (2.0 * ctx.prior_var);
            for ((&n, &e0), &xj) in counts.iter().zip(&base).zip(col.iter()) {
                let mut e = e0 + xj * v;
                if e > LINEAR_PREDICTOR_CAP {
                    e = LINEAR_PREDICTOR_CAP;
                    clamps.set(clamps.get() + 1);
                }
                total += nb_kernel_eta(n, e, n_disp, ln_n);
            }
            total
        };
        let new = slice_sample(target, b[j], ctx.slice, rng)?;
        for ((e, &e0), &xj) in eta.iter_mut().zip(&base).zip(col.iter()) {
            *e = e0 + xj * new;
        }
        b[j] = new;
    }
    Ok((b, clamps.get()))
}

/// One slice update of the overdispersion on `(0, n_upper]`.
///
/// The slice runs on `ln N` (target includes the `+ ln N` Jacobian), which
/// lets a fixed bracket width cover the whole prior range.
pub fn sample_overdispersion(
    ctx: &RegressionContext<'_>,
    n_lk: ArrayView2<'_, u32>,
    beta: &Array2<f64>,
    n_disp: f64,
    rng: &mut ChainRng,
) -> Result<(f64, u64)> {
    let k_n = beta.nrows();
    if n_lk.dim() != (ctx.x.n_rows(), k_n) || beta.ncols() != ctx.x.n_cols() {
        return Err(Error::DimensionMismatch("sample_overdispersion arguments disagree".into()));
    }
    let mut clamps = 0u64;
    // Per-row linear predictors, clamped once up front.
    let eta: Array2<f64> = ctx.x.design.dot(&beta.t()).mapv(|e| {
        if e > LINEAR_PREDICTOR_CAP {
            clamps += 1;
            LINEAR_PREDICTOR_CAP
        } else {
            e
        }
    });
    let counts = n_lk.mapv(|c| c as f64);
    let exec = ctx.exec;
    let target = |u: f64| {
        let n = u.exp();
        if !(n > 0.0 && n.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let lg_n = ln_gamma(n);
        let parts = exec.map(k_n, |k| {
            let mut acc = 0.0;
            for (&c, &e) in counts.column(k).iter().zip(eta.column(k).iter()) {
                let ln_total = log_add_exp(u, e);
                acc += n * (u - ln_total) - c * ln_total;
                if c > 0.0 {
                    acc += ln_gamma(c + n) - lg_n;
                }
            }
            acc
        });
        parts.iter().sum::<f64>() + u
    };
    let cfg = ctx.slice.with_bounds(None, Some(ctx.n_upper.ln()));
    let u = slice_sample(target, n_disp.ln(), &cfg, rng)?;
    let n = u.exp().min(ctx.n_upper);
    if n > 0.0 {
        Ok((n, clamps))
    } else {
        Err(Error::NonFinite("overdispersion draw underflowed".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn naive_fcd(beta: &[f64], coord: usize, value: f64, n: &[u32], x: &[Vec<f64>], size: f64, var: f64) -> f64 {
        let mut b = beta.to_vec();
        b[coord] = value;
        let mut total = -value * value / (2.0 * var);
        for (row, &count) in x.iter().zip(n) {
            let mut dot = 0.0;
            for (xi, bi) in row.iter().zip(&b) {
                dot += xi * bi;
            }
            let lambda = dot.exp();
            let p = size / (size + lambda);
            let rising: f64 = (0..count).map(|j| (size + j as f64).ln()).sum();
            let fact: f64 = (1..=count).map(|j| (j as f64).ln()).sum();
            total += rising - fact + size * p.ln() + count as f64 * (1.0 - p).ln();
        }
        total
    }

    #[test]
    fn fcd_matches_naive_summation() {
        let mut rng = ChainRng::seed_from_u64(12);
        let rows: Vec<Vec<f64>> = (0..5).map(|_| vec![1.0, rng.uniform() * 2.0 - 1.0, rng.uniform()]).collect();
        let counts: Vec<u32> = (0..5).map(|_| rng.index(20) as u32).collect();
        let flat: Vec<f64> = rows.iter().flatten().cloned().collect();
        let x = CovariateMatrix::new(
            Array2::from_shape_vec((5, 3), flat).unwrap(),
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        let beta = [0.7, -0.4, 1.1];
        for (coord, value) in [(0, 0.3), (1, -1.5), (2, 2.0)] {
            let got = beta_log_fcd(
                array![0.7, -0.4, 1.1].view(),
                coord,
                value,
                Array1::from(counts.clone()).view(),
                &x,
                3.5,
                10.0,
            )
            .unwrap();
            let oracle = naive_fcd(&beta, coord, value, &counts, &rows, 3.5, 10.0);
            assert!((got - oracle).abs() < 1e-10, "{got} vs {oracle}");
        }
    }

    #[test]
    fn fcd_without_data_is_the_prior() {
        let x = CovariateMatrix::new(Array2::zeros((0, 1)), vec!["intercept".into()]).unwrap();
        let empty = Array1::<u32>::zeros(0);
        let at = |v| beta_log_fcd(array![0.0].view(), 0, v, empty.view(), &x, 2.0, 10.0).unwrap();
        assert_eq!(at(0.0), 0.0);
        assert!((at(2.0) - (-4.0 / 20.0)).abs() < 1e-15);
        assert!(at(0.5) < at(0.0) && at(-0.5) < at(0.0));
    }

    #[test]
    fn fcd_with_zero_count_is_decreasing() {
        let x = CovariateMatrix::intercept_only(1);
        let zero = array![0u32];
        // Without the prior the term is N ln(N / (N + e^v)); subtract the prior back out.
        let f = |v: f64| {
            beta_log_fcd(array![0.0].view(), 0, v, zero.view(), &x, 2.0, 1e300).unwrap()
        };
        let mut prev = f(-3.0);
        for i in 1..30 {
            let v = -3.0 + 0.2 * i as f64;
            let cur = f(v);
            assert!(cur < prev);
            let expected = 2.0 * (2.0 / (2.0 + v.exp())).ln();
            assert!((cur - expected).abs() < 1e-9);
            prev = cur;
        }
    }

    #[test]
    fn kernel_differences_match_fcd_differences() {
        // The sampler target drops terms constant in the coordinate.
        let x = CovariateMatrix::new(array![[1.0, 0.5], [1.0, -0.2], [1.0, 1.3]], vec!["i".into(), "a".into()])
            .unwrap();
        let counts = array![4u32, 0, 11];
        let kernel = |v: f64| {
            let mut t = -v * v / 20.0;
            for l in 0..3 {
                let e = 0.4 + x.design[[l, 1]] * v;
                t += nb_kernel_eta(counts[l] as f64, e, 5.0, 5f64.ln());
            }
            t
        };
        let fcd = |v: f64| beta_log_fcd(array![0.4, 0.0].view(), 1, v, counts.view(), &x, 5.0, 10.0).unwrap();
        let (a, b) = (-0.7, 1.9);
        assert!(((kernel(a) - kernel(b)) - (fcd(a) - fcd(b))).abs() < 1e-10);
    }

    #[test]
    fn sample_beta_is_deterministic_and_policy_independent() {
        let x = CovariateMatrix::new(
            array![[1.0, 0.1], [1.0, 0.9], [1.0, -0.5], [1.0, 0.3]],
            vec!["i".into(), "a".into()],
        )
        .unwrap();
        let n_lk = array![[3u32, 0], [7, 1], [1, 2], [4, 0]];
        let beta = Array2::zeros((2, 2));
        let slice = SliceConfig::default();
        let run = |exec| {
            let ctx = RegressionContext { x: &x, prior_var: 10.0, n_upper: 1000.0, slice: &slice, random_scan: false, exec };
            let mut rng = ChainRng::seed_from_u64(77);
            let mut b = beta.clone();
            for _ in 0..10 {
                b = sample_beta(&ctx, n_lk.view(), &b, 5.0, &mut rng).unwrap().0;
            }
            b
        };
        let a = run(Exec::Sequential);
        let b = run(Exec::Parallel);
        assert_eq!(a.mapv(f64::to_bits), b.mapv(f64::to_bits));
    }

    #[test]
    fn overdispersion_stays_in_support() {
        let x = CovariateMatrix::intercept_only(3);
        let n_lk = array![[2u32], [9], [0]];
        let beta = array![[1.0]];
        let slice = SliceConfig::default();
        let ctx = RegressionContext { x: &x, prior_var: 10.0, n_upper: 50.0, slice: &slice, random_scan: false, exec: Exec::Sequential };
        let mut rng = ChainRng::seed_from_u64(8);
        let mut n = 25.0;
        for _ in 0..500 {
            n = sample_overdispersion(&ctx, n_lk.view(), &beta, n, &mut rng).unwrap().0;
            assert!(n > 0.0 && n <= 50.0);
        }
    }
}
