//! Posterior summaries and model evaluation: credible intervals,
//! relevant categories, probabilistic coherence, abundance prediction and
//! label alignment against a known truth.

use itertools::Itertools;
use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{compute_lambda, CountData, CovariateMatrix};

/// Mean and equal-tailed credible interval of one scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSummary {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    /// The interval excludes zero.
    pub significant: bool,
}

/// Empirical quantile with linear interpolation between order statistics.
/// `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize_draws(draws: &[f64], level: f64) -> Result<ParamSummary> {
    if draws.is_empty() {
        return Err(Error::InvalidData("no posterior draws to summarize".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("credible level {level} outside (0, 1)")));
    }
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let lower = quantile(&sorted, tail);
    let upper = quantile(&sorted, 1.0 - tail);
    Ok(ParamSummary { mean, lower, upper, significant: lower > 0.0 || upper < 0.0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    /// Zero-based cluster index.
    pub cluster: usize,
    pub covariate: String,
    pub summary: ParamSummary,
}

/// Per (cluster, covariate) summary of the coefficient draws.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub level: f64,
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn get(&self, cluster: usize, covariate: usize) -> &ParamSummary {
        let d = self.rows.len() / self.n_clusters().max(1);
        &self.rows[cluster * d + covariate].summary
    }

    pub fn n_clusters(&self) -> usize {
        self.rows.iter().map(|r| r.cluster + 1).max().unwrap_or(0)
    }
}

/// Summarize K×d coefficient draws, rows ordered cluster-major.
pub fn posterior_summary(beta_draws: &[Array2<f64>], covariate_names: &[String], level: f64) -> Result<SummaryTable> {
    let first = beta_draws
        .first()
        .ok_or_else(|| Error::InvalidData("no posterior draws to summarize".into()))?;
    let (k_n, d) = first.dim();
    if covariate_names.len() != d {
        return Err(Error::DimensionMismatch(format!("{d} coefficients but {} names", covariate_names.len())));
    }
    let mut rows = Vec::with_capacity(k_n * d);
    let mut column = Vec::with_capacity(beta_draws.len());
    for k in 0..k_n {
        for (j, name) in covariate_names.iter().enumerate() {
            column.clear();
            column.extend(beta_draws.iter().map(|b| b[[k, j]]));
            rows.push(SummaryRow { cluster: k, covariate: name.clone(), summary: summarize_draws(&column, level)? });
        }
    }
    Ok(SummaryTable { level, rows })
}

pub const DEFAULT_MIN_RATIO: f64 = 2.0;

/// Categories at least `min_ratio` times more frequent in a cluster than in
/// any other, sorted by their weight in that cluster (descending).
pub fn relevant_categories(phi_mean: &Array2<f64>, min_ratio: f64) -> Vec<Vec<usize>> {
    let (k_n, s_n) = phi_mean.dim();
    (0..k_n)
        .map(|k| {
            let mut cats: Vec<usize> = (0..s_n)
                .filter(|&s| {
                    let own = phi_mean[[k, s]];
                    let rival = (0..k_n).filter(|&j| j != k).map(|j| phi_mean[[j, s]]).fold(0.0, f64::max);
                    own > 0.0 && own >= min_ratio * rival
                })
                .collect();
            cats.sort_by(|&a, &b| phi_mean[[k, b]].total_cmp(&phi_mean[[k, a]]).then(a.cmp(&b)));
            cats
        })
        .collect()
}

pub const DEFAULT_COHERENCE_M: usize = 5;

/// Which instances count towards a cluster's co-occurrence statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoherenceScope {
    /// Only instances whose largest Θ entry is the cluster.
    AssignedInstances,
    /// Every instance, for every cluster.
    WholeCorpus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport {
    pub per_cluster: Vec<f64>,
    pub total: f64,
    pub m: usize,
    /// Pairs dropped because no counted instance contained the less likely category.
    pub skipped_pairs: usize,
    pub scope: CoherenceScope,
}

/// Argmax of each Θ row (first index on ties); `None` for rows that are
/// exactly uniform because the instance has no tokens.
fn assigned_cluster(theta_row: ArrayView1<'_, f64>) -> usize {
    theta_row
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bk, bv), (k, &v)| if v > bv { (k, v) } else { (bk, bv) })
        .0
}

/// Indices of the `m` largest entries of `row`, largest first.
fn top_categories(row: ArrayView1<'_, f64>, m: usize) -> Vec<usize> {
    (0..row.len())
        .sorted_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)))
        .take(m)
        .collect()
}

/// Mean of `P(s1 | s2) - P(s1)` over the pairs of each cluster's top-`m`
/// categories, where `s1` ranks above `s2`; total is the sum over clusters.
pub fn probabilistic_coherence(
    phi_mean: &Array2<f64>,
    data: &CountData,
    theta_mean: &Array2<f64>,
    m: usize,
    scope: CoherenceScope,
    exec: Exec,
) -> Result<CoherenceReport> {
    let (k_n, s_n) = phi_mean.dim();
    if m == 0 || m > s_n {
        return Err(Error::InvalidConfig(format!("coherence M = {m} must lie in 1..={s_n}")));
    }
    if data.n_categories() != s_n {
        return Err(Error::DimensionMismatch("phi and counts disagree on categories".into()));
    }
    if scope == CoherenceScope::AssignedInstances && theta_mean.dim() != (data.n_instances(), k_n) {
        return Err(Error::DimensionMismatch("theta does not match counts and phi".into()));
    }
    let owners: Vec<Option<usize>> = (0..data.n_instances())
        .map(|l| {
            if data.instance_total(l) == 0 {
                None
            } else if scope == CoherenceScope::AssignedInstances {
                Some(assigned_cluster(theta_mean.row(l)))
            } else {
                Some(usize::MAX)
            }
        })
        .collect();

    let results = exec.map(k_n, |k| {
        let top = top_categories(phi_mean.row(k), m);
        let members: Vec<usize> = owners
            .iter()
            .enumerate()
            .filter(|(_, o)| match o {
                Some(c) => *c == usize::MAX || *c == k,
                None => false,
            })
            .map(|(l, _)| l)
            .collect();
        let n_members = members.len() as f64;
        let present = |l: usize, s: usize| data.counts[[l, s]] > 0;
        let mut sum = 0.0;
        let mut used = 0usize;
        let mut skipped = 0usize;
        for (i, &s1) in top.iter().enumerate() {
            for &s2 in &top[i + 1..] {
                let with_s2 = members.iter().filter(|&&l| present(l, s2)).count();
                if with_s2 == 0 {
                    skipped += 1;
                    continue;
                }
                let both = members.iter().filter(|&&l| present(l, s2) && present(l, s1)).count();
                let with_s1 = members.iter().filter(|&&l| present(l, s1)).count();
                sum += both as f64 / with_s2 as f64 - with_s1 as f64 / n_members;
                used += 1;
            }
        }
        (if used > 0 { sum / used as f64 } else { 0.0 }, skipped)
    });
    let per_cluster: Vec<f64> = results.iter().map(|r| r.0).collect();
    Ok(CoherenceReport {
        total: per_cluster.iter().sum(),
        skipped_pairs: results.iter().map(|r| r.1).sum(),
        per_cluster,
        m,
        scope,
    })
}

/// Expected counts `sum_k exp(x_l . beta_k) phi_{k,s}` for new instances.
pub fn predict_abundance(
    beta_mean: &Array2<f64>,
    phi_mean: &Array2<f64>,
    x_new: &CovariateMatrix,
    exec: Exec,
) -> Result<Array2<f64>> {
    let (k_n, d) = beta_mean.dim();
    if phi_mean.nrows() != k_n || x_new.n_cols() != d {
        return Err(Error::DimensionMismatch(format!(
            "beta {k_n}x{d}, phi {}x{}, covariates with {} columns",
            phi_mean.nrows(),
            phi_mean.ncols(),
            x_new.n_cols()
        )));
    }
    let s_n = phi_mean.ncols();
    let rows = exec.try_map(x_new.n_rows(), |l| {
        let mut out = vec![0.0; s_n];
        for k in 0..k_n {
            let lambda = compute_lambda(x_new.row(l), beta_mean.row(k))?;
            for (o, &p) in out.iter_mut().zip(phi_mean.row(k)) {
                *o += lambda * p;
            }
        }
        Ok::<_, Error>(out)
    })?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((x_new.n_rows(), s_n), flat).expect("shape"))
}

/// Pearson correlation; 0 when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

const EXHAUSTIVE_ALIGN_MAX_K: usize = 8;

/// Permutation `sigma` maximizing `sum_k corr(phi_est[sigma[k]], phi_true[k])`:
/// estimated row `sigma[k]` plays the role of true cluster `k`.
/// Exhaustive for K <= 8, greedy beyond.
pub fn align_clusters(phi_est: &Array2<f64>, phi_true: &Array2<f64>) -> Vec<usize> {
    let k_n = phi_true.nrows();
    assert_eq!(phi_est.dim(), phi_true.dim(), "aligned matrices must share shape");
    let corr: Vec<Vec<f64>> = (0..k_n)
        .map(|t| {
            let truth = phi_true.row(t).to_vec();
            (0..k_n).map(|e| pearson(&phi_est.row(e).to_vec(), &truth)).collect()
        })
        .collect();
    if k_n <= EXHAUSTIVE_ALIGN_MAX_K {
        let mut best = (f64::NEG_INFINITY, (0..k_n).collect::<Vec<_>>());
        for perm in (0..k_n).permutations(k_n) {
            let score: f64 = perm.iter().enumerate().map(|(t, &e)| corr[t][e]).sum();
            if score > best.0 {
                best = (score, perm);
            }
        }
        best.1
    } else {
        let mut pairs: Vec<(usize, usize)> = (0..k_n).cartesian_product(0..k_n).collect();
        pairs.sort_by(|a, b| corr[b.0][b.1].total_cmp(&corr[a.0][a.1]));
        let mut sigma = vec![usize::MAX; k_n];
        let mut used = vec![false; k_n];
        for (t, e) in pairs {
            if sigma[t] == usize::MAX && !used[e] {
                sigma[t] = e;
                used[e] = true;
            }
        }
        sigma
    }
}

/// Reorder the rows of `m` so that row `k` of the result is row `sigma[k]`.
pub fn permute_rows(m: &Array2<f64>, sigma: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros(m.dim());
    for (k, &src) in sigma.iter().enumerate() {
        out.row_mut(k).assign(&m.row(src));
    }
    out
}

/// Reorder the columns of `m` so that column `k` of the result is column `sigma[k]`.
pub fn permute_columns(m: &Array2<f64>, sigma: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros(m.dim());
    for (k, &src) in sigma.iter().enumerate() {
        out.column_mut(k).assign(&m.column(src));
    }
    out
}
