//! Synthetic datasets with known ground truth for the two simulation
//! designs: identity-slope regression with pure instances and anchor
//! categories (set 1), and the same hidden mechanism observed through
//! unrelated random covariates (set 2).

use ndarray::{Array2, Array3};
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{Error, Result};
use crate::model::{theta_from_counts, CountData, CovariateMatrix};
use crate::rng::ChainRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimSet {
    One,
    Two,
}

/// Generator knobs. Defaults give clearly separated clusters and nearly
/// Poisson abundances.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub intercept_range: (f64, f64),
    /// Overdispersion used to draw the abundances.
    pub overdispersion: f64,
    /// Share of instances designed to load on a single cluster.
    pub pure_fraction: f64,
    /// In the remaining instances, chance that each cluster is active.
    pub active_prob: f64,
    /// Covariate value given to inactive clusters.
    pub suppress_value: f64,
    /// Active covariate values are uniform on this range.
    pub covariate_range: (f64, f64),
    pub anchors_per_cluster: usize,
    /// Chance that a non-anchor category also appears, with low weight, in a
    /// cluster other than its home cluster.
    pub shared_prob: f64,
    pub minor_weight: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            intercept_range: (1.5, 2.0),
            overdispersion: 100.0,
            pure_fraction: 0.25,
            active_prob: 0.6,
            suppress_value: -4.0,
            covariate_range: (0.0, 3.0),
            anchors_per_cluster: 3,
            shared_prob: 0.25,
            minor_weight: 0.1,
        }
    }
}

/// Fixed parameters of one simulation design; instances are drawn from it
/// with [`SimDesign::simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimDesign {
    pub set: SimSet,
    pub phi_true: Array2<f64>,
    pub intercepts: Vec<f64>,
    /// Anchor categories of each cluster.
    pub anchors: Vec<Vec<usize>>,
    pub settings: SimSettings,
}

/// One simulated dataset plus everything needed to score a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    pub phi_true: Array2<f64>,
    /// K×(K+1): intercept then slopes, as seen through `x`.
    pub beta_true: Array2<f64>,
    pub theta_true: Array2<f64>,
    /// L×S×K latent counts.
    pub counts_true: Array3<u32>,
    /// Emitted design, intercept column first.
    pub x: CovariateMatrix,
    pub data: CountData,
    /// `sum_k lambda_{l,k} phi_{k,s}` under the generating mechanism.
    pub expected: Array2<f64>,
    pub anchors: Vec<Vec<usize>>,
    /// Instances whose realized abundance sits in exactly one cluster.
    pub pure_instances: Vec<usize>,
    pub seed: u64,
}

impl SimDesign {
    pub fn set1(s: usize, k: usize, seed: u64) -> Result<Self> {
        Self::build(SimSet::One, s, k, seed, SimSettings::default())
    }

    pub fn set2(s: usize, k: usize, seed: u64) -> Result<Self> {
        Self::build(SimSet::Two, s, k, seed, SimSettings::default())
    }

    pub fn build(set: SimSet, s: usize, k: usize, seed: u64, settings: SimSettings) -> Result<Self> {
        if k == 0 || s < k {
            return Err(Error::InvalidConfig(format!("need S >= K >= 1, got S = {s}, K = {k}")));
        }
        let mut rng = ChainRng::seed_from_u64(seed).branch(0);
        let anchors_each = settings.anchors_per_cluster.clamp(1, s / k);
        let home = |c: usize| c % k;
        let is_anchor = |c: usize| c < anchors_each * k;
        let weight = Gamma::new(2.0, 1.0).expect("valid gamma");
        let mut phi = Array2::<f64>::zeros((k, s));
        for c in 0..s {
            phi[[home(c), c]] = weight.sample(&mut rng);
            if !is_anchor(c) {
                for j in (0..k).filter(|&j| j != home(c)) {
                    if rng.uniform() < settings.shared_prob {
                        phi[[j, c]] = settings.minor_weight * weight.sample(&mut rng);
                    }
                }
            }
        }
        for mut row in phi.rows_mut() {
            let total = row.sum();
            row.mapv_inplace(|v| v / total);
        }
        let (lo, hi) = settings.intercept_range;
        let intercepts = (0..k).map(|_| lo + (hi - lo) * rng.uniform()).collect();
        let anchors = (0..k).map(|j| (0..anchors_each * k).filter(|&c| home(c) == j).collect()).collect();
        Ok(Self { set, phi_true: phi, intercepts, anchors, settings })
    }

    pub fn n_clusters(&self) -> usize {
        self.phi_true.nrows()
    }

    pub fn n_categories(&self) -> usize {
        self.phi_true.ncols()
    }

    /// Hidden covariates: one column per cluster, identity slopes. Inactive
    /// clusters get `suppress_value`; a pure instance has one active cluster.
    fn draw_hidden_covariates(&self, l: usize, rng: &mut ChainRng) -> Array2<f64> {
        let k = self.n_clusters();
        let st = &self.settings;
        let (lo, hi) = st.covariate_range;
        let mut x = Array2::zeros((l, k));
        let mut active = vec![false; k];
        for i in 0..l {
            if rng.uniform() < st.pure_fraction {
                active.fill(false);
                active[rng.index(k)] = true;
            } else {
                active.iter_mut().for_each(|a| *a = rng.uniform() < st.active_prob);
                if !active.contains(&true) {
                    active[rng.index(k)] = true;
                }
            }
            for j in 0..k {
                x[[i, j]] = if active[j] { lo + (hi - lo) * rng.uniform() } else { st.suppress_value };
            }
        }
        x
    }

    /// Draw `l` instances.
    pub fn simulate(&self, l: usize, seed: u64) -> Result<SimTruth> {
        if l == 0 {
            return Err(Error::InvalidConfig("need at least one instance".into()));
        }
        let k = self.n_clusters();
        let s = self.n_categories();
        let mut rng = ChainRng::seed_from_u64(seed).branch(1);
        let hidden = self.draw_hidden_covariates(l, &mut rng);
        let size = self.settings.overdispersion;

        let mut counts_true = Array3::<u32>::zeros((l, s, k));
        let mut expected = Array2::<f64>::zeros((l, s));
        let cumulative: Vec<Vec<f64>> = self
            .phi_true
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .scan(0.0, |acc, &p| {
                        *acc += p;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        for i in 0..l {
            for j in 0..k {
                let lambda = (self.intercepts[j] + hidden[[i, j]]).exp();
                for c in 0..s {
                    expected[[i, c]] += lambda * self.phi_true[[j, c]];
                }
                let n = draw_negbin(lambda, size, &mut rng)?;
                for _ in 0..n {
                    let u = rng.uniform() * cumulative[j][s - 1];
                    let c = cumulative[j].iter().position(|&cp| u < cp).unwrap_or(s - 1);
                    counts_true[[i, c, j]] += 1;
                }
            }
        }
        let counts = counts_true.sum_axis(ndarray::Axis(2));
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::InvalidData("simulation produced no tokens".into()));
        }
        let n_lk = counts_true.sum_axis(ndarray::Axis(1));
        let mut theta_true = Array2::zeros((l, k));
        let mut pure_instances = Vec::new();
        for i in 0..l {
            let row: Vec<u32> = n_lk.row(i).to_vec();
            let theta = theta_from_counts(&row);
            if !theta.degenerate && row.iter().filter(|&&c| c > 0).count() == 1 {
                pure_instances.push(i);
            }
            theta_true.row_mut(i).assign(&ndarray::Array1::from(theta.values));
        }

        let cov_names: Vec<String> = (1..=k).map(|j| format!("var{j}")).collect();
        let emitted = match self.set {
            SimSet::One => hidden,
            SimSet::Two => {
                let normal = rand_distr::StandardNormal;
                Array2::from_shape_simple_fn((l, k), || normal.sample(&mut rng))
            }
        };
        let x = CovariateMatrix::new(emitted, cov_names)?.with_intercept();
        let mut beta_true = Array2::zeros((k, k + 1));
        for j in 0..k {
            beta_true[[j, 0]] = self.intercepts[j];
            if self.set == SimSet::One {
                beta_true[[j, j + 1]] = 1.0;
            }
        }
        let data = CountData::new(
            counts,
            (1..=s).map(|c| format!("cat{c}")).collect(),
            (1..=l).map(|i| format!("inst{i}")).collect(),
        )?;
        Ok(SimTruth {
            phi_true: self.phi_true.clone(),
            beta_true,
            theta_true,
            counts_true,
            x,
            data,
            expected,
            anchors: self.anchors.clone(),
            pure_instances,
            seed,
        })
    }
}

/// Gamma-Poisson draw with mean `lambda` and size `size`.
fn draw_negbin(lambda: f64, size: f64, rng: &mut ChainRng) -> Result<u64> {
    let rate = Gamma::new(size, lambda / size)
        .map_err(|e| Error::InvalidConfig(format!("negative binomial ({lambda}, {size}): {e}")))?
        .sample(rng);
    if rate <= 0.0 {
        return Ok(0);
    }
    let n: f64 = Poisson::new(rate)
        .map_err(|e| Error::InvalidConfig(format!("poisson({rate}): {e}")))?
        .sample(rng);
    Ok(n as u64)
}

pub fn simulate_set1(l: usize, s: usize, k: usize, seed: u64) -> Result<SimTruth> {
    SimDesign::set1(s, k, seed)?.simulate(l, seed)
}

pub fn simulate_set2(l: usize, s: usize, k: usize, seed: u64) -> Result<SimTruth> {
    SimDesign::set2(s, k, seed)?.simulate(l, seed)
}
