//! Domain types shared by every sampler: the observed count matrix, the
//! covariate design, the latent token assignments with their count caches,
//! and the model parameters.

pub(crate) mod density;
mod state;

pub use density::{
    compute_lambda, joint_log_density, joint_log_density_terms, nb_log_pmf, theta_from_counts, DensityTerms,
    Theta,
};
pub use state::LatentState;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

pub const DEFAULT_GAMMA: f64 = 0.1;
pub const DEFAULT_PRIOR_VAR: f64 = 10.0;
pub const DEFAULT_N_UPPER: f64 = 1000.0;
pub const DEFAULT_CI_LEVEL: f64 = 0.95;

/// Prior hyperparameters and the cluster count.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Dirichlet concentration for each category.
    pub gamma: Vec<f64>,
    /// Diagonal variance of the Normal prior on each coefficient vector.
    pub prior_var: f64,
    /// Upper bound of the uniform prior on the overdispersion.
    pub n_upper: f64,
    pub k: usize,
    pub ci_level: f64,
}

impl Hyperparams {
    /// Defaults for `s` categories and `k` clusters.
    pub fn new(s: usize, k: usize) -> Self {
        Self {
            gamma: vec![DEFAULT_GAMMA; s],
            prior_var: DEFAULT_PRIOR_VAR,
            n_upper: DEFAULT_N_UPPER,
            k,
            ci_level: DEFAULT_CI_LEVEL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma.is_empty() || self.gamma.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidConfig("gamma entries must be positive and finite".into()));
        }
        if !(self.prior_var > 0.0 && self.prior_var.is_finite()) {
            return Err(Error::InvalidConfig("prior variance must be positive".into()));
        }
        if !(self.n_upper > 0.0 && self.n_upper.is_finite()) {
            return Err(Error::InvalidConfig("overdispersion upper bound must be positive".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("cluster count must be at least 1".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::InvalidConfig("credible level must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn gamma_sum(&self) -> f64 {
        self.gamma.iter().sum()
    }
}

/// Observed instance-by-category abundance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CountData {
    pub counts: Array2<u32>,
    pub category_names: Vec<String>,
    pub instance_ids: Vec<String>,
}

impl CountData {
    pub fn new(
        counts: Array2<u32>,
        category_names: Vec<String>,
        instance_ids: Vec<String>,
    ) -> Result<Self> {
        let (l, s) = counts.dim();
        if category_names.len() != s || instance_ids.len() != l {
            return Err(Error::DimensionMismatch(format!(
                "{l}x{s} counts with {} instance ids and {} category names",
                instance_ids.len(),
                category_names.len()
            )));
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::InvalidData("count matrix has no positive entry".into()));
        }
        Ok(Self { counts, category_names, instance_ids })
    }

    /// Unlabelled data; ids are `i1..iL`, categories `s1..sS`.
    pub fn from_counts(counts: Array2<u32>) -> Result<Self> {
        let (l, s) = counts.dim();
        Self::new(
            counts,
            (1..=s).map(|j| format!("s{j}")).collect(),
            (1..=l).map(|i| format!("i{i}")).collect(),
        )
    }

    pub fn n_instances(&self) -> usize {
        self.counts.nrows()
    }

    pub fn n_categories(&self) -> usize {
        self.counts.ncols()
    }

    pub fn instance_total(&self, l: usize) -> u64 {
        self.counts.row(l).iter().map(|&c| c as u64).sum()
    }

    pub fn total_tokens(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Token stream of instance `l`: category ids in ascending order, each
    /// repeated by its count.
    pub fn tokens(&self, l: usize) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.instance_total(l) as usize);
        for (s, &c) in self.counts.row(l).iter().enumerate() {
            out.extend(std::iter::repeat_n(s as u32, c as usize));
        }
        out
    }
}

/// Design matrix, one row per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    pub design: Array2<f64>,
    pub column_names: Vec<String>,
}

impl CovariateMatrix {
    pub fn new(design: Array2<f64>, column_names: Vec<String>) -> Result<Self> {
        if column_names.len() != design.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} covariate columns but {} names",
                design.ncols(),
                column_names.len()
            )));
        }
        if design.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariate matrix".into()));
        }
        Ok(Self { design, column_names })
    }

    /// Intercept-only design for `l` instances.
    pub fn intercept_only(l: usize) -> Self {
        Self { design: Array2::ones((l, 1)), column_names: vec!["intercept".into()] }
    }

    /// Prepend a constant-1 column named `intercept`.
    pub fn with_intercept(self) -> Self {
        let (l, d) = self.design.dim();
        let mut design = Array2::ones((l, d + 1));
        design.slice_mut(ndarray::s![.., 1..]).assign(&self.design);
        let mut column_names = Vec::with_capacity(d + 1);
        column_names.push("intercept".to_string());
        column_names.extend(self.column_names);
        Self { design, column_names }
    }

    pub fn n_rows(&self) -> usize {
        self.design.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.design.ncols()
    }

    pub fn row(&self, l: usize) -> ArrayView1<'_, f64> {
        self.design.row(l)
    }

    pub fn check_aligned(&self, data: &CountData) -> Result<()> {
        if self.n_rows() != data.n_instances() {
            return Err(Error::DimensionMismatch(format!(
                "{} covariate rows for {} instances",
                self.n_rows(),
                data.n_instances()
            )));
        }
        Ok(())
    }
}

/// Φ (K×S row-simplex), B (K×d) and the overdispersion N.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub phi: Array2<f64>,
    pub beta: Array2<f64>,
    pub n_disp: f64,
}

impl ModelParams {
    pub fn validate(&self, n_upper: f64) -> Result<()> {
        for (k, row) in self.phi.rows().into_iter().enumerate() {
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::InvalidData(format!("phi row {k} has a negative entry")));
            }
            let total: f64 = row.sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidData(format!("phi row {k} sums to {total}")));
            }
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("beta".into()));
        }
        if !(self.n_disp > 0.0 && self.n_disp <= n_upper) {
            return Err(Error::InvalidData(format!(
                "overdispersion {} outside (0, {n_upper}]",
                self.n_disp
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    Joint,
    TwoStage,
}

impl FitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FitMode::Joint => "joint",
            FitMode::TwoStage => "two-stage",
        }
    }
}

impl std::str::FromStr for FitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(FitMode::Joint),
            "two-stage" => Ok(FitMode::TwoStage),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub mode: FitMode,
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
}

/// Retained posterior draws plus the per-iteration log density.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub phi_draws: Vec<Array2<f64>>,
    pub beta_draws: Vec<Array2<f64>>,
    pub n_draws: Vec<f64>,
    /// Posterior mean of Θ over the retained iterations.
    pub theta_mean: Array2<f64>,
    /// Instances with no tokens; their Θ rows are reported as uniform.
    pub degenerate_instances: Vec<usize>,
    pub logdens: Vec<f64>,
    /// Mean occupancy fraction per cluster over retained iterations.
    pub occupancy: Vec<f64>,
    /// Number of times a linear predictor was clamped before exponentiation.
    pub clamp_events: u64,
    pub meta: TraceMeta,
}

impl Trace {
    pub fn n_retained(&self) -> usize {
        self.n_draws.len()
    }

    pub fn phi_mean(&self) -> Array2<f64> {
        mean_matrix(&self.phi_draws)
    }

    pub fn beta_mean(&self) -> Array2<f64> {
        mean_matrix(&self.beta_draws)
    }
}

pub(crate) fn mean_matrix(draws: &[Array2<f64>]) -> Array2<f64> {
    let mut acc = Array2::<f64>::zeros(draws[0].dim());
    for d in draws {
        acc += d;
    }
    acc / draws.len() as f64
}
