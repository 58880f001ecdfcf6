use crate::error::{Error, Result};
use crate::rng::ChainRng;

/// Bracket tuning and support bounds for [`slice_sample`].
#[derive(Debug, Clone, PartialEq)]
pub struct SliceConfig {
    /// Initial bracket width.
    pub width: f64,
    /// Cap on stepping-out expansions (split between the two ends).
    pub max_expansions: usize,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self { width: 1.0, max_expansions: 100, lower: None, upper: None }
    }
}

impl SliceConfig {
    pub fn bounded(lower: Option<f64>, upper: Option<f64>) -> Self {
        Self { lower, upper, ..Self::default() }
    }

    pub fn with_bounds(&self, lower: Option<f64>, upper: Option<f64>) -> Self {
        Self { lower, upper, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::InvalidConfig("slice width must be positive".into()));
        }
        if self.max_expansions == 0 {
            return Err(Error::InvalidConfig("slice max_expansions must be positive".into()));
        }
        if let (Some(a), Some(b)) = (self.lower, self.upper) {
            if !(a < b) {
                return Err(Error::InvalidConfig(format!("slice bounds [{a}, {b}] are empty")));
            }
        }
        Ok(())
    }
}

const MIN_BRACKET: f64 = 1e-12;

/// One univariate slice-sampling update from `x0`.
///
/// Draws a height under the target at `x0`, brackets the horizontal slice by
/// stepping out in units of `cfg.width` (clipped to the support bounds) and
/// then samples uniformly from the bracket, shrinking it towards `x0` on each
/// rejection. The returned point satisfies `log_target(x1) >= log_height`.
pub fn slice_sample<F>(mut log_target: F, x0: f64, cfg: &SliceConfig, rng: &mut ChainRng) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let f0 = log_target(x0);
    if !f0.is_finite() {
        return Err(Error::SliceFailure(format!("log target at start point {x0} is {f0}")));
    }
    let log_height = f0 + rng.uniform_open().ln();
    let lo_bound = cfg.lower.unwrap_or(f64::NEG_INFINITY);
    let hi_bound = cfg.upper.unwrap_or(f64::INFINITY);
    let w = cfg.width;

    let mut left = x0 - w * rng.uniform();
    let mut right = left + w;
    let mut steps_left = (cfg.max_expansions as f64 * rng.uniform()).floor() as usize;
    let mut steps_right = cfg.max_expansions - 1 - steps_left.min(cfg.max_expansions - 1);
    left = left.max(lo_bound);
    right = right.min(hi_bound);

    while steps_left > 0 && left > lo_bound && log_target(left) > log_height {
        left = (left - w).max(lo_bound);
        steps_left -= 1;
    }
    while steps_right > 0 && right < hi_bound && log_target(right) > log_height {
        right = (right + w).min(hi_bound);
        steps_right -= 1;
    }

    loop {
        let x1 = left + rng.uniform() * (right - left);
        let f1 = log_target(x1);
        if f1 >= log_height && x1 >= lo_bound && x1 <= hi_bound {
            return Ok(x1);
        }
        if x1 < x0 {
            left = x1;
        } else {
            right = x1;
        }
        if right - left < MIN_BRACKET {
            return Err(Error::SliceFailure(format!(
                "bracket around {x0} shrank below {MIN_BRACKET:e} without an acceptable point"
            )));
        }
    }
}
