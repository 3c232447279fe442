use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RADIUS: f64 = 0.1;
pub const DEFAULT_K: usize = 32;
pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_EPS: f64 = 1e-9;

/// Parameters for graph construction, smoothing and reselection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    /// Ball query radius, in the cloud's length unit.
    pub radius: f64,
    /// Neighbor cap of the ball query.
    pub k: usize,
    /// Attenuation factor of the power series, strictly inside (0, 1).
    pub alpha: f64,
    /// Smoothing order: number of powers summed after the identity.
    pub order: usize,
    /// Size of the reselected neighborhoods.
    pub top_k: usize,
    /// Tolerance for degenerate geometry.
    pub eps: f64,
    /// Entries of intermediate powers below this are dropped. Zero keeps everything.
    pub prune: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            radius: DEFAULT_RADIUS,
            k: DEFAULT_K,
            alpha: DEFAULT_ALPHA,
            order: DEFAULT_ORDER,
            top_k: DEFAULT_K,
            eps: DEFAULT_EPS,
            prune: 0.0,
        }
    }
}

impl SmoothingConfig {
    /// Config with the given radius and `k`; `top_k` follows `k`.
    pub fn new(radius: f64, k: usize) -> Self {
        Self {
            radius,
            k,
            top_k: k,
            ..Self::default()
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn with_top_k(mut self, top_k: usize) -> Self {
        self.top_k = top_k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "radius must be positive and finite, got {}",
                self.radius
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be at least 1".into()));
        }
        check_alpha(self.alpha)?;
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return Err(Error::InvalidConfig(format!("eps must be >= 0, got {}", self.eps)));
        }
        if !(self.prune.is_finite() && self.prune >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "prune threshold must be >= 0, got {}",
                self.prune
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}
