use serde::{Deserialize, Serialize};

use crate::groupoid::DEFAULT_BANDLIMIT;
use crate::periods::GOLDEN;
use crate::quadrature::QuadConfig;
use crate::torus::DEFAULT_EPSILON;

/// Session-wide parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// Numeric rotation number.
    pub lambda: f64,
    /// Half-width of the flow-time interval of plots and bisubmersions.
    pub eps: f64,
    /// Fourier modes kept per torus direction.
    pub bandlimit: i32,
    pub quad: QuadConfig,
    pub seed: u64,
    /// Multiplies every tolerance of the verification suites.
    pub tolerance_scale: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            lambda: GOLDEN,
            eps: DEFAULT_EPSILON,
            bandlimit: DEFAULT_BANDLIMIT,
            quad: QuadConfig::default(),
            seed: 0,
            tolerance_scale: 1.0,
        }
    }
}

impl Config {
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn refined(mut self) -> Self {
        self.quad = self.quad.refined();
        self
    }
}
