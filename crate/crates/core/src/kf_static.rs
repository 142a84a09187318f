//! Scalar random-walk Kalman filter for one edge.
//!
//! State model `X(k) = X(k-1) + w(k)`, observation `Y(k) = X(k) + v(k)`,
//! where `k` counts traversals of the edge.

use crate::error::FilterError;
use crate::EPS_TIME;

/// Default process- and observation-noise variances, seconds squared.
pub const DEFAULT_SIGMA2: f64 = 0.04;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarFilterState {
    pub x_hat: f64,
    pub p: f64,
    pub k: u32,
    pub sigma2_omega: f64,
    pub sigma2_eta: f64,
}

/// Result of one measurement update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarUpdate {
    pub state: ScalarFilterState,
    pub gain: f64,
    /// Set when both prior and observation variance are zero; the estimate
    /// is then left unchanged.
    pub degenerate: bool,
}

fn non_negative(name: &'static str, value: f64) -> Result<(), FilterError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(FilterError::NegativeVariance { name, value })
    }
}

impl ScalarFilterState {
    pub fn init(
        x0_mean: f64,
        p0: f64,
        sigma2_omega: f64,
        sigma2_eta: f64,
    ) -> Result<Self, FilterError> {
        if !(x0_mean > 0.0 && x0_mean.is_finite()) {
            return Err(FilterError::NonPositiveMean(x0_mean));
        }
        non_negative("p0", p0)?;
        non_negative("sigma2_omega", sigma2_omega)?;
        non_negative("sigma2_eta", sigma2_eta)?;
        Ok(ScalarFilterState {
            x_hat: x0_mean,
            p: p0,
            k: 0,
            sigma2_omega,
            sigma2_eta,
        })
    }

    /// A-priori estimate and variance for the next step.
    pub fn predict(&self) -> (f64, f64) {
        (self.x_hat, self.p + self.sigma2_omega)
    }

    pub fn update(&self, y: f64) -> ScalarUpdate {
        let (x_prior, p_prior) = self.predict();
        let innovation_var = p_prior + self.sigma2_eta;
        if innovation_var == 0.0 {
            return ScalarUpdate {
                state: ScalarFilterState {
                    k: self.k + 1,
                    ..*self
                },
                gain: 0.0,
                degenerate: true,
            };
        }
        let gain = p_prior / innovation_var;
        let x_hat = x_prior + gain * (y - x_prior);
        let p = p_prior - p_prior * p_prior / innovation_var;
        ScalarUpdate {
            state: ScalarFilterState {
                x_hat: x_hat.max(EPS_TIME),
                p: p.max(0.0),
                k: self.k + 1,
                ..*self
            },
            gain,
            degenerate: false,
        }
    }
}
