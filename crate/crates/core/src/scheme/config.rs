use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmijoParams {
    pub c1: f64,
    pub backtrack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonParams {
    pub max_iters: usize,
    pub tol: f64,
}

/// Parameters of a flow run. The exponent `p` belongs to the state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub tau: f64,
    pub horizon: f64,
    /// Bound on the constrained gradient norm at which the inner solve stops.
    pub tol_inner: f64,
    pub tol_constraint: f64,
    pub max_inner_iters: usize,
    pub armijo: ArmijoParams,
    pub newton: NewtonParams,
    pub cond_cap: f64,
    /// Oscillation below which a curve counts as flat.
    pub osc_floor: f64,
    /// How many times a failed step may be redone with halved substeps.
    pub max_halvings: u32,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            tau: 1e-3,
            horizon: 0.5,
            tol_inner: 1e-8,
            tol_constraint: 1e-9,
            max_inner_iters: 5000,
            armijo: ArmijoParams {
                c1: 1e-4,
                backtrack: 0.5,
            },
            newton: NewtonParams {
                max_iters: 20,
                tol: 1e-12,
            },
            cond_cap: crate::multipliers::DEFAULT_COND_CAP,
            osc_floor: 1e-3,
            max_halvings: 3,
        }
    }
}

impl FlowConfig {
    pub fn new(tau: f64, horizon: f64) -> FlowConfig {
        FlowConfig {
            tau,
            horizon,
            ..FlowConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau", self.tau),
            ("T", self.horizon),
            ("tol_inner", self.tol_inner),
            ("tol_constraint", self.tol_constraint),
            ("newton tolerance", self.newton.tol),
            ("cond_cap", self.cond_cap),
            ("osc_floor", self.osc_floor),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.tau > self.horizon {
            return Err(Error::InvalidConfig(format!(
                "tau = {} exceeds the horizon T = {}",
                self.tau, self.horizon
            )));
        }
        if !(self.armijo.c1 > 0.0 && self.armijo.c1 < 1.0) {
            return Err(Error::InvalidConfig(format!("Armijo c1 must lie in (0, 1), got {}", self.armijo.c1)));
        }
        if !(self.armijo.backtrack > 0.0 && self.armijo.backtrack < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "backtrack factor must lie in (0, 1), got {}",
                self.armijo.backtrack
            )));
        }
        if self.max_inner_iters == 0 || self.newton.max_iters == 0 {
            return Err(Error::InvalidConfig("iteration caps must be at least 1".into()));
        }
        Ok(())
    }

    /// `n = ⌈T/τ⌉`; a ratio within rounding of an integer is not bumped up.
    pub fn step_count(&self) -> usize {
        let ratio = self.horizon / self.tau;
        let n = ratio.round();
        if (ratio - n).abs() <= 1e-9 * n.max(1.0) {
            (n as usize).max(1)
        } else {
            ratio.ceil() as usize
        }
    }

    /// `τ_n = T/n`.
    pub fn effective_tau(&self) -> f64 {
        self.horizon / self.step_count() as f64
    }
}
