use serde::{Deserialize, Serialize};

use super::{FlowConfig, StepReport};
use crate::error::{Error, Result};
use crate::grid::NetworkState;

/// Which end of a time cell a piecewise constant interpolant takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// `θ_{i-1}` on `[(i-1)τ, iτ)`.
    Lower,
    /// `θ_i` on `((i-1)τ, iτ]`.
    Upper,
}

/// States `θ_0 … θ_k` on the uniform time grid `t_i = iτ`, with one report
/// per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<NetworkState>,
    pub reports: Vec<StepReport>,
    pub tau: f64,
    pub config: FlowConfig,
}

impl Trajectory {
    pub fn new(initial: NetworkState, tau: f64, config: FlowConfig) -> Trajectory {
        Trajectory {
            states: vec![initial],
            reports: Vec::new(),
            tau,
            config,
        }
    }

    pub fn step_count(&self) -> usize {
        self.reports.len()
    }

    pub fn initial(&self) -> &NetworkState {
        &self.states[0]
    }

    pub fn last(&self) -> &NetworkState {
        self.states.last().expect("trajectory holds its initial state")
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.tau
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.step_count())
    }

    /// `D(θ_i)` for every stored state.
    pub fn energies(&self) -> Vec<f64> {
        let mut out = vec![crate::energy::p_energy(self.initial())];
        out.extend(self.reports.iter().map(|r| r.energy_after));
        out
    }

    /// `½ Σ τ ∫|V_i|²` over the stored steps.
    pub fn dissipation(&self) -> f64 {
        0.5 * self.tau * self.reports.iter().map(|r| r.velocity_l2sq).sum::<f64>()
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let end = self.end_time();
        if !(t >= 0.0 && t <= end * (1.0 + 1e-12)) {
            return Err(Error::InvalidConfig(format!("time {t} outside [0, {end}]")));
        }
        let r = t / self.tau;
        let nearest = r.round();
        if (r - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            return Ok(((nearest as usize).min(self.step_count()), 0.0));
        }
        let i = r.floor() as usize;
        Ok((i, r - i as f64))
    }

    /// The piecewise linear interpolant in time; exact at grid times.
    pub fn linear_interpolant(&self, t: f64) -> Result<NetworkState> {
        let (i, frac) = self.locate(t)?;
        if frac == 0.0 {
            return Ok(self.states[i].clone());
        }
        let (a, b) = (&self.states[i], &self.states[i + 1]);
        let values = [0, 1, 2].map(|j| {
            a.field(j)
                .values()
                .iter()
                .zip(b.field(j).values())
                .map(|(x, y)| x + frac * (y - x))
                .collect()
        });
        a.with_values(values)
    }

    pub fn piecewise_constant_interpolant(&self, t: f64, side: Side) -> Result<NetworkState> {
        let (i, frac) = self.locate(t)?;
        let k = match side {
            Side::Upper if frac > 0.0 => i + 1,
            Side::Upper => i,
            Side::Lower if frac == 0.0 && i > 0 => i - 1,
            Side::Lower => i,
        };
        Ok(self.states[k].clone())
    }
}
