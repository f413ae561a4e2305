use std::fmt;

use super::inner::guard_holds;
use super::{minimize_step, project_to_h, FlowConfig, Trajectory};
use crate::energy::{constraint_vector, p_energy};
use crate::error::{Error, Result};
use crate::grid::NetworkState;
use crate::multipliers::{constant_for_dets, multiplier_budget};

/// A run that stopped early, with everything computed up to that point.
#[derive(Debug)]
pub struct Halted {
    pub error: Error,
    pub partial: Trajectory,
}

impl fmt::Display for Halted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} steps)", self.error, self.partial.step_count())
    }
}

impl std::error::Error for Halted {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Rejects initial data on which the multipliers are not controlled.
pub fn check_guard(state: &NetworkState, osc_floor: f64) -> Result<()> {
    if guard_holds(state, osc_floor) {
        return Ok(());
    }
    Err(Error::DegenerateGeometry(format!(
        "fewer than two curves oscillate by {osc_floor:e} (oscillations {:?}) and the strict length condition fails",
        state.oscillations()
    )))
}

/// Running totals for the a-priori estimates.
struct Estimates {
    d0: f64,
    horizon: f64,
    p: f64,
    total_length: f64,
    initial_norms: [f64; 3],
    dissipation: f64,
    multiplier_sum: f64,
    max_constant: Option<f64>,
}

impl Estimates {
    fn new(initial: &NetworkState, horizon: f64) -> Estimates {
        Estimates {
            d0: p_energy(initial),
            horizon,
            p: initial.p(),
            total_length: initial.lengths().iter().sum(),
            initial_norms: [0, 1, 2].map(|j| initial.field(j).l2_norm()),
            dissipation: 0.0,
            multiplier_sum: 0.0,
            max_constant: None,
        }
    }

    fn multiplier_budget(&self, c: f64) -> f64 {
        multiplier_budget(c, self.p, self.total_length, self.horizon, self.d0)
    }

    fn check(&mut self, step: usize, prev: &NetworkState, state: &NetworkState, cfg: &FlowConfig, tau: f64) -> Result<()> {
        let report_violation = |what: String| Err(Error::EstimateViolated { step, what });
        let (before, after) = (p_energy(prev), p_energy(state));
        if after > before + cfg.tol_inner {
            return report_violation(format!("energy increased from {before:e} to {after:e}"));
        }
        let penalty = crate::energy::step_penalty(state, prev, tau)?;
        // ½ τ ∫|V|² equals the penalty value
        self.dissipation += penalty;
        if self.dissipation > self.d0 + step as f64 * cfg.tol_inner {
            return report_violation(format!("dissipation {:e} exceeds D(θ₀) = {:e}", self.dissipation, self.d0));
        }
        for j in 0..3 {
            let norm = state.field(j).l2_norm();
            let limit = self.initial_norms[j] + (2.0 * self.horizon * self.d0).sqrt();
            if norm > limit * (1.0 + 1e-12) + 1e-12 {
                return report_violation(format!("L² norm of curve {} is {norm:e} > {limit:e}", j + 1));
            }
            let drift = (state.field(j).oscillation() - prev.field(j).oscillation()).abs();
            let sup = state
                .field(j)
                .values()
                .iter()
                .zip(prev.field(j).values())
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            if drift > 2.0 * sup + 1e-12 {
                return report_violation(format!("oscillation of curve {} jumped by {drift:e}", j + 1));
            }
        }
        Ok(())
    }

    fn check_multipliers(&mut self, step: usize, dets: [f64; 3], lengths: [f64; 3], norm_sq: f64, tau: f64) -> Result<()> {
        self.multiplier_sum += tau * norm_sq;
        if let Ok(c) = constant_for_dets(dets, lengths) {
            self.max_constant = Some(self.max_constant.map_or(c, |m| m.max(c)));
        }
        if let Some(c) = self.max_constant {
            let budget = self.multiplier_budget(c);
            if self.multiplier_sum > budget {
                return Err(Error::EstimateViolated {
                    step,
                    what: format!("Σ τ(|λ|² + |μ|²) = {:e} exceeds {budget:e}", self.multiplier_sum),
                });
            }
        }
        Ok(())
    }
}

/// Runs `n = ⌈T/τ⌉` steps of size `T/n` and checks the a-priori estimates
/// after each one. Any failure returns the trajectory computed so far.
pub fn run_flow(initial: &NetworkState, cfg: &FlowConfig) -> std::result::Result<Trajectory, Halted> {
    let halt = |error: Error, partial: Trajectory| Err(Halted { error, partial });
    let n = cfg.step_count();
    let tau = cfg.effective_tau();
    let mut traj = Trajectory::new(initial.clone(), tau, *cfg);
    if let Err(e) = cfg.validate() {
        return halt(e, traj);
    }
    let defect = constraint_vector(initial).defect();
    if defect > cfg.tol_constraint {
        if defect > 1e3 * cfg.tol_constraint {
            return halt(Error::Inadmissible { defect }, traj);
        }
        match project_to_h(initial, cfg) {
            Ok(p) => traj.states[0] = p.state,
            Err(e) => return halt(e, traj),
        }
    }
    if let Err(e) = check_guard(traj.initial(), cfg.osc_floor) {
        return halt(e, traj);
    }
    let step_cfg = FlowConfig { tau, ..*cfg };
    let mut estimates = Estimates::new(traj.initial(), cfg.horizon);
    for i in 1..=n {
        let prev = traj.last().clone();
        let (state, mut report) = match minimize_step(&prev, &step_cfg) {
            Ok(out) => out,
            Err(Error::FlatnessBlowup { oscs, .. }) => return halt(Error::FlatnessBlowup { step: i, oscs }, traj),
            Err(e) => return halt(e, traj),
        };
        report.step = i;
        report.time = traj.time(i);
        let checked = estimates.check(i, &prev, &state, cfg, tau).and_then(|_| {
            estimates.check_multipliers(i, report.dets, state.lengths(), report.multipliers.norm_sq(), tau)
        });
        let flat = !guard_holds(&state, cfg.osc_floor);
        let oscs = report.oscs;
        traj.states.push(state);
        traj.reports.push(report);
        if let Err(e) = checked {
            return halt(e, traj);
        }
        if flat {
            return halt(Error::FlatnessBlowup { step: i, oscs }, traj);
        }
    }
    Ok(traj)
}
