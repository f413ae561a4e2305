use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::{constraint_gradients, project_to_h, weak_residual_of, FlowConfig, DEFAULT_TEST_RESOLUTION};
use crate::energy::{
    assemble_multiplier_data, constraint_vector, euclidean_gradient, flux, p_energy, step_energy_change, step_penalty,
};
use crate::error::{Error, Result};
use crate::grid::{trapezoid_integral, Grid, NetworkState};
use crate::linalg::solve_tridiagonal;
use crate::multipliers::{compute_remainders, multiplier_bound, solve_multipliers_with_cap, velocity_l1, Multipliers};

/// Diagnostics of one accepted time step `θ_{i-1} → θ_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// Steps are numbered from 1.
    pub step: usize,
    pub time: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    /// `(1/2τ)‖θ_i - θ_{i-1}‖²`.
    pub penalty_value: f64,
    /// `∫|V|²` with `V = (θ_i - θ_{i-1})/τ`.
    pub velocity_l2sq: f64,
    /// `Σ∫|θ_i - θ_{i-1}|`.
    pub velocity_l1: f64,
    pub multipliers: Multipliers,
    /// Bound on `|λ| + |μ|` at this step; absent when curve 1 or 2 is flat.
    pub multiplier_bound: Option<f64>,
    pub constraint_defect: f64,
    pub dets: [f64; 3],
    pub oscs: [f64; 3],
    pub weak_residual: f64,
    pub inner_iters: usize,
    /// Final constrained gradient norm of the inner solve.
    pub stationarity: f64,
    /// Number of substeps the step was split into (1 unless a solve failed).
    pub substeps: usize,
}

const FLOOR: f64 = 1e-8;

/// Tridiagonal metric approximating the Hessian of the step functional.
fn metric(values: &[f64], grid: &Grid, p: f64, tau: f64) -> (Vec<f64>, Vec<f64>) {
    let h = grid.spacing();
    let m = values.len();
    let stiffness: Vec<f64> = values
        .windows(2)
        .map(|w| {
            let g = ((w[1] - w[0]) / h).abs();
            if p < 2.0 {
                (p - 1.0) * g.max(FLOOR).powf(p - 2.0)
            } else if p == 2.0 {
                1.0
            } else {
                (p - 1.0) * g.powf(p - 2.0)
            }
        })
        .collect();
    let diag = (0..m)
        .map(|k| {
            let left = if k > 0 { stiffness[k - 1] } else { 0.0 };
            let right = if k + 1 < m { stiffness[k] } else { 0.0 };
            grid.weight(k) / tau + (left + right) / h
        })
        .collect();
    let off = stiffness.iter().map(|a| -a / h).collect();
    (diag, off)
}

/// Size of the rounding error in each entry of the Euclidean gradient when
/// the angles carry errors of a few ulps of `scale`. For `p < 2` the flux is
/// only Hölder continuous at zero, so on flat stretches this is far above
/// machine precision and no iteration can push the gradient below it.
fn gradient_noise(values: &[f64], grid: &Grid, p: f64, tau: f64, scale: f64) -> Vec<f64> {
    let h = grid.spacing();
    let dtheta = 8.0 * f64::EPSILON * scale;
    let dg = 2.0 * dtheta / h;
    let cell: Vec<f64> = values
        .windows(2)
        .map(|w| {
            let g = ((w[1] - w[0]) / h).abs();
            flux(g + dg, p) - flux(g, p)
        })
        .collect();
    let m = values.len();
    (0..m)
        .map(|k| {
            let left = if k > 0 { cell[k - 1] } else { 0.0 };
            let right = if k + 1 < m { cell[k] } else { 0.0 };
            left + right + grid.weight(k) * dtheta / tau
        })
        .collect()
}

fn dot(a: &[Vec<f64>; 3], b: &[Vec<f64>; 3]) -> f64 {
    (0..3).map(|j| a[j].iter().zip(&b[j]).map(|(x, y)| x * y).sum::<f64>()).sum()
}

struct Solved {
    state: NetworkState,
    iterations: usize,
    measure: f64,
}

/// Preconditioned projected gradient descent for one step of size `tau`.
fn solve_step(prev: &NetworkState, tau: f64, cfg: &FlowConfig) -> Result<Solved> {
    let p = prev.p();
    let grids = [0, 1, 2].map(|j| *prev.field(j).grid());
    let prev_values = prev.cloned_values();
    let scale = prev_values.iter().flatten().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut x = prev.clone();
    let mut iterations = 0;
    loop {
        let xv = x.cloned_values();
        let g = [0, 1, 2].map(|j| euclidean_gradient(&xv[j], &prev_values[j], &grids[j], p, tau));
        let b = constraint_gradients(&x);
        let metrics = [0, 1, 2].map(|j| metric(&xv[j], &grids[j], p, tau));
        let apply_inverse = |v: &[Vec<f64>; 3]| -> [Vec<f64>; 3] {
            [0, 1, 2].map(|j| {
                let mut out = vec![0.0; v[j].len()];
                if v[j].iter().any(|&e| e != 0.0) {
                    solve_tridiagonal(&metrics[j].0, &metrics[j].1, &v[j], &mut out);
                }
                out
            })
        };
        let z = apply_inverse(&g);
        let y = [0, 1, 2, 3].map(|q| apply_inverse(&b[q]));
        let s = Matrix4::from_fn(|q, r| dot(&b[q], &y[r]));
        let rhs = Vector4::from_fn(|q, _| -dot(&b[q], &z));
        let nu = s.lu().solve(&rhs).ok_or(Error::SingularSystem { cond: f64::INFINITY })?;

        let mut measure_sq = 0.0;
        for j in 0..3 {
            let noise = gradient_noise(&xv[j], &grids[j], p, tau, scale);
            for k in 0..xv[j].len() {
                let r = g[j][k] + (0..4).map(|q| nu[q] * b[q][j][k]).sum::<f64>();
                let excess = (r.abs() - noise[k]).max(0.0);
                measure_sq += excess * excess / grids[j].weight(k);
            }
        }
        let measure = measure_sq.sqrt();
        if measure <= cfg.tol_inner {
            return Ok(Solved { state: x, iterations, measure });
        }
        if iterations >= cfg.max_inner_iters {
            return Err(Error::InnerSolveFailed(format!(
                "no convergence after {iterations} iterations (gradient norm {measure:.3e})"
            )));
        }

        let d: [Vec<f64>; 3] =
            [0, 1, 2].map(|j| (0..xv[j].len()).map(|k| -(z[j][k] + (0..4).map(|q| nu[q] * y[q][j][k]).sum::<f64>())).collect());
        let slope = dot(&g, &d);
        let mut accepted = None;
        if slope < 0.0 {
            let mut alpha = 1.0;
            for _ in 0..60 {
                let trial: [Vec<f64>; 3] =
                    [0, 1, 2].map(|j| xv[j].iter().zip(&d[j]).map(|(a, b)| a + alpha * b).collect());
                if let Ok(proj) = project_to_h(&x.with_values(trial)?, cfg) {
                    let cand = proj.state;
                    let change = step_energy_change(
                        &cand.cloned_values(),
                        &xv,
                        [0, 1, 2].map(|j| prev_values[j].as_slice()),
                        [0, 1, 2].map(|j| &grids[j]),
                        p,
                        tau,
                    );
                    if change <= cfg.armijo.c1 * alpha * slope {
                        accepted = Some(cand);
                        break;
                    }
                }
                alpha *= cfg.armijo.backtrack;
            }
        }
        match accepted {
            Some(next) => x = next,
            // No descent left at working precision. Either the residual is
            // already small, or its size in the metric (the predicted
            // decrease) is: near flat cells with p < 2 the metric is huge and
            // the Euclidean residual overstates what is left to gain.
            None if measure <= 1e3 * cfg.tol_inner || -slope <= cfg.tol_inner * cfg.tol_inner => {
                return Ok(Solved { state: x, iterations, measure })
            }
            None => {
                return Err(Error::InnerSolveFailed(format!(
                    "line search failed at iteration {iterations} (gradient norm {measure:.3e})"
                )))
            }
        }
        iterations += 1;
    }
}

/// Checks the oscillation guard: either the strict length condition holds
/// (theta-networks only) or at least two curves oscillate by `osc_floor`.
pub(crate) fn guard_holds(state: &NetworkState, osc_floor: f64) -> bool {
    state.strict_length_condition() || state.oscillations().iter().filter(|&&o| o >= osc_floor).count() >= 2
}

/// One step of the scheme with `cfg.tau`. A failed inner solve is retried by
/// splitting the step into `2, 4, …` equal substeps, at most
/// `cfg.max_halvings` times. The reported multipliers solve the discrete
/// multiplier system at the accepted state.
pub fn minimize_step(prev: &NetworkState, cfg: &FlowConfig) -> Result<(NetworkState, StepReport)> {
    if !guard_holds(prev, cfg.osc_floor) {
        return Err(Error::FlatnessBlowup {
            step: 0,
            oscs: prev.oscillations(),
        });
    }
    let tau = cfg.tau;
    let mut last_failure = None;
    for halvings in 0..=cfg.max_halvings {
        let substeps = 1usize << halvings;
        let sub_tau = tau / substeps as f64;
        let mut current = prev.clone();
        let mut sub_prev = prev.clone();
        let mut iterations = 0;
        let mut measure = 0.0;
        let mut failed = false;
        for _ in 0..substeps {
            match solve_step(&current, sub_tau, cfg) {
                Ok(solved) => {
                    iterations += solved.iterations;
                    measure = solved.measure;
                    sub_prev = std::mem::replace(&mut current, solved.state);
                }
                Err(e @ Error::InnerSolveFailed(_)) => {
                    last_failure = Some(e);
                    failed = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if failed {
            continue;
        }
        let report = build_report(prev, &current, &sub_prev, tau, sub_tau, cfg, iterations, measure, substeps)?;
        return Ok((current, report));
    }
    Err(last_failure.unwrap_or_else(|| Error::InnerSolveFailed("step failed".into())))
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    prev: &NetworkState,
    state: &NetworkState,
    sub_prev: &NetworkState,
    tau: f64,
    sub_tau: f64,
    cfg: &FlowConfig,
    inner_iters: usize,
    stationarity: f64,
    substeps: usize,
) -> Result<StepReport> {
    let data = assemble_multiplier_data(state);
    let rem = compute_remainders(state, sub_prev, sub_tau)?;
    let multipliers = solve_multipliers_with_cap(&data, &rem, cfg.cond_cap)?;
    let mut velocity_l2sq = 0.0;
    for j in 0..3 {
        let sq: Vec<f64> = state
            .field(j)
            .values()
            .iter()
            .zip(prev.field(j).values())
            .map(|(a, b)| ((a - b) / tau).powi(2))
            .collect();
        velocity_l2sq += trapezoid_integral(&sq, state.field(j).grid());
    }
    let sub_l1 = velocity_l1(state, sub_prev)?;
    Ok(StepReport {
        step: 0,
        time: 0.0,
        energy_before: p_energy(prev),
        energy_after: p_energy(state),
        penalty_value: step_penalty(state, prev, tau)?,
        velocity_l2sq,
        velocity_l1: velocity_l1(state, prev)?,
        multipliers,
        multiplier_bound: multiplier_bound(&data, state, sub_l1, sub_tau).ok(),
        constraint_defect: constraint_vector(state).defect(),
        dets: data.dets,
        oscs: state.oscillations(),
        weak_residual: weak_residual_of(state, sub_prev, sub_tau, &multipliers, DEFAULT_TEST_RESOLUTION)?,
        inner_iters,
        stationarity,
        substeps,
    })
}
