//! Residuals of the stationary system, the per-curve conserved quantity and
//! the balance condition at the triple junctions.
//!
//! At a critical network with multipliers `λ`, `μ` the fluxes
//! `f = |θ_s|^{p-2}θ_s` satisfy
//!
//! ```text
//! f¹_s = -(λ¹ - μ¹) sin θ¹ + (λ² - μ²) cos θ¹
//! f²_s =   λ¹ sin θ² - λ² cos θ²
//! f³_s = -μ¹ sin θ³ + μ² cos θ³
//! ```
//!
//! with `θ_s = 0` at every curve end. Fluxes live on cell midpoints, so
//! `f_s` is a centred difference at interior nodes.

use serde::{Deserialize, Serialize};

use crate::energy::flux;
use crate::error::Result;
use crate::grid::{gradient_of, AngleField, NetworkKind, NetworkState};
use crate::multipliers::{compute_remainders, solve_multipliers, Multipliers, Remainders};
use crate::energy::assemble_multiplier_data;
use crate::scheme::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryReport {
    /// Index of the state the report was computed at.
    pub step: usize,
    /// Sup over interior nodes of the defect in each curve's equation.
    pub residuals: [f64; 3],
    /// Largest `|θ_s|` on a boundary cell.
    pub bc_defect: f64,
    /// Largest `|θ_s|` at a curve end, from the flux extrapolated to the end
    /// point. An exact discrete critical point still has end cell gradients
    /// of order `h` times the forcing; this one vanishes to second order.
    pub bc_extrapolated: f64,
    /// `sup - inf` of each curve's conserved quantity.
    pub conserved_drift: [f64; 3],
    /// Largest defect of the junction balance over both junctions.
    pub junction_balance_defect: f64,
    pub multipliers: Multipliers,
}

impl StationaryReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, &r| m.max(r))
    }
}

/// `c` with `f_s = -c₁ sin θ + c₂ cos θ` on curve `j`; the same vector enters
/// the conserved quantity.
pub fn curve_coefficient(mult: &Multipliers, j: usize) -> [f64; 2] {
    let (l, m) = (mult.lambda, mult.mu);
    match j {
        0 => [l[0] - m[0], l[1] - m[1]],
        1 => [-l[0], -l[1]],
        _ => m,
    }
}

/// Cell fluxes `|θ_s|^{p-2}θ_s` of one curve.
pub fn cell_fluxes(field: &AngleField, p: f64) -> Vec<f64> {
    gradient_of(field.values(), field.grid().spacing()).into_iter().map(|g| flux(g, p)).collect()
}

fn inverse_flux(f: f64, p: f64) -> f64 {
    if f == 0.0 {
        0.0
    } else {
        f.signum() * f.abs().powf(1.0 / (p - 1.0))
    }
}

/// Flux at both ends, extrapolated linearly from the two nearest cells.
fn end_fluxes(fl: &[f64]) -> [f64; 2] {
    let n = fl.len();
    if n < 2 {
        return [fl[0], fl[0]];
    }
    [1.5 * fl[0] - 0.5 * fl[1], 1.5 * fl[n - 1] - 0.5 * fl[n - 2]]
}

/// `f_s` at both ends from one-sided second-order differences.
fn end_flux_derivatives(fl: &[f64], h: f64) -> [f64; 2] {
    let n = fl.len();
    if n < 3 {
        let d = (fl[n - 1] - fl[0]) / h;
        return [d, d];
    }
    [
        (-2.0 * fl[0] + 3.0 * fl[1] - fl[2]) / h,
        (2.0 * fl[n - 1] - 3.0 * fl[n - 2] + fl[n - 3]) / h,
    ]
}

/// Node values of `θ_s`: averages of the neighbouring cells inside, the
/// extrapolated end values at the ends.
fn nodal_gradient(field: &AngleField, p: f64) -> Vec<f64> {
    let g = gradient_of(field.values(), field.grid().spacing());
    let fl: Vec<f64> = g.iter().map(|&v| flux(v, p)).collect();
    let ends = end_fluxes(&fl).map(|f| inverse_flux(f, p));
    let m = field.len();
    (0..m)
        .map(|k| {
            if k == 0 {
                ends[0]
            } else if k + 1 == m {
                ends[1]
            } else {
                0.5 * (g[k - 1] + g[k])
            }
        })
        .collect()
}

/// `((p-1)/p)|θ_s|^p - coeff·(cos θ, sin θ)` at every node.
pub fn conserved_quantity(field: &AngleField, coeff: [f64; 2], p: f64) -> Vec<f64> {
    nodal_gradient(field, p)
        .iter()
        .zip(field.values())
        .map(|(g, th)| (p - 1.0) / p * g.abs().powf(p) - (coeff[0] * th.cos() + coeff[1] * th.sin()))
        .collect()
}

fn drift(q: &[f64]) -> f64 {
    let (lo, hi) = q.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

/// Sup-norm residual per curve for the given cell fluxes.
pub fn residuals_from_fluxes(state: &NetworkState, mult: &Multipliers, fluxes: &[Vec<f64>; 3]) -> [f64; 3] {
    [0, 1, 2].map(|j| {
        let field = state.field(j);
        let h = field.grid().spacing();
        let c = curve_coefficient(mult, j);
        let v = field.values();
        (1..v.len() - 1).fold(0.0_f64, |m, k| {
            let rhs = -c[0] * v[k].sin() + c[1] * v[k].cos();
            m.max(((fluxes[j][k] - fluxes[j][k - 1]) / h - rhs).abs())
        })
    })
}

/// Junction balance `Σ f^i_s Nⁱ - Σ Q̃ᵢ Tⁱ` at `s = 0` and at the far ends,
/// where `Q̃ᵢ` is curve `i`'s conserved quantity. Returns the larger norm.
/// A triod has its only junction at `s = 0`.
pub fn junction_balance_from_fluxes(state: &NetworkState, mult: &Multipliers, fluxes: &[Vec<f64>; 3]) -> f64 {
    let p = state.p();
    let mut defect = [[0.0; 2]; 2];
    for j in 0..3 {
        let field = state.field(j);
        let h = field.grid().spacing();
        let df = end_flux_derivatives(&fluxes[j], h);
        let q = conserved_quantity(field, curve_coefficient(mult, j), p);
        let v = field.values();
        let ends = [(0, v[0]), (v.len() - 1, v[v.len() - 1])];
        for (e, &(k, th)) in ends.iter().enumerate() {
            let (s, c) = th.sin_cos();
            defect[e][0] += df[e] * -s - q[k] * c;
            defect[e][1] += df[e] * c - q[k] * s;
        }
    }
    let junctions = match state.kind() {
        NetworkKind::Theta => 2,
        NetworkKind::Triod { .. } => 1,
    };
    defect[..junctions].iter().map(|d| d[0].hypot(d[1])).fold(0.0, f64::max)
}

pub fn junction_balance(state: &NetworkState, mult: &Multipliers) -> f64 {
    let fluxes = [0, 1, 2].map(|j| cell_fluxes(state.field(j), state.p()));
    junction_balance_from_fluxes(state, mult, &fluxes)
}

/// Residuals of the stationary system with multipliers `mult`.
pub fn stationary_residual(state: &NetworkState, mult: &Multipliers) -> StationaryReport {
    let p = state.p();
    let fluxes = [0, 1, 2].map(|j| cell_fluxes(state.field(j), p));
    let bc_extrapolated = fluxes
        .iter()
        .flat_map(|fl| end_fluxes(fl))
        .map(|f| inverse_flux(f, p).abs())
        .fold(0.0, f64::max);
    let bc_defect = fluxes
        .iter()
        .flat_map(|fl| [fl[0], fl[fl.len() - 1]])
        .map(|f| inverse_flux(f, p).abs())
        .fold(0.0, f64::max);
    StationaryReport {
        step: 0,
        residuals: residuals_from_fluxes(state, mult, &fluxes),
        bc_defect,
        bc_extrapolated,
        conserved_drift: [0, 1, 2].map(|j| drift(&conserved_quantity(state.field(j), curve_coefficient(mult, j), p))),
        junction_balance_defect: junction_balance_from_fluxes(state, mult, &fluxes),
        multipliers: *mult,
    }
}

/// Looks at the last `window` steps for the smallest velocity. If its L²
/// norm is at most `tol`, returns the stationary residuals at that state with
/// the step's multipliers. A trajectory without steps is judged by its
/// initial state with the multipliers of the static system.
pub fn detect_stationarity(traj: &Trajectory, window: usize, tol: f64) -> Result<Option<StationaryReport>> {
    if traj.step_count() == 0 {
        let state = traj.initial();
        let mult = solve_multipliers(&assemble_multiplier_data(state), &Remainders::default())?;
        let report = stationary_residual(state, &mult);
        return Ok((report.max_residual() <= tol).then_some(report));
    }
    let first = traj.step_count().saturating_sub(window);
    let best = traj.reports[first..]
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.velocity_l2sq.total_cmp(&b.1.velocity_l2sq))
        .map(|(i, r)| (first + i + 1, r));
    let Some((step, report)) = best else { return Ok(None) };
    if report.velocity_l2sq.sqrt() > tol {
        return Ok(None);
    }
    let mut out = stationary_residual(&traj.states[step], &report.multipliers);
    out.step = step;
    Ok(Some(out))
}

/// Multipliers of a single state treated as the result of a step from
/// `prev`; with `prev == state` these solve the static system.
pub fn multipliers_at(state: &NetworkState, prev: &NetworkState, tau: f64) -> Result<Multipliers> {
    let rem = compute_remainders(state, prev, tau)?;
    solve_multipliers(&assemble_multiplier_data(state), &rem)
}
