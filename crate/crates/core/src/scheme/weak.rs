use super::{constraint_gradients, Trajectory};
use crate::energy::euclidean_gradient;
use crate::error::{Error, Result};
use crate::grid::NetworkState;
use crate::multipliers::Multipliers;

pub const DEFAULT_TEST_RESOLUTION: usize = 16;

/// The one-step weak form tested against hat functions: for every curve and
/// every hat `φ` centred at one of `test_resolution + 1` equispaced points
/// (ends included), the discrete value of
/// `∫ V φ + ∫ |θ_s|^{p-2}θ_s φ_s + λ·δC + μ·δC` divided by `‖φ‖_{L²}`.
/// Returns the largest magnitude. Hats at the ends test the natural boundary
/// condition `θ_s = 0`.
pub fn weak_residual_of(
    state: &NetworkState,
    prev: &NetworkState,
    tau: f64,
    mult: &Multipliers,
    test_resolution: usize,
) -> Result<f64> {
    state.check_compatible(prev)?;
    if test_resolution == 0 {
        return Err(Error::InvalidConfig("test resolution must be at least 1".into()));
    }
    let nu = mult.as_row();
    let b = constraint_gradients(state);
    let mut worst: f64 = 0.0;
    for j in 0..3 {
        let grid = state.field(j).grid();
        let mut r = euclidean_gradient(state.field(j).values(), prev.field(j).values(), grid, state.p(), tau);
        for (k, rk) in r.iter_mut().enumerate() {
            *rk += (0..4).map(|q| nu[q] * b[q][j][k]).sum::<f64>();
        }
        let width = grid.length() / test_resolution as f64;
        for c in 0..=test_resolution {
            let centre = c as f64 * width;
            let (mut action, mut norm_sq) = (0.0, 0.0);
            for (k, rk) in r.iter().enumerate() {
                let phi = (1.0 - (grid.node(k) - centre).abs() / width).max(0.0);
                action += rk * phi;
                norm_sq += grid.weight(k) * phi * phi;
            }
            if norm_sq > 0.0 {
                worst = worst.max(action.abs() / norm_sq.sqrt());
            }
        }
    }
    Ok(worst)
}

/// [`weak_residual_of`] for step `step` (from 1) of a trajectory, with that
/// step's reported multipliers.
pub fn weak_residual(traj: &Trajectory, step: usize, test_resolution: usize) -> Result<f64> {
    if step == 0 || step > traj.step_count() {
        return Err(Error::InvalidConfig(format!(
            "step {step} outside 1..={}",
            traj.step_count()
        )));
    }
    weak_residual_of(
        &traj.states[step],
        &traj.states[step - 1],
        traj.tau,
        &traj.reports[step - 1].multipliers,
        test_resolution,
    )
}
