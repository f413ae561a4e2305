//! The minimizing-movements scheme: one constrained minimization per time
//! step, the projection onto the constraint set, trajectories and the
//! a-priori estimates checked along a run.
//!
//! Each step starts the descent at the previous state, so the step functional
//! never exceeds the previous energy. The solver stops at a first-order
//! point; global minimality is not certified.

mod config;
mod flow;
mod inner;
mod projection;
mod trajectory;
mod weak;

pub use config::{ArmijoParams, FlowConfig, NewtonParams};
pub use flow::{check_guard, run_flow, Halted};
pub use inner::{minimize_step, StepReport};
pub use projection::{constraint_jacobian, project_to_h, Projection};
pub use trajectory::{Side, Trajectory};
pub use weak::{weak_residual, weak_residual_of, DEFAULT_TEST_RESOLUTION};

use crate::grid::NetworkState;

/// Euclidean gradients of `C₁ … C₄` with respect to the nodal values, so
/// that `Σ ∇C_q · v` is the derivative of `C_q` in direction `v`.
pub fn constraint_gradients(state: &NetworkState) -> [[Vec<f64>; 3]; 4] {
    let weighted = |j: usize, f: fn(f64) -> f64, sign: f64| -> Vec<f64> {
        let grid = state.field(j).grid();
        state
            .field(j)
            .values()
            .iter()
            .enumerate()
            .map(|(k, v)| sign * grid.weight(k) * f(*v))
            .collect()
    };
    let zero = |j: usize| vec![0.0; state.field(j).len()];
    [
        [weighted(0, f64::sin, -1.0), weighted(1, f64::sin, 1.0), zero(2)],
        [weighted(0, f64::cos, 1.0), weighted(1, f64::cos, -1.0), zero(2)],
        [weighted(0, f64::sin, 1.0), zero(1), weighted(2, f64::sin, -1.0)],
        [weighted(0, f64::cos, -1.0), zero(1), weighted(2, f64::cos, 1.0)],
    ]
}
