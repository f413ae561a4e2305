use nalgebra::{Matrix4, Vector4};

use super::FlowConfig;
use crate::energy::{constraint_vector, normal_matrix};
use crate::error::{Error, Result};
use crate::grid::NetworkState;
use crate::multipliers::variation_directions;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub state: NetworkState,
    /// Accumulated coefficients along `φ₁ … φ₄`.
    pub shift: [f64; 4],
    pub iterations: usize,
}

/// `∂C_q/∂t_r` along `φ₁ … φ₄` at `state`: the KKT matrix read column-wise.
pub fn constraint_jacobian(state: &NetworkState) -> Matrix4<f64> {
    let [a1, a2, a3] = [0, 1, 2].map(|j| normal_matrix(state.field(j)));
    let mut j = Matrix4::zeros();
    j.fixed_view_mut::<2, 2>(0, 0).copy_from(&a2);
    j.fixed_view_mut::<2, 2>(0, 2).copy_from(&(-(a1 + a2)));
    j.fixed_view_mut::<2, 2>(2, 0).copy_from(&a3);
    j.fixed_view_mut::<2, 2>(2, 2).copy_from(&a1);
    j
}

fn solve_capped(j: &Matrix4<f64>, rhs: &Vector4<f64>, cap: f64) -> Result<Vector4<f64>> {
    let lu = j.lu();
    let inv = lu.try_inverse().ok_or(Error::SingularSystem { cond: f64::INFINITY })?;
    let norm1 = |m: &Matrix4<f64>| {
        m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    };
    let cond = norm1(j) * norm1(&inv);
    if !(cond <= cap) {
        return Err(Error::SingularSystem { cond });
    }
    Ok(inv * rhs)
}

/// Newton's method for `C(θ + Σ t_r φ_r(θ)) = 0`, re-evaluating the directions
/// at every iterate.
pub fn project_to_h(state: &NetworkState, cfg: &FlowConfig) -> Result<Projection> {
    let mut current = state.clone();
    let mut shift = [0.0; 4];
    let mut defect = constraint_vector(&current).defect();
    let start = defect;
    let mut iterations = 0;
    while defect > cfg.newton.tol {
        if iterations == cfg.newton.max_iters || !defect.is_finite() || defect > 1e3 * start.max(1.0) {
            if defect <= cfg.tol_constraint {
                break;
            }
            return Err(Error::ProjectionFailed { iterations, defect });
        }
        let c = Vector4::from(constraint_vector(&current).c);
        let dt = solve_capped(&constraint_jacobian(&current), &(-c), cfg.cond_cap)?;
        let phi = variation_directions(&current);
        let mut values = current.cloned_values();
        for (r, dir) in phi.iter().enumerate() {
            for j in 0..3 {
                for (v, d) in values[j].iter_mut().zip(&dir[j]) {
                    *v += dt[r] * d;
                }
            }
            shift[r] += dt[r];
        }
        let next = current.with_values(values)?;
        let next_defect = constraint_vector(&next).defect();
        iterations += 1;
        if next_defect >= defect && defect <= cfg.tol_constraint {
            // roundoff floor reached; keep the better iterate
            break;
        }
        current = next;
        defect = next_defect;
    }
    Ok(Projection {
        state: current,
        shift,
        iterations,
    })
}
