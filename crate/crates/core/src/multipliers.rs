//! The 4×4 Lagrange multiplier system, its Jacobian interpretation and the
//! a-priori bound on the multipliers.
//!
//! Multipliers are written as a row `(λ¹, λ², μ¹, μ²)` multiplying the KKT
//! matrix from the left, exactly as in
//!
//! ```text
//!  λ·A² + μ·A³        = G³ - G² + R²³
//! -λ·(A¹ + A²) + μ·A¹ = G² - G¹ + R²¹
//! ```
//!
//! Read column-wise, the same matrix is the Jacobian of the constraint vector
//! along the variation directions `φ₁ … φ₄`: entry `(q, r)` is `∂C_q/∂t_r`.

use nalgebra::{Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::energy::MultiplierMatrices;
use crate::error::{Error, Result};
use crate::grid::{rotate, NetworkState};

pub const DEFAULT_COND_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Multipliers {
    pub lambda: [f64; 2],
    pub mu: [f64; 2],
}

impl Multipliers {
    pub fn as_row(&self) -> [f64; 4] {
        [self.lambda[0], self.lambda[1], self.mu[0], self.mu[1]]
    }

    /// `|λ| + |μ|` with Euclidean norms.
    pub fn norm_sum(&self) -> f64 {
        norm2(self.lambda) + norm2(self.mu)
    }

    /// `|λ|² + |μ|²`.
    pub fn norm_sq(&self) -> f64 {
        self.as_row().iter().map(|v| v * v).sum()
    }

    /// Both 2-vectors rotated by `alpha`. Rotating the network by `alpha`
    /// rotates its multipliers this way.
    pub fn rotated(&self, alpha: f64) -> Multipliers {
        Multipliers {
            lambda: rotate(self.lambda, alpha),
            mu: rotate(self.mu, alpha),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_row().iter().all(|v| v.is_finite())
    }
}

fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktMatrix {
    pub j: Matrix4<f64>,
    /// `‖J‖₁ ‖J⁻¹‖₁`, infinite when the factorization breaks down.
    pub cond_estimate: f64,
}

/// Block matrix `(A² | -(A¹+A²) ; A³ | A¹)`.
pub fn assemble_kkt(data: &MultiplierMatrices) -> KktMatrix {
    let [a1, a2, a3] = data.a;
    let mut j = Matrix4::zeros();
    j.fixed_view_mut::<2, 2>(0, 0).copy_from(&a2);
    j.fixed_view_mut::<2, 2>(0, 2).copy_from(&(-(a1 + a2)));
    j.fixed_view_mut::<2, 2>(2, 0).copy_from(&a3);
    j.fixed_view_mut::<2, 2>(2, 2).copy_from(&a1);
    let cond_estimate = match j.lu().try_inverse() {
        Some(inv) if inv.iter().all(|v| v.is_finite()) => norm1(&j) * norm1(&inv),
        _ => f64::INFINITY,
    };
    KktMatrix { j, cond_estimate }
}

fn norm1(m: &Matrix4<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Remainders {
    pub r23: [f64; 2],
    pub r21: [f64; 2],
}

/// `(1/τ) ∫ (θ - θ_prev)(sin θ, -cos θ) ds` on one curve.
fn time_derivative_moment(state: &NetworkState, prev: &NetworkState, j: usize, tau: f64) -> [f64; 2] {
    let grid = state.field(j).grid();
    let mut acc = [0.0, 0.0];
    for (k, (th, pr)) in state.field(j).values().iter().zip(prev.field(j).values()).enumerate() {
        let d = grid.weight(k) * (th - pr);
        let (s, c) = th.sin_cos();
        acc[0] += d * s;
        acc[1] -= d * c;
    }
    [acc[0] / tau, acc[1] / tau]
}

/// The time-derivative terms of the discrete multiplier system, with
/// `-R²³ = v₂ - v₃` and `-R²¹ = v₁ - v₂`, where `v_j` is the moment above.
pub fn compute_remainders(candidate: &NetworkState, prev: &NetworkState, tau: f64) -> Result<Remainders> {
    candidate.check_compatible(prev)?;
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig(format!("time step must be positive, got {tau}")));
    }
    let v = [0, 1, 2].map(|j| time_derivative_moment(candidate, prev, j, tau));
    Ok(Remainders {
        r23: [v[2][0] - v[1][0], v[2][1] - v[1][1]],
        r21: [v[1][0] - v[0][0], v[1][1] - v[0][1]],
    })
}

/// The right-hand row `(G³ - G² + R²³ | G² - G¹ + R²¹)`.
pub fn multiplier_rhs(data: &MultiplierMatrices, rem: &Remainders) -> Vector4<f64> {
    let [g1, g2, g3] = data.g;
    let b1 = g3 - g2 + Vector2::from(rem.r23);
    let b2 = g2 - g1 + Vector2::from(rem.r21);
    Vector4::new(b1[0], b1[1], b2[0], b2[1])
}

pub fn solve_multipliers(data: &MultiplierMatrices, rem: &Remainders) -> Result<Multipliers> {
    solve_multipliers_with_cap(data, rem, DEFAULT_COND_CAP)
}

/// Solves `x · J = rhs` by LU with partial pivoting on `Jᵀ`. Refuses when the
/// condition estimate exceeds `cond_cap`; with two or more flat curves the
/// system has no unique solution.
pub fn solve_multipliers_with_cap(data: &MultiplierMatrices, rem: &Remainders, cond_cap: f64) -> Result<Multipliers> {
    let kkt = assemble_kkt(data);
    if !(kkt.cond_estimate <= cond_cap) {
        return Err(Error::SingularSystem { cond: kkt.cond_estimate });
    }
    let rhs = multiplier_rhs(data, rem);
    let x = kkt
        .j
        .transpose()
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularSystem { cond: f64::INFINITY })?;
    let m = Multipliers {
        lambda: [x[0], x[1]],
        mu: [x[2], x[3]],
    };
    if !m.is_finite() {
        return Err(Error::SingularSystem { cond: kkt.cond_estimate });
    }
    Ok(m)
}

/// Max-norm defect of both 2-vector equations when `mult` is substituted back.
pub fn multiplier_residual(data: &MultiplierMatrices, rem: &Remainders, mult: &Multipliers) -> f64 {
    let j = assemble_kkt(data).j;
    let x = Vector4::from(mult.as_row());
    (j.transpose() * x - multiplier_rhs(data, rem)).amax()
}

fn inverse_norm_bound(det: f64, length: f64, j: usize) -> Result<f64> {
    if !(det > 1e-10 * length * length) {
        return Err(Error::DegenerateGeometry(format!(
            "curve {} is too close to flat (det A = {det:.3e})",
            j + 1
        )));
    }
    // ‖A⁻¹‖ = λ_max / det ≤ trace / det, and the trace is the length
    Ok(length / det)
}

/// The constant `C` with `|λ| + |μ| ≤ C·B`, where `B` bounds both halves `b₁`,
/// `b₂` of the right-hand row. Since `|Gⁱ| ≤ ∫|θⁱ_s|^p`, one may take
/// `B = Σ∫|θ_s|^p + (1/τ)Σ∫|θ - θ_prev|`. The factors of
/// the block elimination `μ (I + A³ M) = b₂ (A¹)⁻¹ + b₁ M`, `M = (A¹)⁻¹ + (A²)⁻¹`,
/// `λ = (b₁ - μ A³)(A²)⁻¹` are bounded one by one. Uses only `L₁, L₂, L₃`
/// and `det A¹`, `det A²`.
pub fn bound_constant(data: &MultiplierMatrices) -> Result<f64> {
    constant_for_dets(data.dets, data.lengths)
}

/// [`bound_constant`] from the determinants alone. Lower bounds on the
/// determinants give an upper bound on the constant.
pub fn constant_for_dets(dets: [f64; 3], lengths: [f64; 3]) -> Result<f64> {
    let a1 = inverse_norm_bound(dets[0], lengths[0], 0)?;
    let a2 = inverse_norm_bound(dets[1], lengths[1], 1)?;
    Ok(constant_from(a1, a2, lengths))
}

/// `C` from explicit bounds `a_i ≥ ‖(Aⁱ)⁻¹‖`. Nondecreasing in both.
pub fn constant_from(a1: f64, a2: f64, lengths: [f64; 3]) -> f64 {
    let [l1, l2, l3] = lengths;
    let m = a1 + a2;
    // ‖(I + A³M)⁻¹‖ ≤ √cond(M), λ_max(M) ≤ a₁ + a₂, λ_min(M) ≥ 1/L₁ + 1/L₂
    let r = (m / (1.0 / l1 + 1.0 / l2)).sqrt();
    let mu_factor = (a1 + m) * r;
    mu_factor + a2 * (1.0 + l3 * mu_factor)
}

/// `C · Σ∫|θ_s|^p + (C/τ) · velocity_l1`, an upper bound for `|λ| + |μ|` as
/// returned by [`solve_multipliers`] at `state`. Here `velocity_l1` is
/// `Σ∫|θ - θ_prev|`, so that `velocity_l1 / τ` is the L¹ norm of the discrete
/// velocity.
pub fn multiplier_bound(data: &MultiplierMatrices, state: &NetworkState, velocity_l1: f64, tau: f64) -> Result<f64> {
    let c = bound_constant(data)?;
    let s: f64 = crate::energy::p_integrals(state).iter().sum();
    Ok(c * s + c * velocity_l1 / tau)
}

/// Bound for `Σ τ(|λ|² + |μ|²)` over a run up to time `horizon` with
/// initial energy `d0`, given a bound `c` on the constant of every step.
/// Squaring `|λ| + |μ| ≤ C(p D + ∫|V|)` and using `∫|V| ≤ √Λ ‖V‖`, with `Λ`
/// the total length, gives `2C² max(p², 2Λ)(T D₀ + 1) D₀`.
pub fn multiplier_budget(c: f64, p: f64, total_length: f64, horizon: f64, d0: f64) -> f64 {
    2.0 * c * c * (p * p).max(2.0 * total_length) * (horizon * d0 + 1.0) * d0
}

/// `Σ_j ∫ |θ^j - θ^j_prev| ds`.
pub fn velocity_l1(state: &NetworkState, prev: &NetworkState) -> Result<f64> {
    state.check_compatible(prev)?;
    let mut total = 0.0;
    for j in 0..3 {
        let grid = state.field(j).grid();
        for (k, (a, b)) in state.field(j).values().iter().zip(prev.field(j).values()).enumerate() {
            total += grid.weight(k) * (a - b).abs();
        }
    }
    Ok(total)
}

/// Nodal values of the variation directions `φ₁ … φ₄` at `state`:
/// `φ₁ = (0, sin θ², -sin θ³)`, `φ₂ = (0, -cos θ², cos θ³)`,
/// `φ₃ = (sin θ¹, -sin θ², 0)`, `φ₄ = (-cos θ¹, cos θ², 0)`.
pub fn variation_directions(state: &NetworkState) -> [[Vec<f64>; 3]; 4] {
    let sin = |j: usize, sign: f64| -> Vec<f64> { state.field(j).values().iter().map(|v| sign * v.sin()).collect() };
    let cos = |j: usize, sign: f64| -> Vec<f64> { state.field(j).values().iter().map(|v| sign * v.cos()).collect() };
    let zero = |j: usize| vec![0.0; state.field(j).len()];
    [
        [zero(0), sin(1, 1.0), sin(2, -1.0)],
        [zero(0), cos(1, -1.0), cos(2, 1.0)],
        [sin(0, 1.0), sin(1, -1.0), zero(2)],
        [cos(0, -1.0), cos(1, 1.0), zero(2)],
    ]
}
