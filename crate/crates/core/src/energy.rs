//! The p-elastic energy, the implicit step functional, the junction
//! constraints and the matrices that enter the multiplier system.

use nalgebra::{Matrix2, Vector2};

use crate::error::Result;
use crate::grid::{gradient_of, AngleField, Grid, NetworkState};

/// `|x|^{p-2} x`, with the value `0` at `x = 0` for every `p > 1`.
#[inline]
pub fn flux(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if p == 2.0 {
        x
    } else {
        x.abs().powf(p - 2.0) * x
    }
}

/// `∫ |θ_s|^p ds` with the midpoint rule on cells.
pub fn curve_p_integral(field: &AngleField, p: f64) -> f64 {
    p_integral_of(field.values(), field.grid().spacing(), p)
}

pub(crate) fn p_integral_of(values: &[f64], h: f64, p: f64) -> f64 {
    values
        .windows(2)
        .map(|w| {
            let g = ((w[1] - w[0]) / h).abs();
            if p == 2.0 {
                g * g
            } else {
                g.powf(p)
            }
        })
        .sum::<f64>()
        * h
}

/// Per-curve `∫ |θ_s|^p ds`.
pub fn p_integrals(state: &NetworkState) -> [f64; 3] {
    [0, 1, 2].map(|j| curve_p_integral(state.field(j), state.p()))
}

/// The p-elastic energy `Σ_j (1/p) ∫ |θ^j_s|^p ds`.
pub fn p_energy(state: &NetworkState) -> f64 {
    p_integrals(state).iter().sum::<f64>() / state.p()
}

/// The penalty `(1/2τ) Σ_j ∫ |θ^j - θ^j_prev|² ds`.
pub fn step_penalty(candidate: &NetworkState, prev: &NetworkState, tau: f64) -> Result<f64> {
    candidate.check_compatible(prev)?;
    let mut total = 0.0;
    for j in 0..3 {
        let grid = candidate.field(j).grid();
        let sq: Vec<f64> = candidate
            .field(j)
            .values()
            .iter()
            .zip(prev.field(j).values())
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        total += crate::grid::trapezoid_integral(&sq, grid);
    }
    Ok(total / (2.0 * tau))
}

/// The functional minimized in one implicit step: energy plus the squared L²
/// distance to the previous state, weighted by `1/2τ`.
pub fn implicit_step_energy(candidate: &NetworkState, prev: &NetworkState, tau: f64) -> Result<f64> {
    Ok(p_energy(candidate) + step_penalty(candidate, prev, tau)?)
}

/// `|b + delta|^p - |b|^p` without cancellation when `delta` is small.
fn pow_change(b: f64, delta: f64, p: f64) -> f64 {
    if delta == 0.0 {
        return 0.0;
    }
    if p == 2.0 {
        return delta * (2.0 * b + delta);
    }
    if b != 0.0 {
        let ratio = delta / b;
        if ratio > -1.0 {
            return b.abs().powf(p) * (p * ratio.ln_1p()).exp_m1();
        }
    }
    (b + delta).abs().powf(p) - b.abs().powf(p)
}

/// `E(new) - E(old)` for the implicit step functional, evaluated from the
/// increments so that tiny changes near a minimizer keep their sign.
pub(crate) fn step_energy_change(
    new: &[Vec<f64>; 3],
    old: &[Vec<f64>; 3],
    prev: [&[f64]; 3],
    grids: [&Grid; 3],
    p: f64,
    tau: f64,
) -> f64 {
    let mut total = 0.0;
    for j in 0..3 {
        let h = grids[j].spacing();
        let (x1, x0, xp) = (&new[j], &old[j], prev[j]);
        let m = x0.len();
        let mut d_energy = 0.0;
        for c in 0..m - 1 {
            let b = (x0[c + 1] - x0[c]) / h;
            let delta = ((x1[c + 1] - x0[c + 1]) - (x1[c] - x0[c])) / h;
            d_energy += pow_change(b, delta, p);
        }
        let mut d_penalty = 0.0;
        for k in 0..m {
            let dx = x1[k] - x0[k];
            d_penalty += grids[j].weight(k) * dx * (dx + 2.0 * (x0[k] - xp[k]));
        }
        total += d_energy * h / p + d_penalty / (2.0 * tau);
    }
    total
}

/// Euclidean gradient of the implicit step functional with respect to the
/// nodal values of one curve.
pub(crate) fn euclidean_gradient(values: &[f64], prev: &[f64], grid: &Grid, p: f64, tau: f64) -> Vec<f64> {
    let h = grid.spacing();
    let m = values.len();
    let fluxes: Vec<f64> = gradient_of(values, h).into_iter().map(|g| flux(g, p)).collect();
    (0..m)
        .map(|k| {
            let left = if k > 0 { fluxes[k - 1] } else { 0.0 };
            let right = if k + 1 < m { fluxes[k] } else { 0.0 };
            grid.weight(k) * (values[k] - prev[k]) / tau + left - right
        })
        .collect()
}

/// Discrete gradient of [`implicit_step_energy`]: `(θ - θ_prev)/τ - Δ_p θ` at
/// interior nodes, where `Δ_p` is the staggered p-Laplacian with zero flux
/// through the curve ends. Scaled so that `h Σ_k grad[k] v[k]` is the
/// directional derivative in direction `v`.
pub fn step_gradient(candidate: &NetworkState, prev: &NetworkState, tau: f64) -> Result<[Vec<f64>; 3]> {
    candidate.check_compatible(prev)?;
    let p = candidate.p();
    Ok([0, 1, 2].map(|j| {
        let grid = candidate.field(j).grid();
        let h = grid.spacing();
        euclidean_gradient(candidate.field(j).values(), prev.field(j).values(), grid, p, tau)
            .into_iter()
            .map(|v| v / h)
            .collect()
    }))
}

/// Values of the four junction constraints `(C₁, C₂, C₃, C₄)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintVector {
    pub c: [f64; 4],
}

impl ConstraintVector {
    pub fn defect(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_admissible(&self, tol: f64) -> bool {
        self.defect() <= tol
    }
}

/// `(∫cos θ, ∫sin θ)` by the trapezoid rule.
pub(crate) fn tangent_integral(values: &[f64], grid: &Grid) -> [f64; 2] {
    let mut acc = [0.0, 0.0];
    for (k, v) in values.iter().enumerate() {
        let w = grid.weight(k);
        acc[0] += w * v.cos();
        acc[1] += w * v.sin();
    }
    acc
}

/// `C₁, C₂` compare the chords of curves 1 and 2, `C₃, C₄` those of curves 3
/// and 1. Triod endpoint offsets are subtracted.
pub fn constraint_vector(state: &NetworkState) -> ConstraintVector {
    let t = [0, 1, 2].map(|j| tangent_integral(state.field(j).values(), state.field(j).grid()));
    let off = state.offsets();
    ConstraintVector {
        c: [
            t[0][0] - t[1][0] - off[0][0],
            t[0][1] - t[1][1] - off[0][1],
            t[2][0] - t[0][0] - off[1][0],
            t[2][1] - t[0][1] - off[1][1],
        ],
    }
}

/// `A = ∫ N ⊗ N ds` with `N = (-sin θ, cos θ)`, trapezoid rule.
pub fn normal_matrix(field: &AngleField) -> Matrix2<f64> {
    let grid = field.grid();
    let (mut ss, mut sc, mut cc) = (0.0, 0.0, 0.0);
    for (k, v) in field.values().iter().enumerate() {
        let w = grid.weight(k);
        let (s, c) = v.sin_cos();
        ss += w * s * s;
        sc += w * s * c;
        cc += w * c * c;
    }
    Matrix2::new(ss, -sc, -sc, cc)
}

/// `G = ∫ |θ_s|^p (cos θ, sin θ) ds`.
///
/// Each cell contributes `flux · (Δ sin θ, -Δ cos θ)`, which equals the
/// midpoint value `h |θ_s|^p (cos θ̄, sin θ̄)` times `sinc(hθ_s/2)`. This is the
/// exact discrete derivative of the energy along the directions that rotate a
/// curve's chord, so the multipliers computed from it agree with the discrete
/// first-order conditions.
pub fn g_vector(field: &AngleField, p: f64) -> Vector2<f64> {
    let h = field.grid().spacing();
    let mut acc = Vector2::zeros();
    for w in field.values().windows(2) {
        let f = flux((w[1] - w[0]) / h, p);
        if f != 0.0 {
            acc[0] += f * (w[1].sin() - w[0].sin());
            acc[1] += f * (w[0].cos() - w[1].cos());
        }
    }
    acc
}

/// The per-curve matrices `Aⁱ`, vectors `Gⁱ` and determinants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierMatrices {
    pub a: [Matrix2<f64>; 3],
    pub g: [Vector2<f64>; 3],
    pub dets: [f64; 3],
    pub lengths: [f64; 3],
}

pub fn assemble_multiplier_data(state: &NetworkState) -> MultiplierMatrices {
    let a = [0, 1, 2].map(|j| normal_matrix(state.field(j)));
    MultiplierMatrices {
        a,
        g: [0, 1, 2].map(|j| g_vector(state.field(j), state.p())),
        dets: a.map(|m| m.determinant()),
        lengths: state.lengths(),
    }
}

/// `(det A, ½ ∬ sin²(θ(s) - θ(σ)) ds dσ)` evaluated with the same trapezoid
/// weights; the two agree algebraically.
pub fn det_identity_check(field: &AngleField) -> (f64, f64) {
    let grid = field.grid();
    let v = field.values();
    let mut double = 0.0;
    for k in 0..v.len() {
        let mut row = 0.0;
        for l in 0..v.len() {
            let s = (v[k] - v[l]).sin();
            row += grid.weight(l) * s * s;
        }
        double += grid.weight(k) * row;
    }
    (normal_matrix(field).determinant(), 0.5 * double)
}

/// A modulus of continuity for a sampled angle field, used through its
/// generalized inverse.
pub trait ModulusOfContinuity {
    /// Largest `r` such that `ω(r) <= level`.
    fn inverse(&self, field: &AngleField, level: f64) -> f64;
}

/// `ω(r) = max |θ(s) - θ(σ)|` over node pairs with `|s - σ| <= r`. At lags that
/// are multiples of `h` this is exactly the modulus of the piecewise linear
/// interpolant; the inverse is rounded down to a whole number of cells.
#[derive(Debug, Clone, Copy, Default)]
pub struct SharpDiscreteModulus;

impl ModulusOfContinuity for SharpDiscreteModulus {
    fn inverse(&self, field: &AngleField, level: f64) -> f64 {
        let v = field.values();
        let mut omega: f64 = 0.0;
        let mut lag = 0;
        for m in 1..v.len() {
            let at_lag = (0..v.len() - m).fold(0.0_f64, |acc, k| acc.max((v[k + m] - v[k]).abs()));
            omega = omega.max(at_lag);
            if omega > level {
                break;
            }
            lag = m;
        }
        field.grid().node(lag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationStats {
    pub osc: f64,
    /// `min(osc, π)`.
    pub delta0: f64,
    /// `ω⁻¹(δ₀/4)`.
    pub modulus_inverse_at: f64,
    /// `sin²(δ₀/4) · min(ω⁻¹(δ₀/4), L/2)`, the lower bound on `∫sin²(θ + c)`
    /// and `∫cos²(θ + c)` for every constant `c`.
    pub lemma_constant: f64,
    /// `(L/2) · lemma_constant`, a lower bound on `det A`.
    pub det_lower_bound: f64,
}

pub fn oscillation_stats(field: &AngleField) -> OscillationStats {
    oscillation_stats_with(field, &SharpDiscreteModulus)
}

pub fn oscillation_stats_with(field: &AngleField, modulus: &dyn ModulusOfContinuity) -> OscillationStats {
    let osc = field.oscillation();
    let delta0 = osc.min(std::f64::consts::PI);
    let length = field.grid().length();
    let (modulus_inverse_at, lemma_constant) = if delta0 > 0.0 {
        let r = modulus.inverse(field, delta0 / 4.0);
        (r, (delta0 / 4.0).sin().powi(2) * r.min(length / 2.0))
    } else {
        (length, 0.0)
    };
    OscillationStats {
        osc,
        delta0,
        modulus_inverse_at,
        lemma_constant,
        det_lower_bound: 0.5 * length * lemma_constant,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::NetworkKind;
    use std::f64::consts::PI;

    fn field(l: f64, m: usize, f: impl Fn(f64) -> f64) -> AngleField {
        AngleField::from_fn(Grid::new(l, m).unwrap(), f).unwrap()
    }

    fn network(fields: [AngleField; 3], p: f64) -> NetworkState {
        NetworkState::new(fields, NetworkKind::Theta, p).unwrap()
    }

    #[test]
    fn energy_of_flat_and_circular_curves() {
        let flat = network([field(2.0, 9, |_| 0.3), field(2.0, 9, |_| 0.3), field(1.0, 5, |_| 0.3)], 2.0);
        assert_eq!(p_energy(&flat), 0.0);

        let kappa = 1.7;
        let s = network(
            [field(2.0, 41, |s| kappa * s), field(2.0, 9, |_| 0.0), field(1.0, 5, |_| 0.0)],
            2.0,
        );
        assert!((p_energy(&s) - kappa * kappa * 2.0 / 2.0).abs() < 1e-12);

        let s = network(
            [field(1.0, 21, |s| 2.0 * s), field(1.0, 9, |_| 0.0), field(1.0, 5, |_| 0.0)],
            3.0,
        );
        assert!((p_energy(&s) - 8.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn step_energy_examples() {
        let s = network([field(2.0, 9, |s| s), field(2.0, 9, |s| -s), field(1.0, 5, |_| 0.0)], 2.0);
        assert_eq!(implicit_step_energy(&s, &s, 0.1).unwrap(), p_energy(&s));

        let zero = network([field(2.0, 9, |_| 0.0), field(2.0, 9, |_| 0.0), field(1.0, 5, |_| 0.0)], 2.0);
        let c = 0.4;
        let cst = network([field(2.0, 9, |_| c), field(2.0, 9, |_| c), field(1.0, 5, |_| c)], 2.0);
        let expected = p_energy(&cst) + c * c * 5.0 / 2.0;
        assert!((implicit_step_energy(&cst, &zero, 1.0).unwrap() - expected).abs() < 1e-14);

        let other = network([field(2.0, 5, |_| 0.0), field(2.0, 9, |_| 0.0), field(1.0, 5, |_| 0.0)], 2.0);
        assert!(implicit_step_energy(&other, &zero, 1.0).is_err());
    }

    #[test]
    fn energy_change_matches_direct_difference() {
        let a = network(
            [field(2.0, 13, |s| s.sin()), field(2.0, 13, |s| -0.5 * s), field(1.0, 7, |s| s * s)],
            1.5,
        );
        let prev = network([field(2.0, 13, |_| 0.1), field(2.0, 13, |_| 0.0), field(1.0, 7, |_| 0.2)], 1.5);
        let mut bumped = a.cloned_values();
        bumped[0][3] += 1e-3;
        bumped[2][6] -= 2e-3;
        let b = a.with_values(bumped.clone()).unwrap();
        let direct = implicit_step_energy(&b, &prev, 0.05).unwrap() - implicit_step_energy(&a, &prev, 0.05).unwrap();
        let grids = [0, 1, 2].map(|j| a.field(j).grid());
        let change = step_energy_change(&bumped, &a.cloned_values(), [0, 1, 2].map(|j| prev.field(j).values()), grids, 1.5, 0.05);
        assert!((direct - change).abs() < 1e-12 * (1.0 + direct.abs()));
    }

    #[test]
    fn constraint_examples() {
        let alpha = 0.8;
        let s = network([field(1.0, 9, |_| alpha), field(1.0, 9, |_| alpha), field(1.0, 9, |_| alpha)], 2.0);
        assert!(constraint_vector(&s).defect() < 1e-15);

        let s = network([field(2.0, 9, |_| 0.0), field(1.0, 9, |_| 0.0), field(1.0, 9, |_| 0.0)], 2.0);
        let c = constraint_vector(&s).c;
        assert!((c[0] - 1.0).abs() < 1e-14 && c[1].abs() < 1e-14);
        assert!((c[2] + 1.0).abs() < 1e-14 && c[3].abs() < 1e-14);
    }

    #[test]
    fn multiplier_data_examples() {
        let alpha: f64 = 0.6;
        let f = field(1.5, 17, |_| alpha);
        let a = normal_matrix(&f);
        let (s, c) = alpha.sin_cos();
        let expected = Matrix2::new(s * s, -s * c, -s * c, c * c) * 1.5;
        assert!((a - expected).norm() < 1e-14);
        assert!(a.determinant().abs() < 1e-14);
        assert_eq!(g_vector(&f, 2.0), Vector2::zeros());

        let f = field(PI, 201, |s| s);
        let a = normal_matrix(&f);
        assert!((a - Matrix2::identity() * (PI / 2.0)).norm() < 1e-3);
        assert!((a.determinant() - PI * PI / 4.0).abs() < 1e-3);

        let f = field(2.0 * PI, 401, |s| s);
        assert!(g_vector(&f, 2.0).norm() < 1e-3);
    }

    #[test]
    fn trace_of_normal_matrix_is_length() {
        let f = field(1.3, 40, |s| (5.0 * s).sin() * 3.0);
        assert!((normal_matrix(&f).trace() - 1.3).abs() < 1e-12);
    }

    #[test]
    fn det_identity_examples() {
        let (d, i) = det_identity_check(&field(1.0, 11, |_| 0.4));
        assert!(d.abs() < 1e-15 && i.abs() < 1e-15);

        let (d, i) = det_identity_check(&field(PI, 201, |s| s));
        assert!((d - PI * PI / 4.0).abs() < 1e-3);
        assert!((d - i).abs() < 1e-6);
    }

    #[test]
    fn oscillation_examples() {
        let st = oscillation_stats(&field(1.0, 11, |_| 0.2));
        assert_eq!(st.osc, 0.0);
        assert_eq!(st.det_lower_bound, 0.0);

        let f = field(PI, 201, |s| s);
        let st = oscillation_stats(&f);
        assert!((st.osc - PI).abs() < 1e-12);
        assert_eq!(st.delta0, st.osc.min(PI));
        // ω(r) = r for this field, so the inverse is π/4 up to one cell
        let h = f.grid().spacing();
        assert!(st.modulus_inverse_at <= PI / 4.0 && st.modulus_inverse_at > PI / 4.0 - h);
        assert!((st.det_lower_bound - (PI / 2.0) * 0.5 * (PI / 4.0)).abs() < h);
        assert!(st.det_lower_bound <= normal_matrix(&f).determinant());
    }

    #[test]
    fn gradient_of_hat_is_laplacian_stencil() {
        let m = 9;
        let g = Grid::new(1.0, m).unwrap();
        let h = g.spacing();
        let mut v = vec![0.0; m];
        v[4] = 1.0;
        let hat = AngleField::new(g, v).unwrap();
        let s = network([hat.clone(), hat.clone(), hat], 2.0);
        let grad = step_gradient(&s, &s, 0.1).unwrap();
        assert!((grad[0][4] - 2.0 / (h * h)).abs() < 1e-9);
        assert!((grad[0][3] + 1.0 / (h * h)).abs() < 1e-9);
        assert!((grad[0][5] + 1.0 / (h * h)).abs() < 1e-9);
        assert_eq!(grad[0][1], 0.0);
    }

    #[test]
    fn gradient_vanishes_for_constant_fields() {
        let s = network([field(2.0, 9, |_| 0.3), field(2.0, 9, |_| 0.3), field(1.0, 5, |_| 0.3)], 1.5);
        let grad = step_gradient(&s, &s, 0.1).unwrap();
        assert!(grad.iter().flatten().all(|&v| v == 0.0));
    }
}
