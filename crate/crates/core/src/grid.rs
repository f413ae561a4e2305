//! Uniform arc-length grids, angle fields and network states.
//!
//! Every curve of a network is described by its tangent angle `θ` sampled on
//! a uniform grid of `[0, L]`. Derivatives live on cell midpoints, zeroth
//! order integrals use the trapezoid rule on nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform grid on `[0, length]` with `node_count` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridData")]
pub struct Grid {
    length: f64,
    node_count: usize,
}

impl Grid {
    pub fn new(length: f64, node_count: usize) -> Result<Grid> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        if node_count < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes, got {node_count}"
            )));
        }
        Ok(Grid { length, node_count })
    }

    /// Grid with roughly `nodes_per_unit` cells per unit length.
    pub fn with_resolution(length: f64, nodes_per_unit: usize) -> Result<Grid> {
        let cells = (length * nodes_per_unit as f64).round().max(2.0) as usize;
        Grid::new(length, cells + 1)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn cell_count(&self) -> usize {
        self.node_count - 1
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.cell_count() as f64
    }

    /// Arc-length coordinate of node `k`; the last node is exactly `length`.
    pub fn node(&self, k: usize) -> f64 {
        if k + 1 == self.node_count {
            self.length
        } else {
            k as f64 * self.spacing()
        }
    }

    /// Trapezoid weight of node `k`.
    pub fn weight(&self, k: usize) -> f64 {
        let h = self.spacing();
        if k == 0 || k + 1 == self.node_count {
            0.5 * h
        } else {
            h
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.node_count).map(|k| self.weight(k)).collect()
    }
}

/// Tangent angle of one curve, `values[k] ≈ θ(k h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldData")]
pub struct AngleField {
    grid: Grid,
    values: Vec<f64>,
}

impl AngleField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<AngleField> {
        if values.len() != grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite angle at node {k}")));
        }
        Ok(AngleField { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<AngleField> {
        let values = (0..grid.node_count()).map(|k| f(grid.node(k))).collect();
        AngleField::new(grid, values)
    }

    pub fn constant(grid: Grid, angle: f64) -> Result<AngleField> {
        AngleField::new(grid, vec![angle; grid.node_count()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<AngleField> {
        AngleField::new(self.grid, values)
    }

    /// The field rotated by a constant angle.
    pub fn shifted(&self, alpha: f64) -> AngleField {
        AngleField {
            grid: self.grid,
            values: self.values.iter().map(|v| v + alpha).collect(),
        }
    }

    /// `max θ - min θ` over the nodes.
    pub fn oscillation(&self) -> f64 {
        let (lo, hi) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi - lo
    }

    /// Trapezoid L² norm.
    pub fn l2_norm(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        trapezoid_integral(&sq, &self.grid).sqrt()
    }
}

/// Difference quotients `(θ[k+1] - θ[k]) / h`, one per cell.
pub fn midpoint_gradient(field: &AngleField) -> Vec<f64> {
    gradient_of(field.values(), field.grid().spacing())
}

pub(crate) fn gradient_of(values: &[f64], h: f64) -> Vec<f64> {
    values.windows(2).map(|w| (w[1] - w[0]) / h).collect()
}

/// Trapezoid rule for nodal samples on `grid`.
pub fn trapezoid_integral(g: &[f64], grid: &Grid) -> f64 {
    assert_eq!(g.len(), grid.node_count(), "sample count does not match grid");
    trapezoid_of(g, grid.spacing())
}

pub(crate) fn trapezoid_of(g: &[f64], h: f64) -> f64 {
    let n = g.len();
    let inner: f64 = g[1..n - 1].iter().sum();
    h * (inner + 0.5 * (g[0] + g[n - 1]))
}

/// Reconstructs the curve `γ(s) = ∫₀^s (cos θ, sin θ)` with `γ(0) = 0`, using
/// the cumulative trapezoid rule.
pub fn cumulative_tangent_integral(field: &AngleField) -> Vec<[f64; 2]> {
    let h = field.grid().spacing();
    let mut out = Vec::with_capacity(field.len());
    let mut point = [0.0, 0.0];
    out.push(point);
    for w in field.values().windows(2) {
        point[0] += 0.5 * h * (w[0].cos() + w[1].cos());
        point[1] += 0.5 * h * (w[0].sin() + w[1].sin());
        out.push(point);
    }
    out
}

/// Which network the three curves form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NetworkKind {
    /// Three curves sharing both endpoints; the first junction sits at the origin.
    Theta,
    /// Three curves leaving one junction towards fixed endpoints `P₁, P₂, P₃`.
    Triod { endpoints: [[f64; 2]; 3] },
}

/// Three angle fields plus the data that fixes the constraint set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateData")]
pub struct NetworkState {
    fields: [AngleField; 3],
    kind: NetworkKind,
    p: f64,
}

impl NetworkState {
    pub fn new(fields: [AngleField; 3], kind: NetworkKind, p: f64) -> Result<NetworkState> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidConfig(format!("exponent p must exceed 1, got {p}")));
        }
        if kind == NetworkKind::Theta {
            let l = [0, 1, 2].map(|j| fields[j].grid().length());
            if l[2] > l[0].min(l[1]) {
                return Err(Error::InvalidLengths(format!(
                    "theta-network curves must be ordered with L3 <= min(L1, L2), got {l:?}"
                )));
            }
        }
        Ok(NetworkState { fields, kind, p })
    }

    pub fn fields(&self) -> &[AngleField; 3] {
        &self.fields
    }

    pub fn field(&self, j: usize) -> &AngleField {
        &self.fields[j]
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn lengths(&self) -> [f64; 3] {
        [0, 1, 2].map(|j| self.fields[j].grid().length())
    }

    /// Constant right-hand sides of the junction constraints:
    /// `∫T¹ - ∫T² = offsets[0]` and `∫T³ - ∫T¹ = offsets[1]`.
    pub fn offsets(&self) -> [[f64; 2]; 2] {
        match self.kind {
            NetworkKind::Theta => [[0.0; 2]; 2],
            NetworkKind::Triod { endpoints: p } => [
                [p[0][0] - p[1][0], p[0][1] - p[1][1]],
                [p[2][0] - p[0][0], p[2][1] - p[0][1]],
            ],
        }
    }

    /// Whether the strict length condition `L₃ < min(L₁, L₂)` holds. It is only
    /// meaningful for theta-networks.
    pub fn strict_length_condition(&self) -> bool {
        let l = self.lengths();
        self.kind == NetworkKind::Theta && l[2] < l[0].min(l[1])
    }

    pub fn oscillations(&self) -> [f64; 3] {
        [0, 1, 2].map(|j| self.fields[j].oscillation())
    }

    /// New state on the same grids with replaced node values.
    pub fn with_values(&self, values: [Vec<f64>; 3]) -> Result<NetworkState> {
        let [a, b, c] = values;
        Ok(NetworkState {
            fields: [
                self.fields[0].with_values(a)?,
                self.fields[1].with_values(b)?,
                self.fields[2].with_values(c)?,
            ],
            kind: self.kind,
            p: self.p,
        })
    }

    /// Copies of the three value vectors.
    pub fn cloned_values(&self) -> [Vec<f64>; 3] {
        [0, 1, 2].map(|j| self.fields[j].values().to_vec())
    }

    /// The whole network rotated by `alpha`: every angle shifted, and triod
    /// endpoints rotated with it so the constraint set follows.
    pub fn rotated(&self, alpha: f64) -> NetworkState {
        let kind = match self.kind {
            NetworkKind::Theta => NetworkKind::Theta,
            NetworkKind::Triod { endpoints } => NetworkKind::Triod {
                endpoints: endpoints.map(|pt| rotate(pt, alpha)),
            },
        };
        NetworkState {
            fields: [0, 1, 2].map(|j| self.fields[j].shifted(alpha)),
            kind,
            p: self.p,
        }
    }

    /// Checks that `other` lives on the same grids with the same exponent.
    pub fn check_compatible(&self, other: &NetworkState) -> Result<()> {
        for j in 0..3 {
            if self.fields[j].grid() != other.fields[j].grid() {
                return Err(Error::GridMismatch(format!("curve {} grids differ", j + 1)));
            }
        }
        if self.p != other.p {
            return Err(Error::GridMismatch(format!(
                "exponents differ ({} vs {})",
                self.p, other.p
            )));
        }
        Ok(())
    }

    /// Maximum nodal difference to a state on the same grids.
    pub fn sup_distance(&self, other: &NetworkState) -> Result<f64> {
        self.check_compatible(other)?;
        let mut d: f64 = 0.0;
        for j in 0..3 {
            for (a, b) in self.fields[j].values().iter().zip(other.fields[j].values()) {
                d = d.max((a - b).abs());
            }
        }
        Ok(d)
    }

    /// Position of the junction where every curve starts (`s = 0`).
    pub fn start_junction(&self) -> [f64; 2] {
        match self.kind {
            NetworkKind::Theta => [0.0, 0.0],
            NetworkKind::Triod { endpoints } => {
                let gamma = cumulative_tangent_integral(&self.fields[0]);
                let end = gamma[gamma.len() - 1];
                [endpoints[0][0] - end[0], endpoints[0][1] - end[1]]
            }
        }
    }

    /// Reconstructed curves, each translated so it starts at the junction.
    pub fn curves(&self) -> [Vec<[f64; 2]>; 3] {
        let origin = self.start_junction();
        [0, 1, 2].map(|j| {
            cumulative_tangent_integral(&self.fields[j])
                .into_iter()
                .map(|q| [q[0] + origin[0], q[1] + origin[1]])
                .collect()
        })
    }
}

pub(crate) fn rotate(v: [f64; 2], alpha: f64) -> [f64; 2] {
    let (s, c) = alpha.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

// Deserialized values go through the checked constructors.

#[derive(Deserialize)]
struct GridData {
    length: f64,
    node_count: usize,
}

impl TryFrom<GridData> for Grid {
    type Error = Error;
    fn try_from(d: GridData) -> Result<Grid> {
        Grid::new(d.length, d.node_count)
    }
}

#[derive(Deserialize)]
struct FieldData {
    grid: Grid,
    values: Vec<f64>,
}

impl TryFrom<FieldData> for AngleField {
    type Error = Error;
    fn try_from(d: FieldData) -> Result<AngleField> {
        AngleField::new(d.grid, d.values)
    }
}

#[derive(Deserialize)]
struct StateData {
    fields: [AngleField; 3],
    kind: NetworkKind,
    p: f64,
}

impl TryFrom<StateData> for NetworkState {
    type Error = Error;
    fn try_from(d: StateData) -> Result<NetworkState> {
        NetworkState::new(d.fields, d.kind, d.p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_spacing_and_nodes() {
        let g = Grid::new(2.0, 5).unwrap();
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.node(4), 2.0);
        assert!((g.spacing() * 4.0 - g.length()).abs() <= 4.0 * f64::EPSILON);
        assert!(Grid::new(1.0, 2).is_err());
        assert!(Grid::new(0.0, 10).is_err());
        assert_eq!(Grid::with_resolution(2.0, 200).unwrap().node_count(), 401);
    }

    #[test]
    fn gradient_examples() {
        let g = Grid::new(1.0, 11).unwrap();
        let c = AngleField::constant(g, 0.3).unwrap();
        assert!(midpoint_gradient(&c).iter().all(|&v| v == 0.0));

        let affine = AngleField::from_fn(g, |s| s).unwrap();
        for v in midpoint_gradient(&affine) {
            assert!((v - 1.0).abs() < 1e-12);
        }

        let g3 = Grid::new(1.0, 3).unwrap();
        let f = AngleField::new(g3, vec![0.0, 0.1, 0.4]).unwrap();
        let d = midpoint_gradient(&f);
        assert!((d[0] - 0.2).abs() < 1e-15);
        assert!((d[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn trapezoid_examples() {
        let g = Grid::new(2.0, 7).unwrap();
        assert!((trapezoid_integral(&[1.0; 7], &g) - 2.0).abs() < 1e-14);

        let g = Grid::new(1.0, 101).unwrap();
        let lin: Vec<f64> = (0..101).map(|k| g.node(k)).collect();
        assert!((trapezoid_integral(&lin, &g) - 0.5).abs() < 1e-12);

        let g = Grid::new(PI, 201).unwrap();
        let s: Vec<f64> = (0..201).map(|k| g.node(k).sin()).collect();
        assert!((trapezoid_integral(&s, &g) - 2.0).abs() < 1e-3);
    }

    #[test]
    fn trapezoid_is_second_order() {
        let err = |m: usize| {
            let g = Grid::new(1.0, m).unwrap();
            let v: Vec<f64> = (0..m).map(|k| (3.0 * g.node(k)).exp()).collect();
            (trapezoid_integral(&v, &g) - (3f64.exp() - 1.0) / 3.0).abs()
        };
        let e = [err(11), err(21), err(41), err(81)];
        for w in e.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.9, "observed order {order}");
        }
    }

    #[test]
    fn tangent_integral_examples() {
        let g = Grid::new(1.0, 11).unwrap();
        let end = *cumulative_tangent_integral(&AngleField::constant(g, 0.0).unwrap())
            .last()
            .unwrap();
        assert!((end[0] - 1.0).abs() < 1e-14 && end[1].abs() < 1e-14);

        let end = *cumulative_tangent_integral(&AngleField::constant(g, PI / 2.0).unwrap())
            .last()
            .unwrap();
        assert!(end[0].abs() < 1e-14 && (end[1] - 1.0).abs() < 1e-14);

        let g = Grid::new(PI, 401).unwrap();
        let f = AngleField::from_fn(g, |s| s).unwrap();
        let end = *cumulative_tangent_integral(&f).last().unwrap();
        assert!(end[0].abs() < 1e-4 && (end[1] - 2.0).abs() < 1e-4);
    }

    #[test]
    fn constant_field_ends_at_chord() {
        let g = Grid::new(1.7, 33).unwrap();
        let alpha = 0.9;
        let end = *cumulative_tangent_integral(&AngleField::constant(g, alpha).unwrap())
            .last()
            .unwrap();
        assert!((end[0] - 1.7 * alpha.cos()).abs() < 1e-14);
        assert!((end[1] - 1.7 * alpha.sin()).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_fields() {
        let g = Grid::new(1.0, 4).unwrap();
        assert!(AngleField::new(g, vec![0.0; 3]).is_err());
        assert!(AngleField::new(g, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn theta_network_length_ordering() {
        let f = |l| AngleField::constant(Grid::new(l, 5).unwrap(), 0.0).unwrap();
        assert!(NetworkState::new([f(1.0), f(1.0), f(2.0)], NetworkKind::Theta, 2.0).is_err());
        assert!(NetworkState::new([f(2.0), f(2.0), f(1.0)], NetworkKind::Theta, 1.0).is_err());
        let s = NetworkState::new([f(2.0), f(2.0), f(1.0)], NetworkKind::Theta, 2.0).unwrap();
        assert!(s.strict_length_condition());
    }
}
