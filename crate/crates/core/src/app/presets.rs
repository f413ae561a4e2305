//! Admissible initial networks.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::tangent_integral;
use crate::error::{Error, Result};
use crate::grid::{AngleField, Grid, NetworkKind, NetworkState};
use crate::scheme::{project_to_h, FlowConfig};

/// Trapezoid chord length of the circular arc `θ(s) = κ(s - L/2)` on `grid`.
fn discrete_chord(grid: &Grid, kappa: f64) -> f64 {
    let half = grid.length() / 2.0;
    let values: Vec<f64> = (0..grid.node_count()).map(|k| kappa * (grid.node(k) - half)).collect();
    tangent_integral(&values, grid)[0]
}

/// Curvature of the circular arc with the given grid length whose chord is
/// `chord`, by bisection on `(0, 2π/L)`. The chord decreases from `L` to `0`
/// over that interval.
pub fn arc_curvature(grid: &Grid, chord: f64) -> Result<f64> {
    let length = grid.length();
    if !(chord > 0.0 && chord <= length) {
        return Err(Error::InvalidLengths(format!(
            "a curve of length {length} cannot span a chord of {chord}"
        )));
    }
    let (mut lo, mut hi) = (0.0, 2.0 * PI / length);
    if discrete_chord(grid, lo) <= chord * (1.0 + 1e-14) {
        return Ok(0.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if discrete_chord(grid, mid) > chord {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn clean(state: NetworkState) -> Result<NetworkState> {
    Ok(project_to_h(&state, &FlowConfig::default())?.state)
}

/// A theta-network made of a straight segment (curve 3, along the x axis) and
/// two circular arcs through its endpoints, curve 1 bulging up and curve 2
/// down.
pub fn preset_symmetric_lens(l1: f64, l2: f64, l3: f64, nodes_per_unit: usize) -> Result<NetworkState> {
    if !(l3 > 0.0 && l3 < l1.min(l2)) {
        return Err(Error::InvalidLengths(format!(
            "the lens needs 0 < L3 < min(L1, L2), got ({l1}, {l2}, {l3})"
        )));
    }
    let arc = |length: f64, sign: f64| -> Result<AngleField> {
        let grid = Grid::with_resolution(length, nodes_per_unit)?;
        let kappa = arc_curvature(&grid, l3)?;
        AngleField::from_fn(grid, |s| sign * kappa * (s - length / 2.0))
    };
    let straight = AngleField::constant(Grid::with_resolution(l3, nodes_per_unit)?, 0.0)?;
    clean(NetworkState::new([arc(l1, -1.0)?, arc(l2, 1.0)?, straight], NetworkKind::Theta, 2.0)?)
}

/// Same network with exponent `p`.
pub fn with_exponent(state: &NetworkState, p: f64) -> Result<NetworkState> {
    NetworkState::new(state.fields().clone(), state.kind(), p)
}

/// Three flat curves of the given lengths, all with angle 0. Admissible only
/// when the lengths agree.
pub fn preset_flat(lengths: [f64; 3], nodes_per_unit: usize, p: f64) -> Result<NetworkState> {
    let fields = [0, 1, 2].map(|j| {
        Grid::with_resolution(lengths[j], nodes_per_unit).and_then(|g| AngleField::constant(g, 0.0))
    });
    let [a, b, c] = fields;
    NetworkState::new([a?, b?, c?], NetworkKind::Theta, p)
}

/// `base` plus up to five random sine modes per curve with total amplitude at
/// most `amplitude`, projected back onto the constraint set.
pub fn preset_perturbed(base: &NetworkState, amplitude: f64, seed: u64) -> Result<NetworkState> {
    if amplitude == 0.0 {
        return Ok(base.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = base.cloned_values();
    for (j, curve) in values.iter_mut().enumerate() {
        let grid = base.field(j).grid();
        let modes = rng.gen_range(1..=5);
        for m in 1..=modes {
            let coeff = amplitude * rng.gen_range(-1.0..1.0) / modes as f64;
            let phase = rng.gen_range(0.0..2.0 * PI);
            for (k, v) in curve.iter_mut().enumerate() {
                *v += coeff * (m as f64 * PI * grid.node(k) / grid.length() + phase).sin();
            }
        }
    }
    clean(base.with_values(values)?)
}

/// A triod whose curves run from `junction` to the endpoints as circular
/// arcs of the given lengths, each bending to the left of its chord.
pub fn preset_triod_with_junction(
    endpoints: [[f64; 2]; 3],
    junction: [f64; 2],
    lengths: [f64; 3],
    nodes_per_unit: usize,
    p: f64,
) -> Result<NetworkState> {
    let mut fields = Vec::with_capacity(3);
    for j in 0..3 {
        let d = [endpoints[j][0] - junction[0], endpoints[j][1] - junction[1]];
        let chord = d[0].hypot(d[1]);
        let grid = Grid::with_resolution(lengths[j], nodes_per_unit)?;
        if chord > lengths[j] {
            return Err(Error::InvalidLengths(format!(
                "curve {} of length {} cannot reach a point at distance {chord}",
                j + 1,
                lengths[j]
            )));
        }
        let kappa = if chord > 0.0 { arc_curvature(&grid, chord)? } else { 0.0 };
        let direction = d[1].atan2(d[0]);
        let half = lengths[j] / 2.0;
        fields.push(AngleField::from_fn(grid, |s| direction + kappa * (s - half))?);
    }
    let [a, b, c]: [AngleField; 3] = fields.try_into().expect("three curves");
    clean(NetworkState::new([a, b, c], NetworkKind::Triod { endpoints }, p)?)
}

/// [`preset_triod_with_junction`] with the junction at the centroid of the
/// endpoints.
pub fn preset_triod(endpoints: [[f64; 2]; 3], lengths: [f64; 3], nodes_per_unit: usize, p: f64) -> Result<NetworkState> {
    let centroid = [0, 1].map(|c| (endpoints[0][c] + endpoints[1][c] + endpoints[2][c]) / 3.0);
    preset_triod_with_junction(endpoints, centroid, lengths, nodes_per_unit, p)
}

/// A triod whose two side curves are only slightly longer than the distance
/// from the apex to their endpoints. The configuration with all three curves
/// straight is admissible and has zero energy, so the flow flattens the
/// network and eventually loses control of the multipliers.
pub fn preset_collapsing_triod(nodes_per_unit: usize, p: f64) -> Result<NetworkState> {
    let side: f64 = 1.02;
    let apex = (side * side - 1.0).sqrt();
    preset_triod_with_junction(
        [[-1.0, 0.0], [1.0, 0.0], [0.0, apex - 1.0]],
        [0.0, 0.0],
        [side, side, 1.0],
        nodes_per_unit,
        p,
    )
}

/// Named presets selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Symmetric lens, lengths (2, 2, 1) unless overridden.
    Lens,
    /// The lens with random smooth bumps.
    Perturbed,
    /// Symmetric Y triod with endpoints on the unit circle.
    Triod,
    /// Three straight curves, lengths (1, 1, 1) unless overridden.
    Flat,
    /// A triod that flattens out, see [`preset_collapsing_triod`].
    CollapsingTriod,
}

/// Everything needed to build a preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetSpec {
    pub preset: Preset,
    pub p: f64,
    pub nodes_per_unit: usize,
    pub lengths: Option<[f64; 3]>,
    pub endpoints: Option<[[f64; 2]; 3]>,
    pub amplitude: f64,
    pub seed: u64,
}

impl PresetSpec {
    pub fn new(preset: Preset, p: f64, nodes_per_unit: usize) -> PresetSpec {
        PresetSpec {
            preset,
            p,
            nodes_per_unit,
            lengths: None,
            endpoints: None,
            amplitude: 0.1,
            seed: 0,
        }
    }

    pub fn with_resolution(&self, nodes_per_unit: usize) -> PresetSpec {
        PresetSpec {
            nodes_per_unit,
            ..self.clone()
        }
    }

    pub fn build(&self) -> Result<NetworkState> {
        let npu = self.nodes_per_unit;
        match self.preset {
            Preset::Lens | Preset::Perturbed => {
                let [l1, l2, l3] = self.lengths.unwrap_or([2.0, 2.0, 1.0]);
                let lens = with_exponent(&preset_symmetric_lens(l1, l2, l3, npu)?, self.p)?;
                if self.preset == Preset::Lens {
                    Ok(lens)
                } else {
                    preset_perturbed(&lens, self.amplitude, self.seed)
                }
            }
            Preset::Triod => {
                let endpoints = self.endpoints.unwrap_or_else(|| {
                    [0, 1, 2].map(|k| {
                        let a = PI / 2.0 + k as f64 * 2.0 * PI / 3.0;
                        [a.cos(), a.sin()]
                    })
                });
                preset_triod(endpoints, self.lengths.unwrap_or([1.2; 3]), npu, self.p)
            }
            Preset::Flat => preset_flat(self.lengths.unwrap_or([1.0; 3]), npu, self.p),
            Preset::CollapsingTriod => preset_collapsing_triod(npu, self.p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{constraint_vector, p_energy};
    use crate::grid::cumulative_tangent_integral;

    #[test]
    fn lens_is_admissible_and_closed() {
        let s = preset_symmetric_lens(2.0, 2.0, 1.0, 100).unwrap();
        assert!(constraint_vector(&s).defect() <= 1e-9);
        let ends = s.curves().map(|c| *c.last().unwrap());
        for e in &ends {
            assert!((e[0] - ends[2][0]).abs() <= 1e-8 && (e[1] - ends[2][1]).abs() <= 1e-8);
        }
        // curve 1 bulges up, curve 2 down
        let mid = |j: usize| cumulative_tangent_integral(s.field(j))[100][1];
        assert!(mid(0) > 0.3 && mid(1) < -0.3);
    }

    #[test]
    fn lens_rejects_bad_lengths() {
        assert!(preset_symmetric_lens(1.0, 1.0, 1.0, 50).is_err());
        assert!(preset_symmetric_lens(2.0, 0.5, 1.0, 50).is_err());
    }

    #[test]
    fn perturbation_is_deterministic() {
        let base = preset_symmetric_lens(2.0, 2.0, 1.0, 50).unwrap();
        assert_eq!(preset_perturbed(&base, 0.0, 3).unwrap(), base);
        let a = preset_perturbed(&base, 0.1, 7).unwrap();
        let b = preset_perturbed(&base, 0.1, 7).unwrap();
        assert_eq!(a, b);
        assert!(constraint_vector(&a).defect() <= 1e-9);
        assert!(a.sup_distance(&base).unwrap() > 1e-3);
    }

    #[test]
    fn triod_examples() {
        let flat = preset_triod_with_junction(
            [[-1.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            [0.0, 0.0],
            [1.0, 1.0, 2.0],
            20,
            2.0,
        )
        .unwrap();
        assert_eq!(p_energy(&flat), 0.0);

        let r = 1.0;
        let pts = [0, 1, 2].map(|k| {
            let a = PI / 2.0 + k as f64 * 2.0 * PI / 3.0;
            [r * a.cos(), r * a.sin()]
        });
        let y = preset_triod(pts, [1.2; 3], 100, 2.0).unwrap();
        assert!(constraint_vector(&y).defect() <= 1e-9);
        let junction = y.start_junction();
        assert!(junction[0].abs() < 1e-3 && junction[1].abs() < 1e-3);

        assert!(matches!(
            preset_triod(pts, [0.5, 1.2, 1.2], 50, 2.0),
            Err(Error::InvalidLengths(_))
        ));
    }

    #[test]
    fn named_presets_are_admissible() {
        for preset in [Preset::Lens, Preset::Perturbed, Preset::Triod, Preset::Flat, Preset::CollapsingTriod] {
            let s = PresetSpec::new(preset, 1.5, 40).build().unwrap();
            assert_eq!(s.p(), 1.5);
            assert!(constraint_vector(&s).defect() <= 1e-9, "{preset:?}");
        }
    }
}
