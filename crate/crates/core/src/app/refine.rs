//! Simultaneous refinement in `τ` and `h`.
//!
//! Level `k` uses `τ/2^k` and `2^k` times the base resolution. The states at a
//! common time are compared in the sup norm on the nodes of the coarser grid
//! of each pair; the ratio of successive distances gives an observed order.

use serde::{Deserialize, Serialize};

use super::presets::PresetSpec;
use crate::error::{Error, Result};
use crate::grid::{AngleField, NetworkState};
use crate::scheme::{run_flow, FlowConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineLevel {
    pub tau: f64,
    pub nodes_per_unit: usize,
    pub steps: usize,
    /// Sup distance to the next finer level.
    pub distance_to_next: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStudy {
    pub time: f64,
    pub levels: Vec<RefineLevel>,
    /// `d_k / d_{k+1}` for successive distances.
    pub ratios: Vec<f64>,
    /// `log2` of the ratios.
    pub orders: Vec<f64>,
}

impl RefinementStudy {
    /// Plain text table, one line per level.
    pub fn table(&self) -> String {
        let mut out = format!("{:>12} {:>8} {:>7} {:>14} {:>8} {:>7}\n", "tau", "h", "steps", "distance", "ratio", "order");
        for (k, level) in self.levels.iter().enumerate() {
            let dist = level.distance_to_next.map_or("-".to_string(), |d| format!("{d:.6e}"));
            let (ratio, order) = match (k.checked_sub(1).and_then(|i| self.ratios.get(i)), k.checked_sub(1).and_then(|i| self.orders.get(i))) {
                (Some(r), Some(o)) => (format!("{r:.3}"), format!("{o:.3}")),
                _ => ("-".to_string(), "-".to_string()),
            };
            out.push_str(&format!(
                "{:>12.4e} {:>8} {:>7} {:>14} {:>8} {:>7}\n",
                level.tau,
                format!("1/{}", level.nodes_per_unit),
                level.steps,
                dist,
                ratio,
                order
            ));
        }
        out
    }
}

/// Linear interpolation of `field` at arc length `s`.
pub fn sample(field: &AngleField, s: f64) -> f64 {
    let grid = field.grid();
    let x = (s / grid.spacing()).clamp(0.0, (grid.cell_count()) as f64);
    let k = (x.floor() as usize).min(grid.cell_count() - 1);
    let t = x - k as f64;
    let v = field.values();
    (1.0 - t) * v[k] + t * v[k + 1]
}

/// Sup distance between two states of the same network, taken on the nodes
/// of `coarse`.
pub fn distance_on_coarse(coarse: &NetworkState, fine: &NetworkState) -> Result<f64> {
    if coarse.lengths() != fine.lengths() || coarse.kind() != fine.kind() {
        return Err(Error::GridMismatch("refinement levels describe different networks".into()));
    }
    let mut d: f64 = 0.0;
    for j in 0..3 {
        let (c, f) = (coarse.field(j), fine.field(j));
        for (k, v) in c.values().iter().enumerate() {
            d = d.max((v - sample(f, c.grid().node(k))).abs());
        }
    }
    Ok(d)
}

/// Runs `levels` refinement levels of `preset` up to `time`, in parallel.
pub fn refine_study(preset: &PresetSpec, config: &FlowConfig, levels: usize, time: f64) -> Result<RefinementStudy> {
    if levels < 2 {
        return Err(Error::InvalidConfig("a refinement study needs at least two levels".into()));
    }
    let runs: Vec<Result<(FlowConfig, usize, NetworkState, usize)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..levels)
            .map(|k| {
                scope.spawn(move || {
                    let factor = 1usize << k;
                    let npu = preset.nodes_per_unit * factor;
                    let cfg = FlowConfig {
                        tau: config.tau / factor as f64,
                        horizon: time,
                        ..*config
                    };
                    let initial = preset.with_resolution(npu).build()?;
                    let traj = run_flow(&initial, &cfg).map_err(|h| h.error)?;
                    let steps = traj.step_count();
                    Ok((cfg, npu, traj.last().clone(), steps))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("refinement level panicked")).collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let mut out = RefinementStudy {
        time,
        levels: Vec::with_capacity(levels),
        ratios: Vec::new(),
        orders: Vec::new(),
    };
    for (k, (cfg, npu, state, steps)) in runs.iter().enumerate() {
        let distance_to_next = match runs.get(k + 1) {
            Some(next) => Some(distance_on_coarse(state, &next.2)?),
            None => None,
        };
        out.levels.push(RefineLevel {
            tau: cfg.tau,
            nodes_per_unit: *npu,
            steps: *steps,
            distance_to_next,
        });
    }
    let d: Vec<f64> = out.levels.iter().filter_map(|l| l.distance_to_next).collect();
    out.ratios = d.windows(2).map(|w| w[0] / w[1]).collect();
    out.orders = out.ratios.iter().map(|r| r.log2()).collect();
    Ok(out)
}
