//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use pelastic::app::presets::{preset_symmetric_lens, with_exponent, Preset, PresetSpec};
use pelastic::app::refine::refine_study;
use pelastic::energy::{
    assemble_multiplier_data, constraint_vector, det_identity_check, implicit_step_energy, oscillation_stats,
    p_energy, step_gradient,
};
use pelastic::multipliers::{assemble_kkt, bound_constant, constant_from, multiplier_budget, variation_directions};
use pelastic::scheme::{run_flow, FlowConfig, Trajectory};
use pelastic::stationary::detect_stationarity;
use pelastic::{AngleField, Grid, NetworkKind, NetworkState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn max(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn min(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(f64::INFINITY, f64::min)
}

struct LensRun {
    p: f64,
    traj: Trajectory,
    elapsed: Duration,
}

const LENS_EXPONENTS: [f64; 3] = [1.5, 2.0, 3.0];

fn lens_run(p: f64) -> LensRun {
    let initial = with_exponent(&preset_symmetric_lens(2.0, 2.0, 1.0, 200).unwrap(), p).unwrap();
    let start = Instant::now();
    let traj = run_flow(&initial, &FlowConfig::new(1e-3, 0.5)).unwrap_or_else(|h| panic!("lens run p={p}: {h}"));
    LensRun {
        p,
        traj,
        elapsed: start.elapsed(),
    }
}

fn energy_monotonicity(runs: &[LensRun]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for run in runs {
        let e = run.traj.energies();
        let worst = max(e.windows(2).map(|w| w[1] - w[0]));
        let ok = worst <= 1e-8 && run.elapsed.as_secs_f64() <= 60.0;
        pass &= ok;
        parts.push(format!("p={}: max increase {worst:.2e} in {:.1}s", run.p, run.elapsed.as_secs_f64()));
    }
    verdict(pass, parts.join("; "))
}

fn dissipation_budget(runs: &[LensRun]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for run in runs {
        let tau = run.traj.tau;
        let half_integral: f64 = 0.5 * run.traj.reports.iter().map(|r| tau * r.velocity_l2sq).sum::<f64>();
        let d0 = p_energy(run.traj.initial());
        pass &= half_integral <= d0 * (1.0 + 1e-6);
        parts.push(format!("p={}: {half_integral:.6} <= {d0:.6}", run.p));
    }
    verdict(pass, parts.join("; "))
}

fn constraint_preservation(runs: &[LensRun]) -> Verdict {
    let worst = max(runs.iter().flat_map(|r| r.traj.states.iter().map(|s| constraint_vector(s).defect())));
    verdict(worst <= 1e-9, format!("max defect {worst:.2e} over {} states", runs.iter().map(|r| r.traj.states.len()).sum::<usize>()))
}

fn multiplier_budgets(runs: &[LensRun]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for run in runs {
        let traj = &run.traj;
        let s0 = traj.initial();
        let d0 = p_energy(s0);
        let lengths = s0.lengths();
        let sum: f64 = traj.reports.iter().map(|r| traj.tau * r.multipliers.norm_sq()).sum();
        let c_max = max(traj.states[1..].iter().map(|s| bound_constant(&assemble_multiplier_data(s)).unwrap()));
        let budget = multiplier_budget(c_max, s0.p(), lengths.iter().sum(), traj.end_time(), d0);

        let det_floor = [0, 1].map(|i| min(traj.states.iter().map(|s| assemble_multiplier_data(s).dets[i])));
        let c_floor = constant_from(lengths[0] / det_floor[0], lengths[1] / det_floor[1], lengths);
        let velocity_sup = max(traj.reports.iter().map(|r| r.velocity_l1 / traj.tau));
        let sup_bound = c_floor * (s0.p() * d0 + velocity_sup);
        let sup = max(traj.reports.iter().map(|r| r.multipliers.norm_sum()));
        pass &= sum <= budget && sup <= sup_bound;
        parts.push(format!("p={}: sum {sum:.3e} <= {budget:.3e}, sup {sup:.3e} <= {sup_bound:.3e}", run.p));
    }
    verdict(pass, parts.join("; "))
}

fn random_field(rng: &mut ChaCha8Rng, max_nodes: usize) -> AngleField {
    let m = rng.gen_range(3..=max_nodes);
    let length = rng.gen_range(0.5..3.0);
    let values = (0..m).map(|_| rng.gen_range(-PI..PI)).collect();
    AngleField::new(Grid::new(length, m).unwrap(), values).unwrap()
}

fn determinant_identity() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let field = random_field(&mut rng, 64);
        let (det, _) = det_identity_check(&field);
        // independent double sum with the trapezoid weights
        let w = field.grid().weights();
        let v = field.values();
        let mut double = 0.0;
        for k in 0..v.len() {
            for l in 0..v.len() {
                double += w[k] * w[l] * (v[k] - v[l]).sin().powi(2);
            }
        }
        worst = worst.max((det - 0.5 * double).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(worst <= 1e-8 && secs <= 5.0, format!("max |det - ½∬sin²| = {worst:.2e} in {secs:.2}s"))
}

fn determinant_lower_bound() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut count, mut worst_slack) = (0, f64::INFINITY);
    while count < 200 {
        let m = rng.gen_range(3..=64);
        let length = rng.gen_range(0.5..3.0);
        let amp = rng.gen_range(0.0..2.5);
        let (freq, phase) = (rng.gen_range(0.2..4.0), rng.gen_range(0.0..2.0 * PI));
        let field = AngleField::from_fn(Grid::new(length, m).unwrap(), |s| amp * (freq * s + phase).sin() + 0.3 * s).unwrap();
        if field.oscillation() < 0.1 {
            continue;
        }
        count += 1;
        let stats = oscillation_stats(&field);
        let det = assemble_multiplier_data(&NetworkState::new([field.clone(), field.clone(), field.clone()], NetworkKind::Theta, 2.0).unwrap()).dets[0];
        worst_slack = worst_slack.min(det - length / 2.0 * stats.lemma_constant);
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(worst_slack >= -1e-8 && secs <= 5.0, format!("min det - (L/2)C = {worst_slack:.3e} in {secs:.2}s"))
}

fn tiny_state(rng: &mut ChaCha8Rng, p: f64) -> NetworkState {
    let l1: f64 = rng.gen_range(1.0..2.0);
    let l2: f64 = rng.gen_range(1.0..2.0);
    let l3 = rng.gen_range(0.5..l1.min(l2));
    let field = |rng: &mut ChaCha8Rng, l: f64| {
        AngleField::new(Grid::new(l, 5).unwrap(), (0..5).map(|_| rng.gen_range(-1.5..1.5)).collect()).unwrap()
    };
    let fields = [field(rng, l1), field(rng, l2), field(rng, l3)];
    NetworkState::new(fields, NetworkKind::Theta, p).unwrap()
}

fn gradient_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for p in [1.5, 2.0, 3.0] {
        for _ in 0..50 {
            let state = tiny_state(&mut rng, p);
            let prev = state.with_values(state.cloned_values().map(|v| v.iter().map(|x| x + rng.gen_range(-0.2..0.2)).collect())).unwrap();
            let tau = rng.gen_range(0.01..1.0);
            let grad = step_gradient(&state, &prev, tau).unwrap();
            let (mut err, mut size): (f64, f64) = (0.0, 0.0);
            for j in 0..3 {
                let h = state.field(j).grid().spacing();
                for k in 0..5 {
                    let bumped = |d: f64| {
                        let mut v = state.cloned_values();
                        v[j][k] += d;
                        implicit_step_energy(&state.with_values(v).unwrap(), &prev, tau).unwrap()
                    };
                    let fd = (bumped(eps) - bumped(-eps)) / (2.0 * eps);
                    err = err.max((fd - h * grad[j][k]).abs());
                    size = size.max((h * grad[j][k]).abs());
                }
            }
            worst = worst.max(err / size);
        }
    }
    verdict(worst <= 1e-5, format!("max relative error {worst:.2e} over 150 states"))
}

fn kkt_consistency() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let state = tiny_state(&mut rng, 2.0);
        let j = assemble_kkt(&assemble_multiplier_data(&state)).j;
        let phi = variation_directions(&state);
        for r in 0..4 {
            let moved = |t: f64| {
                let mut v = state.cloned_values();
                for c in 0..3 {
                    for (x, d) in v[c].iter_mut().zip(&phi[r][c]) {
                        *x += t * d;
                    }
                }
                constraint_vector(&state.with_values(v).unwrap()).c
            };
            let (plus, minus) = (moved(eps), moved(-eps));
            for q in 0..4 {
                worst = worst.max((j[(q, r)] - (plus[q] - minus[q]) / (2.0 * eps)).abs());
            }
        }
    }
    verdict(worst <= 1e-6, format!("max |J - finite differences| = {worst:.2e} over 50 states"))
}

fn long_time_stationarity() -> Verdict {
    let start = Instant::now();
    let initial = preset_symmetric_lens(2.0, 2.0, 1.0, 2000).unwrap();
    let traj = match run_flow(&initial, &FlowConfig::new(1e-2, 20.0)) {
        Ok(t) => t,
        Err(h) => return verdict(false, format!("run halted: {h}")),
    };
    let secs = start.elapsed().as_secs_f64();
    match detect_stationarity(&traj, 100, 1e-6) {
        Ok(Some(r)) => {
            let drift = max(r.conserved_drift);
            let pass = r.max_residual() <= 1e-3
                && r.bc_defect <= 1e-3
                && drift <= 1e-3
                && r.junction_balance_defect <= 1e-2
                && secs <= 180.0;
            verdict(
                pass,
                format!(
                    "step {}: residual {:.2e}, boundary {:.2e} (extrapolated {:.2e}), drift {drift:.2e}, junction {:.2e} in {secs:.1}s",
                    r.step,
                    r.max_residual(),
                    r.bc_defect,
                    r.bc_extrapolated,
                    r.junction_balance_defect
                ),
            )
        }
        Ok(None) => verdict(false, "no stationary state detected".into()),
        Err(e) => verdict(false, format!("detection failed: {e}")),
    }
}

fn refinement_convergence() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in LENS_EXPONENTS {
        let preset = PresetSpec::new(Preset::Lens, p, 50);
        match refine_study(&preset, &FlowConfig::new(1e-2, 0.25), 3, 0.25) {
            Ok(study) => {
                let d: Vec<f64> = study.levels.iter().filter_map(|l| l.distance_to_next).collect();
                let ratio = study.ratios[0];
                pass &= ratio >= 1.7;
                parts.push(format!("p={p}: distances {:.3e}, {:.3e}, ratio {ratio:.2}", d[0], d[1]));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("p={p}: {e}"));
            }
        }
    }
    verdict(pass, parts.join("; "))
}

fn cli(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_pelastic"))
        .args(args)
        .output()
        .expect("binary runs")
        .status
        .code()
        .unwrap_or(-1)
}

fn degeneracy_guard(dir: &Path) -> Verdict {
    let flat_out = dir.join("flat");
    let flat = cli(&["run", "--preset", "flat", "--lengths", "1,1,1", "--out", flat_out.to_str().unwrap()]);
    let blow_out = dir.join("collapse");
    let blow = cli(&["run", "--preset", "collapsing-triod", "--T", "2", "--stride", "50", "--out", blow_out.to_str().unwrap()]);
    let report: serde_json::Value = std::fs::read_to_string(blow_out.join("report.json"))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or(serde_json::Value::Null);
    let reason = report["halt_reason"].as_str().unwrap_or("").to_string();
    let steps = report["steps"].as_array().map_or(0, Vec::len);
    let csv = blow_out.join("trajectory.csv").exists();
    let pass = flat == 1 && blow == 2 && reason.contains("flatness blow-up") && steps > 0 && csv;
    verdict(pass, format!("flat exit {flat}; collapsing triod exit {blow} after {steps} steps, reason \"{reason}\""))
}

fn equivariance() -> Verdict {
    let alpha = 0.7;
    let mut spec = PresetSpec::new(Preset::Perturbed, 2.0, 100);
    spec.seed = 12;
    let base = spec.build().unwrap();
    let cfg = FlowConfig::new(1e-3, 0.1);
    let (a, b) = match (run_flow(&base, &cfg), run_flow(&base.rotated(alpha), &cfg)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return verdict(false, "a run halted".into()),
    };
    let energy_gap = max(a.energies().iter().zip(b.energies()).map(|(x, y)| (x - y).abs()));
    let mult_gap = max(a.reports.iter().zip(&b.reports).map(|(ra, rb)| {
        let rot = ra.multipliers.rotated(alpha);
        max((0..2).flat_map(|c| [(rot.lambda[c] - rb.multipliers.lambda[c]).abs(), (rot.mu[c] - rb.multipliers.mu[c]).abs()]))
    }));
    let steps = a.step_count();
    verdict(
        energy_gap <= 1e-8 && mult_gap <= 1e-6 && steps == 100 && b.step_count() == 100,
        format!("{steps} steps: energy gap {energy_gap:.2e}, multiplier gap {mult_gap:.2e}"),
    )
}

fn main() {
    let start = Instant::now();
    let dir = tempfile::tempdir().expect("temporary directory");
    let dir = dir.path();
    let names = [
        "energy monotonicity",
        "dissipation budget",
        "constraint preservation",
        "multiplier budget",
        "determinant identity",
        "determinant lower bound",
        "gradient correctness",
        "KKT-Jacobian consistency",
        "long-time stationarity",
        "refinement convergence",
        "degeneracy guard",
        "equivariance",
    ];
    let verdicts: Vec<Verdict> = std::thread::scope(|scope| {
        let runs: Vec<_> = LENS_EXPONENTS.iter().map(|&p| scope.spawn(move || lens_run(p))).collect();
        let later = [
            scope.spawn(determinant_identity),
            scope.spawn(determinant_lower_bound),
            scope.spawn(gradient_correctness),
            scope.spawn(kkt_consistency),
            scope.spawn(long_time_stationarity),
            scope.spawn(refinement_convergence),
            scope.spawn(move || degeneracy_guard(dir)),
            scope.spawn(equivariance),
        ];
        let runs: Vec<LensRun> = runs.into_iter().map(|h| h.join().expect("lens run")).collect();
        let mut out = vec![
            energy_monotonicity(&runs),
            dissipation_budget(&runs),
            constraint_preservation(&runs),
            multiplier_budgets(&runs),
        ];
        out.extend(later.into_iter().map(|h| h.join().unwrap_or_else(|_| verdict(false, "panicked".into()))));
        out
    });
    let mut failed = 0;
    for (k, (name, v)) in names.iter().zip(&verdicts).enumerate() {
        println!("{} {:>2} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, k + 1, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("{} of {} criteria passed in {:.1}s", verdicts.len() - failed, verdicts.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
