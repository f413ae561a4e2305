//! `pelastic` command line.
//!
//! Exit codes: 0 on success, 1 on usage, configuration or degenerate input
//! errors, 2 when a flow halts on a flatness blow-up (partial output is
//! still written).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::io::{emit_frames, load_state};
use super::presets::{with_exponent, Preset, PresetSpec};
use super::refine::refine_study;
use super::run::{Emit, RunSpec, Source};
use crate::energy::{assemble_multiplier_data, constraint_vector, p_energy};
use crate::error::Error;
use crate::scheme::{check_guard, run_flow, FlowConfig, Trajectory};
use crate::stationary::{detect_stationarity, StationaryReport};

#[derive(Debug, Parser)]
#[command(name = "pelastic", version, about = "Minimizing movements for the p-elastic flow of theta-networks and triods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the flow and write the trajectory.
    Run(RunArgs),
    /// Run the flow for a long time and look for a stationary state.
    Stationary {
        #[command(flatten)]
        run: RunArgs,
        /// Number of final steps searched for the smallest velocity.
        #[arg(long, default_value_t = 100)]
        window: usize,
        /// Velocity (L² norm) below which a state counts as stationary.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Refine τ and h together and report observed convergence orders.
    Refine {
        #[command(flatten)]
        initial: InitialArgs,
        #[command(flatten)]
        flow: FlowArgs,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// Time at which the levels are compared.
        #[arg(long, default_value_t = 0.25)]
        at: f64,
        /// Also write the study as JSON into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-verify a state file: constraint defect, energy, oscillations.
    Check {
        state: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

#[derive(Debug, Args)]
struct InitialArgs {
    #[arg(long, value_enum, conflicts_with = "input")]
    preset: Option<Preset>,
    /// State file written by an earlier run.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Exponent of the energy; overrides the value stored in an input file.
    #[arg(long)]
    p: Option<f64>,
    /// Grid nodes per unit length [default: 100, 50 for refine].
    #[arg(long)]
    nodes_per_unit: Option<usize>,
    /// Seed of the perturbed preset.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Amplitude of the perturbed preset.
    #[arg(long, default_value_t = 0.1)]
    amplitude: f64,
    /// Curve lengths `L1,L2,L3`.
    #[arg(long, value_parser = parse_lengths)]
    lengths: Option<[f64; 3]>,
    /// Triod endpoints `x1,y1;x2,y2;x3,y3`.
    #[arg(long, value_parser = parse_endpoints)]
    endpoints: Option<[[f64; 2]; 3]>,
}

#[derive(Debug, Args)]
struct FlowArgs {
    #[arg(long)]
    tau: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long)]
    osc_floor: Option<f64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    initial: InitialArgs,
    #[command(flatten)]
    flow: FlowArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Comma separated subset of csv, json, svg.
    #[arg(long, default_value = "csv,json,svg")]
    emit: Emit,
}

fn parse_numbers(s: &str, sep: char, n: usize) -> std::result::Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(sep)
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} numbers separated by `{sep}`, got {}", v.len()));
    }
    Ok(v)
}

fn parse_lengths(s: &str) -> std::result::Result<[f64; 3], String> {
    let v = parse_numbers(s, ',', 3)?;
    Ok([v[0], v[1], v[2]])
}

fn parse_endpoints(s: &str) -> std::result::Result<[[f64; 2]; 3], String> {
    let pts: Vec<&str> = s.split(';').collect();
    if pts.len() != 3 {
        return Err(format!("expected three points separated by `;`, got {}", pts.len()));
    }
    let mut out = [[0.0; 2]; 3];
    for (o, p) in out.iter_mut().zip(pts) {
        let v = parse_numbers(p, ',', 2)?;
        *o = [v[0], v[1]];
    }
    Ok(out)
}

impl InitialArgs {
    fn source(&self) -> Source {
        match &self.input {
            Some(path) => Source::File(path.clone()),
            None => Source::Preset(self.preset_spec(100)),
        }
    }

    fn preset_spec(&self, nodes_per_unit: usize) -> PresetSpec {
        PresetSpec {
            lengths: self.lengths,
            endpoints: self.endpoints,
            amplitude: self.amplitude,
            seed: self.seed,
            ..PresetSpec::new(self.preset.unwrap_or(Preset::Lens), self.p.unwrap_or(2.0), self.nodes_per_unit.unwrap_or(nodes_per_unit))
        }
    }
}

impl FlowArgs {
    fn config(&self, tau: f64, horizon: f64) -> FlowConfig {
        let mut cfg = FlowConfig::new(self.tau.unwrap_or(tau), self.horizon.unwrap_or(horizon));
        if let Some(floor) = self.osc_floor {
            cfg.osc_floor = floor;
        }
        cfg
    }
}

impl RunArgs {
    fn spec(&self, tau: f64, horizon: f64) -> RunSpec {
        RunSpec {
            source: self.initial.source(),
            config: self.flow.config(tau, horizon),
            out: self.out.clone(),
            stride: self.stride,
            emit: self.emit,
        }
    }
}

/// Exit code of a command, or the error to print.
type Outcome = std::result::Result<i32, Error>;

/// Parses `args` (including the program name) and runs the command.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(cli.command, &mut stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(command: Command, out: &mut impl Write) -> Outcome {
    match command {
        Command::Run(args) => flow(&args.spec(1e-3, 0.5), args.initial.p, None, out),
        Command::Stationary { run, window, tol } => flow(&run.spec(1e-2, 20.0), run.initial.p, Some((window, tol)), out),
        Command::Refine {
            initial,
            flow,
            levels,
            at,
            out: dir,
        } => {
            if initial.input.is_some() {
                return Err(Error::InvalidConfig("refine builds every level from a preset; --input is not supported".into()));
            }
            let preset = initial.preset_spec(50);
            let cfg = flow.config(1e-2, at);
            cfg.validate()?;
            let study = refine_study(&preset, &cfg, levels, at)?;
            let _ = write!(out, "{}", study.table());
            if let Some(dir) = dir {
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                let path = dir.join("refine.json");
                let text = serde_json::to_string_pretty(&study).expect("study serializes");
                std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
            }
            Ok(0)
        }
        Command::Check { state, tol } => check(&state, tol, out),
    }
}

fn flow(spec: &RunSpec, p: Option<f64>, stationary: Option<(usize, f64)>, out: &mut impl Write) -> Outcome {
    spec.validate()?;
    let mut initial = spec.initial_state()?;
    if let (Source::File(_), Some(p)) = (&spec.source, p) {
        initial = with_exponent(&initial, p)?;
    }
    match run_flow(&initial, &spec.config) {
        Ok(traj) => {
            let report = match stationary {
                Some((window, tol)) => detect_stationarity(&traj, window, tol)?,
                None => None,
            };
            emit_frames(&traj, spec, report.as_ref(), None)?;
            summary(out, &traj, report.as_ref(), spec);
            Ok(0)
        }
        Err(halted) => {
            if halted.partial.step_count() == 0 && !halted.error.is_blowup() {
                return Err(halted.error);
            }
            let reason = halted.error.to_string();
            emit_frames(&halted.partial, spec, None, Some(&reason))?;
            summary(out, &halted.partial, None, spec);
            eprintln!("halted: {reason}");
            Ok(if halted.error.is_blowup() { 2 } else { 1 })
        }
    }
}

fn summary(out: &mut impl Write, traj: &Trajectory, report: Option<&StationaryReport>, spec: &RunSpec) {
    let e = traj.energies();
    let _ = writeln!(
        out,
        "steps {}  t {:.6}  D {:.10} -> {:.10}  output {}",
        traj.step_count(),
        traj.end_time(),
        e[0],
        e[e.len() - 1],
        spec.out.display()
    );
    if let Some(r) = report {
        let _ = writeln!(
            out,
            "stationary at step {}: residual {:.3e}  boundary {:.3e}  drift {:.3e}  junction {:.3e}",
            r.step,
            r.max_residual(),
            r.bc_defect,
            r.conserved_drift.iter().fold(0.0_f64, |m, &d| m.max(d)),
            r.junction_balance_defect
        );
    }
}

fn check(path: &PathBuf, tol: f64, out: &mut impl Write) -> Outcome {
    let state = load_state(path)?;
    let defect = constraint_vector(&state).defect();
    let data = assemble_multiplier_data(&state);
    let _ = writeln!(out, "constraint defect {defect:.3e}");
    let _ = writeln!(out, "energy {:.16e}", p_energy(&state));
    let _ = writeln!(out, "oscillations {:?}", state.oscillations());
    let _ = writeln!(out, "determinants {:?}", data.dets);
    match check_guard(&state, FlowConfig::default().osc_floor) {
        Ok(()) => {
            let _ = writeln!(out, "multipliers controlled");
        }
        Err(e) => {
            let _ = writeln!(out, "{e}");
        }
    }
    if defect > tol {
        return Err(Error::Inadmissible { defect });
    }
    Ok(0)
}
