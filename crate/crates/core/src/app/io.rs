//! State files, trajectory tables, run reports and SVG frames.
//!
//! All output is a pure function of its inputs, so two identical runs write
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::RunSpec;
use crate::error::{Error, Result};
use crate::grid::{NetworkKind, NetworkState};
use crate::scheme::{StepReport, Trajectory};
use crate::stationary::StationaryReport;

pub const CSV_HEADER: &str = "step,t,curve,s,theta,x,y";

pub fn save_state(path: impl AsRef<Path>, state: &NetworkState) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(state).map_err(|e| Error::Parse {
        path: path.into(),
        message: e.to_string(),
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Reads a state file. Grids, values and lengths are validated on the way
/// in; admissibility is not checked.
pub fn load_state(path: impl AsRef<Path>) -> Result<NetworkState> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.into(),
        message: e.to_string(),
    })
}

/// Files written for one run, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<PathBuf>,
}

/// The JSON run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunSpec,
    pub steps: Vec<StepReport>,
    pub stationary: Option<StationaryReport>,
    pub halt_reason: Option<String>,
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_csv(path: &Path, traj: &Trajectory, steps: &[usize]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{CSV_HEADER}").map_err(io)?;
    for &i in steps {
        let state = &traj.states[i];
        let t = traj.time(i);
        for (j, curve) in state.curves().iter().enumerate() {
            let field = state.field(j);
            for (k, (theta, xy)) in field.values().iter().zip(curve).enumerate() {
                writeln!(
                    w,
                    "{i},{t:.16e},{},{:.16e},{theta:.16e},{:.16e},{:.16e}",
                    j + 1,
                    field.grid().node(k),
                    xy[0],
                    xy[1]
                )
                .map_err(io)?;
            }
        }
    }
    finish(w, path)
}

pub fn write_report(path: &Path, report: &RunReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Parse {
        path: path.into(),
        message: e.to_string(),
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Drawing window shared by all frames of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl ViewBox {
    /// Bounding box of the reconstructed network, grown by 20% of its larger
    /// side. SVG's y axis points down, so `y` is the negated top edge.
    pub fn around(state: &NetworkState) -> ViewBox {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut points: Vec<[f64; 2]> = state.curves().into_iter().flatten().collect();
        if let NetworkKind::Triod { endpoints } = state.kind() {
            points.extend(endpoints);
        }
        for q in points {
            for c in 0..2 {
                lo[c] = lo[c].min(q[c]);
                hi[c] = hi[c].max(q[c]);
            }
        }
        let size = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
        let pad = 0.1 * size;
        ViewBox {
            x: lo[0] - pad,
            y: -hi[1] - pad,
            width: hi[0] - lo[0] + 2.0 * pad,
            height: hi[1] - lo[1] + 2.0 * pad,
        }
    }

    fn scale(&self) -> f64 {
        self.width.max(self.height)
    }
}

const COLOURS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

/// One self-contained SVG document showing `state` inside `view`.
pub fn svg_frame(state: &NetworkState, view: &ViewBox, caption: &str) -> String {
    let scale = view.scale();
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{:.9} {:.9} {:.9} {:.9}" width="600" height="{:.0}">"#,
        view.x,
        view.y,
        view.width,
        view.height,
        600.0 * view.height / view.width
    );
    let _ = writeln!(
        out,
        r#"<rect x="{:.9}" y="{:.9}" width="{:.9}" height="{:.9}" fill="white"/>"#,
        view.x, view.y, view.width, view.height
    );
    let curves = state.curves();
    for (j, curve) in curves.iter().enumerate() {
        let _ = write!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="{:.9}" points=""#,
            COLOURS[j],
            0.006 * scale
        );
        for (k, q) in curve.iter().enumerate() {
            let sep = if k == 0 { "" } else { " " };
            let _ = write!(out, "{sep}{:.9},{:.9}", q[0], -q[1]);
        }
        out.push_str("\"/>\n");
    }
    let mut junctions = vec![curves[0][0]];
    match state.kind() {
        NetworkKind::Theta => junctions.push(*curves[0].last().expect("curves are nonempty")),
        NetworkKind::Triod { endpoints } => {
            for q in endpoints {
                let r = 0.012 * scale;
                let _ = writeln!(
                    out,
                    r#"<rect class="endpoint" x="{:.9}" y="{:.9}" width="{:.9}" height="{:.9}" fill="black"/>"#,
                    q[0] - r,
                    -q[1] - r,
                    2.0 * r,
                    2.0 * r
                );
            }
        }
    }
    for q in junctions {
        let _ = writeln!(
            out,
            r#"<circle class="junction" cx="{:.9}" cy="{:.9}" r="{:.9}" fill="black"/>"#,
            q[0],
            -q[1],
            0.015 * scale
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.9}" y="{:.9}" font-family="monospace" font-size="{:.9}">{caption}</text>"#,
        view.x + 0.03 * scale,
        view.y + 0.06 * scale,
        0.04 * scale
    );
    out.push_str("</svg>\n");
    out
}

/// Writes the outputs selected by `spec` into `spec.out` and returns the
/// manifest, which is also written as `manifest.json`. The final state is
/// always saved as `final_state.json`.
pub fn emit_frames(
    traj: &Trajectory,
    spec: &RunSpec,
    stationary: Option<&StationaryReport>,
    halt_reason: Option<&str>,
) -> Result<Manifest> {
    let dir = &spec.out;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let steps = spec.selected_steps(traj.step_count());
    let mut manifest = Manifest::default();

    let name = PathBuf::from("initial_state.json");
    save_state(dir.join(&name), traj.initial())?;
    manifest.files.push(name);
    let name = PathBuf::from("final_state.json");
    save_state(dir.join(&name), traj.last())?;
    manifest.files.push(name);

    if spec.emit.csv {
        let name = PathBuf::from("trajectory.csv");
        write_csv(&dir.join(&name), traj, &steps)?;
        manifest.files.push(name);
    }
    if spec.emit.json {
        let name = PathBuf::from("report.json");
        let report = RunReport {
            config: spec.clone(),
            steps: traj.reports.clone(),
            stationary: stationary.copied(),
            halt_reason: halt_reason.map(str::to_owned),
        };
        write_report(&dir.join(&name), &report)?;
        manifest.files.push(name);
    }
    if spec.emit.svg {
        let frames = dir.join("frames");
        fs::create_dir_all(&frames).map_err(|e| Error::io(&frames, e))?;
        let view = ViewBox::around(traj.initial());
        let energies = traj.energies();
        for &i in &steps {
            let name = PathBuf::from("frames").join(format!("frame_{i:06}.svg"));
            let caption = format!("t = {:.4}  D = {:.6}", traj.time(i), energies[i]);
            let path = dir.join(&name);
            fs::write(&path, svg_frame(&traj.states[i], &view, &caption)).map_err(|e| Error::io(&path, e))?;
            manifest.files.push(name);
        }
    }

    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("paths serialize");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
