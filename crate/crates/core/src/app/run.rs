//! What to run and where to put the output.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::io::load_state;
use super::presets::PresetSpec;
use crate::error::{Error, Result};
use crate::grid::NetworkState;
use crate::scheme::FlowConfig;

/// Where the initial network comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Preset(PresetSpec),
    /// A state file written by [`super::io::save_state`].
    File(PathBuf),
}

/// Which outputs to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Emit {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Emit {
            csv: true,
            json: true,
            svg: true,
        }
    }
}

impl std::str::FromStr for Emit {
    type Err = String;

    /// Comma separated subset of `csv`, `json`, `svg`.
    fn from_str(s: &str) -> std::result::Result<Emit, String> {
        let mut emit = Emit {
            csv: false,
            json: false,
            svg: false,
        };
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match item {
                "csv" => emit.csv = true,
                "json" => emit.json = true,
                "svg" => emit.svg = true,
                other => return Err(format!("unknown output kind `{other}` (expected csv, json or svg)")),
            }
        }
        Ok(emit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub source: Source,
    pub config: FlowConfig,
    pub out: PathBuf,
    /// Every `stride`-th state is written; the last one always is.
    pub stride: usize,
    pub emit: Emit,
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::InvalidConfig("stride must be at least 1".into()));
        }
        self.config.validate()
    }

    pub fn initial_state(&self) -> Result<NetworkState> {
        match &self.source {
            Source::Preset(spec) => spec.build(),
            Source::File(path) => load_state(path),
        }
    }

    /// Steps written for a trajectory of `steps` steps.
    pub fn selected_steps(&self, steps: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..=steps).step_by(self.stride.max(1)).collect();
        if out.last() != Some(&steps) {
            out.push(steps);
        }
        out
    }
}
