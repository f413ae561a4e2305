//! Presets, file formats and the command line front end.

pub mod cli;
pub mod io;
pub mod presets;
pub mod refine;
pub mod run;

pub use cli::cli_main;
pub use run::{Emit, RunSpec, Source};
