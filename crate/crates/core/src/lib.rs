//! Minimizing movements for the p-elastic flow of planar theta-networks and
//! triods.
//!
//! A network is three curves parametrized by arc length and described by
//! their tangent angles. Each implicit step minimizes the p-elastic energy
//! plus an L² penalty towards the previous state, subject to the curves
//! meeting at their junctions.

pub mod app;
pub mod energy;
pub mod error;
pub mod grid;
pub mod multipliers;
mod linalg;
pub mod scheme;
pub mod stationary;

pub use error::{Error, Result};
pub use grid::{AngleField, Grid, NetworkKind, NetworkState};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/energy.md")]
    mod energy {}
    #[doc = include_str!("../../../book/src/multipliers.md")]
    mod multipliers {}
    #[doc = include_str!("../../../book/src/scheme.md")]
    mod scheme {}
    #[doc = include_str!("../../../book/src/stationary.md")]
    mod stationary {}
    #[doc = include_str!("../../../book/src/refinement.md")]
    mod refinement {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
