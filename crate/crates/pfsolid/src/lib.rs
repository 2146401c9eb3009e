//! Shared-memory-parallel simulator for ternary eutectic directional
//! solidification with a grand-potential multiphase-field model: four order
//! parameters, three chemical components (two independent chemical
//! potentials), explicit Euler time stepping on a block-structured grid with
//! ghost-layer exchange, and a marching-cubes output pipeline.

pub mod bench;
pub mod config;
pub mod error;
pub mod init;
pub mod kernels;
pub mod lattice;
pub mod meshio;
pub mod thermo;
pub mod timeloop;
pub mod testutil;

/// Number of phases (index [`thermo::ModelParams::liquid`] is the melt).
pub const N_PHASES: usize = 4;
/// Number of independent chemical components (K - 1 for K = 3).
pub const N_COMP: usize = 2;

pub use error::{Result, SimError};
