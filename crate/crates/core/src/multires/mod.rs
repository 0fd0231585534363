//! Multi-resolution grids with fused execution.
//!
//! A domain is covered by a stack of block-sparse levels, level 0 finest and
//! each coarser level doubling the cell size. Finer levels take two sub-steps
//! per step of their parent. Coarse post-collision values are exploded into a
//! one-cell ghost layer around the finer region, and the populations the
//! finer level streams into that layer are coalesced back by averaging.
//!
//! Blocks are classified by their voxels' distance to a resolution jump:
//! `Uniform` blocks only read their own level and can collide and stream in
//! one kernel, while `Jump` blocks must wait for the inter-level operators.

mod exec;
mod graph;
mod grid;
mod levelmap;

use thiserror::Error;

pub use exec::{level_taus, MultiResSolver};
pub use graph::{BlockGroup, ExecutionGraph, GraphStats, Node, Op};
pub use grid::{format_distribution, FusionClass, Level, MultiResGrid, Source};
pub use levelmap::{LevelMap, LevelPattern};

#[derive(Debug, Error)]
pub enum MultiresError {
    #[error("invalid multi-resolution input: {0}")]
    Input(String),
    #[error("multi-resolution structure error: {0}")]
    Structure(String),
    #[error(transparent)]
    Sparse(#[from] crate::sparse::SparseError),
    #[error(transparent)]
    Lbm(#[from] crate::lbm::LbmError),
}

impl From<crate::lattice::LatticeError> for MultiresError {
    fn from(e: crate::lattice::LatticeError) -> Self {
        MultiresError::Lbm(e.into())
    }
}
