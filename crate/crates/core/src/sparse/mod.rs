//! Block-sparse grids with boundary-aware grouping.
//!
//! Boundary blocks (those holding at least one voxel with a velocity-prescribed
//! face) need a heavier kernel than the rest. Three arrangements are
//! provided:
//!
//! * `Naive`: one kernel over every block, boundary metadata stored inline.
//! * `DisagBitmask`: blocks keep their order; a block bitmask routes each block
//!   to the boundary or interior kernel and a prefix-sum index maps boundary
//!   voxels into a compact metadata buffer.
//! * `DisagMem`: boundary blocks are moved to the front of storage so each
//!   kernel runs over one contiguous block range and needs no metadata.

mod arrange;
mod dispatch;
mod exec;
mod grid;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use arrange::{arrange, classify_blocks, Arranged, BlockClass, Classes, IndirectIndex};
pub use dispatch::{
    dispatch_plan, DispatchPlan, Indexing, KernelPlan, NaiveStorage, BOUNDARY_KERNEL,
    INTERIOR_KERNEL, SINGLE_KERNEL,
};
pub use exec::{ExecutionReport, SparseSolver};
pub use grid::{BlockSparseGrid, Lookup};

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("invalid sparse input: {0}")]
    Input(String),
    #[error("boundary voxel {voxel:?} reached the {kernel} kernel")]
    ContractViolation {
        kernel: &'static str,
        voxel: [usize; 3],
    },
    #[error(transparent)]
    Lbm(#[from] crate::lbm::LbmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    Naive,
    DisagBitmask,
    DisagMem,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Naive, Strategy::DisagBitmask, Strategy::DisagMem];
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Naive => "Naive",
            Strategy::DisagBitmask => "DisagBitmask",
            Strategy::DisagMem => "DisagMem",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = SparseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "naive" => Ok(Strategy::Naive),
            "disagbitmask" | "bitmask" => Ok(Strategy::DisagBitmask),
            "disagmem" | "mem" => Ok(Strategy::DisagMem),
            _ => Err(SparseError::Input(format!("unknown strategy `{s}`"))),
        }
    }
}
