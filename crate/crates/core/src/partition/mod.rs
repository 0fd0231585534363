//! Deterministic simulation of a 1D multi-device decomposition.
//!
//! A [`PartitionedField`] owns one buffer pair per partition, each addressed
//! through its own [`LayoutMap`](crate::layout::LayoutMap). Halo updates are
//! direct buffer-to-buffer copies recorded in a [`TransferLedger`], and
//! [`PartitionedField::step_occ`] runs the private voxels, completes the halo
//! update and then runs the shared voxels, logging each phase to a trace.

mod engine;
pub mod kernels;
mod ledger;

use std::ops::Range;

use serde::Serialize;
use thiserror::Error;

use crate::layout::LayoutError;
use crate::lbm::LbmError;

pub use engine::{ExecMode, NeighborAccess, PartitionedField, StencilKernel};
pub use ledger::{trace_respects_halo_dependency, TraceEvent, TransferLedger, TransferRecord};

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("cannot split extent {extent} into {parts} partitions of at least 2 slabs")]
    Decomposition { extent: usize, parts: usize },
    #[error("partition {partition} out of range")]
    NoSuchPartition { partition: usize },
    #[error("halo link inconsistency: {0}")]
    Consistency(String),
    #[error("kernel read offset {offset:?} outside the radius-1 neighborhood")]
    ContractViolation { offset: [i32; 3] },
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Lbm(#[from] LbmError),
}

/// Balanced split of one axis into contiguous slabs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Decomposition {
    pub domain_shape: [usize; 3],
    pub axis: usize,
    pub slabs: Vec<Range<usize>>,
}

impl Decomposition {
    pub fn num_partitions(&self) -> usize {
        self.slabs.len()
    }

    pub fn thickness(&self, p: usize) -> usize {
        self.slabs[p].len()
    }

    /// Owned extents of partition `p`.
    pub fn shape(&self, p: usize) -> [usize; 3] {
        let mut s = self.domain_shape;
        s[self.axis] = self.thickness(p);
        s
    }

    /// Voxels in one slab perpendicular to the axis.
    pub fn cross_section(&self) -> usize {
        (0..3)
            .filter(|&a| a != self.axis)
            .map(|a| self.domain_shape[a])
            .product()
    }
}

/// Splits `domain_shape` along `axis`; the first `extent % n` partitions get
/// one extra slab.
pub fn decompose(
    domain_shape: [usize; 3],
    num_partitions: usize,
    axis: usize,
) -> Result<Decomposition, PartitionError> {
    let extent = domain_shape.get(axis).copied().unwrap_or(0);
    if num_partitions == 0 || extent < 2 * num_partitions {
        return Err(PartitionError::Decomposition {
            extent,
            parts: num_partitions,
        });
    }
    let base = extent / num_partitions;
    let extra = extent % num_partitions;
    let mut slabs = Vec::with_capacity(num_partitions);
    let mut begin = 0;
    for p in 0..num_partitions {
        let len = base + usize::from(p < extra);
        slabs.push(begin..begin + len);
        begin += len;
    }
    Ok(Decomposition {
        domain_shape,
        axis,
        slabs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VoxelClass {
    Private,
    Shared,
}

/// Neighbor partitions of `p` as (lower, upper).
pub fn neighbors(
    decomp: &Decomposition,
    p: usize,
    periodic: bool,
) -> (Option<usize>, Option<usize>) {
    let n = decomp.num_partitions();
    let lower = if p > 0 {
        Some(p - 1)
    } else if periodic {
        Some(n - 1)
    } else {
        None
    };
    let upper = if p + 1 < n {
        Some(p + 1)
    } else if periodic {
        Some(0)
    } else {
        None
    };
    (lower, upper)
}

/// Per-slab classification of partition `p`'s owned slabs: a slab is shared
/// when it faces a neighbor partition.
pub fn classify_slabs(
    decomp: &Decomposition,
    p: usize,
    periodic: bool,
) -> Result<Vec<VoxelClass>, PartitionError> {
    if p >= decomp.num_partitions() {
        return Err(PartitionError::NoSuchPartition { partition: p });
    }
    let t = decomp.thickness(p);
    let (lower, upper) = neighbors(decomp, p, periodic);
    Ok((0..t)
        .map(|k| {
            if (k == 0 && lower.is_some()) || (k + 1 == t && upper.is_some()) {
                VoxelClass::Shared
            } else {
                VoxelClass::Private
            }
        })
        .collect())
}

/// Per-voxel classification of partition `p`, in owned voxel order (x fastest).
pub fn classify_voxels(
    decomp: &Decomposition,
    p: usize,
    periodic: bool,
) -> Result<Vec<VoxelClass>, PartitionError> {
    let slabs = classify_slabs(decomp, p, periodic)?;
    let shape = decomp.shape(p);
    let axis = decomp.axis;
    let n = shape.iter().product::<usize>();
    Ok((0..n)
        .map(|v| {
            let c = [
                v % shape[0],
                (v / shape[0]) % shape[1],
                v / (shape[0] * shape[1]),
            ];
            slabs[c[axis]]
        })
        .collect())
}
