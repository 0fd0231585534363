use serde::{Deserialize, Serialize};

use super::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Indexing {
    Direct,
    Indirect,
}

/// How the naive strategy's per-voxel boundary metadata is sized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NaiveStorage {
    /// `s_w * n_nb * b_size`.
    #[default]
    Printed,
    /// `s_w * (n_b + n_nb) * b_size`: metadata allocated over the whole domain.
    WholeDomain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KernelPlan {
    pub name: String,
    pub blocks: usize,
    /// Population slots a voxel of this kernel keeps live.
    pub cost: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DispatchPlan {
    pub strategy: Strategy,
    pub kernels: Vec<KernelPlan>,
    pub extra_storage_bytes: usize,
    pub indexing: Indexing,
}

impl DispatchPlan {
    /// Sum over kernels of blocks times per-voxel cost.
    pub fn weighted_cost(&self) -> usize {
        self.kernels.iter().map(|k| k.blocks * k.cost).sum()
    }

    pub fn peak_cost(&self) -> usize {
        self.kernels.iter().map(|k| k.cost).max().unwrap_or(0)
    }
}

pub const BOUNDARY_KERNEL: &str = "boundary";
pub const INTERIOR_KERNEL: &str = "interior";
pub const SINGLE_KERNEL: &str = "all";

/// Kernel launches, costs and metadata storage of a map over `n_b` boundary
/// and `n_nb` non-boundary blocks of `block_size` voxels each. `s_w` is the
/// bytes of boundary metadata per voxel and `s_i` the bytes of one index.
#[allow(clippy::too_many_arguments)]
pub fn dispatch_plan(
    strategy: Strategy,
    n_b: usize,
    n_nb: usize,
    q: usize,
    block_size: usize,
    s_w: usize,
    s_i: usize,
    naive_storage: NaiveStorage,
) -> DispatchPlan {
    let heavy = 3 * q;
    let light = 2 * q;
    let kernel = |name: &str, blocks, cost| KernelPlan {
        name: name.to_string(),
        blocks,
        cost,
    };
    match strategy {
        Strategy::Naive => DispatchPlan {
            strategy,
            kernels: vec![kernel(SINGLE_KERNEL, n_b + n_nb, heavy.max(light))],
            extra_storage_bytes: match naive_storage {
                NaiveStorage::Printed => s_w * n_nb * block_size,
                NaiveStorage::WholeDomain => s_w * (n_b + n_nb) * block_size,
            },
            indexing: Indexing::Direct,
        },
        Strategy::DisagBitmask => DispatchPlan {
            strategy,
            kernels: vec![
                kernel(BOUNDARY_KERNEL, n_b + n_nb, heavy),
                kernel(INTERIOR_KERNEL, n_b + n_nb, light),
            ],
            extra_storage_bytes: s_i * (n_b + n_nb) * block_size,
            indexing: Indexing::Indirect,
        },
        Strategy::DisagMem => DispatchPlan {
            strategy,
            kernels: vec![
                kernel(BOUNDARY_KERNEL, n_b, heavy),
                kernel(INTERIOR_KERNEL, n_nb, light),
            ],
            extra_storage_bytes: 0,
            indexing: Indexing::Direct,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let naive = dispatch_plan(Strategy::Naive, 5, 7, 27, 64, 24, 4, NaiveStorage::Printed);
        assert_eq!(naive.kernels.len(), 1);
        assert_eq!(naive.kernels[0].cost, 81);

        let mem = dispatch_plan(
            Strategy::DisagMem,
            32,
            32,
            19,
            64,
            24,
            4,
            NaiveStorage::Printed,
        );
        let blocks: Vec<usize> = mem.kernels.iter().map(|k| k.blocks).collect();
        assert_eq!(blocks, vec![32, 32]);
        assert_eq!(mem.extra_storage_bytes, 0);

        let bits = dispatch_plan(
            Strategy::DisagBitmask,
            16,
            48,
            19,
            64,
            24,
            4,
            NaiveStorage::Printed,
        );
        assert_eq!(bits.extra_storage_bytes, 16384);
        assert_eq!(bits.indexing, Indexing::Indirect);
    }

    #[test]
    fn naive_storage_variants() {
        let p = dispatch_plan(Strategy::Naive, 2, 3, 9, 16, 8, 4, NaiveStorage::Printed);
        let w = dispatch_plan(
            Strategy::Naive,
            2,
            3,
            9,
            16,
            8,
            4,
            NaiveStorage::WholeDomain,
        );
        assert_eq!(p.extra_storage_bytes, 8 * 3 * 16);
        assert_eq!(w.extra_storage_bytes, 8 * 5 * 16);
    }
}
