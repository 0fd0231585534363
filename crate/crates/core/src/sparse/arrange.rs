use serde::Serialize;

use super::grid::BlockSparseGrid;
use super::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BlockClass {
    Boundary,
    NonBoundary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classes {
    pub tags: Vec<BlockClass>,
    pub n_b: usize,
    pub n_nb: usize,
}

/// A block is `Boundary` when any of its active voxels satisfies `is_boundary`.
pub fn classify_blocks(
    grid: &BlockSparseGrid,
    is_boundary: impl Fn([usize; 3]) -> bool,
) -> Classes {
    let tags: Vec<BlockClass> = (0..grid.num_blocks())
        .map(|b| {
            let hit = (0..grid.block_voxels())
                .any(|l| grid.is_active(b, l) && is_boundary(grid.voxel(b, l)));
            if hit {
                BlockClass::Boundary
            } else {
                BlockClass::NonBoundary
            }
        })
        .collect();
    let n_b = tags.iter().filter(|t| **t == BlockClass::Boundary).count();
    Classes {
        n_nb: tags.len() - n_b,
        tags,
        n_b,
    }
}

/// Compact ids for boundary voxels: a per-block base offset plus a per-voxel
/// bitmask, so a voxel's id is the base plus the set bits below it.
#[derive(Debug, Clone, PartialEq)]
pub struct IndirectIndex {
    dim: usize,
    words: usize,
    block_base: Vec<u32>,
    voxel_bits: Vec<u64>,
    velocities: Vec<f64>,
}

impl IndirectIndex {
    fn build(
        grid: &BlockSparseGrid,
        dim: usize,
        meta: &impl Fn([usize; 3]) -> Option<[f64; 3]>,
    ) -> Self {
        let bv = grid.block_voxels();
        let words = bv.div_ceil(64);
        let mut block_base = Vec::with_capacity(grid.num_blocks());
        let mut voxel_bits = vec![0u64; grid.num_blocks() * words];
        let mut velocities = Vec::new();
        let mut next = 0u32;
        for b in 0..grid.num_blocks() {
            block_base.push(next);
            for l in 0..bv {
                if !grid.is_active(b, l) {
                    continue;
                }
                if let Some(v) = meta(grid.voxel(b, l)) {
                    voxel_bits[b * words + l / 64] |= 1 << (l % 64);
                    velocities.extend_from_slice(&v[..dim]);
                    next += 1;
                }
            }
        }
        IndirectIndex {
            dim,
            words,
            block_base,
            voxel_bits,
            velocities,
        }
    }

    /// Number of boundary voxels indexed.
    pub fn len(&self) -> usize {
        self.velocities.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }

    #[inline]
    pub fn id(&self, block: usize, local: usize) -> Option<usize> {
        let row = &self.voxel_bits[block * self.words..(block + 1) * self.words];
        let w = local / 64;
        let bit = local % 64;
        if row[w] >> bit & 1 == 0 {
            return None;
        }
        let below: u32 = row[..w].iter().map(|x| x.count_ones()).sum::<u32>()
            + (row[w] & ((1u64 << bit) - 1)).count_ones();
        Some((self.block_base[block] + below) as usize)
    }

    #[inline]
    pub fn velocity(&self, id: usize) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[..self.dim].copy_from_slice(&self.velocities[id * self.dim..(id + 1) * self.dim]);
        v
    }
}

/// A grid prepared for one strategy, with the metadata that strategy keeps.
#[derive(Debug, Clone)]
pub struct Arranged {
    pub strategy: Strategy,
    pub grid: BlockSparseGrid,
    /// Classes in the arranged block order.
    pub classes: Classes,
    /// Arranged position -> block index in the input grid.
    pub order: Vec<usize>,
    /// One bit per block, set for boundary blocks (bitmask strategy only).
    pub block_bits: Vec<u64>,
    pub indirect: Option<IndirectIndex>,
    /// Per-voxel-slot metadata over all blocks (naive strategy only).
    pub inline: Option<Vec<Option<[f64; 3]>>>,
}

impl Arranged {
    #[inline]
    pub fn block_is_boundary(&self, block: usize) -> bool {
        self.classes.tags[block] == BlockClass::Boundary
    }

    #[inline]
    pub fn bit(&self, block: usize) -> bool {
        self.block_bits[block / 64] >> (block % 64) & 1 == 1
    }

    pub fn popcount(&self) -> usize {
        self.block_bits
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }
}

/// Lays `grid` out for `strategy`. `meta` gives the prescribed velocity of a
/// boundary voxel and `None` elsewhere; `dim` components of it are stored.
pub fn arrange(
    strategy: Strategy,
    grid: &BlockSparseGrid,
    classes: &Classes,
    dim: usize,
    meta: impl Fn([usize; 3]) -> Option<[f64; 3]>,
) -> Arranged {
    let identity: Vec<usize> = (0..grid.num_blocks()).collect();
    match strategy {
        Strategy::Naive => {
            let bv = grid.block_voxels();
            let inline = (0..grid.num_blocks() * bv)
                .map(|slot| {
                    let (b, l) = (slot / bv, slot % bv);
                    if grid.is_active(b, l) {
                        meta(grid.voxel(b, l))
                    } else {
                        None
                    }
                })
                .collect();
            Arranged {
                strategy,
                grid: grid.clone(),
                classes: classes.clone(),
                order: identity,
                block_bits: Vec::new(),
                indirect: None,
                inline: Some(inline),
            }
        }
        Strategy::DisagBitmask => {
            let mut block_bits = vec![0u64; grid.num_blocks().div_ceil(64)];
            for (b, tag) in classes.tags.iter().enumerate() {
                if *tag == BlockClass::Boundary {
                    block_bits[b / 64] |= 1 << (b % 64);
                }
            }
            Arranged {
                strategy,
                grid: grid.clone(),
                classes: classes.clone(),
                order: identity,
                block_bits,
                indirect: Some(IndirectIndex::build(grid, dim, &meta)),
                inline: None,
            }
        }
        Strategy::DisagMem => {
            let mut order: Vec<usize> = identity
                .iter()
                .copied()
                .filter(|&b| classes.tags[b] == BlockClass::Boundary)
                .collect();
            order.extend(
                identity
                    .iter()
                    .copied()
                    .filter(|&b| classes.tags[b] == BlockClass::NonBoundary),
            );
            let tags = order.iter().map(|&b| classes.tags[b]).collect();
            Arranged {
                strategy,
                grid: grid.reordered(&order),
                classes: Classes {
                    tags,
                    n_b: classes.n_b,
                    n_nb: classes.n_nb,
                },
                order,
                block_bits: Vec::new(),
                indirect: None,
                inline: None,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(n: usize) -> BlockSparseGrid {
        let all = (0..n * n * n).map(|v| [v % n, (v / n) % n, v / (n * n)]);
        BlockSparseGrid::from_voxels([n; 3], 4, [false; 3], all).unwrap()
    }

    fn faces(n: usize) -> impl Fn([usize; 3]) -> bool {
        move |p| p[0] == 0 || p[0] + 1 == n
    }

    #[test]
    fn classify_examples() {
        let g = cube(16);
        assert_eq!(classify_blocks(&g, |_| false).n_b, 0);
        // brute-force oracle: a block touches x = 0 or x = 15 iff its origin
        // x is 0 or 12
        let c = classify_blocks(&g, faces(16));
        let expect = g
            .origins()
            .iter()
            .filter(|o| o[0] == 0 || o[0] == 12)
            .count();
        assert_eq!(c.n_b, expect);
        assert_eq!(c.n_b, 32);
        assert_eq!(c.n_b + c.n_nb, 64);
        assert_eq!(classify_blocks(&g, |p| p == [5, 9, 2]).n_b, 1);
    }

    #[test]
    fn disag_mem_puts_boundary_first() {
        let g = cube(16);
        let c = classify_blocks(&g, faces(16));
        let a = arrange(Strategy::DisagMem, &g, &c, 3, |_| None);
        assert!(a.classes.tags[..c.n_b]
            .iter()
            .all(|t| *t == BlockClass::Boundary));
        assert!(a.classes.tags[c.n_b..]
            .iter()
            .all(|t| *t == BlockClass::NonBoundary));
        for (pos, &old) in a.order.iter().enumerate() {
            assert_eq!(a.grid.origin(pos), g.origin(old));
        }
    }

    #[test]
    fn bitmask_popcount_and_compact_ids() {
        let g = cube(8);
        let pred = faces(8);
        let c = classify_blocks(&g, &pred);
        let a = arrange(Strategy::DisagBitmask, &g, &c, 3, |p| {
            pred(p).then_some([p[1] as f64, p[2] as f64, 0.5])
        });
        assert_eq!(a.popcount(), c.n_b);
        let idx = a.indirect.as_ref().unwrap();
        assert_eq!(idx.len(), 2 * 64);
        let mut seen = vec![false; idx.len()];
        for (b, l) in g.active_voxels() {
            let p = g.voxel(b, l);
            match idx.id(b, l) {
                Some(id) => {
                    assert!(pred(p));
                    assert!(!seen[id]);
                    seen[id] = true;
                    assert_eq!(idx.velocity(id), [p[1] as f64, p[2] as f64, 0.5]);
                }
                None => assert!(!pred(p)),
            }
        }
        assert!(seen.iter().all(|s| *s));
    }
}
