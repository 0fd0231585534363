use std::collections::HashMap;

use super::SparseError;

const NO_BLOCK: u32 = u32::MAX;

/// Result of looking up a voxel next to an active one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Active {
        block: usize,
        local: usize,
    },
    /// Inside the domain but not allocated or masked off.
    Inactive,
    /// Beyond a non-periodic domain face, in unwrapped coordinates.
    Outside([i64; 3]),
}

/// Fixed-size voxel blocks allocated only where voxels are active.
///
/// Blocks are `edge^3` voxels (`edge^2 x 1` for a planar domain) with an
/// activity bitmask each. Within a block voxels are numbered with x fastest.
#[derive(Debug, Clone)]
pub struct BlockSparseGrid {
    edge: usize,
    dims: [usize; 3],
    block_voxels: usize,
    words: usize,
    domain: [usize; 3],
    periodic: [bool; 3],
    origins: Vec<[usize; 3]>,
    masks: Vec<u64>,
    index: HashMap<[usize; 3], usize>,
    neighbors: Vec<[u32; 27]>,
}

fn offset_index(d: [i64; 3]) -> usize {
    ((d[0] + 1) + 3 * (d[1] + 1) + 9 * (d[2] + 1)) as usize
}

impl BlockSparseGrid {
    /// Smallest block set covering `voxels`.
    pub fn from_voxels(
        domain: [usize; 3],
        edge: usize,
        periodic: [bool; 3],
        voxels: impl IntoIterator<Item = [usize; 3]>,
    ) -> Result<Self, SparseError> {
        if edge == 0 {
            return Err(SparseError::Input("block edge must be at least 1".into()));
        }
        if domain.contains(&0) {
            return Err(SparseError::Input(format!("empty domain {domain:?}")));
        }
        let dims = if domain[2] == 1 {
            [edge, edge, 1]
        } else {
            [edge; 3]
        };
        for a in 0..3 {
            if periodic[a] && !domain[a].is_multiple_of(dims[a]) {
                return Err(SparseError::Input(format!(
                    "periodic axis {a} of extent {} is not a multiple of the block edge {edge}",
                    domain[a]
                )));
            }
        }
        let block_voxels = dims.iter().product::<usize>();
        let words = block_voxels.div_ceil(64);

        let mut per_block: HashMap<[usize; 3], Vec<usize>> = HashMap::new();
        for p in voxels {
            if (0..3).any(|a| p[a] >= domain[a]) {
                return Err(SparseError::Input(format!(
                    "voxel {p:?} outside domain {domain:?}"
                )));
            }
            let key = [p[0] / dims[0], p[1] / dims[1], p[2] / dims[2]];
            let local =
                (p[0] % dims[0]) + dims[0] * ((p[1] % dims[1]) + dims[1] * (p[2] % dims[2]));
            per_block.entry(key).or_default().push(local);
        }
        if per_block.is_empty() {
            return Err(SparseError::Input("active voxel set is empty".into()));
        }
        let mut keys: Vec<[usize; 3]> = per_block.keys().copied().collect();
        keys.sort_by_key(|k| (k[2], k[1], k[0]));

        let mut masks = vec![0u64; keys.len() * words];
        for (b, key) in keys.iter().enumerate() {
            for &local in &per_block[key] {
                masks[b * words + local / 64] |= 1 << (local % 64);
            }
        }
        let origins = keys
            .iter()
            .map(|k| [k[0] * dims[0], k[1] * dims[1], k[2] * dims[2]])
            .collect();
        let mut grid = BlockSparseGrid {
            edge,
            dims,
            block_voxels,
            words,
            domain,
            periodic,
            origins,
            masks,
            index: HashMap::new(),
            neighbors: Vec::new(),
        };
        grid.rebuild_links();
        Ok(grid)
    }

    pub fn from_mask(
        domain: [usize; 3],
        edge: usize,
        periodic: [bool; 3],
        active: &[bool],
    ) -> Result<Self, SparseError> {
        let nx = domain[0];
        let ny = domain[1];
        Self::from_voxels(
            domain,
            edge,
            periodic,
            active
                .iter()
                .enumerate()
                .filter(|(_, a)| **a)
                .map(|(v, _)| [v % nx, (v / nx) % ny, v / (nx * ny)]),
        )
    }

    fn rebuild_links(&mut self) {
        self.index = self
            .origins
            .iter()
            .enumerate()
            .map(|(b, o)| {
                (
                    [
                        o[0] / self.dims[0],
                        o[1] / self.dims[1],
                        o[2] / self.dims[2],
                    ],
                    b,
                )
            })
            .collect();
        let counts: Vec<i64> = (0..3)
            .map(|a| self.domain[a].div_ceil(self.dims[a]) as i64)
            .collect();
        self.neighbors = self
            .origins
            .iter()
            .map(|o| {
                let key = [
                    o[0] / self.dims[0],
                    o[1] / self.dims[1],
                    o[2] / self.dims[2],
                ];
                let mut table = [NO_BLOCK; 27];
                for dz in -1..=1i64 {
                    for dy in -1..=1i64 {
                        for dx in -1..=1i64 {
                            let d = [dx, dy, dz];
                            let mut k = [0usize; 3];
                            let mut ok = true;
                            for a in 0..3 {
                                let c = key[a] as i64 + d[a];
                                if (0..counts[a]).contains(&c) {
                                    k[a] = c as usize;
                                } else if self.periodic[a] {
                                    k[a] = c.rem_euclid(counts[a]) as usize;
                                } else {
                                    ok = false;
                                }
                            }
                            if ok {
                                if let Some(&nb) = self.index.get(&k) {
                                    table[offset_index(d)] = nb as u32;
                                }
                            }
                        }
                    }
                }
                table
            })
            .collect();
    }

    /// Same blocks, stored in the order given by `order` (new position ->
    /// old block index).
    pub fn reordered(&self, order: &[usize]) -> Self {
        let mut origins = Vec::with_capacity(order.len());
        let mut masks = Vec::with_capacity(self.masks.len());
        for &b in order {
            origins.push(self.origins[b]);
            masks.extend_from_slice(&self.masks[b * self.words..(b + 1) * self.words]);
        }
        let mut grid = BlockSparseGrid {
            origins,
            masks,
            index: HashMap::new(),
            neighbors: Vec::new(),
            ..self.clone()
        };
        grid.rebuild_links();
        grid
    }

    pub fn edge(&self) -> usize {
        self.edge
    }

    /// Voxel extents of one block.
    pub fn block_dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn block_voxels(&self) -> usize {
        self.block_voxels
    }

    pub fn domain(&self) -> [usize; 3] {
        self.domain
    }

    pub fn periodic(&self) -> [bool; 3] {
        self.periodic
    }

    pub fn num_blocks(&self) -> usize {
        self.origins.len()
    }

    pub fn origin(&self, block: usize) -> [usize; 3] {
        self.origins[block]
    }

    pub fn origins(&self) -> &[[usize; 3]] {
        &self.origins
    }

    /// Position of the block with block coordinates `key`.
    pub fn block_at(&self, key: [usize; 3]) -> Option<usize> {
        self.index.get(&key).copied()
    }

    #[inline]
    pub fn is_active(&self, block: usize, local: usize) -> bool {
        self.masks[block * self.words + local / 64] >> (local % 64) & 1 == 1
    }

    pub fn active_in_block(&self, block: usize) -> usize {
        self.masks[block * self.words..(block + 1) * self.words]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    pub fn active_count(&self) -> usize {
        self.masks.iter().map(|w| w.count_ones() as usize).sum()
    }

    #[inline]
    pub fn local_coords(&self, local: usize) -> [usize; 3] {
        let d = self.dims;
        [local % d[0], (local / d[0]) % d[1], local / (d[0] * d[1])]
    }

    #[inline]
    pub fn local_index(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    #[inline]
    pub fn voxel(&self, block: usize, local: usize) -> [usize; 3] {
        let o = self.origins[block];
        let c = self.local_coords(local);
        [o[0] + c[0], o[1] + c[1], o[2] + c[2]]
    }

    /// Block and in-block index of an active voxel.
    pub fn locate(&self, p: [usize; 3]) -> Option<(usize, usize)> {
        if (0..3).any(|a| p[a] >= self.domain[a]) {
            return None;
        }
        let d = self.dims;
        let block = self.block_at([p[0] / d[0], p[1] / d[1], p[2] / d[2]])?;
        let local = self.local_index([p[0] % d[0], p[1] % d[1], p[2] % d[2]]);
        self.is_active(block, local).then_some((block, local))
    }

    /// The voxel at `offset` (each component in -1..=1) from an active voxel.
    #[inline]
    pub fn neighbor(&self, block: usize, local: usize, offset: [i32; 3]) -> Lookup {
        let o = self.origins[block];
        let c = self.local_coords(local);
        let mut bo = [0i64; 3];
        let mut lc = [0usize; 3];
        for a in 0..3 {
            let g = (o[a] + c[a]) as i64 + offset[a] as i64;
            if !(0..self.domain[a] as i64).contains(&g) && !self.periodic[a] {
                let mut out = [0i64; 3];
                for b in 0..3 {
                    out[b] = (o[b] + c[b]) as i64 + offset[b] as i64;
                }
                return Lookup::Outside(out);
            }
            let l = c[a] as i64 + offset[a] as i64;
            let n = self.dims[a] as i64;
            bo[a] = l.div_euclid(n);
            lc[a] = l.rem_euclid(n) as usize;
        }
        let nb = self.neighbors[block][offset_index(bo)];
        if nb == NO_BLOCK {
            return Lookup::Inactive;
        }
        let nb = nb as usize;
        let nl = self.local_index(lc);
        if self.is_active(nb, nl) {
            Lookup::Active {
                block: nb,
                local: nl,
            }
        } else {
            Lookup::Inactive
        }
    }

    /// Active voxels as (block, local) in storage order.
    pub fn active_voxels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_blocks()).flat_map(move |b| {
            (0..self.block_voxels)
                .filter(move |&l| self.is_active(b, l))
                .map(move |l| (b, l))
        })
    }
}
