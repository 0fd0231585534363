use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use crate::lattice::Lattice;
use crate::lbm::kernel::Upstream;
use crate::lbm::{DomainBox, Resolved};
use crate::sparse::BlockSparseGrid;

use super::levelmap::{king_offsets, shifted, LevelMap};
use super::MultiresError;

/// Fusion tag of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FusionClass {
    /// Every voxel is at least one cell away from a resolution jump.
    Uniform,
    /// Some voxel touches another level.
    Jump,
}

/// Where one population of a voxel or ghost is pulled from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    Unused,
    /// Active slot of the same level.
    Active(u32),
    /// Ghost of the same level, filled from the next coarser one.
    Ghost(u32),
    /// Mean over this voxel's children on the next finer level.
    Coalesced(u32),
    /// Ghosts without an upstream keep their own value.
    Own,
    Boundary(Upstream),
}

/// One resolution level: a block-sparse grid plus the ghost layer fed by the
/// next coarser level.
#[derive(Debug, Clone)]
pub struct Level {
    pub shape: [usize; 3],
    pub grid: BlockSparseGrid,
    pub domain: DomainBox,
    /// Ghost positions grouped by coarse parent: group `g` holds ghosts
    /// `g * children .. (g + 1) * children`.
    pub ghosts: Vec<[usize; 3]>,
    /// Slot on the next coarser level of each ghost group's parent.
    pub ghost_parents: Vec<usize>,
    ghost_index: HashMap<[usize; 3], u32>,
    /// Jump distance per voxel slot; `None` when there is no jump on this level.
    pub jump: Vec<Option<u32>>,
    pub classes: Vec<FusionClass>,
    /// Source per (slot, direction).
    pub sources: Vec<Source>,
    /// Source per (ghost, direction).
    pub ghost_sources: Vec<Source>,
    /// Slot -> index of the ghost group below it, for coalescence.
    pub coalesce_groups: HashMap<usize, u32>,
}

impl Level {
    pub fn slots(&self) -> usize {
        self.grid.num_blocks() * self.grid.block_voxels()
    }

    pub fn ghost_groups(&self) -> usize {
        self.ghost_parents.len()
    }

    pub fn blocks_of(&self, class: FusionClass) -> Vec<usize> {
        (0..self.classes.len())
            .filter(|&b| self.classes[b] == class)
            .collect()
    }

    fn slot_of(&self, p: [usize; 3]) -> Option<usize> {
        self.grid
            .locate(p)
            .map(|(b, l)| b * self.grid.block_voxels() + l)
    }
}

/// Stack of block-sparse levels, level 0 finest, refinement factor 2.
#[derive(Debug, Clone)]
pub struct MultiResGrid {
    map: LevelMap,
    levels: Vec<Level>,
    children: usize,
}

/// Multi-source breadth-first search over king moves of the whole box, which
/// yields the Chebyshev distance to the nearest seed.
fn chebyshev_field(
    shape: [usize; 3],
    periodic: [bool; 3],
    dim: usize,
    seeds: &[[usize; 3]],
) -> Vec<u32> {
    let n: usize = shape.iter().product();
    let lin = |p: [usize; 3]| p[0] + shape[0] * (p[1] + shape[1] * p[2]);
    let mut dist = vec![u32::MAX; n];
    let mut queue = VecDeque::new();
    for &s in seeds {
        if dist[lin(s)] == u32::MAX {
            dist[lin(s)] = 0;
            queue.push_back(s);
        }
    }
    let offsets = king_offsets(dim);
    while let Some(p) = queue.pop_front() {
        let d = dist[lin(p)];
        for o in &offsets {
            if let Some(q) = shifted(shape, periodic, p, *o) {
                if dist[lin(q)] == u32::MAX {
                    dist[lin(q)] = d + 1;
                    queue.push_back(q);
                }
            }
        }
    }
    dist
}

impl MultiResGrid {
    /// Builds the levels described by `map` for a domain whose `shape` is given
    /// in finest cells. Lid and periodicity carry over to every level.
    pub fn new(
        lattice: &Lattice,
        domain: &DomainBox,
        map: LevelMap,
        edge: usize,
    ) -> Result<Self, MultiresError> {
        let dim = lattice.dim();
        if map.dim() != dim || map.periodic() != domain.periodic {
            return Err(MultiresError::Input(
                "level map does not match the lattice or domain".into(),
            ));
        }
        if map.level_shape(0) != domain.shape {
            return Err(MultiresError::Input(format!(
                "a {}-level map over {:?} coarse cells covers {:?}, not {:?}",
                map.levels(),
                map.shape(),
                map.level_shape(0),
                domain.shape
            )));
        }
        let children = 1 << dim;
        let offsets = king_offsets(dim);
        let nlev = map.levels();
        let mut levels: Vec<Level> = Vec::with_capacity(nlev);
        for l in 0..nlev {
            let shape = map.level_shape(l);
            let n: usize = shape.iter().product();
            let coords = |c: usize| {
                [
                    c % shape[0],
                    (c / shape[0]) % shape[1],
                    c / (shape[0] * shape[1]),
                ]
            };
            let active = (0..n).map(coords).filter(|&p| map.level_at(l, p) == l);
            let grid = BlockSparseGrid::from_voxels(shape, edge, map.periodic(), active)?;
            let level_domain = DomainBox {
                shape,
                periodic: domain.periodic,
                lid: domain.lid,
            };

            // jump distance
            let bv = grid.block_voxels();
            let mut seeds = Vec::new();
            for (b, loc) in grid.active_voxels() {
                let p = grid.voxel(b, loc);
                if offsets.iter().any(|o| {
                    shifted(shape, map.periodic(), p, *o).is_some_and(|q| map.level_at(l, q) != l)
                }) {
                    seeds.push(p);
                }
            }
            let mut jump = vec![None; grid.num_blocks() * bv];
            if !seeds.is_empty() {
                let field = chebyshev_field(shape, map.periodic(), dim, &seeds);
                for (b, loc) in grid.active_voxels() {
                    let p = grid.voxel(b, loc);
                    jump[b * bv + loc] = Some(field[p[0] + shape[0] * (p[1] + shape[1] * p[2])]);
                }
            }
            let classes = (0..grid.num_blocks())
                .map(|b| {
                    if (0..bv).any(|loc| jump[b * bv + loc] == Some(0)) {
                        FusionClass::Jump
                    } else {
                        FusionClass::Uniform
                    }
                })
                .collect();
            levels.push(Level {
                shape,
                grid,
                domain: level_domain,
                ghosts: Vec::new(),
                ghost_parents: Vec::new(),
                ghost_index: HashMap::new(),
                jump,
                classes,
                sources: Vec::new(),
                ghost_sources: Vec::new(),
                coalesce_groups: HashMap::new(),
            });
        }

        // ghosts of level l are the children of level l+1 cells that have a
        // child within one cell of an active level-l voxel
        for l in 0..nlev.saturating_sub(1) {
            let (fine, coarse) = {
                let (a, b) = levels.split_at_mut(l + 1);
                (&mut a[l], &b[0])
            };
            let cbv = coarse.grid.block_voxels();
            for (b, loc) in coarse.grid.active_voxels() {
                let x = coarse.grid.voxel(b, loc);
                let kids: Vec<[usize; 3]> = (0..children)
                    .map(|k| {
                        let mut c = x;
                        for a in 0..dim {
                            c[a] = 2 * x[a] + (k >> a & 1);
                        }
                        c
                    })
                    .collect();
                let near = kids.iter().any(|&c| {
                    offsets.iter().any(|o| {
                        shifted(fine.shape, map.periodic(), c, *o)
                            .is_some_and(|q| map.level_at(l, q) == l)
                    })
                });
                if near {
                    fine.ghost_parents.push(b * cbv + loc);
                    for c in kids {
                        fine.ghost_index.insert(c, fine.ghosts.len() as u32);
                        fine.ghosts.push(c);
                    }
                }
            }
        }
        for l in 1..nlev {
            let groups: HashMap<usize, u32> = levels[l - 1]
                .ghost_parents
                .iter()
                .enumerate()
                .map(|(g, &s)| (s, g as u32))
                .collect();
            levels[l].coalesce_groups = groups;
        }

        let mut grid = MultiResGrid {
            map,
            levels,
            children,
        };
        for l in 0..nlev {
            grid.build_sources(lattice, l)?;
        }
        Ok(grid)
    }

    fn build_sources(&mut self, lattice: &Lattice, l: usize) -> Result<(), MultiresError> {
        let q = lattice.q();
        let level = &self.levels[l];
        let grid = &level.grid;
        let bv = grid.block_voxels();
        let upstream_of =
            |p: [usize; 3], i: usize| -> Result<(Option<[usize; 3]>, Source), MultiresError> {
                let e = lattice.velocity(i);
                let u = [
                    p[0] as i64 - e[0] as i64,
                    p[1] as i64 - e[1] as i64,
                    p[2] as i64 - e[2] as i64,
                ];
                Ok(match level.domain.resolve(u) {
                    Resolved::Outside(w) => (None, Source::Boundary(w)),
                    Resolved::Inside(s) => {
                        if let Some(slot) = level.slot_of(s) {
                            (Some(s), Source::Active(slot as u32))
                        } else if let Some(&g) = level.ghost_index.get(&s) {
                            (Some(s), Source::Ghost(g))
                        } else {
                            (Some(s), Source::Unused)
                        }
                    }
                })
            };
        let mut sources = vec![Source::Unused; level.slots() * q];
        for (b, loc) in grid.active_voxels() {
            let p = grid.voxel(b, loc);
            let slot = b * bv + loc;
            for i in 0..q {
                let (s, src) = upstream_of(p, i)?;
                sources[slot * q + i] = match src {
                    Source::Unused => {
                        let s = s.expect("unresolved upstream lies inside the box");
                        let owner = self.map.level_at(l, s);
                        match level.coalesce_groups.get(&slot) {
                            Some(&g) if owner + 1 == l => Source::Coalesced(g),
                            _ => {
                                return Err(MultiresError::Structure(format!(
                                    "voxel {p:?} of level {l} has no data for its upstream {s:?} on level {owner}"
                                )))
                            }
                        }
                    }
                    other => other,
                };
            }
        }
        let mut ghost_sources = vec![Source::Unused; level.ghosts.len() * q];
        for (g, &p) in level.ghosts.iter().enumerate() {
            for i in 0..q {
                let (_, src) = upstream_of(p, i)?;
                ghost_sources[g * q + i] = match src {
                    Source::Unused => Source::Own,
                    other => other,
                };
            }
        }
        let level = &mut self.levels[l];
        level.sources = sources;
        level.ghost_sources = ghost_sources;
        Ok(())
    }

    pub fn map(&self) -> &LevelMap {
        &self.map
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> &Level {
        &self.levels[l]
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    /// Fine cells per coarse parent.
    pub fn children(&self) -> usize {
        self.children
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    /// Jump distance of an active voxel; `None` when its level has no jump.
    pub fn jump_distance(&self, level: usize, p: [usize; 3]) -> Result<Option<u32>, MultiresError> {
        let lv = self
            .levels
            .get(level)
            .ok_or_else(|| MultiresError::Input(format!("no level {level}")))?;
        let slot = lv.slot_of(p).ok_or_else(|| {
            MultiresError::Input(format!("voxel {p:?} is not active on level {level}"))
        })?;
        Ok(lv.jump[slot])
    }

    /// Blocks per fusion class, summed over levels.
    pub fn class_counts(&self) -> (usize, usize) {
        let mut uniform = 0;
        let mut jump = 0;
        for lv in &self.levels {
            for c in &lv.classes {
                match c {
                    FusionClass::Uniform => uniform += 1,
                    FusionClass::Jump => jump += 1,
                }
            }
        }
        (uniform, jump)
    }

    /// Active voxels per level, finest first.
    pub fn active_counts(&self) -> Vec<usize> {
        self.levels
            .iter()
            .map(|lv| lv.grid.active_count())
            .collect()
    }

    /// Percent of the virtual finest box taken by each level's active voxels,
    /// finest first.
    pub fn distribution(&self) -> Vec<f64> {
        let total: usize = self.levels[0].shape.iter().product();
        self.active_counts()
            .iter()
            .map(|&n| 100.0 * n as f64 / total as f64)
            .collect()
    }
}

/// Distribution percentages as a comma-separated list with up to three
/// significant digits.
pub fn format_distribution(percent: &[f64]) -> String {
    percent
        .iter()
        .map(|&p| {
            if p == 0.0 {
                return "0".to_string();
            }
            let digits = (2 - p.abs().log10().floor() as i32).max(0) as usize;
            let s = format!("{p:.digits$}");
            if s.contains('.') {
                s.trim_end_matches('0').trim_end_matches('.').to_string()
            } else {
                s
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeKind;
    use crate::multires::LevelPattern;

    fn cavity(levels: usize, coarse: usize) -> MultiResGrid {
        let lattice = Lattice::new(LatticeKind::D3Q19);
        let map = LevelMap::pattern(LevelPattern::LidBand, [coarse; 3], levels, 3, [false; 3], 0)
            .unwrap();
        let n = map.level_shape(0);
        MultiResGrid::new(&lattice, &DomainBox::closed(n), map, 4).unwrap()
    }

    #[test]
    fn single_level_has_no_jumps() {
        let g = cavity(1, 8);
        assert!(g.level(0).jump.iter().all(|d| d.is_none()));
        assert_eq!(g.class_counts(), (8, 0));
        assert_eq!(g.jump_distance(0, [3, 3, 3]).unwrap(), None);
    }

    #[test]
    fn lid_band_levels_and_jumps() {
        // 8 coarse cells: rows 6-7 level 0, rows 4-5 level 1, rows 0-3 level 2
        let g = cavity(3, 8);
        assert_eq!(g.active_counts(), vec![32 * 32 * 8, 16 * 16 * 4, 8 * 8 * 4]);
        // finest voxels just above the interface at z = 24
        assert_eq!(g.jump_distance(0, [5, 5, 24]).unwrap(), Some(0));
        assert_eq!(g.jump_distance(0, [5, 5, 26]).unwrap(), Some(2));
        assert!(g.jump_distance(0, [5, 5, 0]).is_err());
        // level 1 touches both neighbours
        assert_eq!(g.jump_distance(1, [0, 0, 8]).unwrap(), Some(0));
        assert_eq!(g.jump_distance(1, [0, 0, 11]).unwrap(), Some(0));
        assert_eq!(g.jump_distance(1, [0, 0, 9]).unwrap(), Some(1));
    }

    #[test]
    fn ghosts_and_coalescence_groups_pair_up() {
        let g = cavity(2, 8);
        let fine = g.level(0);
        // one row of level-1 cells under the fine band
        assert_eq!(fine.ghost_groups(), 8 * 8);
        assert_eq!(fine.ghosts.len(), 8 * 8 * 8);
        assert_eq!(g.level(1).coalesce_groups.len(), 8 * 8);
        let coarse = g.level(1);
        for (&slot, &grp) in &coarse.coalesce_groups {
            assert_eq!(fine.ghost_parents[grp as usize], slot);
        }
        assert!(fine.ghost_sources.iter().all(|s| *s != Source::Unused));
        assert!(fine.sources.iter().any(|s| matches!(s, Source::Ghost(_))));
        assert!(coarse
            .sources
            .iter()
            .any(|s| matches!(s, Source::Coalesced(_))));
    }

    #[test]
    fn distribution_format() {
        assert_eq!(format_distribution(&[77.04, 4.0, 0.4]), "77, 4, 0.4");
        assert_eq!(
            format_distribution(&[73.1, 3.04, 0.5, 0.003]),
            "73.1, 3.04, 0.5, 0.003"
        );
        let g = cavity(2, 8);
        let d = g.distribution();
        assert_eq!(d[0], 25.0);
        assert_eq!(d[1], 100.0 * (8.0 * 8.0 * 6.0) / 4096.0);
    }
}
