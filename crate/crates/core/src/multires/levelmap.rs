use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MultiresError;

/// Built-in level layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevelPattern {
    /// Finest cells in a band under the top face, coarsening downward.
    #[default]
    LidBand,
    /// Finest cells in a band around the mid-plane, coarsest at both faces.
    ZBands,
    /// Seeded random map of fine regions around random seeds.
    Random,
}

impl std::str::FromStr for LevelPattern {
    type Err = MultiresError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "lid-band" => Ok(LevelPattern::LidBand),
            "z-bands" => Ok(LevelPattern::ZBands),
            "random" => Ok(LevelPattern::Random),
            _ => Err(MultiresError::Input(format!("unknown level pattern `{s}`"))),
        }
    }
}

/// Resolution level of every coarsest-level cell; 0 is the finest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelMap {
    shape: [usize; 3],
    levels: usize,
    dim: usize,
    periodic: [bool; 3],
    cells: Vec<u8>,
}

/// Offsets to the king-move neighbours within the first `dim` axes.
pub(crate) fn king_offsets(dim: usize) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    let zr = if dim == 3 { -1..=1 } else { 0..=0 };
    for dz in zr {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if dx != 0 || dy != 0 || dz != 0 {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

/// `p + d` inside `shape`, wrapping periodic axes; `None` past a closed face.
#[inline]
pub(crate) fn shifted(
    shape: [usize; 3],
    periodic: [bool; 3],
    p: [usize; 3],
    d: [i64; 3],
) -> Option<[usize; 3]> {
    let mut out = [0usize; 3];
    for a in 0..3 {
        let n = shape[a] as i64;
        let g = p[a] as i64 + d[a];
        if (0..n).contains(&g) {
            out[a] = g as usize;
        } else if periodic[a] {
            out[a] = g.rem_euclid(n) as usize;
        } else {
            return None;
        }
    }
    Some(out)
}

impl LevelMap {
    pub fn new(
        shape: [usize; 3],
        levels: usize,
        dim: usize,
        periodic: [bool; 3],
        cells: Vec<u8>,
    ) -> Result<Self, MultiresError> {
        if !(1..=4).contains(&levels) {
            return Err(MultiresError::Input(format!(
                "{levels} levels requested; 1 to 4 are supported"
            )));
        }
        if dim == 2 && shape[2] != 1 {
            return Err(MultiresError::Input(
                "a planar level map has one cell along z".into(),
            ));
        }
        if cells.len() != shape.iter().product::<usize>() {
            return Err(MultiresError::Input(
                "level map size does not match its shape".into(),
            ));
        }
        let map = LevelMap {
            shape,
            levels,
            dim,
            periodic,
            cells,
        };
        let mut present = vec![false; levels];
        for (c, &l) in map.cells.iter().enumerate() {
            let l = l as usize;
            if l >= levels {
                return Err(MultiresError::Input(format!(
                    "cell level {l} exceeds {} levels",
                    levels
                )));
            }
            present[l] = true;
            let p = map.coords(c);
            for d in king_offsets(dim) {
                if let Some(n) = shifted(shape, periodic, p, d) {
                    let m = map.cells[map.linear(n)] as usize;
                    if l.abs_diff(m) > 1 {
                        return Err(MultiresError::Input(format!(
                            "cells {p:?} (level {l}) and {n:?} (level {m}) skip a level"
                        )));
                    }
                }
            }
        }
        if let Some(l) = present.iter().position(|p| !p) {
            return Err(MultiresError::Input(format!("level {l} has no cells")));
        }
        Ok(map)
    }

    /// Every cell at the finest level.
    pub fn single(shape: [usize; 3], dim: usize, periodic: [bool; 3]) -> Self {
        let n = shape.iter().product();
        LevelMap {
            shape,
            levels: 1,
            dim,
            periodic,
            cells: vec![0; n],
        }
    }

    /// Builds `pattern` over `shape` coarsest cells. The band patterns run along
    /// the last lattice axis, with bands thin enough for every level to fit.
    pub fn pattern(
        pattern: LevelPattern,
        shape: [usize; 3],
        levels: usize,
        dim: usize,
        periodic: [bool; 3],
        seed: u64,
    ) -> Result<Self, MultiresError> {
        if levels == 1 {
            return Ok(Self::single(shape, dim, periodic));
        }
        let axis = dim - 1;
        let extent = shape[axis];
        let top = levels - 1;
        let n: usize = shape.iter().product();
        let level_by = |f: &dyn Fn(usize) -> usize| -> Vec<u8> {
            (0..n)
                .map(|c| {
                    let p = [
                        c % shape[0],
                        (c / shape[0]) % shape[1],
                        c / (shape[0] * shape[1]),
                    ];
                    f(p[axis]) as u8
                })
                .collect()
        };
        match pattern {
            LevelPattern::LidBand => {
                let band = (extent / (levels + 1)).max(1);
                let cells = level_by(&|z| ((extent - 1 - z) / band).min(top));
                Self::new(shape, levels, dim, periodic, cells)
            }
            LevelPattern::ZBands => {
                let band = (extent / (2 * levels)).max(1);
                // distance of the cell from the mid-plane, in bands
                let cells = level_by(&|z| {
                    let d = (2 * z + 1).abs_diff(extent) / 2;
                    (d / band).min(top)
                });
                Self::new(shape, levels, dim, periodic, cells)
            }
            LevelPattern::Random => Self::random(shape, levels, dim, periodic, seed),
        }
    }

    /// Seeded random map: a few fine seeds with random radii, each cell taking
    /// its Chebyshev distance beyond the nearest seed's radius, capped at the
    /// coarsest level. Distances change by at most one between neighbours, so
    /// no level is skipped. Redrawn until every level is present.
    pub fn random(
        shape: [usize; 3],
        levels: usize,
        dim: usize,
        periodic: [bool; 3],
        seed: u64,
    ) -> Result<Self, MultiresError> {
        let n: usize = shape.iter().product();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let probe = LevelMap::single(shape, dim, periodic);
        let extent = shape.iter().take(dim).copied().max().unwrap_or(1);
        for _ in 0..64 {
            let seeds: Vec<([usize; 3], usize)> = (0..rng.gen_range(1..=3))
                .map(|_| {
                    let mut c = [0usize; 3];
                    for a in 0..dim {
                        c[a] = rng.gen_range(0..shape[a]);
                    }
                    (c, rng.gen_range(0..=extent / 4))
                })
                .collect();
            let cells: Vec<u8> = (0..n)
                .map(|c| {
                    let p = probe.coords(c);
                    seeds
                        .iter()
                        .map(|&(s, r)| {
                            let d = (0..dim)
                                .map(|a| {
                                    let d = p[a].abs_diff(s[a]);
                                    if periodic[a] {
                                        d.min(shape[a] - d)
                                    } else {
                                        d
                                    }
                                })
                                .max()
                                .unwrap_or(0);
                            d.saturating_sub(r).min(levels - 1)
                        })
                        .min()
                        .unwrap_or(0) as u8
                })
                .collect();
            if let Ok(map) = Self::new(shape, levels, dim, periodic, cells) {
                return Ok(map);
            }
        }
        Err(MultiresError::Input(format!(
            "no random {levels}-level map over {shape:?} found for seed {seed}"
        )))
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn periodic(&self) -> [bool; 3] {
        self.periodic
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub(crate) fn linear(&self, p: [usize; 3]) -> usize {
        p[0] + self.shape[0] * (p[1] + self.shape[1] * p[2])
    }

    pub(crate) fn coords(&self, c: usize) -> [usize; 3] {
        [
            c % self.shape[0],
            (c / self.shape[0]) % self.shape[1],
            c / (self.shape[0] * self.shape[1]),
        ]
    }

    /// Level of a coarsest cell.
    pub fn level(&self, cell: [usize; 3]) -> usize {
        self.cells[self.linear(cell)] as usize
    }

    /// Extent of the box of `level`, in that level's cells.
    pub fn level_shape(&self, level: usize) -> [usize; 3] {
        let f = 1 << (self.levels - 1 - level);
        let mut s = self.shape;
        for a in s.iter_mut().take(self.dim) {
            *a *= f;
        }
        s
    }

    /// Level owning position `p` of the `level` box.
    #[inline]
    pub fn level_at(&self, level: usize, p: [usize; 3]) -> usize {
        let shift = self.levels - 1 - level;
        let mut c = p;
        for a in c.iter_mut().take(self.dim) {
            *a >>= shift;
        }
        self.level(c)
    }
}
