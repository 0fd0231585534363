use crate::lattice::{Lattice, MAX_Q};
use crate::lbm::kernel::{collide, gather, update_voxel, Upstream, VoxelRule, INSTABILITY_LIMIT};
use crate::lbm::{Field, LbmError};

use super::graph::{ExecutionGraph, Op};
use super::grid::{MultiResGrid, Source};
use super::MultiresError;

/// Relaxation times per level, finest first, from the coarsest level's `tau`
/// with `tau_fine = 2 tau_coarse - 1/2`.
pub fn level_taus(tau_coarsest: f64, levels: usize) -> Vec<f64> {
    let mut taus = vec![tau_coarsest; levels];
    for l in (0..levels.saturating_sub(1)).rev() {
        taus[l] = 2.0 * taus[l + 1] - 0.5;
    }
    taus
}

/// Ping-pong population storage of one level.
#[derive(Debug, Clone)]
struct LevelState {
    state: [Vec<f64>; 2],
    ghosts: [Vec<f64>; 2],
    /// Coalesced populations per ghost group of the next finer level.
    coalesced: Vec<f64>,
}

fn split(bufs: &mut [Vec<f64>; 2], read: usize) -> (&[f64], &mut [f64]) {
    let (a, b) = bufs.split_at_mut(1);
    if read == 0 {
        (&a[0], &mut b[0])
    } else {
        (&b[0], &mut a[0])
    }
}

/// BGK solver over a multi-resolution grid driven by an execution graph.
#[derive(Debug, Clone)]
pub struct MultiResSolver {
    lattice: Lattice,
    grid: MultiResGrid,
    graph: ExecutionGraph,
    taus: Vec<f64>,
    levels: Vec<LevelState>,
    steps: u64,
}

impl MultiResSolver {
    /// Solver whose voxels start at the equilibrium of `init(level, voxel)`.
    pub fn new(
        lattice: Lattice,
        tau_coarsest: f64,
        grid: MultiResGrid,
        fused: bool,
        init: impl Fn(usize, [usize; 3]) -> (f64, [f64; 3]),
    ) -> Result<Self, MultiresError> {
        let nlev = grid.num_levels();
        if tau_coarsest <= 0.5 {
            return Err(MultiresError::Lbm(LbmError::Config(format!(
                "tau must exceed 0.5, got {tau_coarsest}"
            ))));
        }
        let q = lattice.q();
        let mut levels = Vec::with_capacity(nlev);
        for l in 0..nlev {
            let lv = grid.level(l);
            let mut state = vec![0.0; lv.slots() * q];
            let bv = lv.grid.block_voxels();
            for (b, loc) in lv.grid.active_voxels() {
                let slot = b * bv + loc;
                let (rho, u) = init(l, lv.grid.voxel(b, loc));
                lattice.equilibrium(rho, u, &mut state[slot * q..(slot + 1) * q])?;
            }
            let ghosts = vec![0.0; lv.ghosts.len() * q];
            let coalesced = if l > 0 {
                vec![0.0; grid.level(l - 1).ghost_groups() * q]
            } else {
                Vec::new()
            };
            levels.push(LevelState {
                state: [state.clone(), state],
                ghosts: [ghosts.clone(), ghosts],
                coalesced,
            });
        }
        let graph = ExecutionGraph::build(&grid, fused);
        Ok(MultiResSolver {
            taus: level_taus(tau_coarsest, nlev),
            lattice,
            grid,
            graph,
            levels,
            steps: 0,
        })
    }

    pub fn grid(&self) -> &MultiResGrid {
        &self.grid
    }

    pub fn graph(&self) -> &ExecutionGraph {
        &self.graph
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    /// Buffer holding level `l`'s state at sub-step `k` of the current step.
    fn parity(&self, l: usize, k: usize) -> usize {
        let per_step = 1u64 << (self.grid.num_levels() - 1 - l);
        ((self.steps * per_step + k as u64) % 2) as usize
    }

    /// Current post-collision populations of level `l`, indexed
    /// `slot * q + i`.
    pub fn state(&self, l: usize) -> &[f64] {
        &self.levels[l].state[self.parity(l, 0)]
    }

    /// One coarse step in the graph's default order.
    pub fn step(&mut self) -> Result<(), MultiresError> {
        let order = self.graph.topological_order()?;
        self.step_in_order(&order)
    }

    /// One coarse step running nodes in `order`, which must be topological.
    pub fn step_in_order(&mut self, order: &[usize]) -> Result<(), MultiresError> {
        if !self.graph.is_valid_order(order) {
            return Err(MultiresError::Input(
                "node order violates the execution graph".into(),
            ));
        }
        for &id in order {
            self.run_node(id)?;
        }
        self.steps += 1;
        self.check()
    }

    pub fn run(&mut self, steps: u64) -> Result<(), MultiresError> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    fn run_node(&mut self, id: usize) -> Result<(), MultiresError> {
        let node = self.graph.nodes[id].clone();
        let l = node.level;
        let k = node.substep;
        let q = self.lattice.q();
        match node.op {
            Op::Explosion => {
                // level l post-collision values copied to every child ghost
                let read = self.parity(l, k);
                let write = self.parity(l - 1, 2 * k);
                let children = self.grid.children();
                let fine = self.grid.level(l - 1);
                let (coarse_levels, fine_levels) = {
                    let (a, b) = self.levels.split_at_mut(l);
                    (b, a)
                };
                let src = &coarse_levels[0].state[read];
                let dst = &mut fine_levels[l - 1].ghosts[write];
                for (g, &parent) in fine.ghost_parents.iter().enumerate() {
                    let values = &src[parent * q..(parent + 1) * q];
                    for c in 0..children {
                        let ghost = g * children + c;
                        dst[ghost * q..(ghost + 1) * q].copy_from_slice(values);
                    }
                }
            }
            Op::Coalescence => {
                let read = self.parity(l - 1, 2 * k + 2);
                let children = self.grid.children();
                let scale = 1.0 / children as f64;
                let fine = self.grid.level(l - 1);
                let (fine_levels, coarse_levels) = self.levels.split_at_mut(l);
                let src = &fine_levels[l - 1].ghosts[read];
                let dst = &mut coarse_levels[0].coalesced;
                for g in 0..fine.ghost_groups() {
                    for i in 0..q {
                        let mut sum = 0.0;
                        for c in 0..children {
                            sum += src[(g * children + c) * q + i];
                        }
                        dst[g * q + i] = sum * scale;
                    }
                }
            }
            Op::FusedCollideStream | Op::Stream | Op::Collide => {
                let read = self.parity(l, k);
                self.compute(l, read, node.op, &node.blocks, node.ghosts)?;
            }
        }
        Ok(())
    }

    fn compute(
        &mut self,
        l: usize,
        read: usize,
        op: Op,
        blocks: &[usize],
        ghosts: bool,
    ) -> Result<(), MultiresError> {
        let lattice = &self.lattice;
        let q = lattice.q();
        let omega = 1.0 / self.taus[l];
        let lv = self.grid.level(l);
        let bv = lv.grid.block_voxels();
        let st = &mut self.levels[l];
        let ghost_read: &[f64] = &st.ghosts[read];
        let coalesced: &[f64] = &st.coalesced;
        let (cur, next) = split(&mut st.state, read);
        let resolve = |src: Source, i: usize| -> Upstream {
            match src {
                Source::Active(s) => Upstream::Fluid(cur[s as usize * q + i]),
                Source::Ghost(g) => Upstream::Fluid(ghost_read[g as usize * q + i]),
                Source::Coalesced(g) => Upstream::Fluid(coalesced[g as usize * q + i]),
                Source::Boundary(w) => w,
                Source::Own | Source::Unused => unreachable!("active voxels always have a source"),
            }
        };
        let mut out = [0.0; MAX_Q];
        for &b in blocks {
            for loc in 0..bv {
                if !lv.grid.is_active(b, loc) {
                    continue;
                }
                let slot = b * bv + loc;
                let srcs = &lv.sources[slot * q..(slot + 1) * q];
                let own = |i: usize| cur[slot * q + i];
                let dst = &mut next[slot * q..(slot + 1) * q];
                match op {
                    Op::FusedCollideStream => {
                        update_voxel(
                            lattice,
                            omega,
                            &VoxelRule::Bulk,
                            |i| resolve(srcs[i], i),
                            own,
                            &mut out[..q],
                        );
                        dst.copy_from_slice(&out[..q]);
                    }
                    Op::Stream => {
                        gather(lattice, &VoxelRule::Bulk, |i| resolve(srcs[i], i), own, dst)
                    }
                    Op::Collide => collide(lattice, omega, dst),
                    _ => unreachable!(),
                }
            }
        }
        if ghosts && op != Op::Collide {
            let (gcur, gnext) = split(&mut st.ghosts, read);
            for g in 0..lv.ghosts.len() {
                let srcs = &lv.ghost_sources[g * q..(g + 1) * q];
                let own = |i: usize| gcur[g * q + i];
                let upstream = |i: usize| match srcs[i] {
                    Source::Own => Upstream::Fluid(gcur[g * q + i]),
                    Source::Active(s) => Upstream::Fluid(cur[s as usize * q + i]),
                    Source::Ghost(h) => Upstream::Fluid(gcur[h as usize * q + i]),
                    Source::Boundary(w) => w,
                    Source::Coalesced(_) | Source::Unused => unreachable!("ghosts never coalesce"),
                };
                gather(
                    lattice,
                    &VoxelRule::Bulk,
                    upstream,
                    own,
                    &mut gnext[g * q..(g + 1) * q],
                );
            }
        }
        Ok(())
    }

    fn check(&self) -> Result<(), MultiresError> {
        let q = self.lattice.q();
        for l in 0..self.grid.num_levels() {
            let lv = self.grid.level(l);
            let bv = lv.grid.block_voxels();
            let state = self.state(l);
            for (b, loc) in lv.grid.active_voxels() {
                let slot = b * bv + loc;
                for (i, &v) in state[slot * q..(slot + 1) * q].iter().enumerate() {
                    let voxel = lv.grid.voxel(b, loc);
                    if !v.is_finite() {
                        return Err(LbmError::NonFinite {
                            step: self.steps,
                            voxel,
                            component: i,
                        }
                        .into());
                    }
                    if v.abs() > INSTABILITY_LIMIT {
                        return Err(LbmError::Unstable {
                            step: self.steps,
                            voxel,
                            value: v,
                        }
                        .into());
                    }
                }
            }
        }
        Ok(())
    }

    /// Total mass with each level's cells weighted by their volume in finest
    /// cells.
    pub fn mass(&self) -> f64 {
        let q = self.lattice.q();
        let dim = self.grid.dim();
        let mut total = 0.0;
        for l in 0..self.grid.num_levels() {
            let lv = self.grid.level(l);
            let bv = lv.grid.block_voxels();
            let state = self.state(l);
            let weight = (1u64 << (dim * l)) as f64;
            let mut level_sum = 0.0;
            for (b, loc) in lv.grid.active_voxels() {
                let slot = b * bv + loc;
                level_sum += state[slot * q..(slot + 1) * q].iter().sum::<f64>();
            }
            total += weight * level_sum;
        }
        total
    }

    /// Whether the active states of every level match bit for bit.
    pub fn bitwise_eq(&self, other: &MultiResSolver) -> bool {
        (0..self.grid.num_levels()).all(|l| {
            let a = self.state(l);
            let b = other.state(l);
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        })
    }

    /// Largest velocity magnitude over all levels.
    pub fn max_speed(&self) -> f64 {
        let q = self.lattice.q();
        let mut best = 0.0f64;
        for l in 0..self.grid.num_levels() {
            let lv = self.grid.level(l);
            let bv = lv.grid.block_voxels();
            let state = self.state(l);
            for (b, loc) in lv.grid.active_voxels() {
                let slot = b * bv + loc;
                let (_, u) = self.lattice.moments(&state[slot * q..(slot + 1) * q]);
                best = best.max((u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt());
            }
        }
        best
    }

    /// The state resampled on the virtual finest box, each coarse cell copied
    /// to the finest cells it covers.
    pub fn finest_field(&self) -> Field {
        let q = self.lattice.q();
        let dim = self.grid.dim();
        let shape = self.grid.level(0).shape;
        let mut field = Field::zeros(shape, q);
        for l in 0..self.grid.num_levels() {
            let lv = self.grid.level(l);
            let bv = lv.grid.block_voxels();
            let state = self.state(l);
            let f = 1usize << l;
            let span = [
                f,
                if dim >= 2 { f } else { 1 },
                if dim == 3 { f } else { 1 },
            ];
            for (b, loc) in lv.grid.active_voxels() {
                let slot = b * bv + loc;
                let p = lv.grid.voxel(b, loc);
                for dz in 0..span[2] {
                    for dy in 0..span[1] {
                        for dx in 0..span[0] {
                            let fp = [
                                p[0] * span[0] + dx,
                                p[1] * span[1] + dy,
                                p[2] * span[2] + dz,
                            ];
                            field
                                .voxel_mut(fp)
                                .copy_from_slice(&state[slot * q..(slot + 1) * q]);
                        }
                    }
                }
            }
        }
        field
    }
}
