use serde::Serialize;

use crate::lattice::MAX_Q;
use crate::lbm::kernel::{update_voxel, Upstream, VoxelRule};
use crate::lbm::{Field, Inflow, LbmError, Resolved, Setup};

use super::arrange::{arrange, classify_blocks, Arranged};
use super::dispatch::{
    dispatch_plan, DispatchPlan, Indexing, KernelPlan, NaiveStorage, BOUNDARY_KERNEL,
    INTERIOR_KERNEL, SINGLE_KERNEL,
};
use super::grid::{BlockSparseGrid, Lookup};
use super::{SparseError, Strategy};

/// What one step actually launched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecutionReport {
    pub strategy: Strategy,
    pub kernels: Vec<KernelPlan>,
    pub extra_storage_bytes: usize,
    pub indexing: Indexing,
    pub peak_cost: usize,
}

impl ExecutionReport {
    /// The report a step of `plan` would produce.
    pub fn from_plan(plan: &DispatchPlan) -> Self {
        ExecutionReport {
            strategy: plan.strategy,
            kernels: plan.kernels.clone(),
            extra_storage_bytes: plan.extra_storage_bytes,
            indexing: plan.indexing,
            peak_cost: plan.peak_cost(),
        }
    }
}

/// BGK solver over a block-sparse grid arranged for one strategy.
#[derive(Debug, Clone)]
pub struct SparseSolver {
    setup: Setup,
    arranged: Arranged,
    plan: DispatchPlan,
    bufs: [Vec<f64>; 2],
    cur: usize,
    step: u64,
}

/// Bytes of one compact index entry.
pub const INDEX_BYTES: usize = 4;

fn face_rule(velocity: [f64; 3], p: [usize; 3]) -> VoxelRule {
    VoxelRule::Regularized {
        velocity,
        axis: 0,
        outward: if p[0] == 0 { -1 } else { 1 },
    }
}

impl SparseSolver {
    /// Builds the grid from the active voxels of `initial` and arranges it.
    pub fn new(
        setup: Setup,
        strategy: Strategy,
        initial: &Field,
        edge: usize,
        naive_storage: NaiveStorage,
    ) -> Result<Self, SparseError> {
        let shape = setup.domain.shape;
        if initial.shape != shape || initial.q != setup.q() {
            return Err(SparseError::Input(
                "initial field does not match the setup".into(),
            ));
        }
        let grid = BlockSparseGrid::from_mask(shape, edge, setup.domain.periodic, &initial.active)?;
        let inflow = setup.inflow;
        let is_boundary = |p: [usize; 3]| inflow.is_some() && Inflow::is_boundary(shape, p);
        let classes = classify_blocks(&grid, is_boundary);
        let dim = setup.lattice.dim();
        let arranged = arrange(strategy, &grid, &classes, dim, |p| {
            inflow.filter(|_| is_boundary(p)).map(|i| i.velocity)
        });
        let plan = dispatch_plan(
            strategy,
            classes.n_b,
            classes.n_nb,
            setup.q(),
            grid.block_voxels(),
            dim * std::mem::size_of::<f64>(),
            INDEX_BYTES,
            naive_storage,
        );
        let q = setup.q();
        let bv = arranged.grid.block_voxels();
        let mut buf = vec![0.0; arranged.grid.num_blocks() * q * bv];
        for (b, l) in arranged.grid.active_voxels() {
            let f = initial.voxel(arranged.grid.voxel(b, l));
            for i in 0..q {
                buf[(b * q + i) * bv + l] = f[i];
            }
        }
        Ok(SparseSolver {
            setup,
            arranged,
            plan,
            bufs: [buf.clone(), buf],
            cur: 0,
            step: 0,
        })
    }

    pub fn arranged(&self) -> &Arranged {
        &self.arranged
    }

    pub fn plan(&self) -> &DispatchPlan {
        &self.plan
    }

    pub fn grid(&self) -> &BlockSparseGrid {
        &self.arranged.grid
    }

    pub fn storage(&self) -> &[f64] {
        &self.bufs[self.cur]
    }

    /// One stream-collide step through the strategy's kernels.
    pub fn step(&mut self) -> Result<ExecutionReport, SparseError> {
        let q = self.setup.q();
        let heavy = 3 * q;
        let light = 2 * q;
        let (b0, b1) = self.bufs.split_at_mut(1);
        let (read, write) = if self.cur == 0 {
            (&b0[0][..], &mut b1[0][..])
        } else {
            (&b1[0][..], &mut b0[0][..])
        };
        let a = &self.arranged;
        let setup = &self.setup;
        let n = a.grid.num_blocks();
        let inflow_velocity = setup.inflow.map(|i| i.velocity).unwrap_or([0.0; 3]);
        let shape = setup.domain.shape;
        let has_faces = setup.inflow.is_some();
        let interior_check = |p: [usize; 3]| {
            if cfg!(debug_assertions) && has_faces && Inflow::is_boundary(shape, p) {
                Err(SparseError::ContractViolation {
                    kernel: INTERIOR_KERNEL,
                    voxel: p,
                })
            } else {
                Ok(VoxelRule::Bulk)
            }
        };
        let launch = |name: &str, blocks: usize, cost| KernelPlan {
            name: name.to_string(),
            blocks,
            cost,
        };

        let kernels = match a.strategy {
            Strategy::Naive => {
                let inline = a
                    .inline
                    .as_ref()
                    .expect("naive arrangement keeps inline metadata");
                let bv = a.grid.block_voxels();
                sweep(setup, &a.grid, read, write, 0..n, |b, l, p| {
                    Ok(match inline[b * bv + l] {
                        Some(v) => face_rule(v, p),
                        None => VoxelRule::Bulk,
                    })
                })?;
                vec![launch(SINGLE_KERNEL, n, heavy)]
            }
            Strategy::DisagBitmask => {
                let idx = a
                    .indirect
                    .as_ref()
                    .expect("bitmask arrangement keeps an index");
                // Both kernels are launched over every block; each returns
                // early from blocks whose bit does not select it.
                sweep(
                    setup,
                    &a.grid,
                    read,
                    write,
                    (0..n).filter(|&b| a.bit(b)),
                    |b, l, p| {
                        Ok(match idx.id(b, l) {
                            Some(id) => face_rule(idx.velocity(id), p),
                            None => VoxelRule::Bulk,
                        })
                    },
                )?;
                sweep(
                    setup,
                    &a.grid,
                    read,
                    write,
                    (0..n).filter(|&b| !a.bit(b)),
                    |_, _, p| interior_check(p),
                )?;
                vec![
                    launch(BOUNDARY_KERNEL, n, heavy),
                    launch(INTERIOR_KERNEL, n, light),
                ]
            }
            Strategy::DisagMem => {
                let n_b = a.classes.n_b;
                sweep(setup, &a.grid, read, write, 0..n_b, |_, _, p| {
                    Ok(if has_faces && Inflow::is_boundary(shape, p) {
                        face_rule(inflow_velocity, p)
                    } else {
                        VoxelRule::Bulk
                    })
                })?;
                sweep(setup, &a.grid, read, write, n_b..n, |_, _, p| {
                    interior_check(p)
                })?;
                vec![
                    launch(BOUNDARY_KERNEL, n_b, heavy),
                    launch(INTERIOR_KERNEL, n - n_b, light),
                ]
            }
        };
        self.cur ^= 1;
        self.step += 1;
        let peak_cost = kernels.iter().map(|k| k.cost).max().unwrap_or(0);
        Ok(ExecutionReport {
            strategy: a.strategy,
            kernels,
            extra_storage_bytes: self.plan.extra_storage_bytes,
            indexing: self.plan.indexing,
            peak_cost,
        })
    }

    /// Runs `steps` steps, checking stability after each one.
    pub fn run(&mut self, steps: u64) -> Result<Option<ExecutionReport>, SparseError> {
        let mut last = None;
        for _ in 0..steps {
            last = Some(self.step()?);
            self.check()?;
        }
        Ok(last)
    }

    fn check(&self) -> Result<(), SparseError> {
        let q = self.setup.q();
        let grid = &self.arranged.grid;
        let bv = grid.block_voxels();
        let buf = &self.bufs[self.cur];
        for (b, l) in grid.active_voxels() {
            for i in 0..q {
                let v = buf[(b * q + i) * bv + l];
                if !v.is_finite() || v.abs() > crate::lbm::kernel::INSTABILITY_LIMIT {
                    let voxel = grid.voxel(b, l);
                    return Err(LbmError::Unstable {
                        step: self.step,
                        voxel,
                        value: v,
                    }
                    .into());
                }
            }
        }
        Ok(())
    }

    /// Active voxels gathered into canonical order.
    pub fn to_field(&self) -> Field {
        let q = self.setup.q();
        let grid = &self.arranged.grid;
        let bv = grid.block_voxels();
        let mut field = Field::zeros(self.setup.domain.shape, q);
        field.active.iter_mut().for_each(|a| *a = false);
        let buf = &self.bufs[self.cur];
        for (b, l) in grid.active_voxels() {
            let p = grid.voxel(b, l);
            let v = field.linear(p);
            field.active[v] = true;
            for i in 0..q {
                field.data[v * q + i] = buf[(b * q + i) * bv + l];
            }
        }
        field
    }
}

fn sweep(
    setup: &Setup,
    grid: &BlockSparseGrid,
    read: &[f64],
    write: &mut [f64],
    blocks: impl Iterator<Item = usize>,
    rule_of: impl Fn(usize, usize, [usize; 3]) -> Result<VoxelRule, SparseError>,
) -> Result<(), SparseError> {
    let lattice = &setup.lattice;
    let q = lattice.q();
    let bv = grid.block_voxels();
    let omega = setup.omega();
    let mut out = [0.0; MAX_Q];
    for b in blocks {
        for l in 0..bv {
            if !grid.is_active(b, l) {
                continue;
            }
            let p = grid.voxel(b, l);
            let rule = rule_of(b, l, p)?;
            update_voxel(
                lattice,
                omega,
                &rule,
                |i| {
                    let e = lattice.velocity(i);
                    match grid.neighbor(b, l, [-e[0], -e[1], -e[2]]) {
                        Lookup::Active { block, local } => {
                            Upstream::Fluid(read[(block * q + i) * bv + local])
                        }
                        Lookup::Inactive => Upstream::Wall,
                        Lookup::Outside(g) => match setup.domain.resolve(g) {
                            Resolved::Outside(wall) => wall,
                            Resolved::Inside(_) => Upstream::Wall,
                        },
                    }
                },
                |i| read[(b * q + i) * bv + l],
                &mut out[..q],
            );
            for i in 0..q {
                write[(b * q + i) * bv + l] = out[i];
            }
        }
    }
    Ok(())
}
