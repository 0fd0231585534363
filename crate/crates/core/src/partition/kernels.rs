//! Stencil kernels for the partition engine.

use crate::lattice::MAX_Q;
use crate::lbm::kernel::{update_voxel, Upstream};
use crate::lbm::{Resolved, Setup};

use super::{NeighborAccess, PartitionError, StencilKernel};

/// Copies every component unchanged.
#[derive(Debug, Clone, Copy)]
pub struct IdentityKernel {
    pub cardinality: usize,
}

impl StencilKernel for IdentityKernel {
    fn cardinality(&self) -> usize {
        self.cardinality
    }

    fn update(&self, nb: &NeighborAccess<'_>, out: &mut [f64]) -> Result<(), PartitionError> {
        for (c, slot) in out.iter_mut().enumerate() {
            *slot = nb.get([0, 0, 0], c)?.expect("own voxel is always inside");
        }
        Ok(())
    }
}

/// Mean of a voxel and its four in-plane (x, y) neighbors, per component.
/// Neighbors beyond a closed face contribute the center value.
#[derive(Debug, Clone, Copy)]
pub struct FivePointKernel {
    pub cardinality: usize,
}

impl StencilKernel for FivePointKernel {
    fn cardinality(&self) -> usize {
        self.cardinality
    }

    fn update(&self, nb: &NeighborAccess<'_>, out: &mut [f64]) -> Result<(), PartitionError> {
        const OFFSETS: [[i32; 3]; 4] = [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0]];
        for (c, slot) in out.iter_mut().enumerate() {
            let center = nb.get([0, 0, 0], c)?.expect("own voxel is always inside");
            let mut sum = center;
            for o in OFFSETS {
                sum += nb.get(o, c)?.unwrap_or(center);
            }
            *slot = 0.2 * sum;
        }
        Ok(())
    }
}

/// One BGK stream-collide step through the shared voxel kernel.
#[derive(Debug, Clone)]
pub struct LbmKernel {
    setup: Setup,
    omega: f64,
}

impl LbmKernel {
    pub fn new(setup: Setup) -> Self {
        let omega = setup.omega();
        LbmKernel { setup, omega }
    }

    pub fn setup(&self) -> &Setup {
        &self.setup
    }
}

impl StencilKernel for LbmKernel {
    fn cardinality(&self) -> usize {
        self.setup.q()
    }

    fn update(&self, nb: &NeighborAccess<'_>, out: &mut [f64]) -> Result<(), PartitionError> {
        let lattice = &self.setup.lattice;
        let q = lattice.q();
        let g = nb.global();
        let own = nb.locate([0, 0, 0])?.expect("own voxel is always inside");
        let mut upstream = [Upstream::Wall; MAX_Q];
        for (i, slot) in upstream.iter_mut().enumerate().take(q) {
            let e = lattice.velocity(i);
            *slot = match nb.locate([-e[0], -e[1], -e[2]])? {
                Some(cell) => Upstream::Fluid(nb.read(cell, i)),
                None => {
                    let src = [g[0] - e[0] as i64, g[1] - e[1] as i64, g[2] - e[2] as i64];
                    match self.setup.domain.resolve(src) {
                        Resolved::Outside(wall) => wall,
                        Resolved::Inside(p) => {
                            return Err(PartitionError::Consistency(format!(
                                "source {p:?} is inside the domain but was not readable"
                            )))
                        }
                    }
                }
            };
        }
        let p = [g[0] as usize, g[1] as usize, g[2] as usize];
        let rule = self.setup.rule_at(p);
        update_voxel(
            lattice,
            self.omega,
            &rule,
            |i| upstream[i],
            |i| nb.read(own, i),
            &mut out[..q],
        );
        Ok(())
    }
}
