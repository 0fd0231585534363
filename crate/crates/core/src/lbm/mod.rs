//! BGK lattice Boltzmann solver: kernel, boundaries, the dense reference
//! implementation, scenarios and the configuration-driven runner.

pub mod boundary;
pub mod config;
pub mod dense;
pub mod kernel;
pub mod run;
pub mod scenario;

use thiserror::Error;

use crate::lattice::{Lattice, LatticeError};

pub use boundary::{DomainBox, Inflow, Lid, Resolved};
pub use kernel::{Upstream, VoxelRule};

#[derive(Debug, Error)]
pub enum LbmError {
    #[error("non-finite population {component} at voxel {voxel:?} (step {step})")]
    NonFinite {
        step: u64,
        voxel: [usize; 3],
        component: usize,
    },
    #[error("unstable run: |f| = {value:e} at voxel {voxel:?}, step {step}")]
    Unstable {
        step: u64,
        voxel: [usize; 3],
        value: f64,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Everything a voxel update needs besides the populations themselves.
#[derive(Debug, Clone)]
pub struct Setup {
    pub lattice: Lattice,
    pub tau: f64,
    pub domain: DomainBox,
    pub inflow: Option<Inflow>,
}

impl Setup {
    pub fn new(lattice: Lattice, tau: f64, domain: DomainBox) -> Result<Self, LbmError> {
        if !tau.is_finite() || tau <= 0.5 {
            return Err(LbmError::Config(format!("tau must exceed 0.5, got {tau}")));
        }
        if lattice.dim() == 2 && domain.shape[2] != 1 {
            return Err(LbmError::Config("2D lattices need a z extent of 1".into()));
        }
        Ok(Setup {
            lattice,
            tau,
            domain,
            inflow: None,
        })
    }

    pub fn with_inflow(mut self, inflow: Inflow) -> Self {
        self.inflow = Some(inflow);
        self
    }

    pub fn omega(&self) -> f64 {
        kernel::omega(self.tau)
    }

    pub fn q(&self) -> usize {
        self.lattice.q()
    }

    pub fn rule_at(&self, p: [usize; 3]) -> VoxelRule {
        match &self.inflow {
            Some(inflow) => inflow.rule_at(self.domain.shape, p),
            None => VoxelRule::Bulk,
        }
    }
}

/// Populations over a box in canonical order: voxels with x fastest, the
/// `q` components of each voxel adjacent. Inactive voxels hold zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub shape: [usize; 3],
    pub q: usize,
    pub data: Vec<f64>,
    pub active: Vec<bool>,
}

impl Field {
    pub fn zeros(shape: [usize; 3], q: usize) -> Self {
        let n = shape.iter().product::<usize>();
        Field {
            shape,
            q,
            data: vec![0.0; n * q],
            active: vec![true; n],
        }
    }

    pub fn voxels(&self) -> usize {
        self.active.len()
    }

    pub fn linear(&self, p: [usize; 3]) -> usize {
        p[0] + self.shape[0] * (p[1] + self.shape[1] * p[2])
    }

    pub fn coords(&self, linear: usize) -> [usize; 3] {
        let nx = self.shape[0];
        let ny = self.shape[1];
        [linear % nx, (linear / nx) % ny, linear / (nx * ny)]
    }

    pub fn voxel(&self, p: [usize; 3]) -> &[f64] {
        let v = self.linear(p);
        &self.data[v * self.q..(v + 1) * self.q]
    }

    pub fn voxel_mut(&mut self, p: [usize; 3]) -> &mut [f64] {
        let v = self.linear(p);
        &mut self.data[v * self.q..(v + 1) * self.q]
    }

    /// Sum of all populations over active voxels.
    pub fn mass(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_speed(&self, lattice: &Lattice) -> f64 {
        let mut best: f64 = 0.0;
        for v in 0..self.voxels() {
            if !self.active[v] {
                continue;
            }
            let (_, u) = lattice.moments(&self.data[v * self.q..(v + 1) * self.q]);
            best = best.max((u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt());
        }
        best
    }

    /// First `(voxel, component)` whose bits differ, if any.
    pub fn first_difference(&self, other: &Field) -> Option<([usize; 3], usize)> {
        if self.shape != other.shape || self.q != other.q {
            return Some(([0; 3], 0));
        }
        self.data
            .iter()
            .zip(&other.data)
            .position(|(a, b)| a.to_bits() != b.to_bits())
            .map(|k| (self.coords(k / self.q), k % self.q))
    }

    pub fn bitwise_eq(&self, other: &Field) -> bool {
        self.first_difference(other).is_none() && self.active == other.active
    }

    /// Rejects non-finite or runaway populations.
    pub fn check(&self, step: u64) -> Result<(), LbmError> {
        for v in 0..self.voxels() {
            let f = &self.data[v * self.q..(v + 1) * self.q];
            if let Some((component, value)) = kernel::check_populations(f) {
                let voxel = self.coords(v);
                return Err(if value.is_finite() {
                    LbmError::Unstable { step, voxel, value }
                } else {
                    LbmError::NonFinite {
                        step,
                        voxel,
                        component,
                    }
                });
            }
        }
        Ok(())
    }

    /// x-velocity along `axis` through the center of the other two axes.
    pub fn centerline(&self, lattice: &Lattice, axis: usize) -> Vec<f64> {
        let mut p = [self.shape[0] / 2, self.shape[1] / 2, self.shape[2] / 2];
        (0..self.shape[axis])
            .map(|k| {
                p[axis] = k;
                let f = self.voxel(p);
                if !self.active[self.linear(p)] {
                    return 0.0;
                }
                lattice.moments(f).1[0]
            })
            .collect()
    }
}
