//! Single-partition dense solver over a plain voxel-major array.
//!
//! This is the reference the partitioned, sparse and multi-resolution
//! engines are compared against.

use crate::lattice::MAX_Q;

use super::boundary::Resolved;
use super::kernel::{self, Upstream};
use super::{Field, LbmError, Setup};

#[derive(Debug, Clone)]
pub struct DenseSolver {
    setup: Setup,
    cur: Field,
    next: Field,
    step: u64,
}

impl DenseSolver {
    pub fn new(setup: Setup, initial: Field) -> Result<Self, LbmError> {
        if initial.shape != setup.domain.shape || initial.q != setup.q() {
            return Err(LbmError::Config(format!(
                "initial field {:?}x{} does not match domain {:?}x{}",
                initial.shape,
                initial.q,
                setup.domain.shape,
                setup.q()
            )));
        }
        let next = initial.clone();
        Ok(DenseSolver {
            setup,
            cur: initial,
            next,
            step: 0,
        })
    }

    pub fn setup(&self) -> &Setup {
        &self.setup
    }

    pub fn field(&self) -> &Field {
        &self.cur
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    fn upstream(&self, p: [usize; 3], i: usize) -> Upstream {
        let e = self.setup.lattice.velocity(i);
        let src = [
            p[0] as i64 - e[0] as i64,
            p[1] as i64 - e[1] as i64,
            p[2] as i64 - e[2] as i64,
        ];
        match self.setup.domain.resolve(src) {
            Resolved::Inside(s) => Upstream::Fluid(self.cur.voxel(s)[i]),
            Resolved::Outside(wall) => wall,
        }
    }

    /// One fused stream-collide step.
    pub fn step(&mut self) {
        let q = self.setup.q();
        let omega = self.setup.omega();
        let mut out = [0.0; MAX_Q];
        for v in 0..self.cur.voxels() {
            let p = self.cur.coords(v);
            let rule = self.setup.rule_at(p);
            let local = self.cur.voxel(p);
            kernel::update_voxel(
                &self.setup.lattice,
                omega,
                &rule,
                |i| self.upstream(p, i),
                |i| local[i],
                &mut out[..q],
            );
            self.next.voxel_mut(p).copy_from_slice(&out[..q]);
        }
        std::mem::swap(&mut self.cur, &mut self.next);
        self.step += 1;
    }

    /// Streaming and boundary handling only: the result is left in the
    /// current field, not yet collided.
    pub fn stream(&mut self) {
        let q = self.setup.q();
        let mut out = [0.0; MAX_Q];
        for v in 0..self.cur.voxels() {
            let p = self.cur.coords(v);
            let rule = self.setup.rule_at(p);
            let local = self.cur.voxel(p);
            kernel::gather(
                &self.setup.lattice,
                &rule,
                |i| self.upstream(p, i),
                |i| local[i],
                &mut out[..q],
            );
            self.next.voxel_mut(p).copy_from_slice(&out[..q]);
        }
        std::mem::swap(&mut self.cur, &mut self.next);
    }

    /// BGK collision of the current field in place.
    pub fn collide(&mut self) -> Result<(), LbmError> {
        collide_bgk(&self.setup, &mut self.cur, self.step)
    }

    /// Stream then collide as two sweeps; bitwise equal to [`step`](Self::step).
    pub fn step_staged(&mut self) -> Result<(), LbmError> {
        self.stream();
        self.collide()?;
        self.step += 1;
        Ok(())
    }

    pub fn run(&mut self, steps: u64) -> Result<(), LbmError> {
        for _ in 0..steps {
            self.step();
            self.cur.check(self.step)?;
        }
        Ok(())
    }
}

/// BGK collision over every active voxel of `field`.
pub fn collide_bgk(setup: &Setup, field: &mut Field, step: u64) -> Result<(), LbmError> {
    let q = setup.q();
    let omega = setup.omega();
    for v in 0..field.voxels() {
        if !field.active[v] {
            continue;
        }
        let f = &mut field.data[v * q..(v + 1) * q];
        if let Some(component) = f.iter().position(|x| !x.is_finite()) {
            return Err(LbmError::NonFinite {
                step,
                voxel: field.coords(v),
                component,
            });
        }
        kernel::collide(&setup.lattice, omega, f);
    }
    Ok(())
}
