//! The per-voxel update every grid representation calls.
//!
//! Stored state is post-collision. One step of a voxel pulls population `i`
//! from `x - e_i` (applying wall rules where that source is missing), runs an
//! optional regularized reconstruction, then relaxes toward equilibrium.

use crate::lattice::{Lattice, MAX_Q};

use super::boundary::regularize;

/// Density assigned to moving walls in the momentum correction.
pub const WALL_DENSITY: f64 = 1.0;

/// Where population `i` of a voxel comes from during streaming.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Upstream {
    /// Post-collision value read from `x - e_i`.
    Fluid(f64),
    /// Static no-slip wall: half-way bounce-back.
    Wall,
    /// Wall moving with the given velocity.
    MovingWall([f64; 3]),
}

/// Per-voxel treatment beyond plain streaming.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VoxelRule {
    Bulk,
    /// Velocity-prescribed face. `outward` is +1 or -1 along `axis`.
    Regularized {
        velocity: [f64; 3],
        axis: usize,
        outward: i32,
    },
}

impl VoxelRule {
    pub fn is_regularized(&self) -> bool {
        matches!(self, VoxelRule::Regularized { .. })
    }

    /// Population slots touched per voxel: read + write for bounce-back and
    /// bulk, plus the equilibrium set for a regularized reconstruction.
    pub fn slot_cost(&self, q: usize) -> usize {
        match self {
            VoxelRule::Bulk => 2 * q,
            VoxelRule::Regularized { .. } => 3 * q,
        }
    }
}

/// BGK relaxation rate for relaxation time `tau`.
pub fn omega(tau: f64) -> f64 {
    1.0 / tau
}

/// Streaming plus boundary handling for one voxel. `local(i)` is the voxel's
/// own post-collision population `i`.
#[inline]
pub fn gather<U, L>(lattice: &Lattice, rule: &VoxelRule, upstream: U, local: L, f: &mut [f64])
where
    U: Fn(usize) -> Upstream,
    L: Fn(usize) -> f64,
{
    for (i, slot) in f.iter_mut().enumerate().take(lattice.q()) {
        *slot = match upstream(i) {
            Upstream::Fluid(v) => v,
            Upstream::Wall => local(lattice.opposite(i)),
            Upstream::MovingWall(u) => {
                let e = lattice.velocity(i);
                let eu = e[0] as f64 * u[0] + e[1] as f64 * u[1] + e[2] as f64 * u[2];
                local(lattice.opposite(i)) + 2.0 * lattice.weight(i) * WALL_DENSITY * eu * 3.0
            }
        };
    }
    if let VoxelRule::Regularized {
        velocity,
        axis,
        outward,
    } = *rule
    {
        regularize(lattice, velocity, axis, outward, &mut f[..lattice.q()]);
    }
}

/// In-place BGK collision: `f <- (1 - omega) f + omega feq`.
#[inline]
pub fn collide(lattice: &Lattice, omega: f64, f: &mut [f64]) {
    let q = lattice.q();
    let (rho, u) = lattice.moments(&f[..q]);
    let mut feq = [0.0; MAX_Q];
    lattice.equilibrium_unchecked(rho, u, &mut feq[..q]);
    let keep = 1.0 - omega;
    for i in 0..q {
        f[i] = keep * f[i] + omega * feq[i];
    }
}

/// Fused stream + boundary + collide for one voxel, written into `out`.
#[inline]
pub fn update_voxel<U, L>(
    lattice: &Lattice,
    omega: f64,
    rule: &VoxelRule,
    upstream: U,
    local: L,
    out: &mut [f64],
) where
    U: Fn(usize) -> Upstream,
    L: Fn(usize) -> f64,
{
    gather(lattice, rule, upstream, local, out);
    collide(lattice, omega, out);
}

/// Largest population magnitude a stable run is allowed to reach.
pub const INSTABILITY_LIMIT: f64 = 1e3;

/// Why a population vector is rejected, if it is.
pub fn check_populations(f: &[f64]) -> Option<(usize, f64)> {
    f.iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || v.abs() > INSTABILITY_LIMIT)
        .map(|(i, v)| (i, *v))
}
