//! Domain edges and the regularized velocity boundary.

use serde::{Deserialize, Serialize};

use crate::lattice::{Lattice, MAX_Q};

use super::kernel::{Upstream, VoxelRule};

/// Upper face of `axis` moving tangentially with `velocity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lid {
    pub axis: usize,
    pub velocity: [f64; 3],
}

/// Box-shaped domain with per-axis periodicity. Non-periodic sides are walls,
/// except the optional lid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainBox {
    pub shape: [usize; 3],
    pub periodic: [bool; 3],
    pub lid: Option<Lid>,
}

/// A coordinate after wrapping, or the wall it falls into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resolved {
    Inside([usize; 3]),
    Outside(Upstream),
}

impl DomainBox {
    pub fn closed(shape: [usize; 3]) -> Self {
        DomainBox {
            shape,
            periodic: [false; 3],
            lid: None,
        }
    }

    pub fn periodic(shape: [usize; 3]) -> Self {
        DomainBox {
            shape,
            periodic: [true; 3],
            lid: None,
        }
    }

    pub fn voxels(&self) -> usize {
        self.shape.iter().product()
    }

    /// Wraps periodic axes. A point beyond the lid face only (not past any
    /// other wall) sees the moving wall; everything else outside is static.
    pub fn resolve(&self, p: [i64; 3]) -> Resolved {
        let mut q = [0usize; 3];
        let mut outside = 0;
        let mut past_lid = false;
        for a in 0..3 {
            let n = self.shape[a] as i64;
            let c = p[a];
            if (0..n).contains(&c) {
                q[a] = c as usize;
            } else if self.periodic[a] {
                q[a] = c.rem_euclid(n) as usize;
            } else {
                outside += 1;
                if matches!(self.lid, Some(l) if l.axis == a) && c >= n {
                    past_lid = true;
                }
            }
        }
        match (outside, past_lid) {
            (0, _) => Resolved::Inside(q),
            (1, true) => Resolved::Outside(Upstream::MovingWall(self.lid.unwrap().velocity)),
            _ => Resolved::Outside(Upstream::Wall),
        }
    }

    pub fn linear(&self, p: [usize; 3]) -> usize {
        p[0] + self.shape[0] * (p[1] + self.shape[1] * p[2])
    }

    pub fn coords(&self, linear: usize) -> [usize; 3] {
        let nx = self.shape[0];
        let ny = self.shape[1];
        [linear % nx, (linear / nx) % ny, linear / (nx * ny)]
    }
}

/// Velocity-prescribed inflow/outflow on the two faces normal to x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inflow {
    pub velocity: [f64; 3],
}

impl Inflow {
    pub fn rule_at(&self, shape: [usize; 3], p: [usize; 3]) -> VoxelRule {
        if p[0] == 0 {
            VoxelRule::Regularized {
                velocity: self.velocity,
                axis: 0,
                outward: -1,
            }
        } else if p[0] + 1 == shape[0] {
            VoxelRule::Regularized {
                velocity: self.velocity,
                axis: 0,
                outward: 1,
            }
        } else {
            VoxelRule::Bulk
        }
    }

    pub fn is_boundary(shape: [usize; 3], p: [usize; 3]) -> bool {
        p[0] == 0 || p[0] + 1 == shape[0]
    }
}

/// Regularized reconstruction at a face with outward normal `outward * e_axis`.
///
/// Incoming populations (`e . n < 0`) are unknown on entry. The density
/// follows from mass and normal momentum of the known ones, their
/// non-equilibrium parts are mirrored from the opposite direction, and the
/// populations are rebuilt from equilibrium plus the projected second moment
/// of the non-equilibrium part.
pub fn regularize(lattice: &Lattice, velocity: [f64; 3], axis: usize, outward: i32, f: &mut [f64]) {
    let q = lattice.q();
    let normal = |i: usize| lattice.velocity(i)[axis] * outward;
    let mut rho_tangent = 0.0;
    let mut rho_out = 0.0;
    for (i, fi) in f.iter().enumerate().take(q) {
        match normal(i) {
            0 => rho_tangent += fi,
            n if n > 0 => rho_out += fi,
            _ => {}
        }
    }
    let un = velocity[axis] * outward as f64;
    let rho = (rho_tangent + 2.0 * rho_out) / (1.0 + un);

    let mut feq = [0.0; MAX_Q];
    lattice.equilibrium_unchecked(rho, velocity, &mut feq[..q]);
    let mut pi = [[0.0; 3]; 3];
    for i in 0..q {
        let neq = if normal(i) < 0 {
            let o = lattice.opposite(i);
            f[o] - feq[o]
        } else {
            f[i] - feq[i]
        };
        let e = lattice.velocity(i);
        for a in 0..3 {
            for b in 0..3 {
                pi[a][b] += neq * (e[a] * e[b]) as f64;
            }
        }
    }
    for i in 0..q {
        let e = lattice.velocity(i);
        let mut contraction = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                let delta = if a == b { 1.0 / 3.0 } else { 0.0 };
                contraction += ((e[a] * e[b]) as f64 - delta) * pi[a][b];
            }
        }
        f[i] = feq[i] + lattice.weight(i) * 4.5 * contraction;
    }
}

/// Convenience wrapper applying `rule` in place; bulk voxels are untouched.
pub fn apply_rule(lattice: &Lattice, rule: &VoxelRule, f: &mut [f64]) {
    if let VoxelRule::Regularized {
        velocity,
        axis,
        outward,
    } = *rule
    {
        regularize(lattice, velocity, axis, outward, f);
    }
}
