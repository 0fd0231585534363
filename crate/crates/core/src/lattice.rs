//! Lattice Boltzmann velocity sets, equilibrium and moment recovery.
//!
//! Directions are stored in one canonical order shared by every layout,
//! ledger and report in the crate: the rest direction first, then the axis
//! directions, then the face diagonals, then the corner diagonals.
//! Within each speed class directions are sorted lexicographically on
//! `(x, y, z)` with `-1 < 0 < 1`.
//!
//! ```text
//!  D2Q9 in canonical order (x right, y up)
//!
//!   6   3   8
//!     \ | /
//!   1 - 0 - 4
//!     / | \
//!   5   2   7
//! ```

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest direction count of any supported lattice.
pub const MAX_Q: usize = 27;

/// Lattice speed of sound squared, `1/3` for all supported velocity sets.
pub const CS2: f64 = 1.0 / 3.0;
const INV_CS2: f64 = 3.0;
const INV_2CS4: f64 = 4.5;
const INV_2CS2: f64 = 1.5;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("non-finite input to {0}")]
    NonFinite(&'static str),
    #[error("degenerate state: density {0} is not positive")]
    Degenerate(f64),
    #[error("expected {expected} populations, got {got}")]
    Length { expected: usize, got: usize },
    #[error("unknown lattice kind `{0}`")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LatticeKind {
    D2Q9,
    D3Q19,
    D3Q27,
}

impl LatticeKind {
    pub const ALL: [LatticeKind; 3] = [LatticeKind::D2Q9, LatticeKind::D3Q19, LatticeKind::D3Q27];

    pub fn dim(self) -> usize {
        match self {
            LatticeKind::D2Q9 => 2,
            LatticeKind::D3Q19 | LatticeKind::D3Q27 => 3,
        }
    }

    pub fn q(self) -> usize {
        match self {
            LatticeKind::D2Q9 => 9,
            LatticeKind::D3Q19 => 19,
            LatticeKind::D3Q27 => 27,
        }
    }

    // Largest |e|^2 admitted and the weight of each speed class |e|^2 = 0..=3.
    fn speed_table(self) -> (i32, [Ratio<i64>; 4]) {
        let r = Ratio::new;
        let zero = r(0, 1);
        match self {
            LatticeKind::D2Q9 => (2, [r(4, 9), r(1, 9), r(1, 36), zero]),
            LatticeKind::D3Q19 => (2, [r(1, 3), r(1, 18), r(1, 36), zero]),
            LatticeKind::D3Q27 => (3, [r(8, 27), r(2, 27), r(1, 54), r(1, 216)]),
        }
    }
}

impl fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LatticeKind::D2Q9 => "D2Q9",
            LatticeKind::D3Q19 => "D3Q19",
            LatticeKind::D3Q27 => "D3Q27",
        };
        f.write_str(s)
    }
}

impl FromStr for LatticeKind {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "D2Q9" => Ok(LatticeKind::D2Q9),
            "D3Q19" => Ok(LatticeKind::D3Q19),
            "D3Q27" => Ok(LatticeKind::D3Q27),
            _ => Err(LatticeError::UnknownKind(s.to_string())),
        }
    }
}

/// A discrete velocity set. Immutable once built.
#[derive(Debug, Clone)]
pub struct Lattice {
    kind: LatticeKind,
    velocities: Vec<[i32; 3]>,
    weights_exact: Vec<Ratio<i64>>,
    weights: Vec<f64>,
    opposite: Vec<usize>,
}

impl Lattice {
    /// Builds the velocity set for `kind` in canonical direction order.
    pub fn new(kind: LatticeKind) -> Self {
        let dim = kind.dim();
        let (max_speed, class_weights) = kind.speed_table();
        let zr = if dim == 3 { -1..=1 } else { 0..=0 };
        let mut velocities = Vec::with_capacity(kind.q());
        for x in -1..=1 {
            for y in -1..=1 {
                for z in zr.clone() {
                    let e = [x, y, z];
                    if speed2(e) <= max_speed {
                        velocities.push(e);
                    }
                }
            }
        }
        velocities.sort_by_key(|&e| (speed2(e), e));
        debug_assert_eq!(velocities.len(), kind.q());

        let weights_exact: Vec<_> = velocities
            .iter()
            .map(|&e| class_weights[speed2(e) as usize])
            .collect();
        let weights = weights_exact
            .iter()
            .map(|w| *w.numer() as f64 / *w.denom() as f64)
            .collect();
        let opposite = velocities
            .iter()
            .map(|&e| {
                let neg = [-e[0], -e[1], -e[2]];
                velocities
                    .iter()
                    .position(|&v| v == neg)
                    .expect("velocity sets are symmetric")
            })
            .collect();
        Lattice {
            kind,
            velocities,
            weights_exact,
            weights,
            opposite,
        }
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn q(&self) -> usize {
        self.velocities.len()
    }

    pub fn velocities(&self) -> &[[i32; 3]] {
        &self.velocities
    }

    pub fn velocity(&self, i: usize) -> [i32; 3] {
        self.velocities[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights_exact(&self) -> &[Ratio<i64>] {
        &self.weights_exact
    }

    pub fn opposite(&self, i: usize) -> usize {
        self.opposite[i]
    }

    pub fn opposites(&self) -> &[usize] {
        &self.opposite
    }

    pub fn cs2(&self) -> f64 {
        CS2
    }

    /// Index of the rest direction (always 0 in canonical order).
    pub fn rest(&self) -> usize {
        0
    }

    /// Directions whose component along `axis` has the given sign.
    pub fn crossing(&self, axis: usize, positive: bool) -> Vec<usize> {
        (0..self.q())
            .filter(|&i| {
                let c = self.velocities[i][axis];
                if positive {
                    c > 0
                } else {
                    c < 0
                }
            })
            .collect()
    }

    /// Second-order BGK equilibrium written into `out`.
    pub fn equilibrium(&self, rho: f64, u: [f64; 3], out: &mut [f64]) -> Result<(), LatticeError> {
        if out.len() != self.q() {
            return Err(LatticeError::Length {
                expected: self.q(),
                got: out.len(),
            });
        }
        if !rho.is_finite() || u.iter().any(|c| !c.is_finite()) {
            return Err(LatticeError::NonFinite("equilibrium"));
        }
        self.equilibrium_unchecked(rho, u, out);
        Ok(())
    }

    #[inline]
    pub(crate) fn equilibrium_unchecked(&self, rho: f64, u: [f64; 3], out: &mut [f64]) {
        let uu = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
        for (i, slot) in out.iter_mut().enumerate() {
            let e = self.velocities[i];
            let eu = e[0] as f64 * u[0] + e[1] as f64 * u[1] + e[2] as f64 * u[2];
            *slot =
                self.weights[i] * rho * (1.0 + INV_CS2 * eu + INV_2CS4 * eu * eu - INV_2CS2 * uu);
        }
    }

    /// Density and velocity of a population vector.
    pub fn macroscopic(&self, f: &[f64]) -> Result<(f64, [f64; 3]), LatticeError> {
        if f.len() != self.q() {
            return Err(LatticeError::Length {
                expected: self.q(),
                got: f.len(),
            });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(LatticeError::NonFinite("macroscopic"));
        }
        let (rho, u) = self.moments(f);
        if rho <= 0.0 {
            return Err(LatticeError::Degenerate(rho));
        }
        Ok((rho, u))
    }

    #[inline]
    pub(crate) fn moments(&self, f: &[f64]) -> (f64, [f64; 3]) {
        let mut rho = 0.0;
        let mut m = [0.0; 3];
        for (i, &fi) in f.iter().enumerate() {
            let e = self.velocities[i];
            rho += fi;
            m[0] += fi * e[0] as f64;
            m[1] += fi * e[1] as f64;
            m[2] += fi * e[2] as f64;
        }
        (rho, [m[0] / rho, m[1] / rho, m[2] / rho])
    }

    pub fn descriptor(&self) -> LatticeDescriptor {
        LatticeDescriptor {
            kind: self.kind,
            dim: self.dim(),
            q: self.q(),
            velocities: self.velocities.clone(),
            weights: self.weights_exact.iter().map(|w| w.to_string()).collect(),
            opposite: self.opposite.clone(),
            cs2: "1/3".to_string(),
        }
    }
}

fn speed2(e: [i32; 3]) -> i32 {
    e[0] * e[0] + e[1] * e[1] + e[2] * e[2]
}

/// JSON-serializable snapshot of a lattice; weights are exact fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeDescriptor {
    pub kind: LatticeKind,
    pub dim: usize,
    pub q: usize,
    pub velocities: Vec<[i32; 3]>,
    pub weights: Vec<String>,
    pub opposite: Vec<usize>,
    pub cs2: String,
}
