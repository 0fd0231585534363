//! Scenario geometry and initial states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lattice::Lattice;

use super::boundary::{DomainBox, Inflow, Lid};
use super::{Field, LbmError, Setup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Closed box whose upper face along the last axis moves in +x.
    LidDrivenCavity,
    /// Fully periodic box.
    PeriodicBox,
    /// x faces carry a prescribed velocity, remaining faces are walls, and a
    /// sphere (a disc in 2D) is carved out of the fluid.
    FlowOverObstacle,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::LidDrivenCavity => "lid-driven-cavity",
            Scenario::PeriodicBox => "periodic-box",
            Scenario::FlowOverObstacle => "flow-over-obstacle",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = LbmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lid-driven-cavity" | "cavity" => Ok(Scenario::LidDrivenCavity),
            "periodic-box" | "periodic" => Ok(Scenario::PeriodicBox),
            "flow-over-obstacle" | "obstacle" => Ok(Scenario::FlowOverObstacle),
            _ => Err(LbmError::Config(format!("unknown scenario `{s}`"))),
        }
    }
}

/// Builds the solver setup of `scenario`. `velocity` is the lid velocity for
/// the cavity and the face velocity for the obstacle run.
pub fn setup_for(
    scenario: Scenario,
    lattice: Lattice,
    shape: [usize; 3],
    tau: f64,
    velocity: [f64; 3],
) -> Result<Setup, LbmError> {
    let speed = velocity.iter().map(|v| v * v).sum::<f64>().sqrt();
    if speed > 0.1 {
        return Err(LbmError::Config(format!(
            "velocity magnitude {speed} is outside the low-Mach envelope (<= 0.1)"
        )));
    }
    let domain = match scenario {
        Scenario::LidDrivenCavity => DomainBox {
            shape,
            periodic: [false; 3],
            lid: Some(Lid {
                axis: lattice.dim() - 1,
                velocity,
            }),
        },
        Scenario::PeriodicBox => DomainBox::periodic(shape),
        Scenario::FlowOverObstacle => DomainBox::closed(shape),
    };
    let setup = Setup::new(lattice, tau, domain)?;
    Ok(match scenario {
        Scenario::FlowOverObstacle => setup.with_inflow(Inflow { velocity }),
        _ => setup,
    })
}

/// Active voxels of `scenario`: everything except the obstacle.
pub fn active_mask(scenario: Scenario, shape: [usize; 3]) -> Vec<bool> {
    let n = shape.iter().product::<usize>();
    if scenario != Scenario::FlowOverObstacle {
        return vec![true; n];
    }
    let center = [
        shape[0] as f64 / 4.0,
        shape[1] as f64 / 2.0,
        shape[2] as f64 / 2.0,
    ];
    let planar = shape[2] == 1;
    let smallest = if planar {
        shape[0].min(shape[1])
    } else {
        shape[0].min(shape[1]).min(shape[2])
    };
    let radius = (smallest as f64 / 8.0).max(1.0);
    (0..n)
        .map(|v| {
            let p = [
                v % shape[0],
                (v / shape[0]) % shape[1],
                v / (shape[0] * shape[1]),
            ];
            let mut r2 = 0.0;
            for a in 0..if planar { 2 } else { 3 } {
                let d = p[a] as f64 + 0.5 - center[a];
                r2 += d * d;
            }
            r2 > radius * radius
        })
        .collect()
}

pub fn uniform_field(setup: &Setup, rho: f64, u: [f64; 3], active: &[bool]) -> Field {
    let q = setup.q();
    let mut field = Field::zeros(setup.domain.shape, q);
    let mut feq = vec![0.0; q];
    setup.lattice.equilibrium_unchecked(rho, u, &mut feq);
    for (v, &on) in active.iter().enumerate() {
        field.active[v] = on;
        if on {
            field.data[v * q..(v + 1) * q].copy_from_slice(&feq);
        }
    }
    field
}

/// Fluid at rest with unit density everywhere.
pub fn rest_field(setup: &Setup) -> Field {
    let n = setup.domain.voxels();
    uniform_field(setup, 1.0, [0.0; 3], &vec![true; n])
}

/// Equilibrium with seeded per-voxel density and velocity perturbations.
pub fn perturbed_field(setup: &Setup, seed: u64) -> Field {
    let q = setup.q();
    let dim = setup.lattice.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = Field::zeros(setup.domain.shape, q);
    for v in 0..field.voxels() {
        let rho = rng.gen_range(0.95..1.05);
        let mut u = [0.0; 3];
        for c in u.iter_mut().take(dim) {
            *c = rng.gen_range(-0.02..0.02);
        }
        setup
            .lattice
            .equilibrium_unchecked(rho, u, &mut field.data[v * q..(v + 1) * q]);
    }
    field
}

/// Initial state used by the runner for each scenario.
pub fn initial_field(scenario: Scenario, setup: &Setup, seed: u64) -> Field {
    match scenario {
        Scenario::LidDrivenCavity => rest_field(setup),
        Scenario::PeriodicBox => perturbed_field(setup, seed),
        Scenario::FlowOverObstacle => {
            let velocity = setup.inflow.map(|i| i.velocity).unwrap_or([0.0; 3]);
            uniform_field(
                setup,
                1.0,
                velocity,
                &active_mask(scenario, setup.domain.shape),
            )
        }
    }
}
