//! Configuration-driven runs over any of the three grid representations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::commodel::{layout_params, partition_axis, FieldKind};
use crate::lattice::Lattice;
use crate::layout::Components;
use crate::multires::{
    format_distribution, GraphStats, LevelMap, MultiResGrid, MultiResSolver, MultiresError,
};
use crate::partition::kernels::LbmKernel;
use crate::partition::{neighbors, ExecMode, PartitionError, PartitionedField, TransferLedger};
use crate::sparse::{ExecutionReport, SparseError, SparseSolver};

use super::config::{Representation, SolverConfig};
use super::scenario::{self, Scenario};
use super::{Field, LbmError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Lbm(#[from] LbmError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Multires(#[from] MultiresError),
}

/// Mass and peak speed after `step` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostic {
    pub step: u64,
    pub mass: f64,
    pub max_speed: f64,
}

/// Measured halo traffic of one partition in one step next to the model's
/// prediction for its number of neighbour links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LedgerRow {
    pub step: u64,
    pub partition: usize,
    pub alpha: usize,
    pub beta: usize,
    pub model_alpha: usize,
    pub model_beta: usize,
}

impl LedgerRow {
    pub fn matches(&self) -> bool {
        self.alpha == self.model_alpha && self.beta == self.model_beta
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: SolverConfig,
    pub diagnostics: Vec<Diagnostic>,
    /// x-velocity along the last lattice axis through the domain center.
    pub centerline: Vec<f64>,
    pub ledger_rows: Vec<LedgerRow>,
    pub dispatch: Option<ExecutionReport>,
    pub graph: Option<GraphStats>,
    pub distribution: Option<String>,
    /// Final populations (resampled to the finest box for multires runs).
    #[serde(skip)]
    pub field: Field,
    #[serde(skip)]
    pub ledger: Option<TransferLedger>,
    #[serde(skip)]
    pub graph_dot: Option<String>,
}

impl RunReport {
    /// Relative change of total mass between the first and last diagnostic.
    pub fn mass_drift(&self) -> f64 {
        match (self.diagnostics.first(), self.diagnostics.last()) {
            (Some(a), Some(b)) => ((b.mass - a.mass) / a.mass).abs(),
            _ => 0.0,
        }
    }
}

// One engine lives per run, so variant size does not matter.
#[allow(clippy::large_enum_variant)]
enum Engine {
    Dense {
        field: PartitionedField,
        kernel: LbmKernel,
        ledger: TransferLedger,
    },
    Sparse {
        solver: SparseSolver,
        last: Option<ExecutionReport>,
    },
    Multires(MultiResSolver),
}

impl Engine {
    fn advance(&mut self, step: u64) -> Result<(), RunError> {
        match self {
            Engine::Dense {
                field,
                kernel,
                ledger,
            } => {
                let mut trace = Vec::new();
                field.step_occ(kernel, ledger, step, &mut trace)?;
                field.to_field().check(step + 1)?;
            }
            Engine::Sparse { solver, last } => {
                if let Some(report) = solver.run(1)? {
                    *last = Some(report);
                }
            }
            Engine::Multires(solver) => solver.step()?,
        }
        Ok(())
    }

    fn probe(&self, lattice: &Lattice, step: u64) -> Diagnostic {
        let (mass, max_speed) = match self {
            Engine::Multires(solver) => (solver.mass(), solver.max_speed()),
            _ => {
                let f = self.field();
                (f.mass(), f.max_speed(lattice))
            }
        };
        Diagnostic {
            step,
            mass,
            max_speed,
        }
    }

    fn field(&self) -> Field {
        match self {
            Engine::Dense { field, .. } => field.to_field(),
            Engine::Sparse { solver, .. } => solver.to_field(),
            Engine::Multires(solver) => solver.finest_field(),
        }
    }
}

/// Seeded equilibrium perturbation of one multires voxel, independent of
/// traversal order.
fn perturbed_voxel(seed: u64, dim: usize, level: usize, p: [usize; 3]) -> (f64, [f64; 3]) {
    let key =
        seed ^ ((level as u64) << 60) ^ ((p[2] as u64) << 40) ^ ((p[1] as u64) << 20) ^ p[0] as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    let rho = rng.gen_range(0.95..1.05);
    let mut u = [0.0; 3];
    for c in u.iter_mut().take(dim) {
        *c = rng.gen_range(-0.02..0.02);
    }
    (rho, u)
}

fn build(config: &SolverConfig, lattice: &Lattice) -> Result<Engine, RunError> {
    let setup = scenario::setup_for(
        config.scenario,
        lattice.clone(),
        config.shape,
        config.tau,
        config.velocity,
    )?;
    match config.representation {
        Representation::Dense => {
            let d = &config.dense;
            let kind = lattice.kind();
            let mode = if d.parallel {
                ExecMode::Parallel
            } else {
                ExecMode::Sequential
            };
            let mut field = PartitionedField::new(
                config.shape,
                d.partitions,
                partition_axis(kind),
                d.layout,
                Components::Lattice(kind),
                setup.domain.periodic,
            )?
            .with_mode(mode);
            field.load(&scenario::initial_field(
                config.scenario,
                &setup,
                config.seed,
            ));
            Ok(Engine::Dense {
                field,
                kernel: LbmKernel::new(setup),
                ledger: TransferLedger::new(),
            })
        }
        Representation::Sparse => {
            let s = &config.sparse;
            let init = scenario::initial_field(config.scenario, &setup, config.seed);
            let solver =
                SparseSolver::new(setup, s.strategy, &init, s.block_edge, s.naive_storage)?;
            Ok(Engine::Sparse { solver, last: None })
        }
        Representation::Multires => {
            let m = &config.multires;
            let dim = lattice.dim();
            let f = 1usize << (m.levels - 1);
            let mut coarse = config.shape;
            for a in coarse.iter_mut().take(dim) {
                *a /= f;
            }
            let periodic = setup.domain.periodic;
            let map = LevelMap::pattern(m.pattern, coarse, m.levels, dim, periodic, config.seed)?;
            let grid = MultiResGrid::new(lattice, &setup.domain, map, m.block_edge)?;
            let seed = config.seed;
            let periodic_box = config.scenario == Scenario::PeriodicBox;
            let solver =
                MultiResSolver::new(lattice.clone(), config.tau, grid, m.fused, |l, p| {
                    if periodic_box {
                        perturbed_voxel(seed, dim, l, p)
                    } else {
                        (1.0, [0.0; 3])
                    }
                })?;
            Ok(Engine::Multires(solver))
        }
    }
}

/// Measured vs predicted halo traffic for every partition and step.
pub fn ledger_rows(
    field: &PartitionedField,
    ledger: &TransferLedger,
) -> Result<Vec<LedgerRow>, RunError> {
    let decomp = field.decomposition();
    let Components::Lattice(kind) = field.components() else {
        return Err(LbmError::Config("ledger rows need a lattice field".into()).into());
    };
    let per_face = layout_params(
        FieldKind::Lattice(kind),
        field.scheme(),
        decomp.cross_section(),
    )
    .map_err(|e| LbmError::Config(e.to_string()))?;
    let wrap = field.periodic()[decomp.axis];
    let mut rows = Vec::new();
    for step in ledger.steps() {
        for p in 0..field.num_partitions() {
            let (lo, hi) = neighbors(decomp, p, wrap);
            let links = lo.is_some() as usize + hi.is_some() as usize;
            let (alpha, beta) = ledger.sent(step, p);
            rows.push(LedgerRow {
                step,
                partition: p,
                alpha,
                beta,
                model_alpha: per_face.alpha / 2 * links,
                model_beta: per_face.beta / 2 * links,
            });
        }
    }
    Ok(rows)
}

/// Runs `config` to completion and collects every report the
/// representation produces.
pub fn run(config: &SolverConfig) -> Result<RunReport, RunError> {
    config.validate()?;
    let lattice = Lattice::new(config.lattice);
    let mut engine = build(config, &lattice)?;
    let mut diagnostics = vec![engine.probe(&lattice, 0)];
    for step in 0..config.steps {
        engine.advance(step)?;
        let done = step + 1;
        let due = config.diagnostics_every > 0 && done % config.diagnostics_every == 0;
        if due || done == config.steps {
            diagnostics.push(engine.probe(&lattice, done));
        }
    }
    let field = engine.field();
    let centerline = field.centerline(&lattice, lattice.dim() - 1);
    let mut report = RunReport {
        config: config.clone(),
        diagnostics,
        centerline,
        ledger_rows: Vec::new(),
        dispatch: None,
        graph: None,
        distribution: None,
        field,
        ledger: None,
        graph_dot: None,
    };
    match engine {
        Engine::Dense { field, ledger, .. } => {
            report.ledger_rows = ledger_rows(&field, &ledger)?;
            report.ledger = Some(ledger);
        }
        Engine::Sparse { solver, last } => {
            report.dispatch =
                Some(last.unwrap_or_else(|| ExecutionReport::from_plan(solver.plan())));
        }
        Engine::Multires(solver) => {
            report.graph = Some(solver.graph().stats());
            report.graph_dot = Some(solver.graph().to_dot());
            report.distribution = Some(format_distribution(&solver.grid().distribution()));
        }
    }
    Ok(report)
}
