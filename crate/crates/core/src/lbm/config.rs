//! Run configuration, read from TOML.

use serde::{Deserialize, Serialize};

use crate::lattice::LatticeKind;
use crate::layout::Scheme;
use crate::multires::LevelPattern;
use crate::sparse::{NaiveStorage, Strategy};

use super::scenario::Scenario;
use super::LbmError;

/// Grid representation a run is executed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    /// Dense box split into partitions along the last axis.
    #[default]
    Dense,
    /// Block-sparse grid with one boundary strategy.
    Sparse,
    /// Stack of block-sparse resolution levels.
    Multires,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenseConfig {
    pub layout: Scheme,
    pub partitions: usize,
    /// Run the partitions of each phase on the thread pool.
    pub parallel: bool,
}

impl Default for DenseConfig {
    fn default() -> Self {
        DenseConfig {
            layout: Scheme::DisagSoA,
            partitions: 1,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparseConfig {
    pub strategy: Strategy,
    pub block_edge: usize,
    pub naive_storage: NaiveStorage,
}

impl Default for SparseConfig {
    fn default() -> Self {
        SparseConfig {
            strategy: Strategy::DisagMem,
            block_edge: 4,
            naive_storage: NaiveStorage::Printed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiresConfig {
    pub levels: usize,
    pub fused: bool,
    pub pattern: LevelPattern,
    pub block_edge: usize,
}

impl Default for MultiresConfig {
    fn default() -> Self {
        MultiresConfig {
            levels: 2,
            fused: true,
            pattern: LevelPattern::LidBand,
            block_edge: 4,
        }
    }
}

/// A complete run description. `shape` is the domain in finest cells, and
/// `tau` is the relaxation time of the coarsest level in multi-resolution
/// runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub scenario: Scenario,
    pub lattice: LatticeKind,
    pub shape: [usize; 3],
    pub tau: f64,
    /// Lid velocity for the cavity, face velocity for the obstacle run.
    #[serde(default)]
    pub velocity: [f64; 3],
    pub steps: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub representation: Representation,
    /// Diagnostics interval in steps; 0 records only the initial and final state.
    #[serde(default)]
    pub diagnostics_every: u64,
    #[serde(default)]
    pub dense: DenseConfig,
    #[serde(default)]
    pub sparse: SparseConfig,
    #[serde(default)]
    pub multires: MultiresConfig,
}

impl SolverConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml(text: &str) -> Result<Self, LbmError> {
        let config: SolverConfig =
            toml::from_str(text).map_err(|e| LbmError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Every violated constraint, one message each.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let dim = self.lattice.dim();
        if !self.tau.is_finite() || self.tau <= 0.5 {
            out.push(format!(
                "tau = {} must be finite and greater than 0.5",
                self.tau
            ));
        }
        let speed = self.velocity.iter().map(|v| v * v).sum::<f64>().sqrt();
        if speed.is_nan() || speed > 0.1 {
            out.push(format!("velocity magnitude {speed} exceeds 0.1"));
        }
        if self.shape.contains(&0) {
            out.push(format!("shape {:?} has an empty axis", self.shape));
        }
        if dim == 2 && self.shape[2] != 1 {
            out.push(format!("{} needs shape[2] = 1", self.lattice));
        }
        match self.representation {
            Representation::Dense => {
                let extent = self.shape[dim - 1];
                let parts = self.dense.partitions;
                if parts == 0 || extent < 2 * parts {
                    out.push(format!(
                        "dense.partitions = {parts} needs 1 or more partitions of at least 2 slabs along an extent of {extent}"
                    ));
                }
            }
            Representation::Sparse => {
                if self.sparse.block_edge == 0 {
                    out.push("sparse.block_edge must be at least 1".into());
                }
            }
            Representation::Multires => {
                let m = &self.multires;
                if !(1..=4).contains(&m.levels) {
                    out.push(format!("multires.levels = {} must be 1 to 4", m.levels));
                } else {
                    let f = 1usize << (m.levels - 1);
                    if self.shape.iter().take(dim).any(|n| n % f != 0) {
                        out.push(format!(
                            "shape {:?} must be divisible by {f} for {} levels",
                            self.shape, m.levels
                        ));
                    }
                }
                if m.block_edge == 0 {
                    out.push("multires.block_edge must be at least 1".into());
                }
                if self.scenario == Scenario::FlowOverObstacle {
                    out.push(
                        "the obstacle scenario is not supported on multi-resolution grids".into(),
                    );
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), LbmError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(LbmError::Config(problems.join("; ")))
        }
    }
}
