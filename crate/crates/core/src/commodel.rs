//! Latency/bandwidth model of a halo update and the per-layout parameters
//! it is evaluated with.
//!
//! `t = alpha * t_setup + beta * elem_size / b_com`, where `alpha` counts
//! transfer operations and `beta` the elements they move.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::lattice::{Lattice, LatticeKind};
use crate::layout::Scheme;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid link model: {0}")]
    Link(String),
    #[error("cross-section must be at least 1")]
    EmptyCrossSection,
    #[error("a vector field needs at least one component")]
    EmptyVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CommParams {
    pub alpha: usize,
    pub beta: usize,
    pub coalesced: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkModel {
    /// Seconds per transfer operation.
    pub t_setup: f64,
    /// Bytes per second.
    pub b_com: f64,
}

impl LinkModel {
    pub fn new(t_setup: f64, b_com: f64) -> Result<Self, ModelError> {
        if !t_setup.is_finite() || t_setup < 0.0 {
            return Err(ModelError::Link(format!(
                "t_setup must be >= 0, got {t_setup}"
            )));
        }
        if !b_com.is_finite() || b_com <= 0.0 {
            return Err(ModelError::Link(format!("b_com must be > 0, got {b_com}")));
        }
        Ok(LinkModel { t_setup, b_com })
    }
}

/// What a voxel carries across a partition face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Lattice(LatticeKind),
    /// Generic vector field read whole by a radius-1 stencil; `beta` counts
    /// vectors.
    Vector {
        components: usize,
    },
}

pub fn halo_update_time(params: CommParams, elem_size: usize, link: LinkModel) -> f64 {
    params.alpha as f64 * link.t_setup + params.beta as f64 * elem_size as f64 / link.b_com
}

/// Iteration time when private work overlaps the halo update.
pub fn occ_iteration_time(t_private: f64, t_halo: f64, t_shared: f64) -> f64 {
    t_private.max(t_halo) + t_shared
}

/// Directions crossing one face of a partition split along `axis`.
pub fn crossing_directions(kind: LatticeKind, axis: usize) -> usize {
    Lattice::new(kind).crossing(axis, true).len()
}

/// Axis a lattice domain is partitioned along: y in 2D, z in 3D.
pub fn partition_axis(kind: LatticeKind) -> usize {
    kind.dim() - 1
}

/// Predicted halo parameters for an interior partition whose shared slab has
/// `s` voxels.
pub fn layout_params(field: FieldKind, scheme: Scheme, s: usize) -> Result<CommParams, ModelError> {
    if s == 0 {
        return Err(ModelError::EmptyCrossSection);
    }
    let coalesced = scheme.coalesced();
    let (alpha, beta) = match field {
        FieldKind::Lattice(kind) => {
            let q = kind.q();
            let c = crossing_directions(kind, partition_axis(kind));
            match scheme {
                Scheme::AoS => (2, 2 * q * s),
                Scheme::SoA => (2 * c, 2 * c * s),
                Scheme::DisagSoA => (2, 2 * c * s),
            }
        }
        FieldKind::Vector { components } => {
            if components == 0 {
                return Err(ModelError::EmptyVector);
            }
            match scheme {
                Scheme::AoS | Scheme::DisagSoA => (2, 2 * s),
                Scheme::SoA => (2 * components, 2 * s),
            }
        }
    };
    Ok(CommParams {
        alpha,
        beta,
        coalesced,
    })
}

/// Scalar elements moved per halo update: `beta` times the values a vector
/// element carries (1 for lattice populations).
pub fn scalar_elements(field: FieldKind, params: CommParams) -> usize {
    match field {
        FieldKind::Lattice(_) => params.beta,
        FieldKind::Vector { components } => params.beta * components,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableRow {
    pub layout: Scheme,
    pub alpha: usize,
    /// Symbolic element count, e.g. `10s` or `2*d_x`.
    pub beta: String,
    pub coalesced: bool,
}

/// Per-lattice halo parameters with `beta` in units of the cross-section `s`.
pub fn lattice_table(kind: LatticeKind) -> Vec<TableRow> {
    Scheme::ALL
        .iter()
        .map(|&scheme| {
            let p = layout_params(FieldKind::Lattice(kind), scheme, 1).expect("s = 1 is valid");
            TableRow {
                layout: scheme,
                alpha: p.alpha,
                beta: format!("{}s", p.beta),
                coalesced: p.coalesced,
            }
        })
        .collect()
}

/// The two-component field on a `d_x` by `d_y` domain split along y.
pub fn vector_table() -> Vec<TableRow> {
    Scheme::ALL
        .iter()
        .map(|&scheme| {
            let p = layout_params(FieldKind::Vector { components: 2 }, scheme, 1)
                .expect("s = 1 is valid");
            TableRow {
                layout: scheme,
                alpha: p.alpha,
                beta: format!("{}*d_x", p.beta),
                coalesced: p.coalesced,
            }
        })
        .collect()
}

pub fn vector_table_csv() -> String {
    let mut out = String::from("layout,alpha,beta,coalesced\n");
    for r in vector_table() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.layout,
            r.alpha,
            r.beta,
            if r.coalesced { "Yes" } else { "No" }
        );
    }
    out
}

pub fn lattice_table_csv(kind: LatticeKind) -> String {
    let mut out = String::from("layout,alpha,beta\n");
    for r in lattice_table(kind) {
        let _ = writeln!(out, "{},{},{}", r.layout, r.alpha, r.beta);
    }
    out
}
