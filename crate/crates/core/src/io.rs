//! Field dumps and CSV reports.
//!
//! A dump is two files sharing a stem: `<stem>.bin` holds the populations as
//! little-endian f64 in canonical order (x fastest, components innermost) and
//! `<stem>.json` describes them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::LatticeKind;
use crate::lbm::run::{Diagnostic, LedgerRow};
use crate::lbm::Field;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed dump: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub shape: [usize; 3],
    pub lattice: LatticeKind,
    pub q: usize,
    /// Layout the field was computed in; the dump itself is always canonical.
    pub layout: String,
    pub dtype: String,
    /// Linear indices of voxels outside the fluid.
    pub inactive: Vec<usize>,
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn write_field(
    stem: &Path,
    field: &Field,
    lattice: LatticeKind,
    layout: &str,
) -> Result<(), IoError> {
    let header = DumpHeader {
        shape: field.shape,
        lattice,
        q: field.q,
        layout: layout.to_string(),
        dtype: "f64-le".into(),
        inactive: (0..field.voxels()).filter(|&v| !field.active[v]).collect(),
    };
    let bytes: Vec<u8> = field.data.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(with_ext(stem, "bin"), bytes)?;
    fs::write(
        with_ext(stem, "json"),
        serde_json::to_string_pretty(&header)? + "\n",
    )?;
    Ok(())
}

pub fn read_field(stem: &Path) -> Result<(DumpHeader, Field), IoError> {
    let header: DumpHeader = serde_json::from_str(&fs::read_to_string(with_ext(stem, "json"))?)?;
    let bytes = fs::read(with_ext(stem, "bin"))?;
    let mut field = Field::zeros(header.shape, header.q);
    if bytes.len() != field.data.len() * 8 {
        return Err(IoError::Format(format!(
            "{} bytes of data for {} values",
            bytes.len(),
            field.data.len()
        )));
    }
    for (v, chunk) in field.data.iter_mut().zip(bytes.chunks_exact(8)) {
        *v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
    }
    for &v in &header.inactive {
        *field
            .active
            .get_mut(v)
            .ok_or_else(|| IoError::Format(format!("inactive voxel {v} out of range")))? = false;
    }
    Ok((header, field))
}

pub fn diagnostics_csv(rows: &[Diagnostic]) -> String {
    let mut out = String::from("step,mass,max_speed\n");
    for d in rows {
        let _ = writeln!(out, "{},{},{}", d.step, d.mass, d.max_speed);
    }
    out
}

pub fn centerline_csv(values: &[f64]) -> String {
    let mut out = String::from("index,u_x\n");
    for (k, u) in values.iter().enumerate() {
        let _ = writeln!(out, "{k},{u}");
    }
    out
}

pub fn ledger_rows_csv(rows: &[LedgerRow]) -> String {
    let mut out = String::from("step,partition,alpha,beta,model_alpha,model_beta,match\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.step,
            r.partition,
            r.alpha,
            r.beta,
            r.model_alpha,
            r.model_beta,
            r.matches()
        );
    }
    out
}
