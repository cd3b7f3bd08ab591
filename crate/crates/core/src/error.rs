use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the butterfly pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid flux {p}/{q}: denominator must be positive")]
    InvalidFlux { p: i64, q: i64 },

    #[error("gap index {r} out of range 1..={max} for flux {p}/{q}")]
    GapIndex { r: u32, max: u32, p: u32, q: u32 },

    /// The two eigenvalue moduli of the period transfer matrix coincide, so
    /// the requested energy belongs to the spectrum of the fiber at `k`.
    #[error("transfer matrix not hyperbolic at E = {energy}, k = {k} (energy lies in the spectrum)")]
    DegenerateTransfer { energy: f64, k: f64 },

    #[error("phase refinement exhausted on k-interval [{k_lo}, {k_hi}] at E = {energy}")]
    RefinementExhausted { energy: f64, k_lo: f64, k_hi: f64 },

    #[error("eigensolver failed for flux {p}/{q} at k = ({k1}, {k2})")]
    Eigensolver { p: u32, q: u32, k1: f64, k2: f64 },

    #[error("edge-state oracle inconclusive for flux {p}/{q}, gap {r}: {reason}")]
    OracleInconclusive { p: u32, q: u32, r: u32, reason: String },

    #[error("corrupt cache line {line_no} in {path}: {line:?} ({reason})")]
    CacheCorrupt { path: PathBuf, line_no: usize, line: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
