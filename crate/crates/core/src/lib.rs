//! Colored Hofstadter butterfly of the honeycomb lattice.
//!
//! For each rational flux `p/q` the crate finds the open gaps of the magnetic
//! Bloch spectrum and assigns each gap its Chern number as the winding of the
//! contracting eigenvector of a real 2×2 transfer matrix around the Brillouin
//! zone. Results are validated against the Diophantine gap-labeling equation
//! `r = sigma p + s q` and, at small `q`, against an independent count of
//! edge-state crossings in a finite zigzag strip.
//!
//! The numerical core is generic over the scalar type (see [`scalar`]); the
//! `*64` aliases below fix it to `f64`, which is what the pipeline uses.

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bulk;
pub mod cache;
pub mod edge;
pub mod error;
pub mod flux;
pub mod pipeline;
pub mod render;
pub mod scalar;
pub mod transfer;
pub mod winding;

pub use error::{Error, Result};
pub use flux::{ChernStatus, Flux};
pub use pipeline::{run_pipeline, ColorMode, RunConfig, Summary};
pub use scalar::{Real, SpectralReal};

pub type ChernResult64 = flux::ChernResult<f64>;
pub type GapRecord64 = bulk::GapRecord<f64>;
pub type BlochHamiltonian64 = bulk::BlochHamiltonian<f64>;
pub type RealTransfer64 = transfer::RealTransfer<f64>;
pub type ContractingVector64 = transfer::ContractingVector<f64>;
pub type TransferContext64 = transfer::TransferContext<f64>;
pub type PhaseTrace64 = winding::PhaseTrace<f64>;
