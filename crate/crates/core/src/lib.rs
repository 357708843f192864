//! Wave-train laboratory: profiles, Bloch spectra, modulation coefficients,
//! pseudospectral integration and phase-dynamics verification for
//! reaction–diffusion systems.

// `!(x > 0.0)` is used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analyze;
pub mod archive;
pub mod bloch;
pub mod config;
pub mod error;
pub mod etdrk4;
pub mod evolve;
pub mod model;
pub mod modulation;
pub mod pipeline;
pub mod spectral;
pub mod wavetrain;
pub mod whitham;

pub use error::{Error, Result};
