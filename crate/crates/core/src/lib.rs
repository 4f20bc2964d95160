//! Simulation and estimation toolkit for multipath channels sampled by a bank of
//! low-rate analysis channels.
//!
//! The library covers the full pipeline:
//!
//! * [`model`]: band layout, delay/gain parameterization, pulse spectra, steering
//!   structure, and a fading-sequence generator;
//! * [`frontend`]: analysis filter banks, per-bin mixing matrices, sample synthesis,
//!   an independent quadrature reference, and noise injection;
//! * [`correction`]: digital correction of the analysis bank (exact per-bin inversion
//!   or a truncated FIR approximation);
//! * [`delay_recovery`]: correlation accumulation, rank decision, spatial smoothing,
//!   and rotational-invariance delay estimation;
//! * [`gain_recovery`]: per-path gain sequences and pilot-based channel coefficients;
//! * [`experiments`]: reproducible Monte-Carlo scenarios with CSV/JSON artifacts.
//!
//! Matrices are `nalgebra` dynamic matrices over `num_complex::Complex64`; sample
//! sequences are plain `Vec<Complex64>`.

pub mod correction;
pub mod delay_recovery;
pub mod error;
pub mod experiments;
mod fft;
pub mod frontend;
pub mod gain_recovery;
mod linalg;
pub mod model;

pub use error::{Error, Result};

pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;
