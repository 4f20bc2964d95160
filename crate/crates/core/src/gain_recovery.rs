//! Time-varying path gain recovery.
//!
//! Once the delays are known, the corrected samples `d[n] = N(τ) b[n]` are
//! inverted for the delay-phased sequences `b_k[n]`, and the phase ramp
//! `e^{-jω t_k}` is unwound on the frequency grid to expose the path gains
//! `a_k[n]`. When the transmitted symbols are known, dividing them out yields
//! the channel fading coefficients.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{dft, idft};
use crate::frontend::{MeasurementSet, SampleKind};
use crate::linalg::pinv;
use crate::model::{vandermonde, BandConfig, DelaySet, GainSequences};

/// Delays with the gain sequences recovered for them, and optionally the
/// fading coefficients after known symbols are divided out.
#[derive(Clone, Debug)]
pub struct RecoveredChannel {
    delays: Vec<f64>,
    gains: GainSequences,
    coeffs: Option<GainSequences>,
}

impl RecoveredChannel {
    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn gains(&self) -> &GainSequences {
        &self.gains
    }

    pub fn coeffs(&self) -> Option<&GainSequences> {
        self.coeffs.as_ref()
    }
}

/// Solves `d[n] = N(τ) b[n]` for the delay-phased sequences, least squares per
/// sample. Requires at least as many channels as paths.
pub fn recover_b(d: &MeasurementSet, tau: &DelaySet, cfg: &BandConfig) -> Result<GainSequences> {
    if d.kind() != SampleKind::Corrected {
        return Err(Error::Config("gain recovery expects corrected samples".into()));
    }
    if d.p() != cfg.p() {
        return Err(Error::LengthMismatch(format!(
            "{} channels against a {}-channel layout",
            d.p(),
            cfg.p()
        )));
    }
    if d.p() < tau.len() {
        return Err(Error::InsufficientChannels { p: d.p(), k: tau.len() });
    }
    let n_mat = vandermonde(tau, cfg)?.into_matrix();
    let n_pinv = pinv(&n_mat, 1e-12)?;
    let k = tau.len();
    let n = d.len();
    let mut seqs = vec![vec![Complex64::ZERO; n]; k];
    let mut c = DVector::zeros(d.p());
    for idx in 0..n {
        for ell in 0..d.p() {
            c[ell] = d.channels()[ell][idx];
        }
        let b = &n_pinv * &c;
        for (path, seq) in seqs.iter_mut().enumerate() {
            seq[idx] = b[path];
        }
    }
    GainSequences::new(seqs)
}

/// Unwinds the per-path delay phase: `a_k = IDFT( DFT(b_k) · e^{+jω_j t_k} )`.
/// The sequences are treated as one grid period, so their length must match the
/// layout's grid.
pub fn recover_a(b: &GainSequences, tau: &DelaySet, cfg: &BandConfig) -> Result<GainSequences> {
    if b.paths() != tau.len() {
        return Err(Error::LengthMismatch(format!(
            "{} sequences for {} delays",
            b.paths(),
            tau.len()
        )));
    }
    if b.len() != cfg.n_grid() {
        return Err(Error::LengthMismatch(format!(
            "sequence length {} does not cover the {}-bin grid",
            b.len(),
            cfg.n_grid()
        )));
    }
    let mut out = Vec::with_capacity(b.paths());
    for (path, &t) in tau.delays().iter().enumerate() {
        let mut spectrum = dft(b.get(path));
        for (j, z) in spectrum.iter_mut().enumerate() {
            *z *= Complex64::from_polar(1.0, cfg.grid_omega(j) * t);
        }
        out.push(idft(&spectrum));
    }
    GainSequences::new(out)
}

/// Divides known transmitted symbols out of recovered gains to expose fading
/// coefficients. Symbols too close to zero are reported, not divided by.
pub fn recover_channel_coeffs(
    gains: &GainSequences,
    symbols: &[Complex64],
) -> Result<GainSequences> {
    if symbols.len() != gains.len() {
        return Err(Error::LengthMismatch(format!(
            "{} symbols for {}-sample gain sequences",
            symbols.len(),
            gains.len()
        )));
    }
    let tiny: Vec<usize> = symbols
        .iter()
        .enumerate()
        .filter(|(_, s)| s.norm() < 1e-12)
        .map(|(i, _)| i)
        .collect();
    if !tiny.is_empty() {
        return Err(Error::DivisionGuard { indices: tiny });
    }
    GainSequences::new(
        gains
            .sequences()
            .iter()
            .map(|seq| seq.iter().zip(symbols).map(|(g, s)| g / s).collect())
            .collect(),
    )
}

/// Full gain-recovery step: `b` from the corrected samples, then the delay
/// phases unwound, then (when symbols are given) fading coefficients.
pub fn recover_channel(
    d: &MeasurementSet,
    delays: &[f64],
    cfg: &BandConfig,
    symbols: Option<&[Complex64]>,
) -> Result<RecoveredChannel> {
    let tau = DelaySet::new(delays.to_vec(), cfg.period())?;
    let b = recover_b(d, &tau, cfg)?;
    let gains = recover_a(&b, &tau, cfg)?;
    let coeffs = match symbols {
        Some(s) => Some(recover_channel_coeffs(&gains, s)?),
        None => None,
    };
    Ok(RecoveredChannel { delays: tau.delays().to_vec(), gains, coeffs })
}
