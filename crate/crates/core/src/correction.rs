//! Digital correction of the sampling front end.
//!
//! The channel samples carry the mixing matrix `W(ω)`; correction applies
//! `W(ω)^{-1}` so that downstream estimation sees the steering-matrix model
//! `d(ω) = N(τ) b(ω)` directly. Two forms are provided: exact per-bin inversion
//! on the synthesis grid, and a bank of length-`L` FIR filters whose frequency
//! response approximates `W^{-1}` (taps are centered, so the cyclic application
//! already compensates the `(L-1)/2`-sample group delay of the causal form).

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::fft::{dft, idft};
use crate::frontend::{w_matrix, FilterBankSpec, FrontEnd, MeasurementSet, SampleKind};
use crate::linalg::{max_abs, try_inverse};
use crate::model::{BandConfig, PulseSpec};

/// Residual level above which a per-bin inverse is rejected.
const INVERSE_RESIDUAL_TOL: f64 = 1e-8;

/// Tap window applied to the FIR approximation of `W^{-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    /// Plain truncation of the Fourier coefficients.
    Rectangular,
    /// Raised-cosine taper, zero just outside the tap range. Trades accuracy on
    /// smooth responses for tamer truncation ripple on discontinuous ones.
    RaisedCosine,
}

impl Window {
    fn weight(self, r: i64, half: usize) -> f64 {
        match self {
            Window::Rectangular => 1.0,
            Window::RaisedCosine => {
                let x = r as f64 / (half as f64 + 1.0);
                0.5 * (1.0 + (std::f64::consts::PI * x).cos())
            }
        }
    }
}

enum Mode {
    Exact { inv: Vec<DMatrix<Complex64>> },
    Fir { taps: Vec<DMatrix<Complex64>>, half: usize },
}

/// A correction filter bank, built once per front end.
pub struct CorrectionFilter {
    mode: Mode,
    p: usize,
    n_grid: usize,
    period: f64,
    max_cond: f64,
}

impl CorrectionFilter {
    /// Exact correction: inverts `W(ω_j)` at every grid bin and validates the
    /// inverses against an identity residual.
    pub fn build_exact(fe: &FrontEnd) -> Result<Self> {
        let cfg = fe.cfg();
        let mut inv = Vec::with_capacity(cfg.n_grid());
        for j in 0..cfg.n_grid() {
            let w = fe.w_at(j);
            let wi = try_inverse(w).ok_or(Error::FrontEndSingular {
                bin: j,
                detail: "mixing matrix W not invertible".into(),
            })?;
            let residual = max_abs(&(w * &wi - DMatrix::identity(cfg.p(), cfg.p())));
            if residual > INVERSE_RESIDUAL_TOL {
                return Err(Error::Numerical(format!(
                    "inverse residual {residual:.3e} at bin {j} exceeds {INVERSE_RESIDUAL_TOL:.0e}"
                )));
            }
            inv.push(wi);
        }
        Ok(Self {
            mode: Mode::Exact { inv },
            p: cfg.p(),
            n_grid: cfg.n_grid(),
            period: cfg.period(),
            max_cond: fe.max_condition(),
        })
    }

    /// FIR correction: samples `W^{-1}` on a dense frequency grid, takes its
    /// Fourier coefficients, and keeps `taps` centered coefficients per matrix
    /// entry (odd `taps` only, so the center tap sits at delay zero).
    pub fn design_fir(
        bank: &FilterBankSpec,
        pulse: &PulseSpec,
        cfg: &BandConfig,
        taps: usize,
        window: Window,
    ) -> Result<Self> {
        bank.validate(cfg)?;
        pulse.validate(cfg)?;
        if taps == 0 || taps % 2 == 0 {
            return Err(Error::Config(format!(
                "FIR correction needs an odd tap count, got {taps}"
            )));
        }
        let half = (taps - 1) / 2;
        let dense = (8 * cfg.n_grid()).max(2 * taps);
        let p = cfg.p();
        let mut max_cond = 0.0f64;
        let mut inv_samples = Vec::with_capacity(dense);
        for q in 0..dense {
            let omega = TAU * q as f64 / (dense as f64 * cfg.period());
            let (w, cond) = w_matrix(bank, pulse, omega, cfg)?;
            if cond.is_infinite() {
                return Err(Error::FrontEndSingular {
                    bin: q,
                    detail: "mixing matrix W numerically singular on design grid".into(),
                });
            }
            max_cond = max_cond.max(cond);
            let wi = try_inverse(&w).ok_or(Error::FrontEndSingular {
                bin: q,
                detail: "mixing matrix W not invertible on design grid".into(),
            })?;
            inv_samples.push(wi);
        }
        // per-entry Fourier coefficients of the periodic response W^{-1}(ω)
        let mut taps_mat = vec![DMatrix::zeros(p, p); taps];
        let mut entry = vec![Complex64::ZERO; dense];
        for row in 0..p {
            for col in 0..p {
                for (q, wi) in inv_samples.iter().enumerate() {
                    entry[q] = wi[(row, col)];
                }
                let coeffs = idft(&entry);
                for (slot, h) in taps_mat.iter_mut().enumerate() {
                    let r = slot as i64 - half as i64;
                    let idx = r.rem_euclid(dense as i64) as usize;
                    h[(row, col)] = coeffs[idx] * window.weight(r, half);
                }
            }
        }
        Ok(Self {
            mode: Mode::Fir { taps: taps_mat, half },
            p,
            n_grid: cfg.n_grid(),
            period: cfg.period(),
            max_cond,
        })
    }

    /// Group delay of the causal form of this filter, in samples. The cyclic
    /// application used here already absorbs it.
    pub fn group_delay(&self) -> usize {
        match &self.mode {
            Mode::Exact { .. } => 0,
            Mode::Fir { half, .. } => *half,
        }
    }

    /// Centered FIR tap matrices, first index corresponding to delay `-(L-1)/2`.
    /// `None` for exact correction.
    pub fn taps(&self) -> Option<&[DMatrix<Complex64>]> {
        match &self.mode {
            Mode::Exact { .. } => None,
            Mode::Fir { taps, .. } => Some(taps),
        }
    }

    /// Largest condition number of `W` seen while building this filter.
    pub fn max_condition(&self) -> f64 {
        self.max_cond
    }

    /// Frequency response of the correction at `omega` (trig-polynomial
    /// evaluation for FIR; nearest design bin for exact correction).
    pub fn response_at(&self, omega: f64) -> DMatrix<Complex64> {
        match &self.mode {
            Mode::Exact { inv } => {
                let step = TAU / (self.n_grid as f64 * self.period);
                let j = (omega / step).rem_euclid(self.n_grid as f64).round() as usize % self.n_grid;
                inv[j].clone()
            }
            Mode::Fir { taps, half } => {
                let mut q = DMatrix::zeros(self.p, self.p);
                for (slot, h) in taps.iter().enumerate() {
                    let r = slot as i64 - *half as i64;
                    let ph = Complex64::from_polar(1.0, -omega * r as f64 * self.period);
                    q += h.clone() * ph;
                }
                q
            }
        }
    }

    /// Applies the correction to raw channel samples, one grid period at a time.
    ///
    /// Exact correction requires the input length to match the design grid. FIR
    /// correction is a cyclic convolution with the centered taps, applied at the
    /// input's own length.
    pub fn apply(&self, m: &MeasurementSet) -> Result<MeasurementSet> {
        if m.kind() != SampleKind::RawChannels {
            return Err(Error::Config("correction expects raw channel samples".into()));
        }
        if m.p() != self.p {
            return Err(Error::LengthMismatch(format!(
                "{} channels, correction built for {}",
                m.p(),
                self.p
            )));
        }
        if (m.period() - self.period).abs() > 1e-12 * self.period {
            return Err(Error::Config("sample period differs from design period".into()));
        }
        let n = m.len();
        if matches!(self.mode, Mode::Exact { .. }) && n != self.n_grid {
            return Err(Error::LengthMismatch(format!(
                "exact correction built for {} samples, got {n}",
                self.n_grid
            )));
        }
        let spectra: Vec<Vec<Complex64>> = m.channels().iter().map(|c| dft(c)).collect();
        let mut out_spectra = vec![vec![Complex64::ZERO; n]; self.p];
        let mut c = nalgebra::DVector::zeros(self.p);
        for j in 0..n {
            for ell in 0..self.p {
                c[ell] = spectra[ell][j];
            }
            let d = match &self.mode {
                Mode::Exact { inv } => &inv[j] * &c,
                Mode::Fir { .. } => {
                    let omega = TAU * j as f64 / (n as f64 * self.period);
                    self.response_at(omega) * &c
                }
            };
            for ell in 0..self.p {
                out_spectra[ell][j] = d[ell];
            }
        }
        let channels = out_spectra.iter().map(|s| idft(s)).collect();
        MeasurementSet::new(SampleKind::Corrected, channels, self.period)
    }
}
