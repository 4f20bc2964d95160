//! Signal model shared by synthesis and recovery.
//!
//! A channel spreads one period-`T` pulse train over `k` propagation paths, each
//! with an unknown delay inside `[0, T)` and a slowly varying complex gain per
//! repetition. The receiver observes the scene through `p` analysis channels
//! covering the working band `[2πγ/T, 2π(p+γ)/T]`. This module owns the shared
//! vocabulary: band layout, delay sets, gain sequences, pulse spectra, and the
//! steering structure that ties delays to per-channel phases.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Default number of equal-power rays in the fading generator.
pub const DEFAULT_FADING_RAYS: usize = 32;

/// Band layout of the sampling system: `p` channels of width `2π/T` starting at
/// `2πγ/T`, evaluated on an `n_grid`-point frequency grid per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct BandConfig {
    p: usize,
    gamma: i64,
    period: f64,
    n_grid: usize,
}

impl BandConfig {
    pub fn new(p: usize, gamma: i64, period: f64, n_grid: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::Config("channel count p must be at least 1".into()));
        }
        if n_grid == 0 {
            return Err(Error::Config("n_grid must be at least 1".into()));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Config(format!("period must be positive, got {period}")));
        }
        Ok(Self { p, gamma, period, n_grid })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn gamma(&self) -> i64 {
        self.gamma
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    /// Working band `[2πγ/T, 2π(p+γ)/T)` in rad/s.
    pub fn band(&self) -> (f64, f64) {
        let lo = TAU * self.gamma as f64 / self.period;
        let hi = TAU * (self.p as f64 + self.gamma as f64) / self.period;
        (lo, hi)
    }

    /// Baseband grid frequency `ω_j = 2πj/(n_grid·T)`, `j = 0..n_grid`.
    pub fn grid_omega(&self, j: usize) -> f64 {
        TAU * j as f64 / (self.n_grid as f64 * self.period)
    }

    /// Frequency offset of channel `m0` (0-based): `2π(m0+γ)/T`.
    pub fn channel_offset(&self, m0: usize) -> f64 {
        TAU * (m0 as f64 + self.gamma as f64) / self.period
    }

    /// Number of nodes of the fine grid covering the working band.
    pub fn fine_len(&self) -> usize {
        self.p * self.n_grid
    }

    /// Fine-grid node `q` covering the working band: `band().0 + q·2π/(n_grid·T)`.
    pub fn fine_omega(&self, q: usize) -> f64 {
        self.band().0 + TAU * q as f64 / (self.n_grid as f64 * self.period)
    }
}

/// Strictly sorted set of path delays inside `[0, period)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DelaySet {
    delays: Vec<f64>,
    period: f64,
}

impl DelaySet {
    /// Validates range and pairwise distinctness, then stores the delays sorted
    /// ascending. Exact duplicates make the model unidentifiable and are rejected.
    pub fn new(mut delays: Vec<f64>, period: f64) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Config(format!("period must be positive, got {period}")));
        }
        if delays.is_empty() {
            return Err(Error::Config("delay set must contain at least one path".into()));
        }
        for &t in &delays {
            if !t.is_finite() || t < 0.0 || t >= period {
                return Err(Error::DelayOutOfRange { value: t, period });
            }
        }
        delays.sort_by(|a, b| a.total_cmp(b));
        if delays.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DegenerateModel("duplicate delays".into()));
        }
        Ok(Self { delays, period })
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    pub fn period(&self) -> f64 {
        self.period
    }
}

/// One complex gain sequence per path, all of equal length.
#[derive(Clone, Debug, PartialEq)]
pub struct GainSequences {
    seqs: Vec<Vec<Complex64>>,
}

impl GainSequences {
    pub fn new(seqs: Vec<Vec<Complex64>>) -> Result<Self> {
        if seqs.is_empty() {
            return Err(Error::Config("at least one gain sequence required".into()));
        }
        let n = seqs[0].len();
        if n == 0 {
            return Err(Error::Config("gain sequences must be non-empty".into()));
        }
        if seqs.iter().any(|s| s.len() != n) {
            return Err(Error::LengthMismatch(
                "gain sequences must share a common length".into(),
            ));
        }
        Ok(Self { seqs })
    }

    /// Number of paths.
    pub fn paths(&self) -> usize {
        self.seqs.len()
    }

    /// Common sequence length.
    pub fn len(&self) -> usize {
        self.seqs[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sequences(&self) -> &[Vec<Complex64>] {
        &self.seqs
    }

    pub fn get(&self, k: usize) -> &[Complex64] {
        &self.seqs[k]
    }

    pub fn into_inner(self) -> Vec<Vec<Complex64>> {
        self.seqs
    }

    /// First `n` samples of every path.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::LengthMismatch(format!(
                "cannot truncate length {} to {n}",
                self.len()
            )));
        }
        Ok(Self {
            seqs: self.seqs.iter().map(|s| s[..n].to_vec()).collect(),
        })
    }
}

/// Spectrum of the repeated pulse over the working band.
#[derive(Clone, Debug, PartialEq)]
pub enum PulseSpec {
    /// `G(ω) = T` across the whole working band.
    Flat,
    /// `G(ω) = 1` everywhere (idealized impulse excitation).
    Dirac,
    /// Complex samples on the fine grid covering the working band
    /// (`BandConfig::fine_len()` nodes, linear interpolation in between).
    Tabulated { values: Vec<Complex64> },
}

impl PulseSpec {
    pub fn tabulated(values: Vec<Complex64>) -> Self {
        PulseSpec::Tabulated { values }
    }

    /// Checks that a tabulated pulse matches the band layout.
    pub fn validate(&self, cfg: &BandConfig) -> Result<()> {
        if let PulseSpec::Tabulated { values } = self {
            if values.len() != cfg.fine_len() {
                return Err(Error::LengthMismatch(format!(
                    "tabulated pulse has {} nodes, band needs {}",
                    values.len(),
                    cfg.fine_len()
                )));
            }
        }
        Ok(())
    }

    /// Pulse spectrum at `omega`; zero outside the working band.
    pub fn eval(&self, omega: f64, cfg: &BandConfig) -> Complex64 {
        let (lo, hi) = cfg.band();
        match self {
            PulseSpec::Dirac => Complex64::new(1.0, 0.0),
            PulseSpec::Flat => {
                if omega >= lo && omega < hi {
                    Complex64::new(cfg.period(), 0.0)
                } else {
                    Complex64::ZERO
                }
            }
            PulseSpec::Tabulated { values } => {
                if omega < lo || omega >= hi {
                    return Complex64::ZERO;
                }
                let step = TAU / (cfg.n_grid() as f64 * cfg.period());
                let x = (omega - lo) / step;
                let i0 = (x.floor() as usize).min(values.len() - 1);
                let i1 = (i0 + 1).min(values.len() - 1);
                let frac = x - i0 as f64;
                values[i0] * (1.0 - frac) + values[i1] * frac
            }
        }
    }

    /// Natural magnitude scale, used for relative near-zero checks.
    pub fn scale(&self, cfg: &BandConfig) -> f64 {
        match self {
            PulseSpec::Dirac => 1.0,
            PulseSpec::Flat => cfg.period(),
            PulseSpec::Tabulated { values } => {
                values.iter().map(|z| z.norm()).fold(0.0, f64::max)
            }
        }
    }
}

/// The `p × k` matrix whose column `k` is the steering vector of delay `t_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SteeringMatrix {
    matrix: DMatrix<Complex64>,
}

impl SteeringMatrix {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    /// Channels (rows).
    pub fn p(&self) -> usize {
        self.matrix.nrows()
    }

    /// Paths (columns).
    pub fn k(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Per-channel phase signature of a single delay: element `m0` (0-based) is
/// `e^{-j2π(m0+γ)t/T}`.
pub fn steering_vector(t: f64, cfg: &BandConfig) -> Result<DVector<Complex64>> {
    if !t.is_finite() || t < 0.0 || t >= cfg.period() {
        return Err(Error::DelayOutOfRange { value: t, period: cfg.period() });
    }
    let ratio = t / cfg.period();
    Ok(DVector::from_fn(cfg.p(), |m0, _| {
        Complex64::from_polar(1.0, -TAU * (m0 as f64 + cfg.gamma() as f64) * ratio)
    }))
}

/// Stacks the steering vectors of a delay set into the `p × k` steering matrix.
///
/// The delay set's period must equal the band period.
pub fn vandermonde(tau: &DelaySet, cfg: &BandConfig) -> Result<SteeringMatrix> {
    if tau.period() != cfg.period() {
        return Err(Error::Config(format!(
            "delay-set period {} differs from band period {}",
            tau.period(),
            cfg.period()
        )));
    }
    let mut matrix = DMatrix::zeros(cfg.p(), tau.len());
    for (k, &t) in tau.delays().iter().enumerate() {
        matrix.set_column(k, &steering_vector(t, cfg)?);
    }
    Ok(SteeringMatrix { matrix })
}

/// Diagonal `k × k` phase matrix `diag(e^{-jω t_k})` tying per-path spectra to
/// the common frequency `omega`.
pub fn delay_phase_diag(omega: f64, tau: &DelaySet) -> DMatrix<Complex64> {
    DMatrix::from_fn(tau.len(), tau.len(), |r, c| {
        if r == c {
            Complex64::from_polar(1.0, -omega * tau.delays()[r])
        } else {
            Complex64::ZERO
        }
    })
}

/// Fading sequence with the classical dense-scatterer (Jakes) Doppler spectrum,
/// built from [`DEFAULT_FADING_RAYS`] equal-power rays.
///
/// `doppler_hz` is the maximum Doppler shift, `period` the spacing of the `n`
/// samples. Mean-square amplitude equals `power` in expectation over seeds; the
/// lag-`m` autocorrelation is `power · J0(2π·doppler_hz·m·period)`. The draw is
/// fully determined by `seed`.
pub fn jakes_gains(
    doppler_hz: f64,
    period: f64,
    n: usize,
    power: f64,
    seed: u64,
) -> Result<Vec<Complex64>> {
    jakes_gains_with_rays(doppler_hz, period, n, power, seed, DEFAULT_FADING_RAYS)
}

/// [`jakes_gains`] with an explicit ray count (must be at least 1; spectral
/// fidelity needs a few dozen).
pub fn jakes_gains_with_rays(
    doppler_hz: f64,
    period: f64,
    n: usize,
    power: f64,
    seed: u64,
    rays: usize,
) -> Result<Vec<Complex64>> {
    if !(doppler_hz.is_finite() && doppler_hz >= 0.0) {
        return Err(Error::Config(format!("doppler must be >= 0, got {doppler_hz}")));
    }
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::Config(format!("period must be positive, got {period}")));
    }
    if !(power.is_finite() && power >= 0.0) {
        return Err(Error::Config(format!("power must be >= 0, got {power}")));
    }
    if n == 0 {
        return Err(Error::Config("sequence length must be at least 1".into()));
    }
    if rays == 0 {
        return Err(Error::Config("ray count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (power / rays as f64).sqrt();
    // Each ray: a random arrival angle sets its Doppler rate, a random initial
    // phase decorrelates rays. Fresh draws per realization give the ensemble its
    // Bessel-shaped autocorrelation.
    let mut phasors = Vec::with_capacity(rays);
    let mut steps = Vec::with_capacity(rays);
    for _ in 0..rays {
        let angle = TAU * rng.random::<f64>();
        let phase = TAU * rng.random::<f64>();
        let rate = TAU * doppler_hz * angle.cos() * period;
        phasors.push(Complex64::from_polar(1.0, phase));
        steps.push(Complex64::from_polar(1.0, rate));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let sum: Complex64 = phasors.iter().sum();
        out.push(sum * scale);
        for (ph, st) in phasors.iter_mut().zip(&steps) {
            *ph *= *st;
        }
    }
    Ok(out)
}
