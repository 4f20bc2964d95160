//! Experiment configuration: scenario selection, physical layout, sweep grids,
//! and randomness controls. The JSON form mirrors the struct field names.

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::delay_recovery::EspritVariant;
use crate::error::{Error, Result};
use crate::frontend::FilterBankSpec;
use crate::model::{BandConfig, PulseSpec};

/// Which experiment to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    ChannelEst,
    MseVsSnr,
    MseVsP,
    MseVsNvec,
    MseVsTaps,
    SingleRun,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::ChannelEst,
        Scenario::MseVsSnr,
        Scenario::MseVsP,
        Scenario::MseVsNvec,
        Scenario::MseVsTaps,
        Scenario::SingleRun,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::ChannelEst => "channel-est",
            Scenario::MseVsSnr => "mse-vs-snr",
            Scenario::MseVsP => "mse-vs-p",
            Scenario::MseVsNvec => "mse-vs-nvec",
            Scenario::MseVsTaps => "mse-vs-taps",
            Scenario::SingleRun => "single-run",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Scenario::ALL.iter().map(|sc| sc.name()).collect();
                Error::Config(format!("unknown scenario {s:?}, expected one of {names:?}"))
            })
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Signal-to-noise ratio in dB; `+inf` (JSON string "inf") means noiseless.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnrDb(pub f64);

impl Serialize for SnrDb {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

struct SnrVisitor;

impl Visitor<'_> for SnrVisitor {
    type Value = SnrDb;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a number in dB or the string \"inf\"")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<SnrDb, E> {
        Ok(SnrDb(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<SnrDb, E> {
        Ok(SnrDb(v as f64))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<SnrDb, E> {
        Ok(SnrDb(v as f64))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<SnrDb, E> {
        match v {
            "inf" | "+inf" => Ok(SnrDb(f64::INFINITY)),
            _ => Err(E::custom(format!("snr string must be \"inf\", got {v:?}"))),
        }
    }
}

impl<'de> Deserialize<'de> for SnrDb {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        d.deserialize_any(SnrVisitor)
    }
}

/// Analysis filter bank selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BankChoice {
    IdealBandpass,
    DelayedLowpass { shifts: Vec<f64> },
    NonidealTapered,
}

impl BankChoice {
    pub fn to_spec(&self) -> FilterBankSpec {
        match self {
            BankChoice::IdealBandpass => FilterBankSpec::IdealBandpass,
            BankChoice::DelayedLowpass { shifts } => {
                FilterBankSpec::DelayedLowpass { delays: shifts.clone() }
            }
            BankChoice::NonidealTapered => FilterBankSpec::NonidealTapered,
        }
    }
}

/// Transmit pulse selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseChoice {
    Flat,
    Dirac,
}

impl PulseChoice {
    pub fn to_spec(self) -> PulseSpec {
        match self {
            PulseChoice::Flat => PulseSpec::Flat,
            PulseChoice::Dirac => PulseSpec::Dirac,
        }
    }
}

/// How path delays are chosen per trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayChoice {
    /// The same delays (absolute, in the units of `period`) every trial.
    Fixed(Vec<f64>),
    /// Fresh uniform draws in `[0, period)` each trial, redrawn while any pair
    /// sits closer than `period / 500` around the circle.
    UniformRandom,
}

/// Nominal per-path power layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerProfile {
    Equal,
    Halving,
    Doubling,
}

impl PowerProfile {
    /// Nominal power of path `k0` (0-based).
    pub fn power(self, k0: usize) -> f64 {
        match self {
            PowerProfile::Equal => 1.0,
            PowerProfile::Halving => 0.5f64.powi(k0 as i32),
            PowerProfile::Doubling => 2.0f64.powi(k0 as i32),
        }
    }
}

/// Rotation solver selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorChoice {
    Ls,
    Tls,
}

impl EstimatorChoice {
    pub fn to_variant(self) -> EspritVariant {
        match self {
            EstimatorChoice::Ls => EspritVariant::Ls,
            EstimatorChoice::Tls => EspritVariant::Tls,
        }
    }
}

/// FIR design window selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowChoice {
    Rectangular,
    RaisedCosine,
}

impl WindowChoice {
    pub fn to_window(self) -> crate::correction::Window {
        match self {
            WindowChoice::Rectangular => crate::correction::Window::Rectangular,
            WindowChoice::RaisedCosine => crate::correction::Window::RaisedCosine,
        }
    }
}

fn default_doppler() -> Vec<f64> {
    vec![0.05]
}

fn default_snr() -> Vec<SnrDb> {
    vec![SnrDb(15.0)]
}

fn default_taps_grid() -> Vec<usize> {
    vec![11, 25, 49]
}

fn default_p_grid() -> Vec<usize> {
    vec![4, 8]
}

fn default_nvec_grid() -> Vec<usize> {
    vec![25, 50, 75, 100]
}

fn default_esprit() -> EstimatorChoice {
    EstimatorChoice::Tls
}

fn default_window() -> WindowChoice {
    WindowChoice::Rectangular
}

/// Full description of one experiment run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Number of propagation paths.
    pub k: usize,
    /// Number of sampling channels.
    pub p: usize,
    /// Integer band offset of the working band.
    pub gamma: i64,
    /// Sampling period T.
    pub period: f64,
    /// Synthesis grid length (samples per channel).
    pub n_grid: usize,
    /// Symbols per burst; also the measurement-vector count outside the
    /// vector-count sweep.
    pub n_symbols: usize,
    /// Doppler spreads as f_d·T (dimensionless), one sweep point each where the
    /// scenario sweeps them, first entry otherwise.
    #[serde(default = "default_doppler")]
    pub doppler: Vec<f64>,
    /// SNR grid in dB.
    #[serde(default = "default_snr")]
    pub snr_db: Vec<SnrDb>,
    /// FIR tap-count grid for the correction-filter sweep.
    #[serde(default = "default_taps_grid")]
    pub taps_grid: Vec<usize>,
    /// Channel-count grid for the channel sweep.
    #[serde(default = "default_p_grid")]
    pub p_grid: Vec<usize>,
    /// Measurement-vector-count grid for the vector sweep.
    #[serde(default = "default_nvec_grid")]
    pub nvec_grid: Vec<usize>,
    pub trials: usize,
    /// Master seed; every random draw derives from it.
    pub seed: u64,
    pub bank: BankChoice,
    pub pulse: PulseChoice,
    pub delays: DelayChoice,
    pub power_profile: PowerProfile,
    #[serde(default = "default_esprit")]
    pub esprit: EstimatorChoice,
    #[serde(default = "default_window")]
    pub window: WindowChoice,
    /// Scale each fading realization to its nominal power exactly instead of
    /// only in expectation.
    #[serde(default)]
    pub normalize_per_realization: bool,
}

impl ExperimentConfig {
    /// Default configuration for a scenario, matching the experiment setups the
    /// library reproduces.
    pub fn preset(scenario: Scenario) -> Self {
        let base = ExperimentConfig {
            scenario,
            k: 2,
            p: 4,
            gamma: 0,
            period: 1.0,
            n_grid: 128,
            n_symbols: 100,
            doppler: vec![0.05],
            snr_db: vec![SnrDb(15.0)],
            taps_grid: default_taps_grid(),
            p_grid: default_p_grid(),
            nvec_grid: default_nvec_grid(),
            trials: 1000,
            seed: 0x5EED,
            bank: BankChoice::IdealBandpass,
            pulse: PulseChoice::Flat,
            delays: DelayChoice::Fixed(vec![0.4352, 0.521]),
            power_profile: PowerProfile::Equal,
            esprit: default_esprit(),
            window: default_window(),
            normalize_per_realization: false,
        };
        match scenario {
            Scenario::ChannelEst => ExperimentConfig {
                k: 4,
                p: 5,
                delays: DelayChoice::UniformRandom,
                power_profile: PowerProfile::Halving,
                ..base
            },
            Scenario::MseVsSnr => ExperimentConfig {
                snr_db: [5.0, 10.0, 15.0, 20.0, 25.0, 30.0].map(SnrDb).to_vec(),
                ..base
            },
            Scenario::MseVsP => ExperimentConfig {
                snr_db: [5.0, 10.0, 15.0, 20.0, 25.0, 30.0].map(SnrDb).to_vec(),
                p_grid: vec![4, 8],
                ..base
            },
            Scenario::MseVsNvec => ExperimentConfig {
                snr_db: vec![SnrDb(20.0)],
                doppler: vec![0.05, 0.1],
                ..base
            },
            Scenario::MseVsTaps => ExperimentConfig {
                p: 3,
                snr_db: [20.0, 40.0, 60.0].map(SnrDb).to_vec(),
                bank: BankChoice::NonidealTapered,
                ..base
            },
            Scenario::SingleRun => ExperimentConfig { trials: 1, ..base },
        }
    }

    /// Reads and validates a JSON configuration file.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Band layout for a given channel count.
    pub fn band_config(&self, p: usize) -> Result<BandConfig> {
        BandConfig::new(p, self.gamma, self.period, self.n_grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("need at least one path".into()));
        }
        if self.p < self.k + 1 {
            return Err(Error::Config(format!(
                "p = {} must exceed k = {} (rotation solve needs a spare row)",
                self.p, self.k
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n_symbols == 0 || self.n_symbols > self.n_grid {
            return Err(Error::Config(format!(
                "n_symbols = {} must lie in [1, n_grid = {}]",
                self.n_symbols, self.n_grid
            )));
        }
        for &SnrDb(s) in &self.snr_db {
            if s.is_nan() || s == f64::NEG_INFINITY {
                return Err(Error::Config(format!("snr {s} is not finite-or-+inf")));
            }
        }
        for &fd in &self.doppler {
            if !(fd.is_finite() && fd >= 0.0) {
                return Err(Error::Config(format!("doppler spread {fd} must be >= 0")));
            }
        }
        if self.doppler.is_empty() {
            return Err(Error::Config("doppler list must not be empty".into()));
        }
        if self.snr_db.is_empty() {
            return Err(Error::Config("snr grid must not be empty".into()));
        }
        if let DelayChoice::Fixed(ts) = &self.delays {
            if ts.len() != self.k {
                return Err(Error::Config(format!(
                    "{} fixed delays for k = {}",
                    ts.len(),
                    self.k
                )));
            }
            // DelaySet re-checks, this gives the config-level message
            for &t in ts {
                if !(t.is_finite() && (0.0..self.period).contains(&t)) {
                    return Err(Error::Config(format!(
                        "fixed delay {t} outside [0, {})",
                        self.period
                    )));
                }
            }
        }
        // every channel count the scenario will instantiate
        let channel_counts: Vec<usize> = match self.scenario {
            Scenario::MseVsP => {
                if self.p_grid.is_empty() {
                    return Err(Error::Config("p grid must not be empty".into()));
                }
                self.p_grid.clone()
            }
            _ => vec![self.p],
        };
        for &p in &channel_counts {
            if p < self.k + 1 {
                return Err(Error::Config(format!(
                    "swept p = {p} must exceed k = {}",
                    self.k
                )));
            }
            let band = self.band_config(p)?;
            match &self.bank {
                BankChoice::DelayedLowpass { .. } if self.scenario == Scenario::MseVsP => {
                    return Err(Error::Config(
                        "per-channel shifts pin the channel count; the channel sweep needs \
                         a bank that scales with p"
                            .into(),
                    ));
                }
                choice => choice.to_spec().validate(&band)?,
            }
        }
        match self.scenario {
            Scenario::MseVsTaps => {
                if self.taps_grid.is_empty() {
                    return Err(Error::Config("taps grid must not be empty".into()));
                }
                for &l in &self.taps_grid {
                    if l == 0 || l % 2 == 0 {
                        return Err(Error::Config(format!("tap count {l} must be odd")));
                    }
                }
            }
            Scenario::MseVsNvec => {
                if self.nvec_grid.is_empty() {
                    return Err(Error::Config("vector-count grid must not be empty".into()));
                }
                for &n in &self.nvec_grid {
                    if n < self.k + 1 || n > self.n_symbols {
                        return Err(Error::Config(format!(
                            "vector count {n} must lie in [{}, n_symbols = {}]",
                            self.k + 1,
                            self.n_symbols
                        )));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}
