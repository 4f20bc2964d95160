//! Experiment harness: scenario configuration, Monte-Carlo sweeps, error
//! metrics, and CSV emission.
//!
//! Every sweep derives per-trial seeds from one master seed, runs trials in
//! parallel with an order-preserving collect, and aggregates with pairwise
//! summation, so a rerun with the same configuration produces byte-identical
//! output at any thread count.

pub mod config;
pub mod metrics;
pub mod runner;
pub mod seeds;

pub use config::{
    BankChoice, DelayChoice, EstimatorChoice, ExperimentConfig, PowerProfile, PulseChoice,
    Scenario, SnrDb, WindowChoice,
};
pub use runner::{estimate_once, run_scenario, write_outputs, NamedCsv, TrialResult};
