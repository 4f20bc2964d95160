//! `mpest`: run Monte-Carlo scenarios, estimate a single dataset, or self-check.
//!
//! Exit codes: 0 success, 2 configuration problem, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use mpest_core::experiments::{
    estimate_once, run_scenario, write_outputs, ExperimentConfig, Scenario,
};
use mpest_core::Error;

#[derive(Parser)]
#[command(name = "mpest", version, about = "Multipath delay/gain estimation testbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// JSON configuration file; its fields mirror the config echoed in meta.json.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write one CSV per sweep plus meta.json.
    Run {
        /// One of: channel-est, mse-vs-snr, mse-vs-p, mse-vs-nvec, mse-vs-taps, single-run.
        scenario: String,
        #[command(flatten)]
        common: CommonOpts,
        /// Trial count override.
        #[arg(long)]
        trials: Option<usize>,
        /// Output directory.
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Synthesize one dataset from the configuration, estimate it, print JSON.
    Estimate {
        #[command(flatten)]
        common: CommonOpts,
        /// Also write the estimate as CSV into this directory.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Fast internal consistency checks.
    Selftest,
}

fn exit_for(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::ConfigParse(_)
        | Error::Io(_)
        | Error::DelayOutOfRange { .. }
        | Error::LengthMismatch { .. }
        | Error::InsufficientChannels { .. } => 2,
        Error::Numerical(_)
        | Error::DegenerateModel(_)
        | Error::IllConditionedPulse(_)
        | Error::FrontEndSingular { .. }
        | Error::RankDeficientSubspace(_)
        | Error::DivisionGuard { .. } => 3,
    }
}

fn load_config(common: &CommonOpts, scenario: Option<Scenario>) -> Result<ExperimentConfig, Error> {
    let mut cfg = match (&common.config, scenario) {
        (Some(path), _) => ExperimentConfig::from_json_file(path)?,
        (None, Some(s)) => ExperimentConfig::preset(s),
        (None, None) => ExperimentConfig::preset(Scenario::SingleRun),
    };
    if let Some(s) = scenario {
        if cfg.scenario != s {
            return Err(Error::Config(format!(
                "config file is for scenario '{}' but '{}' was requested",
                cfg.scenario.name(),
                s.name()
            )));
        }
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn init_threads(threads: Option<usize>) -> Result<(), Error> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn cmd_run(
    scenario: &str,
    common: &CommonOpts,
    trials: Option<usize>,
    out: &Path,
) -> Result<(), Error> {
    let scenario = Scenario::from_str(scenario)?;
    let mut cfg = load_config(common, Some(scenario))?;
    if let Some(t) = trials {
        cfg.trials = t;
    }
    init_threads(common.threads)?;
    let files = run_scenario(&cfg)?;
    let written = write_outputs(&cfg, &files, out)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_estimate(common: &CommonOpts, out: Option<&Path>) -> Result<(), Error> {
    let cfg = load_config(common, None)?;
    init_threads(common.threads)?;
    let r = estimate_once(&cfg)?;
    let report = serde_json::json!({
        "snr_db": if r.snr_db.is_finite() {
            serde_json::json!(r.snr_db)
        } else {
            serde_json::json!("inf")
        },
        "channels": r.p,
        "true_delays": r.true_delays,
        "estimated_delays": r.estimated_delays,
        "squared_errors": r.squared_errors,
        "delay_mse": r.delay_mse,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let mut csv = String::from("path,true_delay,estimated_delay\n");
        for (i, t) in r.true_delays.iter().enumerate() {
            csv.push_str(&format!("{i},{t:e},{:e}\n", r.estimated_delays[i]));
        }
        std::fs::write(dir.join("estimate.csv"), csv)?;
    }
    Ok(())
}

fn cmd_selftest() -> Result<(), Error> {
    use mpest_core::experiments::SnrDb;

    // noiseless single run must be exact
    let mut cfg = ExperimentConfig::preset(Scenario::SingleRun);
    cfg.snr_db = vec![SnrDb(f64::INFINITY)];
    let r = estimate_once(&cfg)?;
    if r.delay_mse > 1e-15 {
        return Err(Error::Numerical(format!(
            "noiseless single run off by {}",
            r.delay_mse
        )));
    }
    println!("noiseless exactness: ok");

    // a tiny noisy sweep must reproduce byte for byte
    let mut cfg = ExperimentConfig::preset(Scenario::MseVsSnr);
    cfg.trials = 8;
    cfg.snr_db = vec![SnrDb(15.0)];
    let a = run_scenario(&cfg)?;
    let b = run_scenario(&cfg)?;
    if a != b {
        return Err(Error::Numerical("rerun produced different tables".into()));
    }
    println!("deterministic rerun: ok");

    // estimates must degrade gracefully, not explode, at low SNR
    cfg.snr_db = vec![SnrDb(0.0)];
    let noisy = run_scenario(&cfg)?;
    let row = noisy[0]
        .content
        .lines()
        .nth(1)
        .ok_or_else(|| Error::Numerical("empty sweep output".into()))?;
    let mse: f64 = row
        .split(',')
        .nth(1)
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| Error::Numerical("unparseable sweep output".into()))?;
    if !(0.0..=0.25).contains(&mse) {
        return Err(Error::Numerical(format!("0 dB MSE {mse} out of range")));
    }
    println!("bounded error at 0 dB: ok");
    println!("selftest passed");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { scenario, common, trials, out } => {
            cmd_run(scenario, common, *trials, out)
        }
        Command::Estimate { common, out } => cmd_estimate(common, out.as_deref()),
        Command::Selftest => cmd_selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
