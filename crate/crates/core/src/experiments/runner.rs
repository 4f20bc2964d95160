//! Scenario execution: trial generation, Monte-Carlo sweeps, CSV assembly.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::FRAC_1_SQRT_2;
use std::path::{Path, PathBuf};

use crate::correction::CorrectionFilter;
use crate::delay_recovery::{recover_delays, EspritVariant};
use crate::error::{Error, Result};
use crate::experiments::config::{DelayChoice, ExperimentConfig, Scenario, SnrDb};
use crate::experiments::metrics::{
    circular_distance, match_delays, mean_and_stderr, median, pairwise_sum,
};
use crate::experiments::seeds::{
    derive, GRID_STRIDE, PATH_STRIDE, STREAM_DELAYS, STREAM_FADING, STREAM_NOISE, STREAM_SYMBOLS,
};
use crate::frontend::{add_noise, FrontEnd};
use crate::gain_recovery::{recover_a, recover_b, recover_channel_coeffs};
use crate::linalg::pinv;
use crate::model::{jakes_gains, vandermonde, BandConfig, DelaySet, GainSequences};

/// Relative eigenvalue threshold deciding when the plain correlation is rank
/// deficient and spatial smoothing kicks in.
const RANK_TOL: f64 = 1e-9;

/// Redraw attempts for the uniform delay draw before giving up.
const MAX_DELAY_REDRAWS: usize = 1000;

/// One finished trial.
#[derive(Clone, Debug)]
pub struct TrialResult {
    /// Trial index within the sweep.
    pub trial: u64,
    /// Seed of this trial's noise draw.
    pub noise_seed: u64,
    pub snr_db: f64,
    pub p: usize,
    pub taps: Option<usize>,
    pub true_delays: Vec<f64>,
    /// Estimator output, sorted ascending (not matched to `true_delays`).
    pub estimated_delays: Vec<f64>,
    /// Matched squared circular errors in `period²` units, aligned to
    /// `true_delays`.
    pub squared_errors: Vec<f64>,
    pub delay_mse: f64,
    /// Relative gain-recovery error when gains were recovered.
    pub gain_mse: Option<f64>,
}

/// A CSV table with the file name it should be written under.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedCsv {
    pub name: String,
    pub content: String,
}

fn fmt_f(x: f64) -> String {
    format!("{x:e}")
}

fn gen_delays(cfg: &ExperimentConfig, trial: u64) -> Result<DelaySet> {
    match &cfg.delays {
        DelayChoice::Fixed(ts) => DelaySet::new(ts.clone(), cfg.period),
        DelayChoice::UniformRandom => {
            let seed = derive(cfg.seed, STREAM_DELAYS, trial);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let min_sep = cfg.period / 500.0;
            for _ in 0..MAX_DELAY_REDRAWS {
                let draw: Vec<f64> =
                    (0..cfg.k).map(|_| rng.random::<f64>() * cfg.period).collect();
                let ok = (0..cfg.k).all(|i| {
                    (i + 1..cfg.k)
                        .all(|j| circular_distance(draw[i], draw[j], cfg.period) >= min_sep)
                });
                if ok {
                    return DelaySet::new(draw, cfg.period);
                }
            }
            Err(Error::Numerical(format!(
                "could not draw {} delays with separation {min_sep} in {MAX_DELAY_REDRAWS} tries",
                cfg.k
            )))
        }
    }
}

fn gen_fading(
    cfg: &ExperimentConfig,
    trial: u64,
    doppler_idx: usize,
    n: usize,
) -> Result<GainSequences> {
    let fd_t = cfg.doppler[doppler_idx];
    let mut seqs = Vec::with_capacity(cfg.k);
    for path in 0..cfg.k {
        let stream = STREAM_FADING + path as u64 * PATH_STRIDE + doppler_idx as u64 * GRID_STRIDE;
        let seed = derive(cfg.seed, stream, trial);
        let power = cfg.power_profile.power(path);
        let mut g = jakes_gains(fd_t / cfg.period, cfg.period, n, power, seed)?;
        if cfg.normalize_per_realization {
            let actual: f64 = g.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
            if actual > 0.0 {
                let s = (power / actual).sqrt();
                for z in &mut g {
                    *z *= s;
                }
            }
        }
        seqs.push(g);
    }
    GainSequences::new(seqs)
}

fn gen_symbols(cfg: &ExperimentConfig, trial: u64, n: usize) -> Vec<Complex64> {
    let seed = derive(cfg.seed, STREAM_SYMBOLS, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let q: u8 = rng.random_range(0..4);
            let (re, im) = match q {
                0 => (1.0, 1.0),
                1 => (1.0, -1.0),
                2 => (-1.0, 1.0),
                _ => (-1.0, -1.0),
            };
            Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
        })
        .collect()
}

/// Front end and correction prepared once per sweep point.
struct Pipeline {
    band: BandConfig,
    fe: FrontEnd,
    corr: CorrectionFilter,
    variant: EspritVariant,
    taps: Option<usize>,
}

impl Pipeline {
    fn exact(cfg: &ExperimentConfig, p: usize) -> Result<Self> {
        let band = cfg.band_config(p)?;
        let bank = cfg.bank.to_spec();
        let pulse = cfg.pulse.to_spec();
        let fe = FrontEnd::new(&bank, &pulse, &band)?;
        let corr = CorrectionFilter::build_exact(&fe)?;
        Ok(Pipeline { band, fe, corr, variant: cfg.esprit.to_variant(), taps: None })
    }

    fn fir(cfg: &ExperimentConfig, p: usize, taps: usize) -> Result<Self> {
        let band = cfg.band_config(p)?;
        let bank = cfg.bank.to_spec();
        let pulse = cfg.pulse.to_spec();
        let fe = FrontEnd::new(&bank, &pulse, &band)?;
        let corr =
            CorrectionFilter::design_fir(&bank, &pulse, &band, taps, cfg.window.to_window())?;
        Ok(Pipeline { band, fe, corr, variant: cfg.esprit.to_variant(), taps: Some(taps) })
    }
}

/// Synthesize once, then estimate at every requested vector count.
fn mse_trial_multi(
    pl: &Pipeline,
    cfg: &ExperimentConfig,
    trial: u64,
    doppler_idx: usize,
    snr_db: f64,
    noise_seed: u64,
    nvecs: &[usize],
) -> Result<Vec<TrialResult>> {
    let tau = gen_delays(cfg, trial)?;
    let fading = gen_fading(cfg, trial, doppler_idx, cfg.n_symbols)?;
    let raw = pl.fe.synthesize(&tau, &fading)?;
    let noisy = add_noise(&raw, snr_db, noise_seed)?;
    let d = pl.corr.apply(&noisy)?;
    nvecs
        .iter()
        .map(|&nvec| {
            let d_used = d.truncated(nvec)?;
            let est = recover_delays(&d_used, cfg.k, RANK_TOL, pl.variant)?;
            let (_, sq) = match_delays(&est, tau.delays(), cfg.period)?;
            let delay_mse = pairwise_sum(&sq) / sq.len() as f64;
            Ok(TrialResult {
                trial,
                noise_seed,
                snr_db,
                p: pl.band.p(),
                taps: pl.taps,
                true_delays: tau.delays().to_vec(),
                estimated_delays: est,
                squared_errors: sq,
                delay_mse,
                gain_mse: None,
            })
        })
        .collect()
}

fn mse_trial(
    pl: &Pipeline,
    cfg: &ExperimentConfig,
    trial: u64,
    doppler_idx: usize,
    snr_db: f64,
    noise_seed: u64,
) -> Result<TrialResult> {
    let nvec = [cfg.n_symbols];
    Ok(mse_trial_multi(pl, cfg, trial, doppler_idx, snr_db, noise_seed, &nvec)?
        .pop()
        .expect("one vector count in, one result out"))
}

fn run_trials<T, F>(trials: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..trials as u64).into_par_iter().map(f).collect()
}

fn mse_rows(results: &[TrialResult]) -> (f64, f64) {
    let mses: Vec<f64> = results.iter().map(|r| r.delay_mse).collect();
    mean_and_stderr(&mses)
}

fn run_mse_vs_snr(cfg: &ExperimentConfig) -> Result<Vec<NamedCsv>> {
    let pl = Pipeline::exact(cfg, cfg.p)?;
    let mut out = String::from("snr_db,delay_mse,stderr,trials\n");
    for (si, &SnrDb(snr)) in cfg.snr_db.iter().enumerate() {
        let results = run_trials(cfg.trials, |t| {
            let noise_seed = derive(cfg.seed, STREAM_NOISE + si as u64 * GRID_STRIDE, t);
            mse_trial(&pl, cfg, t, 0, snr, noise_seed)
        })?;
        let (mean, se) = mse_rows(&results);
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f(snr),
            fmt_f(mean),
            fmt_f(se),
            cfg.trials
        ));
    }
    Ok(vec![NamedCsv { name: "mse_vs_snr.csv".into(), content: out }])
}

fn run_mse_vs_p(cfg: &ExperimentConfig) -> Result<Vec<NamedCsv>> {
    let mut out = String::from("p,snr_db,delay_mse,stderr,trials\n");
    for &p in &cfg.p_grid {
        let pl = Pipeline::exact(cfg, p)?;
        for (si, &SnrDb(snr)) in cfg.snr_db.iter().enumerate() {
            let results = run_trials(cfg.trials, |t| {
                let noise_seed = derive(cfg.seed, STREAM_NOISE + si as u64 * GRID_STRIDE, t);
                mse_trial(&pl, cfg, t, 0, snr, noise_seed)
            })?;
            let (mean, se) = mse_rows(&results);
            out.push_str(&format!(
                "{p},{},{},{},{}\n",
                fmt_f(snr),
                fmt_f(mean),
                fmt_f(se),
                cfg.trials
            ));
        }
    }
    Ok(vec![NamedCsv { name: "mse_vs_p.csv".into(), content: out }])
}

fn run_mse_vs_nvec(cfg: &ExperimentConfig) -> Result<Vec<NamedCsv>> {
    let pl = Pipeline::exact(cfg, cfg.p)?;
    let SnrDb(snr) = cfg.snr_db[0];
    let mut out = String::from("doppler,nvec,snr_db,delay_mse,stderr,trials\n");
    for (di, &fd) in cfg.doppler.iter().enumerate() {
        let per_trial = run_trials(cfg.trials, |t| {
            let noise_seed = derive(cfg.seed, STREAM_NOISE + di as u64 * GRID_STRIDE, t);
            mse_trial_multi(&pl, cfg, t, di, snr, noise_seed, &cfg.nvec_grid)
        })?;
        for (ni, &nvec) in cfg.nvec_grid.iter().enumerate() {
            let column: Vec<TrialResult> =
                per_trial.iter().map(|row| row[ni].clone()).collect();
            let (mean, se) = mse_rows(&column);
            out.push_str(&format!(
                "{},{nvec},{},{},{},{}\n",
                fmt_f(fd),
                fmt_f(snr),
                fmt_f(mean),
                fmt_f(se),
                cfg.trials
            ));
        }
    }
    Ok(vec![NamedCsv { name: "mse_vs_nvec.csv".into(), content: out }])
}

fn run_mse_vs_taps(cfg: &ExperimentConfig) -> Result<Vec<NamedCsv>> {
    let mut out = String::from("taps,snr_db,delay_mse,stderr,trials\n");
    for &taps in &cfg.taps_grid {
        let pl = Pipeline::fir(cfg, cfg.p, taps)?;
        for (si, &SnrDb(snr)) in cfg.snr_db.iter().enumerate() {
            // noise stream ignores the tap count, so every filter length sees
            // the same noisy records
            let results = run_trials(cfg.trials, |t| {
                let noise_seed = derive(cfg.seed, STREAM_NOISE + si as u64 * GRID_STRIDE, t);
                mse_trial(&pl, cfg, t, 0, snr, noise_seed)
            })?;
            let (mean, se) = mse_rows(&results);
            out.push_str(&format!(
                "{taps},{},{},{},{}\n",
                fmt_f(snr),
                fmt_f(mean),
                fmt_f(se),
                cfg.trials
            ));
        }
    }
    Ok(vec![NamedCsv { name: "mse_vs_taps.csv".into(), content: out }])
}

struct ChanTrial {
    result: TrialResult,
    /// Bias-corrected mean energy per true path.
    path_energy: Vec<f64>,
    /// Recovered and true fading track of the earliest path (kept for trial 0).
    track: Option<(Vec<Complex64>, Vec<Complex64>)>,
}

fn channel_est_trial(
    pl: &Pipeline,
    cfg: &ExperimentConfig,
    trial: u64,
    snr_db: f64,
    noise_seed: u64,
) -> Result<ChanTrial> {
    let n_sym = cfg.n_symbols;
    let tau = gen_delays(cfg, trial)?;
    let fading = gen_fading(cfg, trial, 0, n_sym)?;
    let symbols = gen_symbols(cfg, trial, n_sym);
    let gains = GainSequences::new(
        (0..cfg.k)
            .map(|k| {
                fading
                    .get(k)
                    .iter()
                    .zip(&symbols)
                    .map(|(f, s)| f * s)
                    .collect()
            })
            .collect(),
    )?;
    let raw = pl.fe.synthesize(&tau, &gains)?;
    let noisy = add_noise(&raw, snr_db, noise_seed)?;
    let d = pl.corr.apply(&noisy)?;
    let d_used = d.truncated(n_sym)?;
    let est = recover_delays(&d_used, cfg.k, RANK_TOL, pl.variant)?;
    let (perm, sq) = match_delays(&est, tau.delays(), cfg.period)?;
    let delay_mse = pairwise_sum(&sq) / sq.len() as f64;

    // gains from the full grid with the estimated delays
    let tau_est = DelaySet::new(est.clone(), cfg.period)?;
    let b_hat = recover_b(&d, &tau_est, &pl.band)?;
    let a_hat = recover_a(&b_hat, &tau_est, &pl.band)?;
    let alpha = recover_channel_coeffs(&a_hat.truncated(n_sym)?, &symbols)?;

    // residual noise level in the estimation window, for energy de-biasing:
    // the per-sample fit leaves p-k noise dimensions unexplained
    let n_mat = vandermonde(&tau_est, &pl.band)?.into_matrix();
    let mut resid = 0.0f64;
    for n in 0..n_sym {
        let dn = d.vector_at(n);
        let bn = DVector::from_fn(cfg.k, |k, _| b_hat.get(k)[n]);
        resid += (&dn - &n_mat * bn).norm_squared();
    }
    let sigma2 = resid / (n_sym * (pl.band.p() - cfg.k)) as f64;
    let gram_inv = pinv(&(n_mat.adjoint() * &n_mat), 1e-12)?;

    let mut path_energy = Vec::with_capacity(cfg.k);
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for (i, &j) in perm.iter().enumerate() {
        let alpha_j = alpha.get(j);
        let raw_energy: f64 =
            alpha_j.iter().map(|z| z.norm_sqr()).sum::<f64>() / n_sym as f64;
        path_energy.push(raw_energy - sigma2 * gram_inv[(j, j)].re);
        for (a, f) in alpha_j.iter().zip(fading.get(i)) {
            num += (a - f).norm_sqr();
            den += f.norm_sqr();
        }
    }
    let gain_mse = if den > 0.0 { num / den } else { 0.0 };
    let track = if trial == 0 {
        Some((fading.get(0).to_vec(), alpha.get(perm[0]).to_vec()))
    } else {
        None
    };
    Ok(ChanTrial {
        result: TrialResult {
            trial,
            noise_seed,
            snr_db,
            p: pl.band.p(),
            taps: pl.taps,
            true_delays: tau.delays().to_vec(),
            estimated_delays: est,
            squared_errors: sq,
            delay_mse,
            gain_mse: Some(gain_mse),
        },
        path_energy,
        track,
    })
}

fn run_channel_est(cfg: &ExperimentConfig) -> Result<Vec<NamedCsv>> {
    let pl = Pipeline::exact(cfg, cfg.p)?;
    let SnrDb(snr) = cfg.snr_db[0];
    let results = run_trials(cfg.trials, |t| {
        let noise_seed = derive(cfg.seed, STREAM_NOISE, t);
        channel_est_trial(&pl, cfg, t, snr, noise_seed)
    })?;

    // the mean energy is heavy-tailed: a trial whose random delays land close
    // together splits power between nearly collinear steering columns, and one
    // such trial can dominate the sum, so the median is reported alongside
    let mut pdp = String::from("path,nominal_energy,mean_energy,median_energy,stderr\n");
    for path in 0..cfg.k {
        let energies: Vec<f64> = results.iter().map(|r| r.path_energy[path]).collect();
        let (mean, se) = mean_and_stderr(&energies);
        pdp.push_str(&format!(
            "{path},{},{},{},{}\n",
            fmt_f(cfg.power_profile.power(path)),
            fmt_f(mean),
            fmt_f(median(&energies)),
            fmt_f(se)
        ));
    }

    let mut tap = String::from("n,true_re,true_im,est_re,est_im\n");
    let (true_track, est_track) = results[0]
        .track
        .as_ref()
        .expect("trial 0 carries the gain track");
    for (n, (t, e)) in true_track.iter().zip(est_track).enumerate() {
        tap.push_str(&format!(
            "{n},{},{},{},{}\n",
            fmt_f(t.re),
            fmt_f(t.im),
            fmt_f(e.re),
            fmt_f(e.im)
        ));
    }

    let mses: Vec<f64> = results.iter().map(|r| r.result.delay_mse).collect();
    let (dmean, dse) = mean_and_stderr(&mses);
    let gains: Vec<f64> = results
        .iter()
        .map(|r| r.result.gain_mse.expect("channel trials recover gains"))
        .collect();
    let (gmean, _) = mean_and_stderr(&gains);
    let summary = format!(
        "trials,delay_mse,stderr,gain_mse\n{},{},{},{}\n",
        cfg.trials,
        fmt_f(dmean),
        fmt_f(dse),
        fmt_f(gmean)
    );

    Ok(vec![
        NamedCsv { name: "pdp.csv".into(), content: pdp },
        NamedCsv { name: "first_tap.csv".into(), content: tap },
        NamedCsv { name: "summary.csv".into(), content: summary },
    ])
}

fn run_single(cfg: &ExperimentConfig) -> Result<Vec<NamedCsv>> {
    let pl = Pipeline::exact(cfg, cfg.p)?;
    let SnrDb(snr) = cfg.snr_db[0];
    let noise_seed = derive(cfg.seed, STREAM_NOISE, 0);
    let r = mse_trial(&pl, cfg, 0, 0, snr, noise_seed)?;
    let (perm, _) = match_delays(&r.estimated_delays, &r.true_delays, cfg.period)?;
    let mut out = String::from("path,true_delay,estimated_delay,squared_error\n");
    for (i, &j) in perm.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{}\n",
            fmt_f(r.true_delays[i]),
            fmt_f(r.estimated_delays[j]),
            fmt_f(r.squared_errors[i])
        ));
    }
    Ok(vec![NamedCsv { name: "single_run.csv".into(), content: out }])
}

/// Runs a validated configuration and returns its CSV tables. Output is a pure
/// function of the configuration: trials execute in parallel but are collected
/// in index order and reduced pairwise.
pub fn run_scenario(cfg: &ExperimentConfig) -> Result<Vec<NamedCsv>> {
    cfg.validate()?;
    match cfg.scenario {
        Scenario::ChannelEst => run_channel_est(cfg),
        Scenario::MseVsSnr => run_mse_vs_snr(cfg),
        Scenario::MseVsP => run_mse_vs_p(cfg),
        Scenario::MseVsNvec => run_mse_vs_nvec(cfg),
        Scenario::MseVsTaps => run_mse_vs_taps(cfg),
        Scenario::SingleRun => run_single(cfg),
    }
}

/// Writes tables plus a `meta.json` (config echo and tool version) into
/// `out_dir`, creating it if needed. Returns the paths written.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    files: &[NamedCsv],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::with_capacity(files.len() + 1);
    for f in files {
        let path = out_dir.join(&f.name);
        std::fs::write(&path, &f.content)?;
        written.push(path);
    }
    let meta = serde_json::json!({
        "tool_version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
    });
    let meta_path = out_dir.join("meta.json");
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    std::fs::write(&meta_path, text)?;
    written.push(meta_path);
    Ok(written)
}

/// One estimation pass over a synthetic dataset drawn from the configuration
/// (trial 0 of the sweep), for interactive use.
pub fn estimate_once(cfg: &ExperimentConfig) -> Result<TrialResult> {
    cfg.validate()?;
    let pl = Pipeline::exact(cfg, cfg.p)?;
    let SnrDb(snr) = cfg.snr_db[0];
    let noise_seed = derive(cfg.seed, STREAM_NOISE, 0);
    mse_trial(&pl, cfg, 0, 0, snr, noise_seed)
}
