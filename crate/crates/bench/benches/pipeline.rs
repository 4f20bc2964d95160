//! Stage-level benchmarks: signal synthesis, digital correction (exact and
//! FIR), subspace delay recovery, fading generation, and a whole Monte-Carlo
//! trial. Inputs are fixed seeds, so timings are comparable across runs.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mpest_core::correction::{CorrectionFilter, Window};
use mpest_core::delay_recovery::{recover_delays, EspritVariant};
use mpest_core::frontend::{add_noise, FilterBankSpec, FrontEnd, MeasurementSet};
use mpest_core::model::{jakes_gains, BandConfig, DelaySet, GainSequences, PulseSpec};

const P: usize = 4;
const K: usize = 2;
const N_GRID: usize = 128;
const N_SYM: usize = 100;

fn band() -> BandConfig {
    BandConfig::new(P, 0, 1.0, N_GRID).unwrap()
}

fn delays() -> DelaySet {
    DelaySet::new(vec![0.4352, 0.521], 1.0).unwrap()
}

fn gains() -> GainSequences {
    let seqs = (0..K)
        .map(|k| jakes_gains(0.05, 1.0, N_SYM, 1.0, 1000 + k as u64).unwrap())
        .collect();
    GainSequences::new(seqs).unwrap()
}

fn tapered_front_end() -> FrontEnd {
    FrontEnd::new(&FilterBankSpec::NonidealTapered, &PulseSpec::Flat, &band()).unwrap()
}

fn noisy_measurements(fe: &FrontEnd) -> MeasurementSet {
    let clean = fe.synthesize(&delays(), &gains()).unwrap();
    add_noise(&clean, 20.0, 42).unwrap()
}

fn bench_synthesize(c: &mut Criterion) {
    let fe = tapered_front_end();
    let (tau, a) = (delays(), gains());
    c.bench_function("synthesize/p4-k2-n128", |b| {
        b.iter(|| fe.synthesize(black_box(&tau), black_box(&a)).unwrap())
    });
}

fn bench_correction(c: &mut Criterion) {
    let fe = tapered_front_end();
    let d = noisy_measurements(&fe);
    let exact = CorrectionFilter::build_exact(&fe).unwrap();
    let fir = CorrectionFilter::design_fir(
        &FilterBankSpec::NonidealTapered,
        &PulseSpec::Flat,
        &band(),
        25,
        Window::RaisedCosine,
    )
    .unwrap();
    c.bench_function("correction/exact", |b| {
        b.iter(|| exact.apply(black_box(&d)).unwrap())
    });
    c.bench_function("correction/fir-25", |b| {
        b.iter(|| fir.apply(black_box(&d)).unwrap())
    });
}

fn bench_delay_recovery(c: &mut Criterion) {
    let fe = tapered_front_end();
    let corrected = CorrectionFilter::build_exact(&fe)
        .unwrap()
        .apply(&noisy_measurements(&fe))
        .unwrap();
    c.bench_function("delays/tls-esprit", |b| {
        b.iter(|| recover_delays(black_box(&corrected), K, 1e-9, EspritVariant::Tls).unwrap())
    });
}

fn bench_jakes(c: &mut Criterion) {
    c.bench_function("fading/jakes-100", |b| {
        b.iter(|| jakes_gains(black_box(0.05), 1.0, N_SYM, 1.0, black_box(7)))
    });
}

fn bench_full_trial(c: &mut Criterion) {
    let fe = tapered_front_end();
    let corr = CorrectionFilter::build_exact(&fe).unwrap();
    let (tau, a) = (delays(), gains());
    c.bench_function("trial/synthesize-noise-correct-recover", |b| {
        b.iter(|| {
            let clean = fe.synthesize(&tau, &a).unwrap();
            let noisy = add_noise(&clean, black_box(20.0), 42).unwrap();
            let d = corr.apply(&noisy).unwrap();
            recover_delays(&d, K, 1e-9, EspritVariant::Tls).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_synthesize,
    bench_correction,
    bench_delay_recovery,
    bench_jakes,
    bench_full_trial
);
criterion_main!(benches);
