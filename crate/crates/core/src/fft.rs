//! DFT helpers with the crate-wide convention: forward kernel `e^{-j2πjn/N}`,
//! inverse carries the `1/N` factor. Plans are cached per thread.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn run_plan(data: &mut [Complex64], forward: bool) {
    let n = data.len();
    if n <= 1 {
        return;
    }
    PLANS.with(|cell| {
        let (planner, cache) = &mut *cell.borrow_mut();
        let plan = cache.entry((n, forward)).or_insert_with(|| {
            if forward {
                planner.plan_fft_forward(n)
            } else {
                planner.plan_fft_inverse(n)
            }
        });
        plan.process(data);
    });
}

/// Forward DFT, no scaling.
pub(crate) fn dft(x: &[Complex64]) -> Vec<Complex64> {
    let mut out = x.to_vec();
    run_plan(&mut out, true);
    out
}

/// Forward DFT of `x` zero-padded to length `n`. Panics if `x.len() > n`.
pub(crate) fn dft_padded(x: &[Complex64], n: usize) -> Vec<Complex64> {
    assert!(x.len() <= n, "dft_padded: input longer than target length");
    let mut out = vec![Complex64::ZERO; n];
    out[..x.len()].copy_from_slice(x);
    run_plan(&mut out, true);
    out
}

/// Inverse DFT with the `1/N` factor.
pub(crate) fn idft(x: &[Complex64]) -> Vec<Complex64> {
    let mut out = x.to_vec();
    run_plan(&mut out, false);
    let scale = 1.0 / x.len() as f64;
    for z in &mut out {
        *z *= scale;
    }
    out
}
