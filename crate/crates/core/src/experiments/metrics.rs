//! Error metrics and order-independent aggregation.

use itertools::Itertools;

use crate::error::{Error, Result};

/// Distance between two delays on a circle of circumference `period`.
pub fn circular_distance(a: f64, b: f64, period: f64) -> f64 {
    let r = (a - b).rem_euclid(period);
    r.min(period - r)
}

/// Matches estimated to true delays by minimal total squared circular distance.
///
/// Returns `(perm, sq_errors)` where `est[perm[i]]` pairs with `truth[i]` and
/// `sq_errors[i]` is the squared circular distance of that pair divided by
/// `period²`. Exhaustive over permutations, so meant for small path counts.
pub fn match_delays(est: &[f64], truth: &[f64], period: f64) -> Result<(Vec<usize>, Vec<f64>)> {
    if est.len() != truth.len() {
        return Err(Error::LengthMismatch(format!(
            "{} estimates for {} true delays",
            est.len(),
            truth.len()
        )));
    }
    if est.is_empty() {
        return Err(Error::Config("cannot match empty delay sets".into()));
    }
    let k = est.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in (0..k).permutations(k) {
        let cost: f64 = perm
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                let d = circular_distance(est[j], truth[i], period);
                d * d
            })
            .sum();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, perm));
        }
    }
    let (_, perm) = best.expect("permutation set is non-empty");
    let sq: Vec<f64> = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let d = circular_distance(est[j], truth[i], period) / period;
            d * d
        })
        .collect();
    Ok((perm, sq))
}

/// Mean matched squared circular delay error in `period²`-normalized units.
pub fn delay_error(est: &[f64], truth: &[f64], period: f64) -> Result<f64> {
    let (_, sq) = match_delays(est, truth, period)?;
    Ok(pairwise_sum(&sq) / sq.len() as f64)
}

/// Sums in a fixed pairwise order, independent of how the values were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        n if n <= 8 => xs.iter().sum(),
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Sample mean and standard error of the mean (zero for a single sample).
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n > 0, "mean of empty sample");
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Sample median (midpoint average for even lengths). Robust companion to
/// [`mean_and_stderr`] for heavy-tailed Monte-Carlo outputs.
pub fn median(xs: &[f64]) -> f64 {
    let n = xs.len();
    assert!(n > 0, "median of empty sample");
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circular_distance_wraps() {
        assert!((circular_distance(0.01, 0.99, 1.0) - 0.02).abs() < 1e-15);
        assert!((circular_distance(0.99, 0.01, 1.0) - 0.02).abs() < 1e-15);
        assert!((circular_distance(0.3, 0.3, 1.0)).abs() < 1e-15);
        assert!((circular_distance(0.0, 0.5, 1.0) - 0.5).abs() < 1e-15);
        assert!((circular_distance(0.2, 1.8, 2.0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn exact_estimates_have_zero_error() {
        let t = [0.1, 0.4, 0.8];
        assert!(delay_error(&t, &t, 1.0).unwrap() < 1e-30);
    }

    #[test]
    fn wraparound_pair_reference_value() {
        // 0.01T against 0.99T is 0.02T apart around the circle
        let e = delay_error(&[0.01], &[0.99], 1.0).unwrap();
        assert!((e - 4e-4).abs() < 1e-12, "got {e}");
    }

    #[test]
    fn matching_is_permutation_invariant() {
        let truth = [0.1, 0.5, 0.9];
        let est_a = [0.12, 0.52, 0.88];
        let est_b = [0.88, 0.12, 0.52];
        let ea = delay_error(&est_a, &truth, 1.0).unwrap();
        let eb = delay_error(&est_b, &truth, 1.0).unwrap();
        assert!((ea - eb).abs() < 1e-18);
    }

    #[test]
    fn matching_picks_the_cheaper_assignment() {
        // pairing in sorted order would cost (0.3² + 0.3²); crossing costs 2·0.1²
        let truth = [0.4, 0.6];
        let est = [0.7, 0.3];
        let (perm, sq) = match_delays(&est, &truth, 1.0).unwrap();
        assert_eq!(perm, vec![1, 0]);
        for s in sq {
            assert!((s - 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn squared_errors_are_capped_by_quarter() {
        // the circular distance never exceeds T/2
        let e = delay_error(&[0.0], &[0.5], 1.0).unwrap();
        assert!((e - 0.25).abs() < 1e-15);
        let e2 = delay_error(&[0.0], &[0.501], 1.0).unwrap();
        assert!(e2 < 0.25);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        assert!(delay_error(&[0.1], &[0.1, 0.2], 1.0).is_err());
    }

    #[test]
    fn pairwise_sum_matches_sequential_on_benign_data() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let seq: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - seq).abs() < 1e-9);
    }

    #[test]
    fn pairwise_sum_is_split_stable() {
        // the same multiset in the same order must sum identically however the
        // values were computed upstream
        let xs: Vec<f64> = (0..777).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let a = pairwise_sum(&xs);
        let b = pairwise_sum(&xs.clone());
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn mean_and_stderr_reference() {
        let (m, se) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m - 2.5).abs() < 1e-15);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        let (m1, se1) = mean_and_stderr(&[7.5]);
        assert_eq!(m1, 7.5);
        assert_eq!(se1, 0.0);
    }

    #[test]
    fn median_ignores_a_wild_outlier() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[1.0, 1.0, 1.0, 1e9]), 1.0);
    }
}
