//! Thin wrappers around dense complex linear algebra.
//!
//! Everything here operates on small matrices (channel counts, path counts), so
//! robustness and determinism matter more than asymptotic speed.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) type CMat = DMatrix<Complex64>;

/// Forces exact Hermitian symmetry: `m <- (m + m^H) / 2`.
pub(crate) fn hermitize(m: &mut CMat) {
    let adj = m.adjoint();
    *m += adj;
    m.scale_mut(0.5);
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvector `i` in column `i`.
pub(crate) fn hermitian_eigen_desc(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let se = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));
    let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &se.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Eigenvalues of a general (square, complex) matrix.
pub(crate) fn eig_values(m: &CMat) -> Result<Vec<Complex64>> {
    m.eigenvalues()
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| Error::Numerical("eigenvalue iteration did not converge".into()))
}

/// Full SVD with singular values sorted descending. Returns `(u, sigma, v)`
/// such that `m = u * diag(sigma) * v^H`.
pub(crate) fn svd_desc(m: &CMat) -> Result<(CMat, Vec<f64>, CMat)> {
    let svd = m.clone().svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::Numerical("svd did not produce u".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("svd did not produce v".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut u_s = CMat::zeros(u.nrows(), order.len());
    let v = v_t.adjoint();
    let mut v_s = CMat::zeros(v.nrows(), order.len());
    for (dst, &src) in order.iter().enumerate() {
        u_s.set_column(dst, &u.column(src));
        v_s.set_column(dst, &v.column(src));
    }
    Ok((u_s, sigma, v_s))
}

/// Singular values only, sorted descending.
pub(crate) fn singular_values_desc(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Two-norm condition number; `f64::INFINITY` when numerically singular.
pub(crate) fn cond2(m: &CMat) -> f64 {
    let s = singular_values_desc(m);
    let (max, min) = (s[0], s[s.len() - 1]);
    if min <= 0.0 || max / min > 1.0 / f64::EPSILON {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Matrix inverse via LU; `None` when singular.
pub(crate) fn try_inverse(m: &CMat) -> Option<CMat> {
    m.clone().try_inverse()
}

/// Moore-Penrose pseudoinverse with relative cutoff `rcond` on singular values.
///
/// Errors when the matrix is effectively rank deficient (smallest retained
/// singular value would fall below `rcond * sigma_max`).
pub(crate) fn pinv(m: &CMat, rcond: f64) -> Result<CMat> {
    let (u, sigma, v) = svd_desc(m)?;
    let smax = sigma[0];
    let k = sigma.len();
    if smax <= 0.0 || sigma[k - 1] < rcond * smax {
        return Err(Error::DegenerateModel(format!(
            "effectively singular matrix: sigma_min/sigma_max = {:.3e}",
            if smax > 0.0 { sigma[k - 1] / smax } else { 0.0 }
        )));
    }
    let mut vs = v;
    for (j, &s) in sigma.iter().enumerate() {
        vs.column_mut(j).scale_mut(1.0 / s);
    }
    Ok(vs * u.adjoint())
}

/// Max absolute entry of `m`.
pub(crate) fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_cmat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
        CMat::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn hermitian_eigen_reconstructs_and_sorts() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_cmat(&mut rng, 5, 5);
        let mut h = &a * a.adjoint();
        hermitize(&mut h);
        let (vals, vecs) = hermitian_eigen_desc(&h);
        for w in vals.windows(2) {
            assert!(w[0] >= w[1], "eigenvalues not sorted descending: {vals:?}");
        }
        // residual ||H v - lambda v|| per pair
        for i in 0..5 {
            let v = vecs.column(i);
            let res = &h * v - v * Complex64::new(vals[i], 0.0);
            assert!(res.norm() < 1e-10, "eigenpair {i} residual {}", res.norm());
        }
        // orthonormal columns
        let gram = vecs.adjoint() * &vecs;
        let id = CMat::identity(5, 5);
        assert!(max_abs(&(gram - id)) < 1e-10);
    }

    #[test]
    fn general_eigenvalues_recover_known_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // eigenvalues on the unit circle, the regime the delay estimator lives in
        let truth = [
            Complex64::from_polar(1.0, 0.3),
            Complex64::from_polar(1.0, -2.2),
            Complex64::from_polar(1.0, 1.9),
        ];
        let d = CMat::from_diagonal(&DVector::from_row_slice(&truth));
        let p = random_cmat(&mut rng, 3, 3);
        let p_inv = try_inverse(&p).expect("random matrix invertible");
        let m = &p * d * p_inv;
        let mut got = eig_values(&m).expect("eigenvalues converge");
        let mut want = truth.to_vec();
        got.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
        want.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() < 1e-9, "eigenvalue mismatch: {g} vs {w}");
        }
    }

    #[test]
    fn svd_reconstructs_rectangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for (r, c) in [(4, 6), (6, 4), (5, 5)] {
            let m = random_cmat(&mut rng, r, c);
            let (u, sigma, v) = svd_desc(&m).unwrap();
            for w in sigma.windows(2) {
                assert!(w[0] >= w[1]);
            }
            let k = sigma.len();
            let mut s = CMat::zeros(k, k);
            for i in 0..k {
                s[(i, i)] = Complex64::new(sigma[i], 0.0);
            }
            let rec = &u * s * v.adjoint();
            assert!(max_abs(&(rec - m)) < 1e-10, "svd reconstruction {r}x{c}");
        }
    }

    #[test]
    fn lu_inverse_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m = random_cmat(&mut rng, 5, 5) + CMat::identity(5, 5).scale(2.0);
        let mi = try_inverse(&m).expect("well conditioned");
        let id = CMat::identity(5, 5);
        assert!(max_abs(&(&m * mi - id)) < 1e-11);
    }

    #[test]
    fn pinv_of_tall_matrix_is_left_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let m = random_cmat(&mut rng, 6, 3);
        let p = pinv(&m, 1e-13).unwrap();
        let id = CMat::identity(3, 3);
        assert!(max_abs(&(p * &m - id)) < 1e-10);
    }

    #[test]
    fn pinv_rejects_rank_deficient() {
        let mut m = CMat::zeros(4, 2);
        for i in 0..4 {
            m[(i, 0)] = Complex64::new(1.0, 0.0);
            m[(i, 1)] = Complex64::new(1.0, 0.0); // duplicate column
        }
        assert!(pinv(&m, 1e-13).is_err());
    }

    #[test]
    fn cond2_flags_singular() {
        let m = CMat::zeros(3, 3);
        assert!(cond2(&m).is_infinite());
        let id = CMat::identity(3, 3);
        assert!((cond2(&id) - 1.0).abs() < 1e-12);
    }
}
