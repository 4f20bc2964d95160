//! Delay recovery from corrected channel samples.
//!
//! The corrected samples follow `d[n] = N(τ) b[n]` with a Vandermonde steering
//! matrix, so the delays are encoded in the rotation between the two row blocks
//! of the signal subspace. This module estimates the sample correlation matrix,
//! optionally restores rank by spatial smoothing when path gains are correlated,
//! extracts the signal subspace, and solves the rotation by least squares or
//! total least squares.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::frontend::MeasurementSet;
use crate::linalg::{hermitian_eigen_desc, hermitize, pinv, CMat};

/// Hermitian sample correlation with its context.
#[derive(Clone, Debug)]
pub struct CorrelationMatrix {
    matrix: CMat,
    samples: usize,
    period: f64,
    /// Steering-vector length the rows correspond to (p for the plain
    /// correlation, sub-vector length after smoothing).
    dim: usize,
}

impl CorrelationMatrix {
    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of eigenvalues above `rel_tol` times the largest one.
    pub fn effective_rank(&self, rel_tol: f64) -> usize {
        let (vals, _) = hermitian_eigen_desc(&self.matrix);
        let top = vals.first().copied().unwrap_or(0.0).max(0.0);
        if top <= 0.0 {
            return 0;
        }
        vals.iter().take_while(|&&v| v > rel_tol * top).count()
    }
}

/// Sample correlation `R = (1/N) Σ_n d[n] d[n]^H` of the channel vectors.
pub fn correlation(m: &MeasurementSet) -> CorrelationMatrix {
    let p = m.p();
    let n = m.len();
    let mut r = CMat::zeros(p, p);
    for idx in 0..n {
        let d = m.vector_at(idx);
        // rank-1 update, lower triangle implied by hermitize below
        for row in 0..p {
            for col in 0..p {
                r[(row, col)] += d[row] * d[col].conj();
            }
        }
    }
    r.scale_mut(1.0 / n as f64);
    hermitize(&mut r);
    CorrelationMatrix { matrix: r, samples: n, period: m.period(), dim: p }
}

/// Forward spatial smoothing: averages the correlations of all length-`sub_len`
/// sliding windows of the channel vectors. Restores rank `K` for fully
/// correlated path gains once the window count reaches `K`.
pub fn spatial_smooth(m: &MeasurementSet, sub_len: usize) -> Result<CorrelationMatrix> {
    let p = m.p();
    if sub_len < 2 || sub_len > p {
        return Err(Error::Config(format!(
            "smoothing window {sub_len} must lie in [2, {p}]"
        )));
    }
    let windows = p - sub_len + 1;
    let n = m.len();
    let mut r = CMat::zeros(sub_len, sub_len);
    for idx in 0..n {
        let d = m.vector_at(idx);
        for w in 0..windows {
            for row in 0..sub_len {
                for col in 0..sub_len {
                    r[(row, col)] += d[w + row] * d[w + col].conj();
                }
            }
        }
    }
    r.scale_mut(1.0 / (n * windows) as f64);
    hermitize(&mut r);
    Ok(CorrelationMatrix { matrix: r, samples: n, period: m.period(), dim: sub_len })
}

/// Orthonormal basis of the dominant subspace of a correlation matrix.
#[derive(Clone, Debug)]
pub struct SubspaceBasis {
    basis: CMat,
    eigenvalues: Vec<f64>,
    period: f64,
}

impl SubspaceBasis {
    /// Basis matrix, one column per retained direction.
    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    /// All eigenvalues of the correlation, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn period(&self) -> f64 {
        self.period
    }
}

/// Eigenvectors of the `k` largest eigenvalues of `r`.
///
/// Requires strictly more rows than retained directions (the rotation needs a
/// row to spare) and a clear gap between the `k`-th eigenvalue and machine-level
/// noise below it.
pub fn signal_subspace(r: &CorrelationMatrix, k: usize) -> Result<SubspaceBasis> {
    if k == 0 {
        return Err(Error::Config("subspace dimension must be positive".into()));
    }
    if r.dim() <= k {
        return Err(Error::InsufficientChannels { p: r.dim(), k });
    }
    let (vals, vecs) = hermitian_eigen_desc(r.matrix());
    let top = vals[0].max(0.0);
    if top <= 0.0 || vals[k - 1] <= 1e-14 * top {
        return Err(Error::RankDeficientSubspace(format!(
            "eigenvalue {} of {k} is {:.3e} against leading {:.3e}",
            k,
            vals[k - 1],
            top
        )));
    }
    Ok(SubspaceBasis {
        basis: vecs.columns(0, k).into_owned(),
        eigenvalues: vals,
        period: r.period(),
    })
}

/// How the row-block rotation is solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EspritVariant {
    /// Least squares: `Φ = E↓⁺ E↑`.
    Ls,
    /// Total least squares on the stacked blocks, balancing errors in both.
    Tls,
}

/// Recovers delays from a signal-subspace basis.
///
/// The two row blocks of the basis (all rows but the last, all rows but the
/// first) are related by a rotation whose eigenvalues are `e^{-j2πt_k/T}`;
/// delays are read off the eigenvalue phases and returned sorted ascending.
pub fn esprit(subspace: &SubspaceBasis, variant: EspritVariant) -> Result<Vec<f64>> {
    let e = subspace.basis();
    let rows = e.nrows();
    let k = e.ncols();
    if rows < k + 1 {
        return Err(Error::InsufficientChannels { p: rows, k });
    }
    let lower = e.rows(0, rows - 1).into_owned();
    let upper = e.rows(1, rows - 1).into_owned();
    let phi = match variant {
        EspritVariant::Ls => pinv(&lower, 1e-12)? * &upper,
        EspritVariant::Tls => {
            let mut stacked = CMat::zeros(rows - 1, 2 * k);
            stacked.view_mut((0, 0), (rows - 1, k)).copy_from(&lower);
            stacked.view_mut((0, k), (rows - 1, k)).copy_from(&upper);
            // right singular vectors via the Gram matrix: the stacked blocks are
            // wide whenever rows - 1 < 2k, and the null-space directions a thin
            // SVD drops are exactly the ones total least squares reads off
            let mut gram = stacked.adjoint() * &stacked;
            hermitize(&mut gram);
            let (vals, v) = hermitian_eigen_desc(&gram);
            if vals[0] <= 0.0 || vals[k - 1] <= 1e-28 * vals[0] {
                return Err(Error::RankDeficientSubspace(
                    "stacked subspace blocks lose rank".into(),
                ));
            }
            // columns k..2k span the small-singular-value space
            let v12 = v.view((0, k), (k, k)).into_owned();
            let v22 = v.view((k, k), (k, k)).into_owned();
            let v22_inv = crate::linalg::try_inverse(&v22).ok_or_else(|| {
                Error::RankDeficientSubspace("total least squares block not invertible".into())
            })?;
            -(v12 * v22_inv)
        }
    };
    let eig = crate::linalg::eig_values(&phi)?;
    let t = subspace.period();
    let mut delays: Vec<f64> = eig
        .into_iter()
        .map(|lambda| {
            let mut tau = -lambda.arg() * t / TAU;
            if tau < 0.0 {
                tau += t;
            }
            // phases a rounding step below 2π wrap to zero
            if tau >= t {
                tau = 0.0;
            }
            tau
        })
        .collect();
    delays.sort_by(f64::total_cmp);
    Ok(delays)
}

/// Full delay-recovery pipeline on corrected samples: correlation (smoothed to
/// window `k + 1` when the plain correlation is rank deficient), dominant
/// subspace, rotation solve.
pub fn recover_delays(
    d: &MeasurementSet,
    k: usize,
    rank_tol: f64,
    variant: EspritVariant,
) -> Result<Vec<f64>> {
    if d.p() <= k {
        return Err(Error::InsufficientChannels { p: d.p(), k });
    }
    let plain = correlation(d);
    let r = if plain.effective_rank(rank_tol) >= k {
        plain
    } else {
        spatial_smooth(d, k + 1)?
    };
    let subspace = signal_subspace(&r, k)?;
    esprit(&subspace, variant)
}
