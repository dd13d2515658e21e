//! Dense symmetric eigendecomposition helpers and spectral profiles.
//!
//! Everything downstream (Laplacian spectra, generalized eigenvalues with the
//! 0/0 = ∞ convention, PSD-cone projection inside the SDP solver) funnels
//! through the two eigensolver wrappers here so the ascending-order and
//! symmetry conventions live in one place.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Errors from spectral computations.
#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not symmetric: max |M - Mᵀ| entry = {asymmetry:.3e}")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not PSD: smallest eigenvalue = {min_eig:.3e}")]
    NotPsd { min_eig: f64 },
}

/// Ascending eigenvalues of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProfile {
    pub eigenvalues: Vec<f64>,
}

impl SpectralProfile {
    /// The (r+1)-th smallest eigenvalue λ_{r+1} (1-based indexing),
    /// or +∞ when the index runs past the finite spectrum.
    pub fn lambda(&self, one_based: usize) -> f64 {
        assert!(one_based >= 1);
        self.eigenvalues.get(one_based - 1).copied().unwrap_or(f64::INFINITY)
    }
}

/// Eigenvalues of a generalized problem in which zero-diagonal rows contribute
/// the sentinel value ∞ (the 0/0 = ∞ convention). Sentinels are excluded
/// from finite indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedSpectrum {
    /// Finite eigenvalues, ascending.
    pub finite: Vec<f64>,
    /// Number of ∞-sentinel eigenvalues (zero-diagonal rows).
    pub infinite_count: usize,
}

impl GeneralizedSpectrum {
    /// λ_{one_based} over the finite part; +∞ past its end (the sentinels).
    pub fn lambda(&self, one_based: usize) -> f64 {
        assert!(one_based >= 1);
        self.finite.get(one_based - 1).copied().unwrap_or(f64::INFINITY)
    }
}

const SYMMETRY_TOL: f64 = 1e-9;

fn check_symmetric(m: &DMatrix<f64>) -> Result<(), LinalgError> {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOL {
        return Err(LinalgError::NotSymmetric { asymmetry: worst });
    }
    Ok(())
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending with
/// matching eigenvector columns. The input is symmetrized to kill roundoff
/// before factoring.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Ascending eigenvalues of a symmetric matrix (checked to tolerance 1e−9).
pub fn spectrum(m: &DMatrix<f64>) -> Result<SpectralProfile, LinalgError> {
    check_symmetric(m)?;
    let (values, _) = symmetric_eigen(m);
    Ok(SpectralProfile { eigenvalues: values })
}

/// Eigenvalues of diag(A)^{-1/2}·A·diag(A)^{-1/2} for PSD A, with
/// zero-diagonal rows recorded as ∞ sentinels.
///
/// A PSD matrix with A_uu = 0 has a zero u-th row, so deleting those
/// rows/columns and normalizing the remainder gives the finite part exactly.
pub fn generalized_spectrum(a: &DMatrix<f64>) -> Result<GeneralizedSpectrum, LinalgError> {
    check_symmetric(a)?;
    let n = a.nrows();
    let psd_tol = 1e-8 * a.norm().max(1.0);
    let min_eig = spectrum(a)?.eigenvalues.first().copied().unwrap_or(0.0);
    if min_eig < -psd_tol {
        return Err(LinalgError::NotPsd { min_eig });
    }
    let keep: Vec<usize> = (0..n).filter(|&i| a[(i, i)] > 0.0).collect();
    let infinite_count = n - keep.len();
    if keep.is_empty() {
        return Ok(GeneralizedSpectrum { finite: Vec::new(), infinite_count });
    }
    let scale: Vec<f64> = keep.iter().map(|&i| 1.0 / a[(i, i)].sqrt()).collect();
    let reduced = DMatrix::from_fn(keep.len(), keep.len(), |r, c| {
        a[(keep[r], keep[c])] * scale[r] * scale[c]
    });
    let (finite, _) = symmetric_eigen(&reduced);
    Ok(GeneralizedSpectrum { finite, infinite_count })
}

/// Projects a symmetric matrix onto the PSD cone by clipping negative
/// eigenvalues at zero. Returns the projection and the most negative
/// eigenvalue of the input (0 if already PSD).
pub fn project_psd(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let (values, vectors) = symmetric_eigen(m);
    let min_eig = values.first().copied().unwrap_or(0.0).min(0.0);
    if min_eig >= 0.0 {
        return (m.clone(), 0.0);
    }
    let clipped = DVector::from_iterator(values.len(), values.iter().map(|&v| v.max(0.0)));
    let scaled = {
        let mut s = vectors.clone();
        for (c, &v) in clipped.iter().enumerate() {
            s.column_mut(c).scale_mut(v);
        }
        s
    };
    let proj = &scaled * vectors.transpose();
    ((&proj + proj.transpose()) * 0.5, min_eig)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetric_eigen(m).0.first().copied().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_spectrum() {
        let s = spectrum(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn zero_spectrum() {
        let s = spectrum(&DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(s.eigenvalues, vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(spectrum(&m), Err(LinalgError::NotSymmetric { .. })));
    }

    #[test]
    fn lambda_indexing_is_one_based_with_infinity_past_end() {
        let s = SpectralProfile { eigenvalues: vec![0.0, 1.5] };
        assert_eq!(s.lambda(1), 0.0);
        assert_eq!(s.lambda(2), 1.5);
        assert_eq!(s.lambda(3), f64::INFINITY);
    }

    #[test]
    fn generalized_diagonal_normalizes_to_identity() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        let g = generalized_spectrum(&a).unwrap();
        assert_eq!(g.infinite_count, 0);
        for v in &g.finite {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn generalized_laplacian_matches_normalized_laplacian() {
        let g = crate::graph::cycle(4);
        let gen = generalized_spectrum(&g.laplacian()).unwrap();
        let norm = spectrum(&g.normalized_laplacian()).unwrap();
        for (a, b) in gen.finite.iter().zip(&norm.eigenvalues) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
        }
    }

    #[test]
    fn generalized_zero_diagonal_is_sentinel() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let g = generalized_spectrum(&a).unwrap();
        assert_eq!(g.finite, vec![1.0]);
        assert_eq!(g.infinite_count, 1);
        assert_eq!(g.lambda(2), f64::INFINITY);
    }

    #[test]
    fn generalized_rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(generalized_spectrum(&a), Err(LinalgError::NotPsd { .. })));
    }

    #[test]
    fn psd_projection_clips_negative_part() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let (p, min_eig) = project_psd(&m);
        assert_abs_diff_eq!(min_eig, -1.0, epsilon = 1e-12);
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert_abs_diff_eq!(p, expected, epsilon = 1e-10);
        let (already, zero) = project_psd(&DMatrix::identity(3, 3));
        assert_eq!(zero, 0.0);
        assert_abs_diff_eq!(already, DMatrix::identity(3, 3), epsilon = 1e-12);
    }

    #[test]
    fn eigen_reconstruction() {
        let g = crate::graph::petersen();
        let l = g.laplacian();
        let (values, vectors) = symmetric_eigen(&l);
        let d = DMatrix::from_diagonal(&DVector::from_vec(values));
        let rebuilt = &vectors * d * vectors.transpose();
        assert_abs_diff_eq!(rebuilt, l, epsilon = 1e-8);
    }
}
