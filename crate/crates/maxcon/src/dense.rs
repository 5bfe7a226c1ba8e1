//! Dense symmetric (generalized) eigendecomposition used as the oracle path.
//!
//! Iterative solvers in this crate are always checkable against
//! [`dense_eigh`] on problems below the dimension cap.  The generalized
//! problem `A v = lambda B v` with `B` symmetric positive definite is reduced
//! to standard form with a Cholesky factorization `B = L L^T`.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Default dimension cap for dense decompositions.
pub const DENSE_CAP: usize = 2000;

/// Eigenvalues (ascending) and eigenvectors (matching columns) of the
/// symmetric problem `A v = lambda v`, or of `A v = lambda B v` when `b` is
/// given.  Eigenvectors are orthonormal in the `B` inner product (Euclidean
/// when `b` is `None`).
pub fn dense_eigh(a: &DMatrix<f64>, b: Option<&DMatrix<f64>>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    dense_eigh_capped(a, b, DENSE_CAP)
}

/// Same as [`dense_eigh`] with an explicit dimension cap.
pub fn dense_eigh_capped(
    a: &DMatrix<f64>,
    b: Option<&DMatrix<f64>>,
    cap: usize,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "dense_eigh matrix must be square",
            expected: n,
            got: a.ncols(),
        });
    }
    if n > cap {
        return Err(Error::DenseCapExceeded { dim: n, cap });
    }
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }

    let (std_form, back) = match b {
        None => (symmetrize(a.clone()), None),
        Some(b) => {
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::DimensionMismatch {
                    context: "dense_eigh mass matrix shape",
                    expected: n,
                    got: b.nrows().max(b.ncols()),
                });
            }
            let chol = b.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
            let l = chol.l();
            // C = L^{-1} A L^{-T}, computed as L^{-1} (L^{-1} A)^T using the
            // symmetry of A.
            let x = l
                .solve_lower_triangular(a)
                .ok_or(Error::NotPositiveDefinite)?;
            let c = l
                .solve_lower_triangular(&x.transpose())
                .ok_or(Error::NotPositiveDefinite)?;
            (symmetrize(c), Some(l))
        }
    };

    let eig = std_form
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(Error::DenseEigFailed)?;

    // Sort ascending, permuting eigenvector columns along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }

    // Map standard-form eigenvectors back: v = L^{-T} w keeps B-orthonormality.
    let vectors = match back {
        None => vectors,
        Some(l) => l
            .transpose()
            .solve_upper_triangular(&vectors)
            .ok_or(Error::NotPositiveDefinite)?,
    };

    Ok((eigenvalues, vectors))
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let mt = m.transpose();
    (m + mt) * 0.5
}

/// Values of `spectrum` strictly above `rel_tol` times the largest magnitude,
/// in ascending order.  Used to compare nonzero spectra as multisets.
pub fn nonzero_part(spectrum: &[f64], rel_tol: f64) -> Vec<f64> {
    let scale = spectrum.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let mut out: Vec<f64> = spectrum
        .iter()
        .copied()
        .filter(|v| v.abs() > rel_tol * scale)
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn diagonal_matrix_has_its_diagonal_as_spectrum() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let (vals, vecs) = dense_eigh(&a, None).unwrap();
        assert_relative_eq!(vals[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(vals[1], 2.0, max_relative = 1e-12);
        assert_relative_eq!(vals[2], 3.0, max_relative = 1e-12);
        // Residual check: |A v - lambda v| small relative to |A|_F.
        let fro = a.norm();
        for (k, &val) in vals.iter().enumerate() {
            let v = vecs.column(k);
            let r = &a * v - val * v;
            assert!(r.norm() <= 1e-10 * fro);
        }
    }

    #[test]
    fn generalized_problem_is_b_orthonormal() {
        // A = [[2, 1], [1, 3]], B = diag(1, 4).
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0]));
        let (vals, vecs) = dense_eigh(&a, Some(&b)).unwrap();
        assert!(vals[0] <= vals[1]);
        let gram = vecs.transpose() * &b * &vecs;
        assert_relative_eq!(gram[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(gram[(1, 1)], 1.0, epsilon = 1e-12);
        assert!(gram[(0, 1)].abs() < 1e-12);
        // Residuals of the generalized problem.
        for (k, &val) in vals.iter().enumerate() {
            let v = vecs.column(k);
            let r = &a * v - val * (&b * v);
            assert!(r.norm() <= 1e-10 * a.norm());
        }
    }

    #[test]
    fn indefinite_mass_is_rejected() {
        let a = DMatrix::identity(2, 2);
        let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(
            dense_eigh(&a, Some(&b)).unwrap_err(),
            Error::NotPositiveDefinite
        ));
    }

    #[test]
    fn cap_is_enforced() {
        let a = DMatrix::<f64>::identity(5, 5);
        assert!(matches!(
            dense_eigh_capped(&a, None, 4).unwrap_err(),
            Error::DenseCapExceeded { dim: 5, cap: 4 }
        ));
    }

    #[test]
    fn nonzero_part_filters_relative_to_scale() {
        let vals = vec![1e-14, 0.0, 1.0, 4.0];
        assert_eq!(nonzero_part(&vals, 1e-10), vec![1.0, 4.0]);
        assert!(nonzero_part(&[0.0, 0.0], 1e-10).is_empty());
    }
}
