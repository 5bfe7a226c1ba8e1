//! Sparse CSR matrices, diagonal mass matrices, and a conjugate-gradient solver.
//!
//! The CSR storage is kept in canonical form: within every row the column
//! indices are strictly increasing, duplicate entries are summed on
//! construction, and entries that are exactly zero after summation are
//! dropped.  Canonical form makes matrix equality structural, which the
//! exact-sequence tests rely on.

use crate::error::{Error, Result};

/// Sparse matrix in compressed-sparse-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets.  Duplicates are
    /// summed; entries summing to exactly zero are dropped.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<&(usize, usize, f64)> = triplets.iter().collect();
        sorted.sort_by_key(|&&(r, c, _)| (r, c));

        let mut row_offsets = vec![0usize; rows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());

        let mut iter = sorted.into_iter().peekable();
        while let Some(&(r, c, v)) = iter.next() {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) out of bounds");
            let mut sum = v;
            while let Some(&&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    sum += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if sum != 0.0 {
                row_offsets[r + 1] += 1;
                col_indices.push(c);
                values.push(sum);
            }
        }
        for r in 0..rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        SparseMatrix {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// The `n`-by-`n` identity.
    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            rows: n,
            cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// The all-zero matrix of the given shape.
    pub fn zero(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols,
            row_offsets: vec![0; rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Diagonal matrix with the given entries.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self::from_triplets(
            diag.len(),
            diag.len(),
            &diag
                .iter()
                .enumerate()
                .map(|(i, &v)| (i, i, v))
                .collect::<Vec<_>>(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entry accessor; zero for structural zeros.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let lo = self.row_offsets[r];
        let hi = self.row_offsets[r + 1];
        match self.col_indices[lo..hi].binary_search(&c) {
            Ok(pos) => self.values[lo + pos],
            Err(_) => 0.0,
        }
    }

    /// Iterates over `(row, col, value)` of stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.row_offsets[r]..self.row_offsets[r + 1])
                .map(move |p| (r, self.col_indices[p], self.values[p]))
        })
    }

    /// Largest absolute value of any stored entry (0 for the empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Matrix-vector product `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "spmv input",
                expected: self.cols,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// Matrix-vector product into a preallocated buffer.  Callers must pass
    /// correctly sized slices.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in self.row_offsets[r]..self.row_offsets[r + 1] {
                acc += self.values[p] * x[self.col_indices[p]];
            }
            *out = acc;
        }
    }

    /// `y_i = sum_j |a_ij| |x_j|`, the componentwise rounding scale of
    /// [`SparseMatrix::spmv`].  Comparing a product against this bounds how
    /// much of it is cancellation.
    pub fn spmv_abs(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "spmv_abs input",
                expected: self.cols,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.rows];
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in self.row_offsets[r]..self.row_offsets[r + 1] {
                acc += self.values[p].abs() * x[self.col_indices[p]].abs();
            }
            *out = acc;
        }
        Ok(y)
    }

    /// Transposed variant of [`SparseMatrix::spmv_abs`].
    pub fn spmv_transpose_abs(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "spmv_transpose_abs input",
                expected: self.rows,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.cols];
        for (r, &xin) in x.iter().enumerate() {
            let xr = xin.abs();
            if xr == 0.0 {
                continue;
            }
            for p in self.row_offsets[r]..self.row_offsets[r + 1] {
                y[self.col_indices[p]] += self.values[p].abs() * xr;
            }
        }
        Ok(y)
    }

    /// Transposed matrix-vector product `y = A^T x`.
    pub fn spmv_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "transposed spmv input",
                expected: self.rows,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for p in self.row_offsets[r]..self.row_offsets[r + 1] {
                y[self.col_indices[p]] += self.values[p] * xr;
            }
        }
        Ok(y)
    }

    /// Transpose, again in canonical form.
    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let row_offsets = counts.clone();
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut next = counts;
        for r in 0..self.rows {
            for p in self.row_offsets[r]..self.row_offsets[r + 1] {
                let c = self.col_indices[p];
                let slot = next[c];
                next[c] += 1;
                col_indices[slot] = r;
                values[slot] = self.values[p];
            }
        }
        SparseMatrix {
            rows: self.cols,
            cols: self.rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Sparse product `A B`.  Entries cancelling to exactly zero are dropped,
    /// so a product that vanishes identically has no stored entries.
    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                context: "matmul inner dimension",
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut triplets = Vec::new();
        // Dense accumulator per row; fine at the sizes this library targets.
        let mut acc = vec![0.0f64; other.cols];
        let mut touched = Vec::new();
        for r in 0..self.rows {
            touched.clear();
            for p in self.row_offsets[r]..self.row_offsets[r + 1] {
                let k = self.col_indices[p];
                let v = self.values[p];
                for q in other.row_offsets[k]..other.row_offsets[k + 1] {
                    let c = other.col_indices[q];
                    if acc[c] == 0.0 {
                        touched.push(c);
                    }
                    acc[c] += v * other.values[q];
                }
            }
            for &c in &touched {
                if acc[c] != 0.0 {
                    triplets.push((r, c, acc[c]));
                }
                acc[c] = 0.0;
            }
        }
        Ok(SparseMatrix::from_triplets(
            self.rows, other.cols, &triplets,
        ))
    }

    /// Returns `A + beta * B` in canonical form; entries cancelling to exactly
    /// zero are dropped.
    pub fn add_scaled(&self, other: &SparseMatrix, beta: f64) -> Result<SparseMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                context: "add_scaled shape",
                expected: self.rows * self.cols,
                got: other.rows * other.cols,
            });
        }
        let mut triplets: Vec<(usize, usize, f64)> = self.iter().collect();
        triplets.extend(other.iter().map(|(r, c, v)| (r, c, beta * v)));
        Ok(SparseMatrix::from_triplets(self.rows, self.cols, &triplets))
    }

    /// Returns `D_l A D_r` for diagonal scalings given as plain slices; pass
    /// `None` to skip a side.
    pub fn scaled(&self, left: Option<&[f64]>, right: Option<&[f64]>) -> SparseMatrix {
        let mut out = self.clone();
        for r in 0..out.rows {
            for p in out.row_offsets[r]..out.row_offsets[r + 1] {
                let mut v = out.values[p];
                if let Some(l) = left {
                    v *= l[r];
                }
                if let Some(rt) = right {
                    v *= rt[out.col_indices[p]];
                }
                out.values[p] = v;
            }
        }
        out
    }

    /// Dense copy, for the dense eigensolver oracle paths.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }
}

/// Positive diagonal weight defining a weighted inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalWeight {
    entries: Vec<f64>,
}

impl DiagonalWeight {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = entries.iter().find(|&&w| w <= 0.0 || !w.is_finite()) {
            return Err(Error::InvalidMaterial(format!(
                "weight entries must be positive and finite, got {bad}"
            )));
        }
        Ok(DiagonalWeight { entries })
    }

    pub fn ones(n: usize) -> Self {
        DiagonalWeight {
            entries: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Weighted inner product `<u, v>_W = sum_i w_i u_i v_i`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.entries.len());
        debug_assert_eq!(v.len(), self.entries.len());
        self.entries
            .iter()
            .zip(u.iter().zip(v.iter()))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    /// Weighted norm.
    pub fn norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }

    /// Componentwise `W u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.entries.iter().zip(u).map(|(w, x)| w * x).collect()
    }

    /// Componentwise `W^{-1} u`.
    pub fn apply_inv(&self, u: &[f64]) -> Vec<f64> {
        self.entries.iter().zip(u).map(|(w, x)| x / w).collect()
    }
}

/// Solution of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `|b - A x| / |b|`.
    pub residual: f64,
}

/// Conjugate gradients for a symmetric positive semi-definite operator given
/// as a closure.  Starts from zero, so for a consistent singular system the
/// iterates stay in the range of the operator and converge to the
/// minimum-norm solution.  Convergence is `|r| <= rtol * |b|`.
pub fn cg_solve<F>(apply: F, b: &[f64], rtol: f64, maxit: usize) -> Result<CgSolution>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    cg_solve_floored(apply, b, rtol, 0.0, maxit)
}

/// [`cg_solve`] with an absolute convergence floor: `|r| <= max(rtol |b|, atol)`.
///
/// For a singular system whose right-hand side is pure cancellation noise the
/// noise is partly inconsistent (outside the operator range) and plain CG
/// diverges once the consistent part is exhausted.  Callers that can bound the
/// rounding scale of `b` pass it as `atol`, so such systems return the zero
/// solution immediately instead.
pub fn cg_solve_floored<F>(
    apply: F,
    b: &[f64],
    rtol: f64,
    atol: f64,
    maxit: usize,
) -> Result<CgSolution>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rsq = dot(&r, &r);
    let target = (rtol * bnorm).max(atol);

    for it in 0..maxit {
        if rsq.sqrt() <= target {
            return Ok(CgSolution {
                x,
                iterations: it,
                residual: rsq.sqrt() / bnorm,
            });
        }
        let ap = apply(&p);
        if ap.len() != n {
            return Err(Error::DimensionMismatch {
                context: "cg operator output",
                expected: n,
                got: ap.len(),
            });
        }
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            // Numerically zero curvature: the remaining residual lives in the
            // operator kernel, which cannot happen for a consistent system.
            return Err(Error::CgNoConvergence {
                iterations: it,
                residual: rsq.sqrt() / bnorm,
            });
        }
        let alpha = rsq / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rsq_new = dot(&r, &r);
        let beta = rsq_new / rsq;
        rsq = rsq_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    if rsq.sqrt() <= target {
        Ok(CgSolution {
            x,
            iterations: maxit,
            residual: rsq.sqrt() / bnorm,
        })
    } else {
        Err(Error::CgNoConvergence {
            iterations: maxit,
            residual: rsq.sqrt() / bnorm,
        })
    }
}

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn triplets_sum_and_canonicalize() {
        let a = SparseMatrix::from_triplets(
            2,
            3,
            &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 0.5), (1, 1, -3.0)],
        );
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 0), 2.0);
        assert_eq!(a.get(0, 2), 1.5);
        assert_eq!(a.get(1, 1), -3.0);
        assert_eq!(a.get(1, 0), 0.0);
        // Canonical: columns strictly increasing within each row.
        let entries: Vec<_> = a.iter().collect();
        assert_eq!(entries, vec![(0, 0, 2.0), (0, 2, 1.5), (1, 1, -3.0)]);
    }

    #[test]
    fn exact_cancellation_is_dropped() {
        let a = SparseMatrix::from_triplets(1, 1, &[(0, 0, 1.0), (0, 0, -1.0)]);
        assert_eq!(a.nnz(), 0);
        assert_eq!(a.max_abs(), 0.0);
    }

    #[test]
    fn spmv_identity_and_shape_errors() {
        let a = SparseMatrix::identity(3);
        let x = vec![1.0, -2.0, 3.0];
        assert_eq!(a.spmv(&x).unwrap(), x);
        assert!(matches!(
            a.spmv(&[1.0]).unwrap_err(),
            Error::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn matmul_small_known_product() {
        // [[1,2],[0,3]] * [[4],[5]] = [[14],[15]]
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0)]);
        let b = SparseMatrix::from_triplets(2, 1, &[(0, 0, 4.0), (1, 0, 5.0)]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.get(0, 0), 14.0);
        assert_eq!(c.get(1, 0), 15.0);
    }

    #[test]
    fn add_scaled_cancels_exactly() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.5), (1, 1, -0.25)]);
        let sum = a.add_scaled(&a, 1.0).unwrap();
        assert_eq!(sum.get(0, 0), 3.0);
        let diff = a.add_scaled(&a, -1.0).unwrap();
        assert_eq!(diff.nnz(), 0);
        assert!(a.add_scaled(&SparseMatrix::zero(3, 2), 1.0).is_err());
    }

    #[test]
    fn abs_products_bound_cancellation() {
        // Row (1, -1) applied to (3, 3) cancels to 0; the abs product sees 6.
        let a = SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, -1.0)]);
        assert_eq!(a.spmv(&[3.0, 3.0]).unwrap(), vec![0.0]);
        assert_eq!(a.spmv_abs(&[3.0, 3.0]).unwrap(), vec![6.0]);
        assert_eq!(a.spmv_transpose_abs(&[-2.0]).unwrap(), vec![2.0, 2.0]);
        assert!(a.spmv_abs(&[1.0]).is_err());
        assert!(a.spmv_transpose_abs(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn cg_floor_returns_zero_for_noise_rhs() {
        // Singular operator diag(1, 0) with an inconsistent rhs below the
        // floor: the solve stops immediately at the zero solution.
        let apply = |v: &[f64]| vec![v[0], 0.0];
        let sol = cg_solve_floored(apply, &[1e-16, 1e-16], 1e-14, 1e-12, 100).unwrap();
        assert_eq!(sol.x, vec![0.0, 0.0]);
        assert_eq!(sol.iterations, 0);
        // Without the floor the kernel component is fatal.
        assert!(cg_solve(apply, &[1e-16, 1e-16], 1e-14, 100).is_err());
    }

    #[test]
    fn weight_rejects_nonpositive_entries() {
        assert!(DiagonalWeight::new(vec![1.0, 0.0]).is_err());
        assert!(DiagonalWeight::new(vec![1.0, -2.0]).is_err());
        assert!(DiagonalWeight::new(vec![1.0, f64::NAN]).is_err());
        assert!(DiagonalWeight::new(vec![0.5, 2.0]).is_ok());
    }

    #[test]
    fn cg_solves_scaled_identity() {
        // 2I x = (4, 6) -> x = (2, 3)
        let apply = |v: &[f64]| v.iter().map(|x| 2.0 * x).collect::<Vec<_>>();
        let sol = cg_solve(apply, &[4.0, 6.0], 1e-12, 10).unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-12);
        assert!((sol.x[1] - 3.0).abs() < 1e-12);
        assert!(sol.iterations <= 2);
    }

    #[test]
    fn cg_zero_rhs_returns_zero() {
        let apply = |v: &[f64]| v.to_vec();
        let sol = cg_solve(apply, &[0.0, 0.0, 0.0], 1e-12, 5).unwrap();
        assert_eq!(sol.x, vec![0.0; 3]);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn cg_reports_nonconvergence_with_residual() {
        // Badly scaled diagonal system, absurdly few iterations allowed.
        let diag = [1.0, 1e6, 3e7, 4.5, 900.0, 1e-3];
        let apply = |v: &[f64]| {
            v.iter()
                .zip(diag.iter())
                .map(|(x, d)| d * x)
                .collect::<Vec<_>>()
        };
        let b = vec![1.0; 6];
        let err = cg_solve(apply, &b, 1e-14, 2).unwrap_err();
        match err {
            Error::CgNoConvergence {
                iterations,
                residual,
            } => {
                assert_eq!(iterations, 2);
                assert!(residual > 0.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn cg_consistent_singular_system() {
        // Projection operator diag(1, 1, 0); consistent rhs in its range.
        let apply = |v: &[f64]| vec![v[0], v[1], 0.0];
        let sol = cg_solve(apply, &[2.0, -1.0, 0.0], 1e-13, 10).unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-12);
        assert!((sol.x[1] + 1.0).abs() < 1e-12);
        assert_eq!(sol.x[2], 0.0);
    }

    proptest! {
        #[test]
        fn transpose_is_involutive(
            rows in 1usize..8,
            cols in 1usize..8,
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut triplets = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    if rng.random::<f64>() < 0.4 {
                        triplets.push((r, c, rng.random_range(-2.0..2.0)));
                    }
                }
            }
            let a = SparseMatrix::from_triplets(rows, cols, &triplets);
            let att = a.transpose().transpose();
            prop_assert_eq!(a, att);
        }

        #[test]
        fn spmv_transpose_agrees_with_transposed_spmv(
            rows in 1usize..8,
            cols in 1usize..8,
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut triplets = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    if rng.random::<f64>() < 0.5 {
                        triplets.push((r, c, rng.random_range(-2.0..2.0)));
                    }
                }
            }
            let a = SparseMatrix::from_triplets(rows, cols, &triplets);
            let x: Vec<f64> = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
            let via_method = a.spmv_transpose(&x).unwrap();
            let via_transpose = a.transpose().spmv(&x).unwrap();
            for (u, v) in via_method.iter().zip(&via_transpose) {
                prop_assert!((u - v).abs() <= 1e-12);
            }
        }
    }
}
