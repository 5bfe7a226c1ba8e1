//! Dual operator pairs on weighted spaces and their smallest positive
//! spectrum.
//!
//! A pair consists of a sparse operator `A : X -> Y` between spaces with
//! positive diagonal weights.  The adjoint with respect to the weighted inner
//! products is `A* = W_X^{-1} A^T W_Y`, and the best constant `c_A` in
//! `|x|_X <= c_A |A x|_Y` (over the orthogonal complement of the kernel) is
//! `1 / sqrt(lambda_min+)` where `lambda_min+` is the smallest positive
//! eigenvalue of `A* A`.  The same constant governs the adjoint direction,
//! and the block operator `M(x, y) = (A* y, A x)` has a point-symmetric
//! spectrum whose nonzero squares are exactly the nonzero spectrum of `A* A`.
//!
//! Kernels are never extracted as explicit bases.  Instead, iterates are
//! projected every step: either onto the range of a supplied operator (one
//! conjugate-gradient solve on the normal equations) or off the span of a few
//! explicit vectors.

use crate::dense::{dense_eigh_capped, nonzero_part};
use crate::error::{Error, Result};
use crate::sparse::{axpy, cg_solve, cg_solve_floored, scale, DiagonalWeight, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A finite-dimensional space with a positive diagonal weight (lumped mass).
#[derive(Debug, Clone)]
pub struct WeightedSpace {
    pub weight: DiagonalWeight,
}

impl WeightedSpace {
    pub fn new(weight: DiagonalWeight) -> Self {
        WeightedSpace { weight }
    }

    pub fn euclidean(dim: usize) -> Self {
        WeightedSpace {
            weight: DiagonalWeight::ones(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.weight.dim()
    }
}

/// Operator `A : X -> Y` together with the weighted spaces it acts between.
///
/// `kernel_hint` optionally records an operator whose range spans the
/// non-topological part of `N(A)` (the potential operator of a complex, e.g.
/// the gradient for a curl pair); it is metadata used to build default
/// deflations.
#[derive(Debug, Clone)]
pub struct DualPair {
    pub a: SparseMatrix,
    pub domain: WeightedSpace,
    pub codomain: WeightedSpace,
    pub kernel_hint: Option<SparseMatrix>,
}

impl DualPair {
    pub fn new(a: SparseMatrix, domain: WeightedSpace, codomain: WeightedSpace) -> Result<Self> {
        if a.cols() != domain.dim() {
            return Err(Error::DimensionMismatch {
                context: "dual pair domain",
                expected: a.cols(),
                got: domain.dim(),
            });
        }
        if a.rows() != codomain.dim() {
            return Err(Error::DimensionMismatch {
                context: "dual pair codomain",
                expected: a.rows(),
                got: codomain.dim(),
            });
        }
        Ok(DualPair {
            a,
            domain,
            codomain,
            kernel_hint: None,
        })
    }

    pub fn with_kernel_hint(mut self, hint: SparseMatrix) -> Self {
        self.kernel_hint = Some(hint);
        self
    }

    /// The weighted adjoint `A* = W_X^{-1} A^T W_Y` as an explicit matrix.
    pub fn adjoint(&self) -> SparseMatrix {
        let wx_inv: Vec<f64> = self
            .domain
            .weight
            .entries()
            .iter()
            .map(|w| 1.0 / w)
            .collect();
        self.a
            .transpose()
            .scaled(Some(&wx_inv), Some(self.codomain.weight.entries()))
    }

    /// The pair with `A*` as forward operator (domain and codomain swapped).
    pub fn swapped(&self) -> DualPair {
        DualPair {
            a: self.adjoint(),
            domain: self.codomain.clone(),
            codomain: self.domain.clone(),
            kernel_hint: None,
        }
    }

    /// `A* A v`, self-adjoint in the `X` inner product.
    pub fn apply_normal(&self, v: &[f64]) -> Vec<f64> {
        self.domain.weight.apply_inv(&self.apply_normal_sym(v))
    }

    /// `A^T W_Y A v`, the Euclidean-symmetric form of `A* A`.
    pub fn apply_normal_sym(&self, v: &[f64]) -> Vec<f64> {
        let av = self.a.spmv(v).expect("dimension checked at construction");
        let wav = self.codomain.weight.apply(&av);
        self.a
            .spmv_transpose(&wav)
            .expect("dimension checked at construction")
    }

    /// Rayleigh quotient `|A v|_Y^2 / |v|_X^2`.
    pub fn rayleigh(&self, v: &[f64]) -> f64 {
        let av = self.a.spmv(v).expect("dimension checked at construction");
        let num = self.codomain.weight.inner(&av, &av);
        let den = self.domain.weight.inner(v, v);
        num / den
    }
}

/// One step of kernel deflation, applied as a projection in the domain inner
/// product.
#[derive(Debug, Clone)]
pub enum DeflationSpec {
    /// Project the iterate onto the range of `B` (keep only that subspace).
    KeepRange(SparseMatrix),
    /// Project the range of `B` out of the iterate.
    RemoveRange(SparseMatrix),
    /// Project the span of the given vectors out of the iterate.
    RemoveSpan(Vec<Vec<f64>>),
}

/// Applies the `W`-orthogonal projection onto `range(B)` to `v`, via a
/// conjugate-gradient solve of the normal equations
/// `B^T W B z = B^T W v`; the projection is `B z`.
pub fn range_projector_apply(
    b: &SparseMatrix,
    w: &DiagonalWeight,
    v: &[f64],
    rtol: f64,
    maxit: usize,
) -> Result<Vec<f64>> {
    if v.len() != b.rows() || w.dim() != b.rows() {
        return Err(Error::DimensionMismatch {
            context: "range projector input",
            expected: b.rows(),
            got: v.len(),
        });
    }
    let weighted = w.apply(v);
    let rhs = b.spmv_transpose(&weighted)?;
    // A vector orthogonal to the range leaves only cancellation noise in the
    // right-hand side; the floor maps it to the zero projection instead of
    // feeding the (inconsistent) noise to the singular solve.
    let scale_vec = b.spmv_transpose_abs(&weighted)?;
    let atol = 1e-13 * scale_vec.iter().map(|s| s * s).sum::<f64>().sqrt();
    let apply = |z: &[f64]| {
        let bz = b.spmv(z).expect("shape fixed");
        b.spmv_transpose(&w.apply(&bz)).expect("shape fixed")
    };
    let sol = cg_solve_floored(apply, &rhs, rtol, atol, maxit)?;
    b.spmv(&sol.x)
}

/// Applies every deflation step to `v`, in order, using the `W` inner
/// product for the projections.
pub fn apply_deflation(
    v: &mut Vec<f64>,
    specs: &[DeflationSpec],
    w: &DiagonalWeight,
    rtol: f64,
    maxit: usize,
) -> Result<()> {
    for spec in specs {
        match spec {
            DeflationSpec::KeepRange(b) => {
                *v = range_projector_apply(b, w, v, rtol, maxit)?;
            }
            DeflationSpec::RemoveRange(b) => {
                let p = range_projector_apply(b, w, v, rtol, maxit)?;
                axpy(-1.0, &p, v);
            }
            DeflationSpec::RemoveSpan(vectors) => {
                // W-orthonormalize the span (two modified Gram-Schmidt passes),
                // then subtract the projection.
                let mut basis: Vec<Vec<f64>> = Vec::new();
                for raw in vectors {
                    let mut q = raw.clone();
                    for _ in 0..2 {
                        for e in &basis {
                            let c = w.inner(&q, e);
                            axpy(-c, e, &mut q);
                        }
                    }
                    let n = w.norm(&q);
                    if n > 1e-13 * w.norm(raw).max(1.0) {
                        scale(1.0 / n, &mut q);
                        basis.push(q);
                    }
                }
                for e in &basis {
                    let c = w.inner(v, e);
                    axpy(-c, e, v);
                }
            }
        }
    }
    Ok(())
}

/// Options for the inverse-power eigenvalue iteration.
#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Relative tolerance on the eigenvalue.
    pub tol: f64,
    /// Maximum outer (inverse-power) iterations.
    pub max_outer: usize,
    /// Maximum iterations for each inner conjugate-gradient solve.
    pub cg_maxit: usize,
    /// Seed for the random starting vector.
    pub seed: u64,
}

/// Default seed for all randomized kernels (0xDEADBEEF).
pub const DEFAULT_SEED: u64 = 3_735_928_559;

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-8,
            max_outer: 20_000,
            cg_maxit: 100_000,
            seed: DEFAULT_SEED,
        }
    }
}

impl EigenOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Inner solves run two orders of magnitude tighter than the eigenvalue
    /// tolerance, floored near machine precision.
    fn cg_rtol(&self) -> f64 {
        (self.tol * 0.01).max(1e-14)
    }
}

/// Converged eigenpair of `A* A` together with the associated best constant.
#[derive(Debug, Clone)]
pub struct SpectralResult {
    /// Smallest positive eigenvalue of `A* A` (a squared singular value).
    pub eigenvalue: f64,
    /// X-normalized eigenvector.
    pub eigenvector: Vec<f64>,
    /// `|A* A v - lambda v|_X` at the returned eigenpair.
    pub residual: f64,
    /// Outer iterations used.
    pub iterations: usize,
    /// `1 / sqrt(eigenvalue)`.
    pub constant: f64,
}

/// Smallest positive eigenvalue of `A* A` by inverse power iteration on the
/// deflated complement of the kernel.
///
/// Every outer step solves `A^T W_Y A w = W_X v` by conjugate gradients
/// (consistent because the deflated iterate is orthogonal to the kernel) and
/// re-applies the deflation to suppress rounding drift back into the kernel.
/// Convergence requires both a stationary Rayleigh quotient
/// (`|d lambda| <= tol * lambda + 1e-14`) and a small eigenpair residual.
/// A final Rayleigh-Ritz polish over the last iterates sharpens clustered
/// eigenvalues.
pub fn min_positive_eigenvalue(
    pair: &DualPair,
    deflation: &[DeflationSpec],
    opts: &EigenOptions,
) -> Result<SpectralResult> {
    let n = pair.domain.dim();
    if n == 0 || pair.a.max_abs() == 0.0 {
        return Err(Error::NoPositiveSpectrum);
    }
    let w_x = &pair.domain.weight;
    let cg_rtol = opts.cg_rtol();

    // Random start, rejected if the deflation annihilates it.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v = Vec::new();
    let mut started = false;
    for _ in 0..3 {
        let cand: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pre = w_x.norm(&cand);
        let mut cand = cand;
        apply_deflation(&mut cand, deflation, w_x, cg_rtol, opts.cg_maxit)?;
        if w_x.norm(&cand) > 1e-12 * pre {
            v = cand;
            started = true;
            break;
        }
    }
    if !started {
        return Err(Error::NoPositiveSpectrum);
    }
    normalize(&mut v, w_x);

    let mut lambda_prev = f64::INFINITY;
    let mut last = (0.0, f64::INFINITY); // (lambda, residual)

    for outer in 1..=opts.max_outer {
        // Inverse-power step in the Euclidean-symmetric form.
        let rhs = w_x.apply(&v);
        let sol = cg_solve(|z| pair.apply_normal_sym(z), &rhs, cg_rtol, opts.cg_maxit)?;
        let mut w = sol.x;
        apply_deflation(&mut w, deflation, w_x, cg_rtol, opts.cg_maxit)?;
        let wn = w_x.norm(&w);
        if wn == 0.0 {
            return Err(Error::NoPositiveSpectrum);
        }
        scale(1.0 / wn, &mut w);
        let prev = std::mem::replace(&mut v, w);

        let (lambda, residual) = rayleigh_and_residual(pair, &v);
        last = (lambda, residual);
        let stationary = (lambda - lambda_prev).abs() <= opts.tol * lambda + 1e-14;
        let sharp = residual <= lambda * opts.tol.sqrt() + 1e-14;
        lambda_prev = lambda;
        if stationary && sharp {
            let (lambda, residual, v) = polish(pair, deflation, v, Some(prev), opts, cg_rtol)?;
            return Ok(SpectralResult {
                eigenvalue: lambda,
                constant: 1.0 / lambda.sqrt(),
                eigenvector: v,
                residual,
                iterations: outer,
            });
        }
    }
    Err(Error::EigNoConvergence {
        iterations: opts.max_outer,
        estimate: last.0,
    })
}

/// Best constant `c_A = 1 / sqrt(lambda_min+)` of the pair.
pub fn constant_ca(
    pair: &DualPair,
    deflation: &[DeflationSpec],
    opts: &EigenOptions,
) -> Result<f64> {
    Ok(min_positive_eigenvalue(pair, deflation, opts)?.constant)
}

fn normalize(v: &mut [f64], w: &DiagonalWeight) {
    let n = w.norm(v);
    if n > 0.0 {
        scale(1.0 / n, v);
    }
}

fn rayleigh_and_residual(pair: &DualPair, v: &[f64]) -> (f64, f64) {
    let w_x = &pair.domain.weight;
    let nv = pair.apply_normal(v);
    let vv = w_x.inner(v, v);
    let lambda = w_x.inner(&nv, v) / vv;
    let mut r = nv;
    axpy(-lambda, v, &mut r);
    (lambda, w_x.norm(&r) / vv.sqrt())
}

/// Rayleigh-Ritz on the span of the last iterates and the Krylov direction.
/// All candidates lie in the deflated subspace, so the smallest Ritz value
/// can only move toward (never past) the true minimum.
fn polish(
    pair: &DualPair,
    deflation: &[DeflationSpec],
    v: Vec<f64>,
    v_prev: Option<Vec<f64>>,
    opts: &EigenOptions,
    cg_rtol: f64,
) -> Result<(f64, f64, Vec<f64>)> {
    let w_x = &pair.domain.weight;
    let mut candidates = vec![v.clone()];
    if let Some(p) = v_prev {
        candidates.push(p);
    }
    let mut krylov = pair.apply_normal(&v);
    apply_deflation(&mut krylov, deflation, w_x, cg_rtol, opts.cg_maxit)?;
    candidates.push(krylov);

    // X-orthonormalize, dropping near-dependent directions.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for mut q in candidates {
        for _ in 0..2 {
            for e in &basis {
                let c = w_x.inner(&q, e);
                axpy(-c, e, &mut q);
            }
        }
        let n = w_x.norm(&q);
        if n > 1e-8 {
            scale(1.0 / n, &mut q);
            basis.push(q);
        }
    }

    let m = basis.len();
    let images: Vec<Vec<f64>> = basis
        .iter()
        .map(|b| pair.a.spmv(b).expect("shape fixed"))
        .collect();
    let mut h = nalgebra::DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let hij = pair.codomain.weight.inner(&images[i], &images[j]);
            h[(i, j)] = hij;
            h[(j, i)] = hij;
        }
    }
    let (_vals, vecs) = dense_eigh_capped(&h, None, 16)?;
    let mut best = vec![0.0; pair.domain.dim()];
    for (i, b) in basis.iter().enumerate() {
        axpy(vecs[(i, 0)], b, &mut best);
    }
    apply_deflation(&mut best, deflation, w_x, cg_rtol, opts.cg_maxit)?;
    normalize(&mut best, w_x);
    let (lambda, residual) = rayleigh_and_residual(pair, &best);
    Ok((lambda, residual, best))
}

/// Multiset comparison of the nonzero spectra of `A* A` and `A A*`.
#[derive(Debug, Clone)]
pub struct SpectraMatchReport {
    /// Nonzero spectrum of `A* A`, ascending.
    pub domain_spectrum: Vec<f64>,
    /// Nonzero spectrum of `A A*`, ascending.
    pub codomain_spectrum: Vec<f64>,
    /// Largest pairwise deviation relative to the spectral scale.
    pub max_relative_deviation: f64,
    /// Whether the two multisets have the same cardinality.
    pub counts_match: bool,
}

/// Computes both weighted normal operators densely and compares their
/// nonzero spectra.  Requires `dim X + dim Y` within the dense cap.
pub fn spectra_match_check(pair: &DualPair, cap: usize) -> Result<SpectraMatchReport> {
    let n = pair.domain.dim();
    let m = pair.codomain.dim();
    if n + m > cap {
        return Err(Error::DenseCapExceeded { dim: n + m, cap });
    }
    let wx = pair.domain.weight.entries();
    let wy = pair.codomain.weight.entries();

    // A* A in X: pencil (A^T W_Y A, W_X).
    let s_x = pair
        .a
        .transpose()
        .matmul(&pair.a.scaled(Some(wy), None))?
        .to_dense();
    let b_x = SparseMatrix::from_diagonal(wx).to_dense();
    let (vals_x, _) = dense_eigh_capped(&s_x, Some(&b_x), cap)?;

    // A A* in Y: pencil (W_Y A W_X^{-1} A^T W_Y, W_Y).
    let wx_inv: Vec<f64> = wx.iter().map(|w| 1.0 / w).collect();
    let wya = pair.a.scaled(Some(wy), None);
    let s_y = wya
        .matmul(&wya.transpose().scaled(Some(&wx_inv), None))?
        .to_dense();
    let b_y = SparseMatrix::from_diagonal(wy).to_dense();
    let (vals_y, _) = dense_eigh_capped(&s_y, Some(&b_y), cap)?;

    let zero_tol = 1e-10;
    let nzx = nonzero_part(&vals_x, zero_tol);
    let nzy = nonzero_part(&vals_y, zero_tol);
    let scale = nzx
        .iter()
        .chain(nzy.iter())
        .fold(0.0f64, |a, &v| a.max(v.abs()));
    let max_relative_deviation = if scale == 0.0 {
        0.0
    } else {
        nzx.iter()
            .zip(nzy.iter())
            .map(|(a, b)| (a - b).abs() / scale)
            .fold(0.0, f64::max)
    };
    Ok(SpectraMatchReport {
        counts_match: nzx.len() == nzy.len(),
        domain_spectrum: nzx,
        codomain_spectrum: nzy,
        max_relative_deviation,
    })
}

/// The block operator `M(x, y) = (A* y, A x)` on `X x Y`.
#[derive(Debug, Clone)]
pub struct BlockMaxwellOperator {
    pub pair: DualPair,
}

impl BlockMaxwellOperator {
    pub fn new(pair: DualPair) -> Self {
        BlockMaxwellOperator { pair }
    }

    pub fn dim(&self) -> usize {
        self.pair.domain.dim() + self.pair.codomain.dim()
    }

    /// Applies `M` to a stacked vector `(x, y)`.
    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        let n = self.pair.domain.dim();
        let m = self.pair.codomain.dim();
        if z.len() != n + m {
            return Err(Error::DimensionMismatch {
                context: "block operator input",
                expected: n + m,
                got: z.len(),
            });
        }
        let (x, y) = z.split_at(n);
        let top = self.pair.adjoint().spmv(y)?;
        let bottom = self.pair.a.spmv(x)?;
        Ok(top.into_iter().chain(bottom).collect())
    }
}

/// Spectral sanity report for the block operator.
#[derive(Debug, Clone)]
pub struct BlockSpectrumReport {
    /// Spectrum of `M`, ascending.
    pub spectrum: Vec<f64>,
    /// `max_k |lambda_k + lambda_{n-1-k}|` relative to the spectral scale.
    pub symmetry_deviation: f64,
    /// Worst relative eigenvector residual of `A*A x = lambda^2 x` and
    /// `AA* y = lambda^2 y` over the nonzero eigenpairs.
    pub eigenvector_residual: f64,
    /// Largest deviation between the sorted nonzero squared spectrum of `M`
    /// and the combined nonzero spectra of `A* A` and `A A*`.
    pub squared_match_deviation: f64,
    /// Whether the squared-spectrum multisets have equal cardinality.
    pub counts_match: bool,
}

/// Dense verification that the block spectrum is point symmetric and that
/// its nonzero squares match the normal-operator spectra, eigenvectors
/// included.
pub fn block_spectrum_check(op: &BlockMaxwellOperator, cap: usize) -> Result<BlockSpectrumReport> {
    let pair = &op.pair;
    let n = pair.domain.dim();
    let m = pair.codomain.dim();
    let dim = n + m;
    if dim > cap {
        return Err(Error::DenseCapExceeded { dim, cap });
    }
    let wy = pair.codomain.weight.entries();

    // Euclidean-symmetric form of M: [[0, (W_Y A)^T], [W_Y A, 0]], mass
    // diag(W_X, W_Y).
    let wya = pair.a.scaled(Some(wy), None);
    let mut s = nalgebra::DMatrix::zeros(dim, dim);
    for (r, c, v) in wya.iter() {
        s[(n + r, c)] = v;
        s[(c, n + r)] = v;
    }
    let mut b = nalgebra::DMatrix::zeros(dim, dim);
    for (i, &w) in pair.domain.weight.entries().iter().enumerate() {
        b[(i, i)] = w;
    }
    for (i, &w) in wy.iter().enumerate() {
        b[(n + i, n + i)] = w;
    }
    let (vals, vecs) = dense_eigh_capped(&s, Some(&b), cap)?;

    let scale = vals.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let symmetry_deviation = if scale == 0.0 {
        0.0
    } else {
        (0..dim)
            .map(|k| (vals[k] + vals[dim - 1 - k]).abs() / scale)
            .fold(0.0, f64::max)
    };

    // Eigenvector residuals for nonzero eigenvalues.
    let mut eigenvector_residual = 0.0f64;
    let sq_scale = scale * scale;
    for (k, &lambda) in vals.iter().enumerate() {
        if scale == 0.0 || lambda.abs() <= 1e-10 * scale {
            continue;
        }
        let lambda2 = lambda * lambda;
        let x: Vec<f64> = vecs.column(k).iter().take(n).copied().collect();
        let y: Vec<f64> = vecs.column(k).iter().skip(n).copied().collect();

        let nx = pair.apply_normal(&x);
        let mut rx = nx;
        axpy(-lambda2, &x, &mut rx);
        let xnorm = pair.domain.weight.norm(&x);
        if xnorm > 0.0 {
            eigenvector_residual =
                eigenvector_residual.max(pair.domain.weight.norm(&rx) / (sq_scale * xnorm));
        }

        let swapped = pair.swapped();
        let ny = swapped.apply_normal(&y);
        let mut ry = ny;
        axpy(-lambda2, &y, &mut ry);
        let ynorm = pair.codomain.weight.norm(&y);
        if ynorm > 0.0 {
            eigenvector_residual =
                eigenvector_residual.max(pair.codomain.weight.norm(&ry) / (sq_scale * ynorm));
        }
    }

    // Squared nonzero block spectrum vs. combined normal spectra.
    let mut squares: Vec<f64> = vals
        .iter()
        .filter(|v| scale > 0.0 && v.abs() > 1e-10 * scale)
        .map(|v| v * v)
        .collect();
    squares.sort_by(f64::total_cmp);
    let spectra = spectra_match_check(pair, cap)?;
    let mut combined: Vec<f64> = spectra
        .domain_spectrum
        .iter()
        .chain(spectra.codomain_spectrum.iter())
        .copied()
        .collect();
    combined.sort_by(f64::total_cmp);
    let counts_match = squares.len() == combined.len();
    let squared_match_deviation = if sq_scale == 0.0 {
        0.0
    } else {
        squares
            .iter()
            .zip(combined.iter())
            .map(|(a, b)| (a - b).abs() / sq_scale)
            .fold(0.0, f64::max)
    };

    Ok(BlockSpectrumReport {
        spectrum: vals,
        symmetry_deviation,
        eigenvector_residual,
        squared_match_deviation,
        counts_match,
    })
}
