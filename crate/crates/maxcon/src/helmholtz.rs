//! Weighted splitting of tangential edge fields into gradient, rotational,
//! and harmonic parts, and the dimension of the harmonic subspace.
//!
//! The splitting is orthogonal in the permittivity-weighted edge inner
//! product: the gradient part is the projection onto the range of the
//! gradient, the rotational part the projection onto the range of the curl
//! adjoint, and the harmonic remainder is what the exact sequence leaves
//! over.  Both projections reduce to consistent singular conjugate-gradient
//! solves, so no kernel bases are ever formed.

use crate::derham::ComplexOperators;
use crate::error::{Error, Result};
use crate::sparse::{axpy, cg_solve_floored, dot, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Right-hand sides below this fraction of their own cancellation scale are
/// numerically zero: the field has no component in the subspace being
/// projected out, and the corresponding potential is zero.  Without the floor
/// the singular solves would chase inconsistent rounding noise.
pub const CANCELLATION_REL_TOL: f64 = 1e-13;

fn euclid_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Result of the three-way splitting `field = gradient + rotational +
/// harmonic` with the potentials realizing the first two parts.
#[derive(Debug, Clone)]
pub struct HelmholtzParts {
    /// Projection onto gradients of admissible node potentials.
    pub gradient: Vec<f64>,
    /// Projection onto the range of the weighted curl adjoint.
    pub rotational: Vec<f64>,
    /// Remainder; curl-free and weighted-divergence-free.
    pub harmonic: Vec<f64>,
    /// Node potential of the gradient part (mean-free when no tangential
    /// boundary face pins it).
    pub scalar_potential: Vec<f64>,
    /// Face potential of the rotational part.
    pub vector_potential: Vec<f64>,
}

/// Splits an edge field.  `rtol` and `maxit` govern the two inner
/// conjugate-gradient solves.
pub fn decompose(
    ops: &ComplexOperators,
    field: &[f64],
    rtol: f64,
    maxit: usize,
) -> Result<HelmholtzParts> {
    let edge_dim = ops.edge_map.reduced_dim();
    if field.len() != edge_dim {
        return Err(Error::DimensionMismatch {
            context: "helmholtz field",
            expected: edge_dim,
            got: field.len(),
        });
    }
    let grad = ops.grad();
    let curl = ops.curl();
    let w_e = &ops.grad_pair.codomain.weight;
    let w_n = &ops.grad_pair.domain.weight;
    let w_f = &ops.curl_pair.codomain.weight;

    // Gradient part: normal equations of the gradient in the weighted edge
    // product.  The right-hand side is orthogonal to constants when they are
    // in the kernel, so the singular solve is consistent up to rounding; the
    // floor catches fields with no gradient component at all, whose
    // right-hand side is pure cancellation noise.
    let weighted = w_e.apply(field);
    let rhs = grad.spmv_transpose(&weighted)?;
    let atol = CANCELLATION_REL_TOL * euclid_norm(&grad.spmv_transpose_abs(&weighted)?);
    let sol = cg_solve_floored(
        |u| {
            let gu = grad.spmv(u).expect("dimensions fixed");
            grad.spmv_transpose(&w_e.apply(&gu))
                .expect("dimensions fixed")
        },
        &rhs,
        rtol,
        atol,
        maxit,
    )?;
    let mut scalar_potential = sol.x;
    if !ops.bc.faces().contains(&crate::grid::FaceKind::Tangential) {
        // Pin the free constant to the weighted-mean-zero representative.
        let ones = vec![1.0; scalar_potential.len()];
        let mass: f64 = w_n.entries().iter().sum();
        let mean = w_n.inner(&scalar_potential, &ones) / mass;
        for u in scalar_potential.iter_mut() {
            *u -= mean;
        }
    }
    let gradient = grad.spmv(&scalar_potential)?;

    // Rotational part: project onto the range of the curl adjoint
    // `B = W_e^{-1} curl^T W_f` by solving `B^T W_e B z = B^T W_e field`,
    // which simplifies to `(W_f curl) W_e^{-1} (W_f curl)^T z = W_f curl field`.
    let rhs = w_f.apply(&curl.spmv(field)?);
    let atol = CANCELLATION_REL_TOL * euclid_norm(&w_f.apply(&curl.spmv_abs(field)?));
    let sol = cg_solve_floored(
        |z| {
            let bz = w_e.apply_inv(
                &curl
                    .spmv_transpose(&w_f.apply(z))
                    .expect("dimensions fixed"),
            );
            w_f.apply(&curl.spmv(&bz).expect("dimensions fixed"))
        },
        &rhs,
        rtol,
        atol,
        maxit,
    )?;
    let vector_potential = sol.x;
    let rotational = w_e.apply_inv(&curl.spmv_transpose(&w_f.apply(&vector_potential))?);

    let mut harmonic = field.to_vec();
    axpy(-1.0, &gradient, &mut harmonic);
    axpy(-1.0, &rotational, &mut harmonic);

    Ok(HelmholtzParts {
        gradient,
        rotational,
        harmonic,
        scalar_potential,
        vector_potential,
    })
}

/// Normalized pairwise inner products `[<g, r>, <g, h>, <r, h>]` of the three
/// parts in the weighted edge product; all should vanish.  Each product is
/// divided by the squared weighted norm of the reconstructed field rather
/// than by the part norms, so a part that is itself at rounding level (for
/// example the harmonic remainder under boundary conditions without harmonic
/// fields) does not blow the quotient up.
pub fn orthogonality_report(ops: &ComplexOperators, parts: &HelmholtzParts) -> [f64; 3] {
    let w_e = &ops.grad_pair.codomain.weight;
    let mut field = parts.gradient.clone();
    axpy(1.0, &parts.rotational, &mut field);
    axpy(1.0, &parts.harmonic, &mut field);
    let scale_sq = w_e.inner(&field, &field);
    let mut report = [0.0; 3];
    if scale_sq == 0.0 {
        return report;
    }
    let pairs = [
        (&parts.gradient, &parts.rotational),
        (&parts.gradient, &parts.harmonic),
        (&parts.rotational, &parts.harmonic),
    ];
    for (slot, (u, v)) in report.iter_mut().zip(pairs) {
        *slot = w_e.inner(u, v).abs() / scale_sq;
    }
    report
}

/// Eigenvalues of the stacked second-order pencil on edges, ascending.
pub fn stacked_form_eigenvalues(ops: &ComplexOperators, cap: usize) -> Result<Vec<f64>> {
    let stacked = ops.stacked_form()?;
    let mass = SparseMatrix::from_diagonal(ops.grad_pair.codomain.weight.entries());
    let (vals, _) =
        crate::dense::dense_eigh_capped(&stacked.to_dense(), Some(&mass.to_dense()), cap)?;
    Ok(vals)
}

/// Relative threshold separating the numerical kernel of the stacked pencil
/// from its positive spectrum.
pub const NULL_SPACE_REL_TOL: f64 = 1e-10;

/// Dimension of the harmonic subspace: the numerical nullity of the stacked
/// pencil (curl-free fields with vanishing weighted divergence).
pub fn harmonic_dimension(ops: &ComplexOperators, cap: usize) -> Result<usize> {
    let vals = stacked_form_eigenvalues(ops, cap)?;
    let scale = vals.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    if scale == 0.0 {
        return Ok(vals.len());
    }
    Ok(vals
        .iter()
        .filter(|&&v| v <= NULL_SPACE_REL_TOL * scale)
        .count())
}

/// Two-sided data of the field estimate: the weighted norm of the
/// non-harmonic part against the constants-weighted norms of the divergence
/// and rotation data.
#[derive(Debug, Clone, Copy)]
pub struct EstimateReport {
    /// `|field - harmonic|^2` in the weighted edge product.
    pub lhs: f64,
    /// `c_scalar^2 |div_eps field|^2 + c_rot^2 |curl field|^2`.
    pub rhs: f64,
    /// `rhs - lhs`; nonnegative up to solver accuracy.
    pub slack: f64,
    pub divergence_norm_sq: f64,
    pub rotation_norm_sq: f64,
    pub pass: bool,
}

/// Slack tolerance of the estimate check, relative to the larger side.
pub const ESTIMATE_SLACK_REL_TOL: f64 = 1e-9;

/// Checks `|pi field|_eps^2 <= c_scalar^2 |div_eps field|^2 + c_rot^2
/// |curl field|^2` where `pi` removes the harmonic part; `c_scalar` is the
/// scalar constant and `c_rot` the rotation constant with plain-volume
/// codomain.
pub fn maxwell_estimate_check(
    ops: &ComplexOperators,
    field: &[f64],
    c_scalar: f64,
    c_rot: f64,
    rtol: f64,
    maxit: usize,
) -> Result<EstimateReport> {
    let parts = decompose(ops, field, rtol, maxit)?;
    let w_e = &ops.grad_pair.codomain.weight;
    let w_n = &ops.grad_pair.domain.weight;
    let w_f = &ops.curl_pair.codomain.weight;

    let mut projected = field.to_vec();
    axpy(-1.0, &parts.harmonic, &mut projected);
    let lhs = w_e.inner(&projected, &projected);

    // Weighted divergence `W_n^{-1} grad^T W_e field`, measured in the node
    // product.
    let d = w_n.apply_inv(&ops.grad().spmv_transpose(&w_e.apply(field))?);
    let divergence_norm_sq = w_n.inner(&d, &d);
    let r = ops.curl().spmv(field)?;
    let rotation_norm_sq = w_f.inner(&r, &r);

    let rhs = c_scalar * c_scalar * divergence_norm_sq + c_rot * c_rot * rotation_norm_sq;
    let slack = rhs - lhs;
    let pass = slack >= -ESTIMATE_SLACK_REL_TOL * lhs.max(rhs);
    Ok(EstimateReport {
        lhs,
        rhs,
        slack,
        divergence_norm_sq,
        rotation_norm_sq,
        pass,
    })
}

/// Seeded uniform random edge field, the standard probe for decomposition
/// and estimate checks.
pub fn random_edge_field(ops: &ComplexOperators, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..ops.edge_map.reduced_dim())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect()
}
