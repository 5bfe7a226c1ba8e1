//! Assembly of the discrete gradient-curl-divergence complex on a
//! boundary-reduced staggered grid.
//!
//! Nodes carry scalar potentials, edges tangential field components, faces
//! normal fluxes, and cells densities.  A tangential boundary face removes
//! every node, edge, and face lying in it (homogeneous essential conditions);
//! a normal boundary face removes nothing (natural conditions).  On the kept
//! degrees of freedom the difference operators form an exact sequence:
//! `curl . grad` and `div . curl` have no stored entries at all, because the
//! cancelling stencil pairs carry bitwise equal magnitudes and either both or
//! neither survive the boundary reduction.
//!
//! Inner products are lumped: each entity weighs its control volume, edges
//! additionally carry the arithmetic cell average of the matching diagonal
//! permittivity component, and faces in the divergence pair carry the inverse
//! averaged normal component.

use crate::dual_pair::{DualPair, WeightedSpace};
use crate::error::{Error, Result};
use crate::grid::{others, BoundarySpec, DofMap, Grid3, MaterialField};
use crate::sparse::{DiagonalWeight, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The three operators of the reduced complex together with their weighted
/// spaces and index maps.
#[derive(Debug, Clone)]
pub struct ComplexOperators {
    pub grid: Grid3,
    pub bc: BoundarySpec,
    pub material: MaterialField,
    pub node_map: DofMap,
    pub edge_map: DofMap,
    pub face_map: DofMap,
    /// Gradient from weighted nodes to permittivity-weighted edges.
    pub grad_pair: DualPair,
    /// Curl from permittivity-weighted edges to volume-weighted faces; its
    /// kernel hint is the gradient.
    pub curl_pair: DualPair,
    /// Divergence from inverse-permittivity-weighted faces to volume-weighted
    /// cells; its kernel hint is the curl.
    pub div_pair: DualPair,
}

impl ComplexOperators {
    pub fn grad(&self) -> &SparseMatrix {
        &self.grad_pair.a
    }

    pub fn curl(&self) -> &SparseMatrix {
        &self.curl_pair.a
    }

    pub fn div(&self) -> &SparseMatrix {
        &self.div_pair.a
    }

    /// Reduced dimensions `[nodes, edges, faces, cells]`.
    pub fn dims(&self) -> [usize; 4] {
        [
            self.node_map.reduced_dim(),
            self.edge_map.reduced_dim(),
            self.face_map.reduced_dim(),
            self.div_pair.codomain.dim(),
        ]
    }

    /// The curl pair with the inverse-permittivity face weight on the
    /// codomain instead of the plain volume weight.
    pub fn curl_pair_eps_weighted(&self) -> DualPair {
        DualPair {
            a: self.curl_pair.a.clone(),
            domain: self.curl_pair.domain.clone(),
            codomain: self.div_pair.domain.clone(),
            kernel_hint: self.curl_pair.kernel_hint.clone(),
        }
    }

    /// Euclidean-symmetric form of the stacked second-order operator on
    /// edges: `curl^T W_f curl + (W_e grad) W_n^{-1} (W_e grad)^T`.  Its
    /// pencil against the permittivity edge weight carries the squared field
    /// frequencies; its kernel is spanned by the harmonic fields.
    pub fn stacked_form(&self) -> Result<SparseMatrix> {
        let w_f = self.curl_pair.codomain.weight.entries();
        let curl_part = self
            .curl()
            .transpose()
            .matmul(&self.curl().scaled(Some(w_f), None))?;
        let w_e = self.grad_pair.codomain.weight.entries();
        let w_n_inv: Vec<f64> = self
            .grad_pair
            .domain
            .weight
            .entries()
            .iter()
            .map(|w| 1.0 / w)
            .collect();
        let weg = self.grad().scaled(Some(w_e), None);
        let grad_part = weg.scaled(None, Some(&w_n_inv)).matmul(&weg.transpose())?;
        curl_part.add_scaled(&grad_part, 1.0)
    }
}

/// Builds the reduced complex for a grid, boundary assignment, and material.
pub fn build_complex(
    grid: &Grid3,
    bc: &BoundarySpec,
    material: &MaterialField,
) -> Result<ComplexOperators> {
    if material.n() != grid.n() {
        return Err(Error::InvalidMaterial(format!(
            "material extents {:?} do not match grid extents {:?}",
            material.n(),
            grid.n()
        )));
    }
    let h = grid.spacing();

    // Index maps for the kept degrees of freedom.
    let mut node_kept = vec![true; grid.node_count()];
    for p in Grid3::iter_box([grid.n()[0] + 1, grid.n()[1] + 1, grid.n()[2] + 1]) {
        if bc.node_removed(grid, p) {
            node_kept[grid.node_index(p)] = false;
        }
    }
    let node_map = DofMap::from_kept(grid.node_count(), |i| node_kept[i]);

    let mut edge_kept = vec![true; grid.edge_count()];
    for axis in 0..3 {
        for p in Grid3::iter_box(grid.edge_dims(axis)) {
            if bc.edge_removed(grid, axis, p) {
                edge_kept[grid.edge_index(axis, p)] = false;
            }
        }
    }
    let edge_map = DofMap::from_kept(grid.edge_count(), |i| edge_kept[i]);

    let mut face_kept = vec![true; grid.face_count()];
    for axis in 0..3 {
        for p in Grid3::iter_box(grid.face_dims(axis)) {
            if bc.face_removed(grid, axis, p) {
                face_kept[grid.face_index(axis, p)] = false;
            }
        }
    }
    let face_map = DofMap::from_kept(grid.face_count(), |i| face_kept[i]);

    // Gradient: rows are kept edges, columns kept nodes; removed endpoints
    // contribute their homogeneous value.
    let mut triplets = Vec::new();
    for axis in 0..3 {
        let inv_h = 1.0 / h[axis];
        for p in Grid3::iter_box(grid.edge_dims(axis)) {
            let Some(row) = edge_map.to_reduced(grid.edge_index(axis, p)) else {
                continue;
            };
            let mut hi = p;
            hi[axis] += 1;
            for (node, sign) in [(p, -inv_h), (hi, inv_h)] {
                if let Some(col) = node_map.to_reduced(grid.node_index(node)) {
                    triplets.push((row, col, sign));
                }
            }
        }
    }
    let grad =
        SparseMatrix::from_triplets(edge_map.reduced_dim(), node_map.reduced_dim(), &triplets);

    // Curl: for a face with normal `a` and transverse axes `(b, c)` the
    // circulation is `d E_c / d x_b - d E_b / d x_c`.
    let mut triplets = Vec::new();
    for axis in 0..3 {
        let [b, c] = others(axis);
        for p in Grid3::iter_box(grid.face_dims(axis)) {
            let Some(row) = face_map.to_reduced(grid.face_index(axis, p)) else {
                continue;
            };
            let mut pb = p;
            pb[b] += 1;
            let mut pc = p;
            pc[c] += 1;
            let stencil = [
                (c, pb, 1.0 / h[b]),
                (c, p, -1.0 / h[b]),
                (b, pc, -1.0 / h[c]),
                (b, p, 1.0 / h[c]),
            ];
            for (edge_axis, pos, value) in stencil {
                if let Some(col) = edge_map.to_reduced(grid.edge_index(edge_axis, pos)) {
                    triplets.push((row, col, value));
                }
            }
        }
    }
    let curl =
        SparseMatrix::from_triplets(face_map.reduced_dim(), edge_map.reduced_dim(), &triplets);

    // Divergence: net outflux of the six cell faces.
    let mut triplets = Vec::new();
    for p in Grid3::iter_box(grid.n()) {
        let row = grid.cell_index(p);
        for axis in 0..3 {
            let mut hi = p;
            hi[axis] += 1;
            for (pos, sign) in [(p, -1.0 / h[axis]), (hi, 1.0 / h[axis])] {
                if let Some(col) = face_map.to_reduced(grid.face_index(axis, pos)) {
                    triplets.push((row, col, sign));
                }
            }
        }
    }
    let div = SparseMatrix::from_triplets(grid.cell_count(), face_map.reduced_dim(), &triplets);

    // Lumped weights on the kept entities.
    let node_w: Vec<f64> = node_map
        .kept()
        .iter()
        .map(|&i| grid.node_volume(node_position(grid, i)))
        .collect();
    let mut edge_w_eps = Vec::with_capacity(edge_map.reduced_dim());
    for &i in edge_map.kept() {
        let (axis, p) = edge_position(grid, i);
        edge_w_eps.push(grid.edge_volume(axis, p) * material.edge_eps(axis, p));
    }
    let mut face_w = Vec::with_capacity(face_map.reduced_dim());
    let mut face_w_inv_eps = Vec::with_capacity(face_map.reduced_dim());
    for &i in face_map.kept() {
        let (axis, p) = face_position(grid, i);
        let vol = grid.face_volume(axis, p);
        face_w.push(vol);
        face_w_inv_eps.push(vol / material.face_eps(axis, p));
    }
    let cell_w = vec![grid.cell_volume(); grid.cell_count()];

    let node_space = WeightedSpace::new(DiagonalWeight::new(node_w)?);
    let edge_space = WeightedSpace::new(DiagonalWeight::new(edge_w_eps)?);
    let face_space = WeightedSpace::new(DiagonalWeight::new(face_w)?);
    let face_space_inv_eps = WeightedSpace::new(DiagonalWeight::new(face_w_inv_eps)?);
    let cell_space = WeightedSpace::new(DiagonalWeight::new(cell_w)?);

    let grad_pair = DualPair::new(grad.clone(), node_space, edge_space.clone())?;
    let curl_pair = DualPair::new(curl.clone(), edge_space, face_space)?.with_kernel_hint(grad);
    let div_pair = DualPair::new(div, face_space_inv_eps, cell_space)?.with_kernel_hint(curl);

    Ok(ComplexOperators {
        grid: *grid,
        bc: *bc,
        material: material.clone(),
        node_map,
        edge_map,
        face_map,
        grad_pair,
        curl_pair,
        div_pair,
    })
}

/// Position of a node from its linear index.
pub fn node_position(grid: &Grid3, index: usize) -> [usize; 3] {
    let nx = grid.n()[0] + 1;
    let ny = grid.n()[1] + 1;
    [index % nx, (index / nx) % ny, index / (nx * ny)]
}

/// Orientation axis and position of an edge from its linear index.
pub fn edge_position(grid: &Grid3, index: usize) -> (usize, [usize; 3]) {
    let mut rest = index;
    for axis in 0..3 {
        let count = grid.edge_count_along(axis);
        if rest < count {
            let d = grid.edge_dims(axis);
            return (
                axis,
                [rest % d[0], (rest / d[0]) % d[1], rest / (d[0] * d[1])],
            );
        }
        rest -= count;
    }
    panic!("edge index {index} out of range");
}

/// Normal axis and position of a face from its linear index.
pub fn face_position(grid: &Grid3, index: usize) -> (usize, [usize; 3]) {
    let mut rest = index;
    for axis in 0..3 {
        let count = grid.face_count_normal(axis);
        if rest < count {
            let d = grid.face_dims(axis);
            return (
                axis,
                [rest % d[0], (rest / d[0]) % d[1], rest / (d[0] * d[1])],
            );
        }
        rest -= count;
    }
    panic!("face index {index} out of range");
}

/// Entrywise report on the two composed operators of the complex.
#[derive(Debug, Clone, Copy)]
pub struct ExactSequenceReport {
    pub curl_grad_max: f64,
    pub curl_grad_nnz: usize,
    pub div_curl_max: f64,
    pub div_curl_nnz: usize,
}

impl ExactSequenceReport {
    /// Whether both compositions vanish identically (no stored entries).
    pub fn is_exact(&self) -> bool {
        self.curl_grad_nnz == 0 && self.div_curl_nnz == 0
    }
}

/// Forms `curl . grad` and `div . curl` and reports their entries.  Both
/// products cancel entrywise in exact floating point, so the expected report
/// is all zeros.
pub fn check_exact_sequence(ops: &ComplexOperators) -> Result<ExactSequenceReport> {
    let cg = ops.curl().matmul(ops.grad())?;
    let dc = ops.div().matmul(ops.curl())?;
    Ok(ExactSequenceReport {
        curl_grad_max: cg.max_abs(),
        curl_grad_nnz: cg.nnz(),
        div_curl_max: dc.max_abs(),
        div_curl_nnz: dc.nnz(),
    })
}

/// Probes `<A x, y>_Y = <x, A* y>_X` for all three pairs (and the
/// inverse-permittivity curl variant) with seeded random fields; returns the
/// largest deviation relative to the magnitude of the two sides.
pub fn check_adjointness(ops: &ComplexOperators, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = [
        ops.grad_pair.clone(),
        ops.curl_pair.clone(),
        ops.div_pair.clone(),
        ops.curl_pair_eps_weighted(),
    ];
    let mut worst = 0.0f64;
    for pair in &pairs {
        let adj = pair.adjoint();
        for _ in 0..samples {
            let x: Vec<f64> = (0..pair.domain.dim())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let y: Vec<f64> = (0..pair.codomain.dim())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let ax = pair.a.spmv(&x).expect("dimensions fixed");
            let ay = adj.spmv(&y).expect("dimensions fixed");
            let lhs = pair.codomain.weight.inner(&ax, &y);
            let rhs = pair.domain.weight.inner(&x, &ay);
            let scale = pair.codomain.weight.norm(&ax) * pair.codomain.weight.norm(&y)
                + pair.domain.weight.norm(&x) * pair.domain.weight.norm(&ay);
            if scale > 0.0 {
                worst = worst.max((lhs - rhs).abs() / scale);
            }
        }
    }
    worst
}

/// Structural identity of the stacked form under all-tangential conditions
/// with unit material on an equal-spacing grid: the stacked second-order form
/// equals a componentwise 7-point Laplacian, closed with natural differences
/// along each edge's own axis and homogeneous differences transversally, all
/// scaled by the common edge mass.
///
/// Returns the largest entry deviation divided by the edge mass `h^3`, i.e.
/// measured against entries of size `1/h^2`.  With `h = 1/2` every arithmetic
/// step is exact and the deviation is exactly zero; otherwise it sits at
/// rounding level.
pub fn check_vector_laplacian_identity(grid: &Grid3) -> Result<f64> {
    let h = grid.spacing();
    if h[0] != h[1] || h[1] != h[2] {
        return Err(Error::NonUniformSpacing(h));
    }
    let h = h[0];
    let bc = BoundarySpec::dirichlet();
    let material = MaterialField::identity(grid.n());
    let ops = build_complex(grid, &bc, &material)?;
    let stacked = ops.stacked_form()?;

    // Reference stencil in units of the edge mass h^3: integer entries times
    // 1/h^2, assembled independently of the difference operators.
    let mut triplets = Vec::new();
    let inv_h2 = 1.0 / (h * h);
    let n = grid.n();
    for axis in 0..3 {
        let [b, c] = others(axis);
        for p in Grid3::iter_box(grid.edge_dims(axis)) {
            let Some(row) = ops.edge_map.to_reduced(grid.edge_index(axis, p)) else {
                continue;
            };
            // Own axis: natural closure, diagonal counts the interior
            // endpoints.
            let mut diag = 0.0;
            if p[axis] > 0 {
                diag += 1.0;
                let mut q = p;
                q[axis] -= 1;
                let col = ops
                    .edge_map
                    .to_reduced(grid.edge_index(axis, q))
                    .expect("own-axis neighbors share transverse coordinates");
                triplets.push((row, col, -inv_h2));
            }
            if p[axis] + 1 < n[axis] {
                diag += 1.0;
                let mut q = p;
                q[axis] += 1;
                let col = ops
                    .edge_map
                    .to_reduced(grid.edge_index(axis, q))
                    .expect("own-axis neighbors share transverse coordinates");
                triplets.push((row, col, -inv_h2));
            }
            // Transverse axes: homogeneous closure, diagonal always counts 2,
            // neighbors only while they are kept.
            for t in [b, c] {
                diag += 2.0;
                for step in [-1isize, 1] {
                    let q_t = p[t] as isize + step;
                    if q_t < 1 || q_t as usize > n[t] - 1 {
                        continue;
                    }
                    let mut q = p;
                    q[t] = q_t as usize;
                    if let Some(col) = ops.edge_map.to_reduced(grid.edge_index(axis, q)) {
                        triplets.push((row, col, -inv_h2));
                    }
                }
            }
            triplets.push((row, row, diag * inv_h2));
        }
    }
    let edge_mass = grid.cell_volume();
    let dim = ops.edge_map.reduced_dim();
    let reference =
        SparseMatrix::from_triplets(dim, dim, &triplets).scaled(Some(&vec![edge_mass; dim]), None);

    let difference = stacked.add_scaled(&reference, -1.0)?;
    Ok(difference.max_abs() / edge_mass)
}
