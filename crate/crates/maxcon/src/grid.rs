//! Staggered box grids, boundary-condition specifications, and diagonal
//! material fields.
//!
//! Degrees of freedom live on the four staggered families of a box grid:
//! scalars on nodes, tangential vector components on edges, normal fluxes on
//! faces, and densities on cells.  Indices are orientation-major (all
//! x-aligned entities first, then y, then z) and x-fastest within each
//! family.

use crate::error::{Error, Result};
use std::path::Path;

/// Axis-aligned box `[0, L_x] x [0, L_y] x [0, L_z]` split into
/// `n_x * n_y * n_z` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid3 {
    n: [usize; 3],
    lengths: [f64; 3],
}

impl Grid3 {
    pub fn new(n: [usize; 3], lengths: [f64; 3]) -> Result<Self> {
        if n.iter().any(|&m| m < 2) {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 cells per axis, got {n:?}"
            )));
        }
        if lengths.iter().any(|&l| l <= 0.0 || !l.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "box lengths must be positive and finite, got {lengths:?}"
            )));
        }
        Ok(Grid3 { n, lengths })
    }

    /// Unit cube with `n` cells per axis.
    pub fn unit_cube(n: usize) -> Result<Self> {
        Grid3::new([n, n, n], [1.0, 1.0, 1.0])
    }

    pub fn n(&self) -> [usize; 3] {
        self.n
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    pub fn spacing(&self) -> [f64; 3] {
        [
            self.lengths[0] / self.n[0] as f64,
            self.lengths[1] / self.n[1] as f64,
            self.lengths[2] / self.n[2] as f64,
        ]
    }

    pub fn diameter(&self) -> f64 {
        self.lengths.iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    pub fn node_count(&self) -> usize {
        (self.n[0] + 1) * (self.n[1] + 1) * (self.n[2] + 1)
    }

    /// Number of edges aligned with `axis`.
    pub fn edge_count_along(&self, axis: usize) -> usize {
        let [a, b] = others(axis);
        self.n[axis] * (self.n[a] + 1) * (self.n[b] + 1)
    }

    pub fn edge_count(&self) -> usize {
        (0..3).map(|a| self.edge_count_along(a)).sum()
    }

    /// Number of faces with normal `axis`.
    pub fn face_count_normal(&self, axis: usize) -> usize {
        let [a, b] = others(axis);
        (self.n[axis] + 1) * self.n[a] * self.n[b]
    }

    pub fn face_count(&self) -> usize {
        (0..3).map(|a| self.face_count_normal(a)).sum()
    }

    pub fn cell_count(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn node_index(&self, p: [usize; 3]) -> usize {
        p[0] + p[1] * (self.n[0] + 1) + p[2] * (self.n[0] + 1) * (self.n[1] + 1)
    }

    /// Index of the edge aligned with `axis` whose lowest corner is `p`
    /// (`p[axis]` is a cell index, the others are node indices).
    pub fn edge_index(&self, axis: usize, p: [usize; 3]) -> usize {
        let offset: usize = (0..axis).map(|a| self.edge_count_along(a)).sum();
        let dims = self.edge_dims(axis);
        offset + p[0] + p[1] * dims[0] + p[2] * dims[0] * dims[1]
    }

    /// Extents of the edge family along `axis` in index space.
    pub fn edge_dims(&self, axis: usize) -> [usize; 3] {
        let mut d = [self.n[0] + 1, self.n[1] + 1, self.n[2] + 1];
        d[axis] = self.n[axis];
        d
    }

    /// Index of the face with normal `axis` whose lowest corner is `p`
    /// (`p[axis]` is a plane/node index, the others are cell indices).
    pub fn face_index(&self, axis: usize, p: [usize; 3]) -> usize {
        let offset: usize = (0..axis).map(|a| self.face_count_normal(a)).sum();
        let dims = self.face_dims(axis);
        offset + p[0] + p[1] * dims[0] + p[2] * dims[0] * dims[1]
    }

    /// Extents of the face family with normal `axis` in index space.
    pub fn face_dims(&self, axis: usize) -> [usize; 3] {
        let mut d = self.n;
        d[axis] = self.n[axis] + 1;
        d
    }

    pub fn cell_index(&self, p: [usize; 3]) -> usize {
        p[0] + p[1] * self.n[0] + p[2] * self.n[0] * self.n[1]
    }

    /// Lumped 1D mass of a node line position: half spacing at the two box
    /// ends, full spacing inside.
    pub fn node_mass_1d(&self, axis: usize, i: usize) -> f64 {
        let h = self.lengths[axis] / self.n[axis] as f64;
        if i == 0 || i == self.n[axis] {
            0.5 * h
        } else {
            h
        }
    }

    /// Control volume of a node: product of the 1D lumped masses.
    pub fn node_volume(&self, p: [usize; 3]) -> f64 {
        (0..3).map(|a| self.node_mass_1d(a, p[a])).product()
    }

    /// Control volume of an edge: full spacing along its axis, lumped
    /// transverse masses.
    pub fn edge_volume(&self, axis: usize, p: [usize; 3]) -> f64 {
        let h = self.spacing();
        let [a, b] = others(axis);
        h[axis] * self.node_mass_1d(a, p[a]) * self.node_mass_1d(b, p[b])
    }

    /// Control volume of a face: lumped mass along the normal, full spacings
    /// in the plane.
    pub fn face_volume(&self, axis: usize, p: [usize; 3]) -> f64 {
        let h = self.spacing();
        let [a, b] = others(axis);
        self.node_mass_1d(axis, p[axis]) * h[a] * h[b]
    }

    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        h[0] * h[1] * h[2]
    }

    /// Iterates `[i, j, k]` x-fastest over an index box with the given
    /// extents.
    pub fn iter_box(dims: [usize; 3]) -> impl Iterator<Item = [usize; 3]> {
        (0..dims[2])
            .flat_map(move |k| (0..dims[1]).flat_map(move |j| (0..dims[0]).map(move |i| [i, j, k])))
    }
}

/// The two axes other than `axis`, in cyclic order `(axis+1, axis+2)`.
pub fn others(axis: usize) -> [usize; 2] {
    [(axis + 1) % 3, (axis + 2) % 3]
}

/// Boundary role of one box face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    /// Homogeneous tangential-trace (electric) condition; scalar Dirichlet.
    Tangential,
    /// Homogeneous normal-trace (magnetic) condition; scalar Neumann.
    Normal,
}

/// Per-face boundary assignment, ordered `[x_lo, x_hi, y_lo, y_hi, z_lo, z_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundarySpec {
    faces: [FaceKind; 6],
}

impl BoundarySpec {
    pub fn new(faces: [FaceKind; 6]) -> Self {
        BoundarySpec { faces }
    }

    /// All six faces tangential (scalar Dirichlet everywhere).
    pub fn dirichlet() -> Self {
        BoundarySpec {
            faces: [FaceKind::Tangential; 6],
        }
    }

    /// All six faces normal (scalar Neumann everywhere).
    pub fn neumann() -> Self {
        BoundarySpec {
            faces: [FaceKind::Normal; 6],
        }
    }

    /// Builds the spec with index `bits` in 0..64; bit `f` set means face `f`
    /// is tangential.  Enumerates every mixed assignment.
    pub fn from_bits(bits: u8) -> Self {
        let mut faces = [FaceKind::Normal; 6];
        for (f, face) in faces.iter_mut().enumerate() {
            if bits & (1 << f) != 0 {
                *face = FaceKind::Tangential;
            }
        }
        BoundarySpec { faces }
    }

    pub fn faces(&self) -> [FaceKind; 6] {
        self.faces
    }

    /// Kind of the boundary face of `axis` at the low (`side = 0`) or high
    /// (`side = 1`) end.
    pub fn kind(&self, axis: usize, side: usize) -> FaceKind {
        self.faces[2 * axis + side]
    }

    pub fn is_tangential(&self, axis: usize, side: usize) -> bool {
        self.kind(axis, side) == FaceKind::Tangential
    }

    pub fn all_tangential(&self) -> bool {
        self.faces.iter().all(|&f| f == FaceKind::Tangential)
    }

    pub fn all_normal(&self) -> bool {
        self.faces.iter().all(|&f| f == FaceKind::Normal)
    }

    /// Whether the spec is one of the two unmixed assignments.
    pub fn is_full_boundary(&self) -> bool {
        self.all_tangential() || self.all_normal()
    }

    /// The spec with every face role swapped.
    pub fn flipped(&self) -> Self {
        let mut faces = self.faces;
        for f in faces.iter_mut() {
            *f = match *f {
                FaceKind::Tangential => FaceKind::Normal,
                FaceKind::Normal => FaceKind::Tangential,
            };
        }
        BoundarySpec { faces }
    }

    /// Whether the node at `p` lies on a tangential boundary face.
    pub fn node_removed(&self, grid: &Grid3, p: [usize; 3]) -> bool {
        (0..3).any(|a| {
            (p[a] == 0 && self.is_tangential(a, 0))
                || (p[a] == grid.n()[a] && self.is_tangential(a, 1))
        })
    }

    /// Whether the edge aligned with `axis` at `p` lies in a tangential
    /// boundary face (only the two transverse coordinates can place it there).
    pub fn edge_removed(&self, grid: &Grid3, axis: usize, p: [usize; 3]) -> bool {
        others(axis).into_iter().any(|a| {
            (p[a] == 0 && self.is_tangential(a, 0))
                || (p[a] == grid.n()[a] && self.is_tangential(a, 1))
        })
    }

    /// Whether the face with normal `axis` at `p` lies in a tangential
    /// boundary face (only its plane coordinate can place it there).
    pub fn face_removed(&self, grid: &Grid3, axis: usize, p: [usize; 3]) -> bool {
        (p[axis] == 0 && self.is_tangential(axis, 0))
            || (p[axis] == grid.n()[axis] && self.is_tangential(axis, 1))
    }

    pub fn labels(&self) -> [String; 6] {
        self.faces.map(|f| {
            match f {
                FaceKind::Tangential => "tangential",
                FaceKind::Normal => "normal",
            }
            .to_string()
        })
    }

    pub fn from_labels(labels: &[String]) -> Result<Self> {
        if labels.len() != 6 {
            return Err(Error::InvalidConfig(format!(
                "bc needs 6 face labels, got {}",
                labels.len()
            )));
        }
        let mut faces = [FaceKind::Normal; 6];
        for (f, label) in labels.iter().enumerate() {
            faces[f] = match label.as_str() {
                "tangential" => FaceKind::Tangential,
                "normal" => FaceKind::Normal,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "bc face label must be 'tangential' or 'normal', got '{other}'"
                    )))
                }
            };
        }
        Ok(BoundarySpec { faces })
    }
}

/// Mapping between a full DOF family and the subset kept after boundary
/// removal.
#[derive(Debug, Clone)]
pub struct DofMap {
    full_to_reduced: Vec<Option<usize>>,
    reduced_to_full: Vec<usize>,
}

impl DofMap {
    pub fn from_kept<F: Fn(usize) -> bool>(total: usize, kept: F) -> Self {
        let mut full_to_reduced = vec![None; total];
        let mut reduced_to_full = Vec::new();
        for (i, slot) in full_to_reduced.iter_mut().enumerate() {
            if kept(i) {
                *slot = Some(reduced_to_full.len());
                reduced_to_full.push(i);
            }
        }
        DofMap {
            full_to_reduced,
            reduced_to_full,
        }
    }

    pub fn reduced_dim(&self) -> usize {
        self.reduced_to_full.len()
    }

    pub fn full_dim(&self) -> usize {
        self.full_to_reduced.len()
    }

    pub fn to_reduced(&self, full: usize) -> Option<usize> {
        self.full_to_reduced[full]
    }

    pub fn to_full(&self, reduced: usize) -> usize {
        self.reduced_to_full[reduced]
    }

    pub fn kept(&self) -> &[usize] {
        &self.reduced_to_full
    }
}

/// Cellwise diagonal (3-component) permittivity field.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialField {
    n: [usize; 3],
    eps: Vec<[f64; 3]>,
}

impl MaterialField {
    pub fn from_cells(n: [usize; 3], eps: Vec<[f64; 3]>) -> Result<Self> {
        let cells = n[0] * n[1] * n[2];
        if eps.len() != cells {
            return Err(Error::InvalidMaterial(format!(
                "expected {cells} cell entries, got {}",
                eps.len()
            )));
        }
        if let Some(bad) = eps
            .iter()
            .flat_map(|e| e.iter())
            .find(|&&v| v <= 0.0 || !v.is_finite())
        {
            return Err(Error::InvalidMaterial(format!(
                "permittivity entries must be positive and finite, got {bad}"
            )));
        }
        Ok(MaterialField { n, eps })
    }

    /// Spatially constant scalar permittivity.
    pub fn isotropic(n: [usize; 3], value: f64) -> Result<Self> {
        Self::from_cells(n, vec![[value; 3]; n[0] * n[1] * n[2]])
    }

    /// Spatially constant diagonal permittivity.
    pub fn constant_diagonal(n: [usize; 3], diag: [f64; 3]) -> Result<Self> {
        Self::from_cells(n, vec![diag; n[0] * n[1] * n[2]])
    }

    /// The identity material (vacuum).
    pub fn identity(n: [usize; 3]) -> Self {
        MaterialField {
            n,
            eps: vec![[1.0; 3]; n[0] * n[1] * n[2]],
        }
    }

    /// Loads `i,j,k,eps1,eps2,eps3` rows (one per cell, all cells covered).
    pub fn from_csv(path: &Path, n: [usize; 3]) -> Result<Self> {
        let io_err = |source| Error::Io {
            path: path.display().to_string(),
            source,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => io_err(io),
                other => Error::InvalidMaterial(format!("{other:?}")),
            })?;
        let cells = n[0] * n[1] * n[2];
        let mut eps: Vec<Option<[f64; 3]>> = vec![None; cells];
        for (line, record) in reader.records().enumerate() {
            let record =
                record.map_err(|e| Error::InvalidMaterial(format!("row {}: {e}", line + 1)))?;
            if record.len() != 6 {
                return Err(Error::InvalidMaterial(format!(
                    "row {}: expected 6 fields i,j,k,eps1,eps2,eps3, got {}",
                    line + 1,
                    record.len()
                )));
            }
            let field = |idx: usize| -> Result<f64> {
                record[idx].parse::<f64>().map_err(|_| {
                    Error::InvalidMaterial(format!(
                        "row {}: field {} is not a number: '{}'",
                        line + 1,
                        idx + 1,
                        &record[idx]
                    ))
                })
            };
            let (i, j, k) = (field(0)? as usize, field(1)? as usize, field(2)? as usize);
            if i >= n[0] || j >= n[1] || k >= n[2] {
                return Err(Error::InvalidMaterial(format!(
                    "row {}: cell ({i},{j},{k}) outside grid {n:?}",
                    line + 1
                )));
            }
            let idx = i + j * n[0] + k * n[0] * n[1];
            if eps[idx].is_some() {
                return Err(Error::InvalidMaterial(format!(
                    "row {}: duplicate cell ({i},{j},{k})",
                    line + 1
                )));
            }
            eps[idx] = Some([field(3)?, field(4)?, field(5)?]);
        }
        let eps: Vec<[f64; 3]> = eps
            .into_iter()
            .enumerate()
            .map(|(idx, e)| {
                e.ok_or_else(|| {
                    Error::InvalidMaterial(format!("missing cell at linear index {idx}"))
                })
            })
            .collect::<Result<_>>()?;
        Self::from_cells(n, eps)
    }

    pub fn n(&self) -> [usize; 3] {
        self.n
    }

    pub fn cell(&self, c: [usize; 3]) -> [f64; 3] {
        self.eps[c[0] + c[1] * self.n[0] + c[2] * self.n[0] * self.n[1]]
    }

    pub fn is_identity(&self) -> bool {
        self.eps.iter().all(|e| e.iter().all(|&v| v == 1.0))
    }

    fn extrema(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for e in &self.eps {
            for &v in e {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }

    /// Lower norm-equivalence factor: `|E| / eps_under <= |E|_eps`, with
    /// `eps_under = 1 / sqrt(min eps)`.
    pub fn eps_under(&self) -> f64 {
        1.0 / self.extrema().0.sqrt()
    }

    /// Upper norm-equivalence factor: `|E|_eps <= eps_over * |E|`, with
    /// `eps_over = sqrt(max eps)`.
    pub fn eps_over(&self) -> f64 {
        self.extrema().1.sqrt()
    }

    pub fn eps_hat(&self) -> f64 {
        self.eps_under().max(self.eps_over())
    }

    /// Arithmetic mean of the component matching an edge orientation over the
    /// (up to four) cells sharing the edge.
    pub fn edge_eps(&self, axis: usize, p: [usize; 3]) -> f64 {
        let [a, b] = others(axis);
        let mut sum = 0.0;
        let mut count = 0usize;
        for da in cell_range(p[a], self.n[a]) {
            for db in cell_range(p[b], self.n[b]) {
                let mut c = [0usize; 3];
                c[axis] = p[axis];
                c[a] = da;
                c[b] = db;
                sum += self.cell(c)[axis];
                count += 1;
            }
        }
        sum / count as f64
    }

    /// Arithmetic mean of the component matching a face normal over the (up
    /// to two) cells sharing the face.
    pub fn face_eps(&self, axis: usize, p: [usize; 3]) -> f64 {
        let [a, b] = others(axis);
        let mut sum = 0.0;
        let mut count = 0usize;
        for d in cell_range(p[axis], self.n[axis]) {
            let mut c = [0usize; 3];
            c[axis] = d;
            c[a] = p[a];
            c[b] = p[b];
            sum += self.cell(c)[axis];
            count += 1;
        }
        sum / count as f64
    }
}

/// Cell indices adjacent to node-line position `i` on an axis with `n` cells:
/// `{i-1, i}` clipped to `[0, n)`.
fn cell_range(i: usize, n: usize) -> impl Iterator<Item = usize> {
    let lo = i.saturating_sub(1);
    let hi = if i < n { i } else { n - 1 };
    lo..=hi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entity_counts_on_the_reference_cube() {
        let g = Grid3::unit_cube(2).unwrap();
        assert_eq!(g.node_count(), 27);
        assert_eq!(g.edge_count(), 54);
        assert_eq!(g.face_count(), 36);
        assert_eq!(g.cell_count(), 8);
        assert!((g.diameter() - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_degenerate_input() {
        assert!(Grid3::new([1, 2, 2], [1.0, 1.0, 1.0]).is_err());
        assert!(Grid3::new([2, 2, 2], [0.0, 1.0, 1.0]).is_err());
        assert!(Grid3::new([2, 2, 2], [1.0, -1.0, 1.0]).is_err());
    }

    #[test]
    fn indexers_are_bijective_and_x_fastest() {
        let g = Grid3::new([2, 3, 4], [1.0, 2.0, 3.0]).unwrap();
        // Nodes.
        let mut seen = vec![false; g.node_count()];
        for p in Grid3::iter_box([3, 4, 5]) {
            let idx = g.node_index(p);
            assert!(!seen[idx]);
            seen[idx] = true;
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(g.node_index([1, 0, 0]), 1); // x-fastest
                                                // Edges across the three orientations.
        let mut seen = vec![false; g.edge_count()];
        for axis in 0..3 {
            for p in Grid3::iter_box(g.edge_dims(axis)) {
                let idx = g.edge_index(axis, p);
                assert!(!seen[idx]);
                seen[idx] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        // Faces.
        let mut seen = vec![false; g.face_count()];
        for axis in 0..3 {
            for p in Grid3::iter_box(g.face_dims(axis)) {
                let idx = g.face_index(axis, p);
                assert!(!seen[idx]);
                seen[idx] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn lumped_volumes_partition_the_box() {
        let g = Grid3::new([2, 3, 2], [1.0, 1.5, 2.0]).unwrap();
        let vol = 1.0 * 1.5 * 2.0;
        let node_total: f64 = Grid3::iter_box([3, 4, 3]).map(|p| g.node_volume(p)).sum();
        assert!((node_total - vol).abs() < 1e-12);
        for axis in 0..3 {
            let edge_total: f64 = Grid3::iter_box(g.edge_dims(axis))
                .map(|p| g.edge_volume(axis, p))
                .sum();
            assert!((edge_total - vol).abs() < 1e-12);
            let face_total: f64 = Grid3::iter_box(g.face_dims(axis))
                .map(|p| g.face_volume(axis, p))
                .sum();
            assert!((face_total - vol).abs() < 1e-12);
        }
    }

    #[test]
    fn full_tangential_removal_on_reference_cube() {
        let g = Grid3::unit_cube(2).unwrap();
        let bc = BoundarySpec::dirichlet();
        let nodes_kept = Grid3::iter_box([3, 3, 3])
            .filter(|&p| !bc.node_removed(&g, p))
            .count();
        assert_eq!(nodes_kept, 1); // only the center node
        let edges_kept: usize = (0..3)
            .map(|axis| {
                Grid3::iter_box(g.edge_dims(axis))
                    .filter(|&p| !bc.edge_removed(&g, axis, p))
                    .count()
            })
            .sum();
        assert_eq!(edges_kept, 6);
        let faces_kept: usize = (0..3)
            .map(|axis| {
                Grid3::iter_box(g.face_dims(axis))
                    .filter(|&p| !bc.face_removed(&g, axis, p))
                    .count()
            })
            .sum();
        assert_eq!(faces_kept, 12);
    }

    #[test]
    fn neumann_keeps_everything() {
        let g = Grid3::unit_cube(3).unwrap();
        let bc = BoundarySpec::neumann();
        assert!(Grid3::iter_box([4, 4, 4]).all(|p| !bc.node_removed(&g, p)));
        assert!(bc.all_normal() && !bc.all_tangential() && bc.is_full_boundary());
        assert_eq!(bc.flipped(), BoundarySpec::dirichlet());
    }

    #[test]
    fn two_opposite_tangential_faces_remove_only_x_planes() {
        let g = Grid3::unit_cube(2).unwrap();
        // x_lo and x_hi tangential, rest normal.
        let bc = BoundarySpec::from_bits(0b000011);
        assert!(bc.node_removed(&g, [0, 1, 1]));
        assert!(bc.node_removed(&g, [2, 1, 1]));
        assert!(!bc.node_removed(&g, [1, 0, 0]));
        // x-edges never lie in x = const planes.
        for p in Grid3::iter_box(g.edge_dims(0)) {
            assert!(!bc.edge_removed(&g, 0, p));
        }
        // y-edges at i = 0 do.
        assert!(bc.edge_removed(&g, 1, [0, 0, 1]));
        // x-faces at i = 0 are removed, y-faces never.
        assert!(bc.face_removed(&g, 0, [0, 1, 1]));
        for p in Grid3::iter_box(g.face_dims(1)) {
            assert!(!bc.face_removed(&g, 1, p));
        }
    }

    #[test]
    fn boundary_labels_round_trip() {
        for bits in 0..64u8 {
            let bc = BoundarySpec::from_bits(bits);
            let labels = bc.labels();
            assert_eq!(BoundarySpec::from_labels(&labels).unwrap(), bc);
        }
        assert!(BoundarySpec::from_labels(&["tangential".into()]).is_err());
        assert!(BoundarySpec::from_labels(&vec![String::from("sideways"); 6]).is_err());
    }

    #[test]
    fn material_extrema_follow_the_stated_convention() {
        // eps = 4 * id: under = 1/2, over = 2, hat = 2.
        let m = MaterialField::isotropic([2, 2, 2], 4.0).unwrap();
        assert_eq!(m.eps_under(), 0.5);
        assert_eq!(m.eps_over(), 2.0);
        assert_eq!(m.eps_hat(), 2.0);
        // Mixed range straddling 1.
        let m = MaterialField::constant_diagonal([2, 2, 2], [0.25, 1.0, 4.0]).unwrap();
        assert_eq!(m.eps_under(), 2.0);
        assert_eq!(m.eps_over(), 2.0);
        assert_eq!(m.eps_hat(), 2.0);
    }

    #[test]
    fn material_rejects_nonpositive_entries() {
        assert!(MaterialField::from_cells([2, 2, 2], vec![[1.0, 1.0, 0.0]; 8]).is_err());
        assert!(MaterialField::from_cells([2, 2, 2], vec![[1.0; 3]; 7]).is_err());
    }

    #[test]
    fn edge_averaging_uses_matching_component_of_adjacent_cells() {
        // Two cells along x, eps1 jumps from 2 to 6 across them.
        // from_cells accepts any positive extents; the 2-cell grid minimum
        // applies to Grid3 construction, not to material data.
        let m = MaterialField::from_cells([2, 1, 1], vec![[2.0, 10.0, 10.0], [6.0, 10.0, 10.0]])
            .unwrap();
        // A y-edge at node-line x position 1 touches both cells: mean of eps_2
        // over cells (0,0,0) and (1,0,0) -> 10; an x-edge inside cell 0 sees
        // only eps_1 = 2.
        assert_eq!(m.edge_eps(1, [1, 0, 0]), 10.0);
        assert_eq!(m.edge_eps(0, [0, 0, 0]), 2.0);
        assert_eq!(m.edge_eps(0, [1, 0, 0]), 6.0);
        // Face between the two cells averages the normal component.
        assert_eq!(m.face_eps(0, [1, 0, 0]), 4.0);
        // Boundary face sees a single cell.
        assert_eq!(m.face_eps(0, [0, 0, 0]), 2.0);
    }

    #[test]
    fn interior_edge_averages_four_cells() {
        let n = [2, 2, 2];
        let mut eps = vec![[1.0f64; 3]; 8];
        // Cells around the x-edge at (0, 1, 1): (0, j, k) for j, k in {0, 1}.
        eps[0] = [1.0, 9.0, 9.0]; // (0,0,0)
        eps[2] = [2.0, 9.0, 9.0]; // (0,1,0)
        eps[4] = [3.0, 9.0, 9.0]; // (0,0,1)
        eps[6] = [6.0, 9.0, 9.0]; // (0,1,1)
        let m = MaterialField::from_cells(n, eps).unwrap();
        assert_eq!(m.edge_eps(0, [0, 1, 1]), 3.0);
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eps.csv");
        let mut rows = String::new();
        for k in 0..2 {
            for j in 0..2 {
                for i in 0..2 {
                    let v = 1.0 + (i + 2 * j + 4 * k) as f64;
                    rows.push_str(&format!("{i},{j},{k},{v},{v},{v}\n"));
                }
            }
        }
        std::fs::write(&path, rows).unwrap();
        let m = MaterialField::from_csv(&path, [2, 2, 2]).unwrap();
        assert_eq!(m.cell([0, 0, 0])[0], 1.0);
        assert_eq!(m.cell([1, 1, 1])[2], 8.0);

        // Missing a cell.
        std::fs::write(&path, "0,0,0,1,1,1\n").unwrap();
        assert!(MaterialField::from_csv(&path, [2, 2, 2]).is_err());
        // Duplicate cell.
        let mut rows = String::new();
        for _ in 0..8 {
            rows.push_str("0,0,0,1,1,1\n");
        }
        std::fs::write(&path, rows).unwrap();
        assert!(MaterialField::from_csv(&path, [2, 2, 2]).is_err());
        // Out-of-range index.
        std::fs::write(&path, "5,0,0,1,1,1\n").unwrap();
        assert!(MaterialField::from_csv(&path, [2, 2, 2]).is_err());
        // Nonpositive value.
        std::fs::write(&path, "0,0,0,-1,1,1\n").unwrap();
        assert!(MaterialField::from_csv(&path, [2, 2, 2]).is_err());
        // Unreadable path.
        assert!(MaterialField::from_csv(&dir.path().join("nope.csv"), [2, 2, 2]).is_err());
    }
}
