//! Randomized property suites: weighted-adjoint identities, dual-constant
//! equality against dense references, spectral cross-checks of the block
//! operator, and structural checks of the reduced complex under every
//! boundary assignment.
//!
//! Each suite runs a fixed number of seeded cases and reports its worst
//! deviation; a case that errors counts as a failure of that case.  The
//! suites are deterministic in the base seed.

use crate::dense::{dense_eigh_capped, nonzero_part};
use crate::derham::{build_complex, check_adjointness};
use crate::dual_pair::{
    block_spectrum_check, min_positive_eigenvalue, spectra_match_check, BlockMaxwellOperator,
    DeflationSpec, DualPair, EigenOptions, WeightedSpace,
};
use crate::grid::{BoundarySpec, Grid3, MaterialField};
use crate::sparse::{DiagonalWeight, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cases per randomized suite.
pub const RANDOM_PAIR_CASES: usize = 50;
/// Deviation bound for the adjoint identity.
pub const ADJOINT_TOL: f64 = 1e-12;
/// Relative bound for dual-constant equality (iterative vs. swapped vs. dense).
pub const DUAL_CONSTANT_TOL: f64 = 1e-9;
/// Relative bound for the nonzero-spectra match of the two normal operators.
pub const SPECTRA_MATCH_TOL: f64 = 1e-9;
/// Relative bound for point symmetry of the block spectrum.
pub const BLOCK_SYMMETRY_TOL: f64 = 1e-10;
/// Relative bound for the squared-spectrum match of the block operator.
pub const BLOCK_SQUARED_TOL: f64 = 1e-9;
/// Deviation bound for the complex adjointness sweep.
pub const COMPLEX_ADJOINT_TOL: f64 = 1e-12;

/// Environment variable that, when set, flips the sign of one gradient
/// entry inside the exact-sequence suite.  The deliberate fault proves the
/// suite can fail; it exists for testing the test.
pub const FAULT_ENV_VAR: &str = "MAXCON_SELFTEST_FAULT";

/// Result of one suite.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    /// Label of the worst failing case (seed or boundary bits), if any.
    pub failing_case: Option<String>,
}

impl SuiteOutcome {
    pub fn pass(&self) -> bool {
        self.failing_case.is_none()
    }

    /// One-line report, stable across runs with the same seed.
    pub fn line(&self) -> String {
        match &self.failing_case {
            None => format!(
                "ok   {:<28} cases={:<3} max_deviation={:.3e} tol={:.1e}",
                self.name, self.cases, self.max_deviation, self.tolerance
            ),
            Some(case) => format!(
                "FAIL {:<28} cases={:<3} max_deviation={:.3e} tol={:.1e} at {}",
                self.name, self.cases, self.max_deviation, self.tolerance, case
            ),
        }
    }
}

/// Seeded random pair `A : X -> Y` with positive random weights and full
/// column rank (`rows >= cols`, every column hits its diagonal), so the
/// smallest positive singular value is well defined without deflation.
///
/// Candidates whose weighted normal operator is worse conditioned than 1e6
/// are redrawn (deterministically, from the same stream): a near-singular
/// pair would make any iterative-versus-dense comparison measure solver
/// breakdown rather than the identities under test.
pub fn random_pair(seed: u64, max_dim: usize) -> DualPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..100 {
        let rows = rng.random_range(2..=max_dim);
        let cols = rng.random_range(2..=rows);
        let mut triplets = Vec::new();
        for c in 0..cols {
            triplets.push((c, c, rng.random_range(0.5..2.0)));
        }
        for r in 0..rows {
            for c in 0..cols {
                if r != c && rng.random_range(0.0..1.0) < 0.3 {
                    triplets.push((r, c, rng.random_range(-1.0..1.0)));
                }
            }
        }
        let a = SparseMatrix::from_triplets(rows, cols, &triplets);
        let w_x =
            DiagonalWeight::new((0..cols).map(|_| rng.random_range(0.5..2.0)).collect()).unwrap();
        let w_y =
            DiagonalWeight::new((0..rows).map(|_| rng.random_range(0.5..2.0)).collect()).unwrap();
        let pair = DualPair::new(a, WeightedSpace::new(w_x), WeightedSpace::new(w_y)).unwrap();
        if normal_condition_bounded(&pair, 1e6) {
            return pair;
        }
    }
    unreachable!("well-conditioned random pair within 100 draws");
}

/// Whether `lambda_min > lambda_max / bound` for the dense weighted normal
/// pencil of the pair.
fn normal_condition_bounded(pair: &DualPair, bound: f64) -> bool {
    let s = pair
        .a
        .transpose()
        .matmul(&pair.a.scaled(Some(pair.codomain.weight.entries()), None))
        .expect("shape fixed")
        .to_dense();
    let b = SparseMatrix::from_diagonal(pair.domain.weight.entries()).to_dense();
    match dense_eigh_capped(&s, Some(&b), 200) {
        Ok((vals, _)) => match (vals.first(), vals.last()) {
            (Some(&lo), Some(&hi)) => lo > hi / bound,
            _ => false,
        },
        Err(_) => false,
    }
}

fn case_seed(base: u64, k: usize) -> u64 {
    base.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

struct SuiteTracker {
    name: &'static str,
    cases: usize,
    max_deviation: f64,
    tolerance: f64,
    failing_case: Option<String>,
}

impl SuiteTracker {
    fn new(name: &'static str, tolerance: f64) -> Self {
        SuiteTracker {
            name,
            cases: 0,
            max_deviation: 0.0,
            tolerance,
            failing_case: None,
        }
    }

    fn record(&mut self, label: &str, deviation: f64) {
        self.cases += 1;
        if deviation > self.max_deviation || deviation.is_nan() {
            self.max_deviation = deviation;
            if deviation > self.tolerance || deviation.is_nan() {
                self.failing_case = Some(label.to_string());
            }
        }
    }

    fn record_error(&mut self, label: &str, err: &crate::error::Error) {
        self.cases += 1;
        self.max_deviation = f64::INFINITY;
        self.failing_case = Some(format!("{label}: {err}"));
    }

    fn finish(self) -> SuiteOutcome {
        SuiteOutcome {
            name: self.name,
            cases: self.cases,
            max_deviation: self.max_deviation,
            tolerance: self.tolerance,
            failing_case: self.failing_case,
        }
    }
}

/// `|<A x, y>_Y - <x, A* y>_X|` over random vectors, normalized.
fn adjoint_deviation(pair: &DualPair, rng: &mut ChaCha8Rng) -> f64 {
    let adjoint = pair.adjoint();
    let x: Vec<f64> = (0..pair.domain.dim())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let y: Vec<f64> = (0..pair.codomain.dim())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let ax = pair.a.spmv(&x).expect("shape fixed");
    let asy = adjoint.spmv(&y).expect("shape fixed");
    let lhs = pair.codomain.weight.inner(&ax, &y);
    let rhs = pair.domain.weight.inner(&x, &asy);
    let scale = pair.codomain.weight.norm(&ax) * pair.codomain.weight.norm(&y)
        + pair.domain.weight.norm(&x) * pair.domain.weight.norm(&asy);
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}

/// Smallest positive eigenvalue of the dense pencil `(A^T W_Y A, W_X)`.
fn dense_reference_constant(pair: &DualPair) -> crate::error::Result<f64> {
    let s = pair
        .a
        .transpose()
        .matmul(&pair.a.scaled(Some(pair.codomain.weight.entries()), None))?
        .to_dense();
    let b = SparseMatrix::from_diagonal(pair.domain.weight.entries()).to_dense();
    let (vals, _) = dense_eigh_capped(&s, Some(&b), 200)?;
    let positive = nonzero_part(&vals, 1e-10);
    positive
        .first()
        .map(|v| 1.0 / v.sqrt())
        .ok_or(crate::error::Error::NoPositiveSpectrum)
}

fn negate_first_entry(m: &SparseMatrix) -> SparseMatrix {
    let mut triplets: Vec<(usize, usize, f64)> = m.iter().collect();
    if let Some(first) = triplets.first_mut() {
        first.2 = -first.2;
    }
    SparseMatrix::from_triplets(m.rows(), m.cols(), &triplets)
}

/// Runs every suite with the given base seed and returns their outcomes.
pub fn run_all(seed: u64) -> Vec<SuiteOutcome> {
    let mut outcomes = Vec::new();
    let eig_tol = 1e-10;

    // Adjoint identity on random pairs.
    let mut adjoint = SuiteTracker::new("adjoint_identity", ADJOINT_TOL);
    for k in 0..RANDOM_PAIR_CASES {
        let s = case_seed(seed, k);
        let pair = random_pair(s, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0xA5A5);
        adjoint.record(&format!("seed {s}"), adjoint_deviation(&pair, &mut rng));
    }
    outcomes.push(adjoint.finish());

    // Dual-constant equality: forward vs. swapped vs. dense reference.
    let mut dual = SuiteTracker::new("dual_constant_equality", DUAL_CONSTANT_TOL);
    for k in 0..RANDOM_PAIR_CASES {
        let s = case_seed(seed, k);
        let pair = random_pair(s, 40);
        let opts = EigenOptions::default().with_tol(eig_tol).with_seed(s);
        let label = format!("seed {s}");
        let forward = match min_positive_eigenvalue(&pair, &[], &opts) {
            Ok(r) => r.constant,
            Err(e) => {
                dual.record_error(&label, &e);
                continue;
            }
        };
        // The adjoint direction has the complement of `range(A)` as kernel
        // whenever the pair is strictly tall, so it must be deflated.
        let deflation = [DeflationSpec::KeepRange(pair.a.clone())];
        let swapped = match min_positive_eigenvalue(&pair.swapped(), &deflation, &opts) {
            Ok(r) => r.constant,
            Err(e) => {
                dual.record_error(&label, &e);
                continue;
            }
        };
        let dense = match dense_reference_constant(&pair) {
            Ok(c) => c,
            Err(e) => {
                dual.record_error(&label, &e);
                continue;
            }
        };
        let dev = ((forward - swapped).abs() / dense).max((forward - dense).abs() / dense);
        dual.record(&label, dev);
    }
    outcomes.push(dual.finish());

    // Nonzero spectra of A*A and AA* agree (dense path, dim X + dim Y <= 60).
    let mut spectra = SuiteTracker::new("spectra_match", SPECTRA_MATCH_TOL);
    let mut symmetry = SuiteTracker::new("block_spectrum_symmetry", BLOCK_SYMMETRY_TOL);
    let mut squared = SuiteTracker::new("block_squared_spectrum", BLOCK_SQUARED_TOL);
    for k in 0..RANDOM_PAIR_CASES {
        let s = case_seed(seed, k);
        let pair = random_pair(s, 30);
        let label = format!("seed {s}");
        match spectra_match_check(&pair, 60) {
            Ok(report) => {
                let dev = if report.counts_match {
                    report.max_relative_deviation
                } else {
                    f64::INFINITY
                };
                spectra.record(&label, dev);
            }
            Err(e) => spectra.record_error(&label, &e),
        }
        match block_spectrum_check(&BlockMaxwellOperator::new(pair), 60) {
            Ok(report) => {
                symmetry.record(&label, report.symmetry_deviation);
                let dev = if report.counts_match {
                    report.squared_match_deviation
                } else {
                    f64::INFINITY
                };
                squared.record(&label, dev);
            }
            Err(e) => {
                symmetry.record_error(&label, &e);
                squared.record_error(&label, &e);
            }
        }
    }
    outcomes.push(spectra.finish());
    outcomes.push(symmetry.finish());
    outcomes.push(squared.finish());

    // Structural exact sequence for all 64 boundary assignments on a small
    // box.  With the fault hook one gradient entry changes sign, so the
    // product picks up nonzero entries and the suite must fail.
    let fault = std::env::var_os(FAULT_ENV_VAR).is_some();
    let grid = Grid3::new([2, 2, 2], [1.0, 1.0, 1.0]).unwrap();
    let material = MaterialField::identity(grid.n());
    let mut sequence = SuiteTracker::new("exact_sequence_sweep", 0.0);
    let mut complex_adjoint = SuiteTracker::new("complex_adjointness_sweep", COMPLEX_ADJOINT_TOL);
    for bits in 0u8..64 {
        let bc = BoundarySpec::from_bits(bits);
        let label = format!("boundary bits {bits:#08b}");
        let ops = match build_complex(&grid, &bc, &material) {
            Ok(ops) => ops,
            Err(e) => {
                sequence.record_error(&label, &e);
                complex_adjoint.record_error(&label, &e);
                continue;
            }
        };
        let grad = if fault {
            negate_first_entry(ops.grad())
        } else {
            ops.grad().clone()
        };
        let result = ops
            .curl()
            .matmul(&grad)
            .and_then(|cg| ops.div().matmul(ops.curl()).map(|dc| (cg, dc)));
        match result {
            Ok((curl_grad, div_curl)) => {
                let dev = if curl_grad.nnz() == 0 && div_curl.nnz() == 0 {
                    0.0
                } else {
                    curl_grad.max_abs().max(div_curl.max_abs())
                };
                sequence.record(&label, dev);
            }
            Err(e) => sequence.record_error(&label, &e),
        }
        complex_adjoint.record(
            &label,
            check_adjointness(&ops, 3, case_seed(seed, bits as usize)),
        );
    }
    outcomes.push(sequence.finish());
    outcomes.push(complex_adjoint.finish());

    outcomes
}
