//! Dense numerical kernels: linear solves, symmetric eigendecomposition, and
//! projection onto the positive-semidefinite cone.
//!
//! Matrix storage is `nalgebra`'s `DMatrix<f64>`; the routines here wrap it
//! with the exact tolerance semantics the rest of the solver relies on. The
//! LU factorization is written out by hand so the singularity threshold is
//! pinned (a pivot counts as zero when it is at most `1e-12` times the
//! largest absolute entry of its pivot column); the eigensolver delegates to
//! `nalgebra`'s symmetric tridiagonalization + implicit-shift QL iteration
//! and post-sorts eigenvalues into ascending order.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative pivot threshold below which an LU pivot is declared zero.
pub const LU_PIVOT_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum NumlinError {
    /// A pivot fell below the relative singularity threshold during LU.
    #[error("matrix is singular to working precision (pivot column {col})")]
    SingularMatrix { col: usize },
    /// The eigensolver's implicit-shift iteration failed to converge.
    #[error("symmetric eigendecomposition did not converge")]
    ConvergenceFailure,
    /// Shape mismatch or non-finite input.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Symmetric eigendecomposition with eigenvalues in ascending order.
///
/// `vectors` holds orthonormal eigenvectors as columns, aligned with
/// `values`, so `a ≈ V · diag(values) · Vᵀ`.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEig {
    /// Reconstruct `V · diag(values) · Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.values[j];
        }
        &scaled * self.vectors.transpose()
    }

    /// Largest eigenvalue (values are ascending).
    pub fn lambda_max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Smallest eigenvalue.
    pub fn lambda_min(&self) -> f64 {
        self.values[0]
    }
}

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<(), NumlinError> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(NumlinError::InvalidInput(format!(
            "{what} contains non-finite entries"
        )))
    }
}

/// In-place partial-pivoting LU factorization.
///
/// Returns the permutation as a row-index map `perm` (row `i` of the factored
/// matrix is original row `perm[i]`). The factors overwrite `a` (unit lower
/// triangle below the diagonal, upper triangle on and above).
fn lu_factor(a: &mut DMatrix<f64>) -> Result<Vec<usize>, NumlinError> {
    let n = a.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        // Partial pivoting: pick the largest entry in column k at or below
        // the diagonal; the singularity test is relative to that magnitude's
        // column so nearly-dependent columns are flagged rather than divided
        // through.
        let mut piv_row = k;
        let mut piv_abs = a[(k, k)].abs();
        let mut col_max = piv_abs;
        for i in k + 1..n {
            let v = a[(i, k)].abs();
            if v > piv_abs {
                piv_abs = v;
                piv_row = i;
            }
            if v > col_max {
                col_max = v;
            }
        }
        // Column scale also counts the eliminated part above the diagonal so
        // a column that started large but cancelled to noise is singular.
        for i in 0..k {
            col_max = col_max.max(a[(i, k)].abs());
        }
        if piv_abs <= LU_PIVOT_REL_TOL * col_max.max(1e-300) || piv_abs == 0.0 {
            return Err(NumlinError::SingularMatrix { col: k });
        }
        if piv_row != k {
            a.swap_rows(piv_row, k);
            perm.swap(piv_row, k);
        }
        let pivot = a[(k, k)];
        for i in k + 1..n {
            let factor = a[(i, k)] / pivot;
            a[(i, k)] = factor;
            for j in k + 1..n {
                a[(i, j)] -= factor * a[(k, j)];
            }
        }
    }
    Ok(perm)
}

fn lu_solve_vec(lu: &DMatrix<f64>, perm: &[usize], b: &DVector<f64>) -> DVector<f64> {
    let n = lu.nrows();
    let mut x = DVector::zeros(n);
    // Forward substitution on the permuted right-hand side.
    for i in 0..n {
        let mut s = b[perm[i]];
        for j in 0..i {
            s -= lu[(i, j)] * x[j];
        }
        x[i] = s;
    }
    // Back substitution.
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= lu[(i, j)] * x[j];
        }
        x[i] = s / lu[(i, i)];
    }
    x
}

/// Solve the square dense system `a · x = b` by partial-pivoting LU with one
/// step of iterative refinement.
pub fn solve_linear(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, NumlinError> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(NumlinError::InvalidInput(format!(
            "solve_linear shape mismatch: a is {}x{}, b has {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    check_finite(a, "matrix")?;
    let mut lu = a.clone();
    let perm = lu_factor(&mut lu)?;
    let mut x = lu_solve_vec(&lu, &perm, b);
    // One refinement pass costs O(n²) and buys back most of the accuracy a
    // badly scaled system loses in elimination.
    let r = b - a * &x;
    let dx = lu_solve_vec(&lu, &perm, &r);
    x += dx;
    Ok(x)
}

/// Reusable LU factorization for repeated solves against one matrix.
pub struct LuFactors {
    lu: DMatrix<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn new(a: &DMatrix<f64>) -> Result<Self, NumlinError> {
        if a.nrows() != a.ncols() {
            return Err(NumlinError::InvalidInput("LU of non-square matrix".into()));
        }
        check_finite(a, "matrix")?;
        let mut lu = a.clone();
        let perm = lu_factor(&mut lu)?;
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        lu_solve_vec(&self.lu, &self.perm, b)
    }

    /// Inverse assembled column-by-column; used by the simplex
    /// refactorization where the explicit basis inverse is maintained.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.lu.nrows();
        let mut inv = DMatrix::zeros(n, n);
        let mut e = DVector::zeros(n);
        for j in 0..n {
            e[j] = 1.0;
            let col = lu_solve_vec(&self.lu, &self.perm, &e);
            inv.set_column(j, &col);
            e[j] = 0.0;
        }
        inv
    }
}

/// Symmetric eigendecomposition, eigenvalues ascending.
///
/// The input must be symmetric to within `1e-12 · ‖a‖_F`; it is explicitly
/// symmetrized before factoring so roundoff skew cannot leak into the
/// iteration.
pub fn eig_sym(a: &DMatrix<f64>) -> Result<SymEig, NumlinError> {
    if a.nrows() != a.ncols() {
        return Err(NumlinError::InvalidInput(
            "eig_sym of non-square matrix".into(),
        ));
    }
    check_finite(a, "matrix")?;
    let norm = a.norm();
    let skew = (a - a.transpose()).norm();
    if skew > 1e-12 * norm.max(1.0) {
        return Err(NumlinError::InvalidInput(format!(
            "eig_sym input not symmetric: skew {skew:.3e} vs norm {norm:.3e}"
        )));
    }
    let sym = (a + a.transpose()) * 0.5;
    let n = sym.nrows();
    let eig = sym
        .try_symmetric_eigen(f64::EPSILON, 100 * n.max(8))
        .ok_or(NumlinError::ConvergenceFailure)?;
    // nalgebra does not order eigenvalues; sort ascending and permute the
    // eigenvector columns to match.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .expect("finite eigenvalues")
    });
    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEig { values, vectors })
}

/// Frobenius-nearest projection onto the PSD cone: eigendecompose, clip
/// negative eigenvalues to zero, reconstruct, and re-symmetrize.
pub fn psd_project(a: &DMatrix<f64>) -> Result<DMatrix<f64>, NumlinError> {
    let eig = eig_sym(a)?;
    let n = a.nrows();
    // Skip the reconstruction when nothing is clipped.
    if eig.values[0] >= 0.0 {
        return Ok((a + a.transpose()) * 0.5);
    }
    let mut scaled = DMatrix::zeros(n, n);
    for j in 0..n {
        let lam = eig.values[j];
        if lam > 0.0 {
            let col = eig.vectors.column(j) * lam;
            scaled.set_column(j, &col);
        }
    }
    let proj = &scaled * eig.vectors.transpose();
    Ok((&proj + proj.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::SplitMix64;

    fn random_matrix(rng: &mut SplitMix64, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |_, _| rng.uniform(lo, hi))
    }

    fn random_symmetric(rng: &mut SplitMix64, n: usize) -> DMatrix<f64> {
        let m = random_matrix(rng, n, -1.0, 1.0);
        (&m + m.transpose()) * 0.5
    }

    #[test]
    fn solve_diagonal_system() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let b = DVector::from_vec(vec![2.0, 3.0]);
        let x = solve_linear(&a, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn solve_hilbert4_residual() {
        let n = 4;
        let a = DMatrix::from_fn(n, n, |i, j| 1.0 / ((i + j + 1) as f64));
        let b = DVector::from_fn(n, |i, _| 1.0 + i as f64);
        let x = solve_linear(&a, &b).unwrap();
        let resid = (&a * &x - &b).amax();
        assert!(resid <= 1e-9 * b.amax().max(1.0), "residual {resid:.3e}");
    }

    #[test]
    fn solve_singular_detected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        match solve_linear(&a, &b) {
            Err(NumlinError::SingularMatrix { .. }) => {}
            other => panic!("expected SingularMatrix, got {other:?}"),
        }
    }

    #[test]
    fn solve_residuals_random() {
        let mut rng = SplitMix64::new(0x5eed_0001);
        for trial in 0..100 {
            let n = 2 + (trial % 14);
            let a = random_matrix(&mut rng, n, -5.0, 5.0);
            let b = DVector::from_fn(n, |_, _| rng.uniform(-5.0, 5.0));
            match solve_linear(&a, &b) {
                Ok(x) => {
                    let resid = (&a * &x - &b).amax();
                    assert!(
                        resid <= 1e-9 * b.amax().max(1.0),
                        "trial {trial}: residual {resid:.3e}"
                    );
                }
                Err(NumlinError::SingularMatrix { .. }) => {} // legal for random draws
                Err(e) => panic!("unexpected error {e:?}"),
            }
        }
    }

    #[test]
    fn eig_diagonal_sorted() {
        let a = DMatrix::from_row_slice(3, 3, &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        let eig = eig_sym(&a).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-12);
        assert!((eig.values[1] - 2.0).abs() < 1e-12);
        assert!((eig.values[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eig_reconstruction_and_orthonormality() {
        let mut rng = SplitMix64::new(0x5eed_0002);
        for trial in 0..100 {
            let n = 2 + (trial % 15);
            let a = random_symmetric(&mut rng, n);
            let eig = eig_sym(&a).unwrap();
            let recon_err = (eig.reconstruct() - &a).norm();
            assert!(
                recon_err <= 1e-10 * a.norm().max(1.0),
                "trial {trial}: reconstruction error {recon_err:.3e}"
            );
            let gram = eig.vectors.transpose() * &eig.vectors;
            let orth_err = (&gram - DMatrix::<f64>::identity(n, n)).norm();
            assert!(orth_err <= 1e-10, "trial {trial}: gram error {orth_err:.3e}");
            for j in 1..n {
                assert!(eig.values[j] >= eig.values[j - 1]);
            }
        }
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(eig_sym(&a), Err(NumlinError::InvalidInput(_))));
    }

    #[test]
    fn psd_project_offdiag_example() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let p = psd_project(&a).unwrap();
        for (i, expect) in [0.5, 0.5, 0.5, 0.5].iter().enumerate() {
            assert!((p[(i / 2, i % 2)] - expect).abs() < 1e-12, "entry {i}");
        }
    }

    #[test]
    fn psd_project_properties() {
        let mut rng = SplitMix64::new(0x5eed_0003);
        for trial in 0..100 {
            let n = 2 + (trial % 12);
            let a = random_symmetric(&mut rng, n);
            let p = psd_project(&a).unwrap();
            // Result PSD (up to roundoff) and idempotent.
            let eig = eig_sym(&p).unwrap();
            assert!(
                eig.values[0] >= -1e-9 * a.norm().max(1.0),
                "trial {trial}: λmin {}",
                eig.values[0]
            );
            let pp = psd_project(&p).unwrap();
            assert!((&pp - &p).norm() <= 1e-9 * p.norm().max(1.0), "trial {trial}");
            // Frobenius optimality against sampled PSD competitors built from
            // the projection's own eigenbasis plus random PSD perturbations.
            let z = {
                let g = random_matrix(&mut rng, n, -1.0, 1.0);
                &g * g.transpose()
            };
            let d_proj = (&p - &a).norm();
            let d_z = (&z - &a).norm();
            assert!(
                d_proj <= d_z + 1e-9,
                "trial {trial}: projection not nearest ({d_proj:.3e} vs {d_z:.3e})"
            );
        }
    }

    #[test]
    fn psd_project_fixed_point_on_psd_input() {
        let mut rng = SplitMix64::new(0x5eed_0004);
        let g = random_matrix(&mut rng, 6, -1.0, 1.0);
        let a = &g * g.transpose();
        let p = psd_project(&a).unwrap();
        assert!((&p - &a).norm() <= 1e-9 * a.norm());
    }

    #[test]
    fn lu_factors_inverse() {
        let mut rng = SplitMix64::new(0x5eed_0005);
        let a = random_matrix(&mut rng, 7, -3.0, 3.0);
        let f = LuFactors::new(&a).unwrap();
        let inv = f.inverse();
        let err = (&a * &inv - DMatrix::<f64>::identity(7, 7)).norm();
        assert!(err <= 1e-9, "inverse error {err:.3e}");
    }
}
