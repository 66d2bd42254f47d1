//! Dense vectors and shifted symmetric solves.
//!
//! Everything here is desk scale: dense storage, direct factorizations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense real vector.
pub type Vector = DVector<f64>;

/// Relative tolerance used when checking symmetry of an input matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalues above `-PSD_TOL * ||H||` are accepted as non-negative.
pub const PSD_TOL: f64 = 1e-10;

/// Symmetric dense matrix. Entries are stored in full; construction
/// symmetrizes the input after checking it is symmetric to `SYMMETRY_TOL`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                actual: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidArgument("matrix dimension must be >= 1".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let asym = (&m - m.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::InvalidArgument(format!(
                "matrix is not symmetric (max |H - H^T| = {asym:e})"
            )));
        }
        Ok(SymMatrix((&m + m.transpose()) * 0.5))
    }

    pub fn from_row_slice(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, n, entries))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn scaled_identity(n: usize, alpha: f64) -> Self {
        SymMatrix(DMatrix::identity(n, n) * alpha)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn mul_vec(&self, x: &Vector) -> Vector {
        &self.0 * x
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.0.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// PSD test with the tolerance `PSD_TOL` relative to the spectral radius.
    pub fn is_psd(&self) -> bool {
        let ev = self.eigenvalues();
        let radius = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        ev[0] >= -PSD_TOL * radius
    }
}

/// Solves `(H + mu I) s = b` by Cholesky factorization of the shifted matrix,
/// followed by one step of iterative refinement.
///
/// `H` must be PSD; a non-positive pivot is reported as `NumericalBreakdown`.
pub fn shifted_solve(h: &SymMatrix, mu: f64, b: &Vector) -> Result<Vector> {
    let n = h.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidArgument(format!("shift must be positive, got {mu}")));
    }
    let mut shifted = h.0.clone();
    for i in 0..n {
        shifted[(i, i)] += mu;
    }
    let chol = nalgebra::Cholesky::new(shifted.clone()).ok_or_else(|| {
        Error::NumericalBreakdown("non-positive pivot in Cholesky of H + mu I (H not PSD?)".into())
    })?;
    let mut s = chol.solve(b);
    let r = b - &shifted * &s;
    s += chol.solve(&r);
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalBreakdown("non-finite solution of shifted system".into()));
    }
    Ok(s)
}

/// Estimates the operator 2-norm of a symmetric matrix by power iteration,
/// starting from `(1, ..., 1)/sqrt(n)`.
///
/// If the iterate collapses onto the null space of a nonzero matrix, the
/// iteration restarts from a deterministic perturbed vector.
pub fn operator_norm_estimate(h: &SymMatrix) -> f64 {
    let n = h.dim();
    let m = &h.0;
    let frob = m.norm();
    if frob == 0.0 {
        return 0.0;
    }
    if n == 1 {
        return m[(0, 0)].abs();
    }

    let starts = [
        DVector::from_element(n, 1.0 / (n as f64).sqrt()),
        DVector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0) / (n as f64 + 1.0) * ((i % 3) as f64 - 1.0)),
        DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -0.5 - i as f64 / n as f64 }),
    ];

    let mut best = 0.0f64;
    for start in starts.iter() {
        let mut v = start.normalize();
        let mut estimate = 0.0f64;
        let mut stagnant = false;
        for _ in 0..20_000 {
            let w = m * &v;
            let norm = w.norm();
            if norm <= 1e-300 || norm < 1e-14 * frob {
                stagnant = true;
                break;
            }
            let converged = (norm - estimate).abs() <= 1e-14 * norm;
            estimate = norm;
            v = w / norm;
            if converged {
                break;
            }
        }
        best = best.max(estimate);
        if !stagnant {
            break;
        }
    }
    best
}

/// Relative residual `||(H + mu I)s - b|| / (||b|| + 1)` of a shifted solve.
pub fn shifted_residual(h: &SymMatrix, mu: f64, s: &Vector, b: &Vector) -> f64 {
    let r = h.mul_vec(s) + s * mu - b;
    r.norm() / (b.norm() + 1.0)
}

/// Returns an error if any entry of `x` is NaN or infinite.
pub fn ensure_finite(x: &Vector, what: &str) -> Result<()> {
    if x.is_empty() {
        return Err(Error::InvalidArgument(format!("{what} has dimension 0")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{what} has non-finite entries")));
    }
    Ok(())
}

pub fn ensure_dim(x: &Vector, expected: usize) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: x.len(),
        });
    }
    Ok(())
}
