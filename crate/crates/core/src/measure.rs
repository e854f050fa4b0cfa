//! Renormalized language measure and the Cesàro limit.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row-sum tolerance used when verifying `θ[I − (1−θ)Π]⁻¹`.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Tolerance on the Cesàro fixed-point residuals.
pub const CESARO_TOL: f64 = 1e-10;

const CESARO_MAX_SQUARINGS: usize = 200;

/// A square matrix of transition probabilities. Rows sum to at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix(DMatrix<f64>);

impl TransitionMatrix {
    /// Wraps `m` after checking it is square, non-negative and row-substochastic.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension { expected: m.nrows(), actual: m.ncols() });
        }
        for i in 0..m.nrows() {
            let row = m.row(i);
            if row.iter().any(|&x| !(x >= -1e-15)) {
                return Err(Error::InvalidParameter(format!("negative entry in row {i}")));
            }
            if row.sum() > 1.0 + 1e-12 {
                return Err(Error::InvalidParameter(format!("row {i} sums above one")));
            }
        }
        Ok(TransitionMatrix(m))
    }

    pub(crate) fn new_unchecked(m: DMatrix<f64>) -> Self {
        TransitionMatrix(m)
    }

    pub fn identity(n: usize) -> Self {
        TransitionMatrix(DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Largest deviation of a row sum from one.
    pub fn stochastic_defect(&self) -> f64 {
        (0..self.dim()).map(|i| (self.0.row(i).sum() - 1.0).abs()).fold(0.0, f64::max)
    }
}

impl From<TransitionMatrix> for DMatrix<f64> {
    fn from(t: TransitionMatrix) -> Self {
        t.0
    }
}

/// `ν_θ` together with the `θ` it was computed at.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureVector {
    pub theta: f64,
    pub values: DVector<f64>,
}

impl MeasureVector {
    pub fn new(theta: f64, values: DVector<f64>) -> Self {
        MeasureVector { theta, values }
    }

    /// Unnormalized measure `μ = ν / θ`.
    pub fn mu(&self) -> DVector<f64> {
        &self.values / self.theta
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    /// `true` if every component is at least the other's, less `tol`.
    pub fn dominates(&self, other: &MeasureVector, tol: f64) -> bool {
        self.values.iter().zip(other.values.iter()).all(|(a, b)| *a >= *b - tol)
    }
}

/// Inverts `m` with partially pivoted LU.
pub(crate) fn lu_inverse(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.lu().try_inverse().ok_or_else(|| Error::SingularSystem("LU factorization is singular".into()))
}

/// Solves `m x = b` with partially pivoted LU.
pub(crate) fn lu_solve(m: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let x = m.lu().solve(b).ok_or_else(|| Error::SingularSystem("LU factorization is singular".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("non-finite solution".into()));
    }
    Ok(x)
}

/// `θ[I − (1−θ)Π]⁻¹`, verified row-stochastic.
pub fn resolvent(pi: &TransitionMatrix, theta: f64) -> Result<DMatrix<f64>> {
    check_theta(theta)?;
    let n = pi.dim();
    let a = DMatrix::identity(n, n) - pi.as_matrix() * (1.0 - theta);
    let r = lu_inverse(a)? * theta;
    // entries of the inverse grow like 1/θ and so does their rounding error
    let tol = STOCHASTIC_TOL.max(1e-15 / theta);
    for i in 0..n {
        let s = r.row(i).sum();
        if (s - 1.0).abs() > tol || !s.is_finite() {
            return Err(Error::SingularSystem(format!(
                "renormalized resolvent row {i} sums to {s} at theta = {theta:e}"
            )));
        }
    }
    Ok(r)
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("theta must lie in (0, 1], got {theta}")))
    }
}

/// `ν_θ = θ[I − (1−θ)Π]⁻¹χ`.
pub fn renormalized_measure(pi: &TransitionMatrix, chi: &[f64], theta: f64) -> Result<MeasureVector> {
    if chi.len() != pi.dim() {
        return Err(Error::Dimension { expected: pi.dim(), actual: chi.len() });
    }
    let r = resolvent(pi, theta)?;
    let values = r * DVector::from_column_slice(chi);
    Ok(MeasureVector::new(theta, values))
}

/// Measure computed by a plain LU solve without materializing the inverse.
/// Used in inner loops where the row-stochastic check has already been
/// exercised.
pub(crate) fn measure_solve(pi: &DMatrix<f64>, chi: &DVector<f64>, theta: f64) -> Result<DVector<f64>> {
    let n = pi.nrows();
    let a = DMatrix::identity(n, n) - pi * (1.0 - theta);
    Ok(lu_solve(a, chi)? * theta)
}

/// Cesàro limit `C(Π) = lim (1/k) Σ Πʲ`.
///
/// `Π` is first averaged with the identity, which leaves the limit unchanged
/// and makes the chain aperiodic; the powers of the damped matrix then
/// converge, and repeated squaring reaches the limit in a logarithmic number
/// of products. For a stochastic `Π` the rows of every product are rescaled
/// to sum to one.
pub fn cesaro_limit(pi: &TransitionMatrix) -> Result<DMatrix<f64>> {
    let n = pi.dim();
    let p = pi.as_matrix();
    let stochastic = pi.stochastic_defect() < STOCHASTIC_TOL;
    let mut a = (p + DMatrix::identity(n, n)) * 0.5;
    let mut residual = f64::INFINITY;
    for _ in 0..CESARO_MAX_SQUARINGS {
        let mut next = &a * &a;
        if stochastic {
            for mut row in next.row_iter_mut() {
                let s = row.sum();
                row /= s;
            }
        }
        let diff = (&next - &a).amax();
        a = next;
        if diff < 1e-13 {
            residual = cesaro_residual(&a, p);
            if residual < CESARO_TOL {
                return Ok(a);
            }
        }
    }
    Err(Error::CesaroConvergence { iterations: CESARO_MAX_SQUARINGS, residual })
}

/// Max-norm of the residuals `C² − C`, `CΠ − C`, `ΠC − C`.
pub fn cesaro_residual(c: &DMatrix<f64>, pi: &DMatrix<f64>) -> f64 {
    let r1 = (c * c - c).amax();
    let r2 = (c * pi - c).amax();
    let r3 = (pi * c - c).amax();
    r1.max(r2).max(r3)
}

/// `ν₀ = C(Π)χ`.
pub fn limiting_measure(pi: &TransitionMatrix, chi: &[f64]) -> Result<DVector<f64>> {
    if chi.len() != pi.dim() {
        return Err(Error::Dimension { expected: pi.dim(), actual: chi.len() });
    }
    Ok(cesaro_limit(pi)? * DVector::from_column_slice(chi))
}
