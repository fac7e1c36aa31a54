//! Dense linear-algebra kernels and the fixed-step integrator.
//!
//! Storage and the heavy lifting (LU, symmetric eigenvalues, matrix
//! exponential) come from `nalgebra`; this module pins down the contracts the
//! rest of the crate relies on: singularity thresholds, symmetrization and
//! finiteness checks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, mismatch, Error, Result};

pub type DenseMatrix = DMatrix<f64>;
pub type DenseVector = DVector<f64>;

/// Relative pivot threshold used to declare a matrix singular.
pub const SINGULAR_PIVOT_RTOL: f64 = 1e-12;

/// Maximum absolute row sum.
pub fn norm_inf(m: &DenseMatrix) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vec_norm_inf(v: &DenseVector) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn all_finite(m: &DenseMatrix) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// `(S + Sᵀ) / 2`
pub fn symmetrize(s: &DenseMatrix) -> DenseMatrix {
    (s + s.transpose()) * 0.5
}

/// Partial-pivot LU factorization that refuses numerically singular input.
#[derive(Debug, Clone)]
pub struct LuFactor {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    dim: usize,
}

impl LuFactor {
    pub fn new(m: &DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(mismatch(format!(
                "LU needs a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if !all_finite(m) {
            return Err(Error::NonFinite("matrix passed to LU"));
        }
        let threshold = SINGULAR_PIVOT_RTOL * norm_inf(m);
        let lu = m.clone().lu();
        let pivot = lu
            .u()
            .diagonal()
            .iter()
            .fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
        if m.nrows() > 0 && (pivot <= threshold || pivot == 0.0) {
            return Err(Error::Singular { pivot, threshold });
        }
        Ok(Self { lu, dim: m.nrows() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, b: &DenseVector) -> Result<DenseVector> {
        if b.len() != self.dim {
            return Err(mismatch(format!(
                "right-hand side has length {}, expected {}",
                b.len(),
                self.dim
            )));
        }
        self.lu
            .solve(b)
            .ok_or(Error::Singular { pivot: 0.0, threshold: 0.0 })
    }

    pub fn solve_matrix(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if b.nrows() != self.dim {
            return Err(mismatch(format!(
                "right-hand side has {} rows, expected {}",
                b.nrows(),
                self.dim
            )));
        }
        self.lu
            .solve(b)
            .ok_or(Error::Singular { pivot: 0.0, threshold: 0.0 })
    }
}

/// Solve `M y = b` with partial pivoting.
pub fn lu_solve(m: &DenseMatrix, b: &DenseVector) -> Result<DenseVector> {
    LuFactor::new(m)?.solve(b)
}

/// Smallest and largest eigenvalue of the symmetric part of `s`.
pub fn sym_eig_extremes(s: &DenseMatrix) -> Result<(f64, f64)> {
    if !s.is_square() {
        return Err(mismatch(format!(
            "eigenvalues need a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    if !all_finite(s) {
        return Err(Error::NonFinite("matrix passed to the symmetric eigensolver"));
    }
    if s.nrows() == 0 {
        return Err(invalid("eigenvalues of an empty matrix"));
    }
    let eig = SymmetricEigen::new(symmetrize(s));
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    Ok((lo, hi))
}

/// Matrix exponential by scaling and squaring with a Padé core.
pub fn expm(m: &DenseMatrix) -> Result<DenseMatrix> {
    if !m.is_square() {
        return Err(mismatch(format!(
            "expm needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !all_finite(m) {
        return Err(Error::NonFinite("matrix passed to expm"));
    }
    let e = m.exp();
    if !all_finite(&e) {
        return Err(Error::NonFinite("matrix exponential"));
    }
    Ok(e)
}

/// One classical Runge–Kutta step of size `h` for `ẏ = rhs(t, y)`.
pub fn rk4_step<F>(mut rhs: F, t: f64, y: &DenseVector, h: f64) -> Result<DenseVector>
where
    F: FnMut(f64, &DenseVector) -> DenseVector,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("step size must be positive, got {h}")));
    }
    let half = 0.5 * h;
    let check = |k: DenseVector, at: f64| -> Result<DenseVector> {
        if k.iter().all(|v| v.is_finite()) {
            Ok(k)
        } else {
            Err(Error::IntegrationFailure { t: at })
        }
    };

    let k1 = check(rhs(t, y), t)?;
    let k2 = check(rhs(t + half, &(y + &k1 * half)), t + half)?;
    let k3 = check(rhs(t + half, &(y + &k2 * half)), t + half)?;
    let k4 = check(rhs(t + h, &(y + &k3 * h)), t + h)?;

    Ok(y + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0))
}
