//! Dense kernels on top of nalgebra: compact SVD, pseudo-inverse, Gram
//! solves and seeded Gaussian sampling.
//!
//! The SVD itself is delegated to faer; nalgebra 0.35's bidiagonal SVD
//! returns wrong factors on a noticeable fraction of rank-deficient inputs.
//!
//! Matrices are plain `DMatrix<f64>`. Anything that is filled from a flat
//! buffer (sampling, `from_row_slice`) uses row-major order.

use faer::Mat;
use nalgebra::{Cholesky, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

pub type Matrix = DMatrix<f64>;
pub type Seed = u64;


#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("svd did not converge")]
    NumericalFailure,
    #[error("singular gram matrix (sigma_min = {sigma_min:e})")]
    SingularGram { sigma_min: f64 },
}

/// Compact SVD truncated at the numerical rank: `a ≈ u·diag(s)·vᵀ`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, sj) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(*sj);
        }
        us * self.v.transpose()
    }
}

/// Singular values at or below this are treated as zero.
pub fn rank_tol(rows: usize, cols: usize, s_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * s_max
}

/// i.i.d. N(0, std²) entries from ChaCha20 keyed by `seed`, filled row by row.
pub fn gaussian(rows: usize, cols: usize, std: f64, seed: Seed) -> Result<Matrix, MatError> {
    gaussian_on_stream(rows, cols, std, seed, 0)
}

/// Like [`gaussian`], on ChaCha stream `stream`. Different streams under the
/// same seed are independent.
pub fn gaussian_on_stream(rows: usize, cols: usize, std: f64, seed: Seed, stream: u64) -> Result<Matrix, MatError> {
    if !(std > 0.0) || !std.is_finite() {
        return Err(MatError::InvalidArgument(format!(
            "standard deviation must be positive, got {std}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            std * z
        })
        .collect();
    Ok(Matrix::from_row_slice(rows, cols, &data))
}

fn to_faer(a: &Matrix) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: faer::MatRef<'_, f64>) -> Matrix {
    Matrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// All min(m, n) singular values, descending.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>, MatError> {
    if a.is_empty() {
        return Ok(Vec::new());
    }
    let mut s = to_faer(a).singular_values().map_err(|_| MatError::NumericalFailure)?;
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Thin SVD without truncation: u is m×k, v is n×k, k = min(m, n).
pub fn svd_thin(a: &Matrix) -> Result<SvdResult, MatError> {
    let (m, n) = a.shape();
    if a.is_empty() {
        return Ok(SvdResult { u: Matrix::zeros(m, 0), s: Vec::new(), v: Matrix::zeros(n, 0) });
    }
    let dec = to_faer(a).thin_svd().map_err(|_| MatError::NumericalFailure)?;
    let d = dec.S().column_vector();
    let s: Vec<f64> = (0..m.min(n)).map(|i| d[i]).collect();
    Ok(SvdResult { u: from_faer(dec.U()), s, v: from_faer(dec.V()) })
}

/// Compact SVD truncated at the numerical rank.
pub fn svd(a: &Matrix) -> Result<SvdResult, MatError> {
    let full = svd_thin(a)?;
    let (m, n) = a.shape();
    let s_max = full.s.first().copied().unwrap_or(0.0);
    let tol = rank_tol(m, n, s_max);
    let k = if s_max == 0.0 { 0 } else { full.s.iter().take_while(|&&v| v > tol).count() };
    Ok(SvdResult {
        u: full.u.columns(0, k).into_owned(),
        s: full.s[..k].to_vec(),
        v: full.v.columns(0, k).into_owned(),
    })
}

pub fn numerical_rank(a: &Matrix) -> Result<usize, MatError> {
    let s = singular_values(a)?;
    let s_max = s.first().copied().unwrap_or(0.0);
    if s_max == 0.0 {
        return Ok(0);
    }
    let tol = rank_tol(a.nrows(), a.ncols(), s_max);
    Ok(s.iter().filter(|&&v| v > tol).count())
}

pub fn pinv(a: &Matrix) -> Result<Matrix, MatError> {
    let d = svd(a)?;
    let mut vs = d.v.clone();
    for (j, sj) in d.s.iter().enumerate() {
        vs.column_mut(j).scale_mut(1.0 / sj);
    }
    Ok(vs * d.u.transpose())
}

/// (g + gᵀ)/2
pub fn symmetrize(g: &Matrix) -> Matrix {
    (g + g.transpose()) * 0.5
}

fn check_full_rank(x: &Matrix) -> Result<(), MatError> {
    let r = x.ncols();
    let s = singular_values(x)?;
    let s_max = s.first().copied().unwrap_or(0.0);
    let sigma_min = if s.len() < r { 0.0 } else { s[r - 1] };
    if r == 0 || s_max == 0.0 || sigma_min <= rank_tol(x.nrows(), x.ncols(), s_max) {
        return Err(MatError::SingularGram { sigma_min });
    }
    Ok(())
}

/// `b·(xᵀx)⁻¹` through a Cholesky factorization of the symmetrized Gram.
/// Refuses when `x` is numerically rank deficient.
pub fn gram_solve(x: &Matrix, b: &Matrix) -> Result<Matrix, MatError> {
    let r = x.ncols();
    if b.ncols() != r {
        return Err(MatError::InvalidArgument(format!(
            "gram_solve: b has {} columns, x has {}",
            b.ncols(),
            r
        )));
    }
    check_full_rank(x)?;
    let g = symmetrize(&(x.transpose() * x));
    let chol = Cholesky::new(g).ok_or(MatError::SingularGram { sigma_min: 0.0 })?;
    // b·G⁻¹ = (G⁻¹·bᵀ)ᵀ since G is symmetric
    Ok(chol.solve(&b.transpose()).transpose())
}

/// `x·(xᵀx)⁻¹`, computed as `Q·R⁻ᵀ` from a thin QR of `x`. Same result as
/// `gram_solve(x, x)` but without squaring the condition number.
pub fn right_inverse(x: &Matrix) -> Result<Matrix, MatError> {
    check_full_rank(x)?;
    let qr = x.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let w = r.solve_upper_triangular(&q.transpose()).ok_or(MatError::SingularGram { sigma_min: 0.0 })?;
    Ok(w.transpose())
}

/// Orthonormal basis for the columns of a full-column-rank `a` (thin QR).
pub fn orthonormalize(a: &Matrix) -> Matrix {
    a.clone().qr().q()
}

pub fn all_finite(a: &Matrix) -> bool {
    a.iter().all(|v| v.is_finite())
}
