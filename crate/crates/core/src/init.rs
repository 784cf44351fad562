//! Initial factors: Nyström sketch, small Gaussian, perturbed Nyström, and
//! the sketch recovered from a gradient oracle.

use std::fmt;
use std::str::FromStr;

use crate::matcore::{self, MatError, Matrix, Seed};
use crate::problems::{Kind, Problem};

pub const DEFAULT_XI: f64 = 1.0;
pub const DEFAULT_ZETA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitKind {
    Nystrom,
    SmallGaussian,
    PerturbedNystrom,
    NystromViaGradient,
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitKind::Nystrom => "nystrom",
            InitKind::SmallGaussian => "small",
            InitKind::PerturbedNystrom => "perturbed",
            InitKind::NystromViaGradient => "grad",
        })
    }
}

impl FromStr for InitKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nystrom" => Ok(InitKind::Nystrom),
            "small" | "small_gaussian" => Ok(InitKind::SmallGaussian),
            "perturbed" | "perturbed_nystrom" => Ok(InitKind::PerturbedNystrom),
            "grad" | "nystrom_via_gradient" => Ok(InitKind::NystromViaGradient),
            _ => Err(format!("unknown init '{s}' (expected nystrom|small|perturbed|grad)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitSpec {
    pub kind: InitKind,
    pub xi: f64,
    pub zeta: f64,
    pub xi_n: f64,
    pub seed: Seed,
}

impl InitSpec {
    pub fn nystrom(xi: f64, seed: Seed) -> Self {
        InitSpec { kind: InitKind::Nystrom, xi, zeta: DEFAULT_ZETA, xi_n: 0.0, seed }
    }

    pub fn small(zeta: f64, seed: Seed) -> Self {
        InitSpec { kind: InitKind::SmallGaussian, xi: DEFAULT_XI, zeta, xi_n: 0.0, seed }
    }

    pub fn perturbed(xi: f64, xi_n: f64, seed: Seed) -> Self {
        InitSpec { kind: InitKind::PerturbedNystrom, xi, zeta: DEFAULT_ZETA, xi_n, seed }
    }

    pub fn via_gradient(xi: f64, seed: Seed) -> Self {
        InitSpec { kind: InitKind::NystromViaGradient, xi, zeta: DEFAULT_ZETA, xi_n: 0.0, seed }
    }

    fn expect(&self, kind: InitKind) -> Result<(), MatError> {
        if self.kind != kind {
            return Err(MatError::InvalidArgument(format!("init spec is '{}', expected '{}'", self.kind, kind)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct InitResult {
    pub x0: Matrix,
    pub y0: Option<Matrix>,
    pub rank_ok: bool,
}

fn sketch(rows: usize, r: usize, xi: f64, seed: Seed) -> Result<Matrix, MatError> {
    matcore::gaussian(rows, r, xi, seed)
}

fn y_zero(kind: Kind, n: usize, r: usize) -> Option<Matrix> {
    match kind {
        Kind::Symmetric => None,
        Kind::Asymmetric => Some(Matrix::zeros(n, r)),
    }
}

fn nystrom_rank_ok(x0: &Matrix, r: usize, r_a: usize) -> Result<bool, MatError> {
    Ok(matcore::numerical_rank(x0)? == r.min(r_a))
}

/// x0 = A·Ω (Ω is n×r), y0 = 0 for asymmetric problems.
pub fn nystrom_init(a: &Matrix, r: usize, kind: Kind, spec: &InitSpec) -> Result<InitResult, MatError> {
    spec.expect(InitKind::Nystrom)?;
    nystrom_core(a, r, kind, spec.xi, spec.seed)
}

fn nystrom_core(a: &Matrix, r: usize, kind: Kind, xi: f64, seed: Seed) -> Result<InitResult, MatError> {
    if r == 0 {
        return Err(MatError::InvalidArgument("rank must be ≥ 1".into()));
    }
    if kind == Kind::Symmetric && a.nrows() != a.ncols() {
        return Err(MatError::InvalidArgument("symmetric target must be square".into()));
    }
    let omega = sketch(a.ncols(), r, xi, seed)?;
    let x0 = a * omega;
    let rank_ok = nystrom_rank_ok(&x0, r, matcore::numerical_rank(a)?)?;
    Ok(InitResult { x0, y0: y_zero(kind, a.ncols(), r), rank_ok })
}

/// Both factors i.i.d. N(0, ζ²); Y uses stream `seed + 1`.
pub fn small_gaussian_init(m: usize, n: usize, r: usize, kind: Kind, spec: &InitSpec) -> Result<InitResult, MatError> {
    spec.expect(InitKind::SmallGaussian)?;
    let x0 = matcore::gaussian(m, r, spec.zeta, spec.seed)?;
    let y0 = match kind {
        Kind::Symmetric => None,
        Kind::Asymmetric => Some(matcore::gaussian(n, r, spec.zeta, spec.seed.wrapping_add(1))?),
    };
    // No alignment event to certify here; the flag only guards invertible Grams.
    let rank_ok = matcore::numerical_rank(&x0)? == r;
    Ok(InitResult { x0, y0, rank_ok })
}

/// x0 = A·Ω + N with N ~ N(0, ξ_n²) on stream `seed + 1`.
pub fn perturbed_nystrom_init(a: &Matrix, r: usize, kind: Kind, spec: &InitSpec) -> Result<InitResult, MatError> {
    spec.expect(InitKind::PerturbedNystrom)?;
    if !(spec.xi_n >= 0.0) {
        return Err(MatError::InvalidArgument(format!("xi_n must be ≥ 0, got {}", spec.xi_n)));
    }
    let mut res = nystrom_core(a, r, kind, spec.xi, spec.seed)?;
    if spec.xi_n > 0.0 {
        res.x0 += matcore::gaussian(a.nrows(), r, spec.xi_n, spec.seed.wrapping_add(1))?;
        res.rank_ok = nystrom_rank_ok(&res.x0, r, matcore::numerical_rank(a)?)?;
    }
    Ok(res)
}

// Gradients are evaluated at a power-of-two multiple of Ω and rescaled; the
// scaling is exact in floating point and keeps the cubic ΩΩᵀΩ term from
// swamping A·Ω in the cancellation.
const PROBE_SCALE: f64 = 1.0 / (1u64 << 30) as f64;

/// Symmetric: X0 = −∇f(Ω) + ΩΩᵀΩ with ∇f(X) = (XXᵀ − A)X, never touching A.
pub fn nystrom_via_gradient_sym<F>(grad: F, m: usize, r: usize, spec: &InitSpec) -> Result<InitResult, MatError>
where
    F: Fn(&Matrix) -> Matrix,
{
    spec.expect(InitKind::NystromViaGradient)?;
    let omega = sketch(m, r, spec.xi, spec.seed)?;
    let probe = &omega * PROBE_SCALE;
    let g0 = grad(&probe);
    if g0.shape() != (m, r) {
        return Err(MatError::InvalidArgument(format!(
            "gradient oracle returned {}×{}, expected {m}×{r}",
            g0.nrows(),
            g0.ncols()
        )));
    }
    let cubic = &probe * (probe.transpose() * &probe);
    let x0 = (cubic - g0) / PROBE_SCALE;
    // r_A is unknown without A; the sketch rank is capped by it, so use the
    // numerical rank of x0 against the best achievable r.
    let rank_ok = matcore::numerical_rank(&x0)? == r.min(m);
    Ok(InitResult { x0, y0: None, rank_ok })
}

/// Asymmetric: X0 = −∇_X f(0, Ω) with ∇_X f(X, Y) = (XYᵀ − A)Y; Y0 = 0.
pub fn nystrom_via_gradient_asym<F>(grad: F, m: usize, n: usize, r: usize, spec: &InitSpec) -> Result<InitResult, MatError>
where
    F: Fn(&Matrix, &Matrix) -> (Matrix, Matrix),
{
    spec.expect(InitKind::NystromViaGradient)?;
    let omega = sketch(n, r, spec.xi, spec.seed)?;
    let (gx, _) = grad(&Matrix::zeros(m, r), &omega);
    if gx.shape() != (m, r) {
        return Err(MatError::InvalidArgument(format!(
            "gradient oracle returned {}×{}, expected {m}×{r}",
            gx.nrows(),
            gx.ncols()
        )));
    }
    let x0 = -gx;
    let rank_ok = matcore::numerical_rank(&x0)? == r.min(m).min(n);
    Ok(InitResult { x0, y0: Some(Matrix::zeros(n, r)), rank_ok })
}

/// Dispatch on `spec.kind` for a concrete problem.
///
/// The gradient-oracle path is wired to the problem's own objective, so the
/// returned `rank_ok` is recomputed against r_A like the direct sketch.
pub fn initialize(problem: &Problem, spec: &InitSpec) -> Result<InitResult, MatError> {
    let (a, r, kind) = (&problem.a, problem.r, problem.kind);
    let mut res = match spec.kind {
        InitKind::Nystrom => nystrom_init(a, r, kind, spec)?,
        InitKind::PerturbedNystrom => perturbed_nystrom_init(a, r, kind, spec)?,
        InitKind::SmallGaussian => small_gaussian_init(problem.m(), problem.n(), r, kind, spec)?,
        InitKind::NystromViaGradient => match kind {
            Kind::Symmetric => nystrom_via_gradient_sym(|x| sym_gradient(a, x), problem.m(), r, spec)?,
            Kind::Asymmetric => nystrom_via_gradient_asym(|x, y| asym_gradient(a, x, y), problem.m(), problem.n(), r, spec)?,
        },
    };
    if spec.kind == InitKind::NystromViaGradient {
        res.rank_ok = matcore::numerical_rank(&res.x0)? == r.min(problem.r_a);
    }
    Ok(res)
}

/// ∇ of ¼‖XXᵀ − A‖²_F.
pub fn sym_gradient(a: &Matrix, x: &Matrix) -> Matrix {
    (x * x.transpose() - a) * x
}

/// (∇_X, ∇_Y) of ½‖XYᵀ − A‖²_F.
pub fn asym_gradient(a: &Matrix, x: &Matrix, y: &Matrix) -> (Matrix, Matrix) {
    let resid = x * y.transpose() - a;
    (&resid * y, resid.transpose() * x)
}
