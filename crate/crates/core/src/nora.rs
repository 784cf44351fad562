//! NoRA / NoRA+ on a linear model: adapter `W₀ + XYᵀ` fitted to a whitened
//! target `B`, which is asymmetric factorization of `B − W₀`.
//!
//! The optimizer update is plain gradient descent.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::Cholesky;

use crate::diagnostics::{Monitor, Termination, Trace};
use crate::matcore::{self, MatError, Matrix, Seed};
use crate::problems::{Kind, Problem};
use crate::solvers::{IterState, SolverError};

pub const DEFAULT_XI: f64 = 0.1;
pub const DEFAULT_LAMBDA: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct LinearFinetuneProblem {
    pub w0: Matrix,
    pub b: Matrix,
    pub r: usize,
}

impl LinearFinetuneProblem {
    pub fn new(w0: Matrix, b: Matrix, r: usize) -> Result<Self, MatError> {
        if w0.shape() != b.shape() {
            return Err(MatError::InvalidArgument(format!(
                "w0 is {:?} but b is {:?}",
                w0.shape(),
                b.shape()
            )));
        }
        if r == 0 {
            return Err(MatError::InvalidArgument("adapter rank must be ≥ 1".into()));
        }
        Ok(LinearFinetuneProblem { w0, b, r })
    }

    pub fn a_eff(&self) -> Matrix {
        &self.b - &self.w0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoraConfig {
    pub xi: f64,
    pub lambda: f64,
    pub lr: f64,
    pub normalize: bool,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: Seed,
}

impl Default for NoraConfig {
    fn default() -> Self {
        NoraConfig {
            xi: DEFAULT_XI,
            lambda: DEFAULT_LAMBDA,
            lr: 0.5,
            normalize: true,
            max_iters: 500,
            tol: 1e-12,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Nora,
    NoraPlus,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Nora => "nora",
            Variant::NoraPlus => "nora+",
        })
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nora" => Ok(Variant::Nora),
            "nora+" | "nora_plus" | "nora-plus" => Ok(Variant::NoraPlus),
            _ => Err(format!("unknown variant '{s}' (expected nora|nora+)")),
        }
    }
}

/// X0 = W₀Ω with Ω n×r ~ N(0, ξ²), Y0 = 0.
pub fn nora_init(problem: &LinearFinetuneProblem, xi: f64, seed: Seed) -> Result<(Matrix, Matrix), MatError> {
    let n = problem.w0.ncols();
    let omega = matcore::gaussian(n, problem.r, xi, seed)?;
    Ok((&problem.w0 * omega, Matrix::zeros(n, problem.r)))
}

/// (GᵀG + λI)⁻¹
fn damped_inverse(g: &Matrix, lambda: f64) -> Result<Matrix, MatError> {
    let r = g.ncols();
    let gram = matcore::symmetrize(&(g.transpose() * g)) + Matrix::identity(r, r) * lambda;
    let chol = Cholesky::new(gram).ok_or(MatError::SingularGram { sigma_min: 0.0 })?;
    Ok(chol.inverse())
}

fn precondition(grad: Matrix, other: &Matrix, config: &NoraConfig) -> Result<Matrix, MatError> {
    let p = damped_inverse(other, config.lambda)?;
    let out = grad * &p;
    Ok(if config.normalize { out / p.norm() } else { out })
}

/// One NoRA+ step at iteration `t`, following the gradients of
/// ½‖W₀ + XYᵀ − B‖²_F.
pub fn nora_plus_step(state: &IterState, problem: &LinearFinetuneProblem, config: &NoraConfig, t: usize) -> Result<IterState, MatError> {
    let x = &state.x;
    let y = state
        .y
        .as_ref()
        .ok_or_else(|| MatError::InvalidArgument("NoRA state needs a Y factor".into()))?;
    let resid = (&problem.w0 + x * y.transpose()) - &problem.b;
    let mut gx = &resid * y;
    let gy = resid.transpose() * x;
    if t > 0 {
        gx = precondition(gx, y, config)?;
    }
    let gy = precondition(gy, x, config)?;
    Ok(IterState {
        t: state.t + 1,
        x: x - gx * config.lr,
        y: Some(y - gy * config.lr),
        last_error: state.last_error,
    })
}

/// One plain gradient step on both adapter factors.
pub fn nora_step(state: &IterState, problem: &LinearFinetuneProblem, config: &NoraConfig) -> Result<IterState, MatError> {
    let x = &state.x;
    let y = state
        .y
        .as_ref()
        .ok_or_else(|| MatError::InvalidArgument("NoRA state needs a Y factor".into()))?;
    let resid = (&problem.w0 + x * y.transpose()) - &problem.b;
    let gx = &resid * y;
    let gy = resid.transpose() * x;
    Ok(IterState {
        t: state.t + 1,
        x: x - gx * config.lr,
        y: Some(y - gy * config.lr),
        last_error: state.last_error,
    })
}

/// Train the adapter; records are measured against A = B − W₀.
pub fn run_nora(problem: &LinearFinetuneProblem, config: &NoraConfig, variant: Variant) -> Result<Trace, SolverError> {
    if !(config.lr >= 0.0) || !(config.lambda >= 0.0) || !(config.tol > 0.0) {
        return Err(SolverError::Config("NoRA needs lr ≥ 0, lambda ≥ 0, tol > 0".into()));
    }
    let a = problem.a_eff();
    let target = Problem::from_matrix(a.clone(), problem.r, Kind::Asymmetric)?;
    let monitor = Monitor::new(&a, &target.u, &target.sigma, Some(&target.v), true);
    let (x0, y0) = nora_init(problem, config.xi, config.seed)?;
    let start = Instant::now();
    let elapsed = || start.elapsed().as_nanos() as u64;

    let mut state = IterState::new(x0, Some(y0));
    let mut records = Vec::new();
    if config.max_iters == 0 {
        return Ok(Trace { records, termination: Termination::Budget, config: String::new(), final_x: state.x, final_y: state.y });
    }
    let first = monitor.record(0, &state.x, state.y.as_ref(), 0.0, elapsed());
    records.push(first);
    let mut termination = Termination::Budget;
    if first.error <= config.tol {
        termination = Termination::Converged;
    } else {
        for t in 0..config.max_iters {
            let next = match variant {
                Variant::Nora => nora_step(&state, problem, config),
                Variant::NoraPlus => nora_plus_step(&state, problem, config, t),
            };
            state = match next {
                Ok(s) => s,
                Err(MatError::SingularGram { .. }) => {
                    termination = Termination::SingularGram;
                    break;
                }
                Err(e) => return Err(e.into()),
            };
            let rec = monitor.record(t + 1, &state.x, state.y.as_ref(), config.lr, elapsed());
            records.push(rec);
            if !rec.error.is_finite() {
                termination = Termination::Diverged;
                break;
            }
            if rec.error <= config.tol {
                termination = Termination::Converged;
                break;
            }
        }
    }
    Ok(Trace { records, termination, config: String::new(), final_x: state.x, final_y: state.y })
}

/// The desk-scale toy: random W₀/√n and B = W₀ + a rank-`spectrum.len()`
/// update with the given singular values.
pub fn toy_problem(m: usize, n: usize, r: usize, spectrum: &[f64], seed: Seed) -> Result<LinearFinetuneProblem, MatError> {
    let w0 = matcore::gaussian(m, n, 1.0 / (n as f64).sqrt(), seed)?;
    let delta = crate::problems::synthesize_target(&crate::problems::TargetSpec::asymmetric(
        m,
        n,
        spectrum.to_vec(),
        seed.wrapping_add(10),
    ))?;
    LinearFinetuneProblem::new(w0.clone(), w0 + delta, r)
}
