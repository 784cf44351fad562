//! ScaledGD and baseline step kernels, step-size schedules and the run loop.
//!
//! The inverse-mode ScaledGD steps are evaluated in the expanded form
//! `(1−η)X + η·A·X(XᵀX)⁻¹` rather than `X − η(XXᵀ−A)X(XᵀX)⁻¹`. The two are
//! equal in exact arithmetic, but the expanded form only ever adds multiples
//! of A's columns to X, so round-off cannot push the iterate out of A's
//! column space. The direct form leaks at the 1e-7 level and flattens the
//! quadratic tail into a linear one.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::Cholesky;
use thiserror::Error;

use crate::diagnostics::{IterRecord, Monitor, Termination, Trace};
use crate::init::InitResult;
use crate::matcore::{self, MatError, Matrix};
use crate::problems::{Kind, Problem, Regime};

pub const DEFAULT_ETA: f64 = 0.5;
pub const DEFAULT_LAMBDA: f64 = 0.01;
pub const DEFAULT_DECAY_LEVELS: [f64; 4] = [0.5, 0.1, 0.01, 0.001];
pub const DEFAULT_DECAY_EVERY: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid solver config: {0}")]
    Config(String),
    #[error(transparent)]
    Mat(#[from] MatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Inverse,
    Pseudo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Gd,
    ScaledGd,
    ScaledGdPinv,
    ScaledGdLambda,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Gd => "gd",
            Method::ScaledGd => "scaledgd",
            Method::ScaledGdPinv => "scaledgd-pinv",
            Method::ScaledGdLambda => "scaledgd-lambda",
        })
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gd" => Ok(Method::Gd),
            "scaledgd" => Ok(Method::ScaledGd),
            "scaledgd-pinv" | "scaledgd_pinv" => Ok(Method::ScaledGdPinv),
            "scaledgd-lambda" | "scaledgd_lambda" => Ok(Method::ScaledGdLambda),
            _ => Err(format!("unknown solver '{s}' (expected gd|scaledgd|scaledgd-pinv|scaledgd-lambda)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Fixed { eta: f64 },
    /// η₁ until T₁ (or until the error drops to 2/(3κ²)), then η₂.
    /// `eta1 = None` means c/(κ³‖A‖_F); `t1 = None` means ⌈κ³√r·ln κ⌉.
    TwoPhase { c: f64, eta1: Option<f64>, t1: Option<usize>, eta2: f64 },
    /// `levels[k]` for iterations in [k·every, (k+1)·every), last level after.
    StepDecay { levels: Vec<f64>, every: usize },
}

impl Schedule {
    pub fn default_decay() -> Schedule {
        Schedule::StepDecay { levels: DEFAULT_DECAY_LEVELS.to_vec(), every: DEFAULT_DECAY_EVERY }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let ok = |eta: f64| eta > 0.0 && eta <= 1.0;
        let bad = |what: &str| Err(SolverError::Config(format!("{what} must lie in (0, 1]")));
        match self {
            Schedule::Fixed { eta } if !ok(*eta) => bad("eta"),
            Schedule::TwoPhase { c, eta1, eta2, .. } => {
                if !(*c > 0.0) {
                    return Err(SolverError::Config("two_phase c must be positive".into()));
                }
                if eta1.is_some_and(|e| !ok(e)) {
                    return bad("eta1");
                }
                if !ok(*eta2) {
                    return bad("eta2");
                }
                Ok(())
            }
            Schedule::StepDecay { levels, every } => {
                if levels.is_empty() || *every == 0 {
                    return Err(SolverError::Config("step_decay needs levels and every ≥ 1".into()));
                }
                if levels.iter().any(|e| !ok(*e)) {
                    return bad("step_decay levels");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// `fixed:<η>`, `two-phase:c=<c>,eta2=<η₂>[,eta1=<η₁>][,t1=<T₁>]` or
/// `decay:<η>,<η>,…/<every>`.
impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Fixed { eta } => write!(f, "fixed:{eta:?}"),
            Schedule::TwoPhase { c, eta1, t1, eta2 } => {
                write!(f, "two-phase:c={c:?},eta2={eta2:?}")?;
                if let Some(e) = eta1 {
                    write!(f, ",eta1={e:?}")?;
                }
                if let Some(t) = t1 {
                    write!(f, ",t1={t}")?;
                }
                Ok(())
            }
            Schedule::StepDecay { levels, every } => {
                let lv: Vec<String> = levels.iter().map(|l| format!("{l:?}")).collect();
                write!(f, "decay:{}/{every}", lv.join(","))
            }
        }
    }
}

impl FromStr for Schedule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |v: &str| v.parse::<f64>().map_err(|_| format!("bad number '{v}' in schedule '{s}'"));
        let (kind, body) = s.split_once(':').ok_or_else(|| format!("schedule '{s}' lacks a ':'"))?;
        match kind {
            "fixed" => Ok(Schedule::Fixed { eta: num(body)? }),
            "two-phase" | "two_phase" => {
                let (mut c, mut eta1, mut t1, mut eta2) = (1.0, None, None, None);
                for part in body.split(',') {
                    let (k, v) = part.split_once('=').ok_or_else(|| format!("expected key=value, got '{part}'"))?;
                    match k {
                        "c" => c = num(v)?,
                        "eta1" => eta1 = Some(num(v)?),
                        "eta2" => eta2 = Some(num(v)?),
                        "t1" => t1 = Some(v.parse::<usize>().map_err(|_| format!("bad t1 '{v}'"))?),
                        _ => return Err(format!("unknown two-phase field '{k}'")),
                    }
                }
                let eta2 = eta2.ok_or_else(|| "two-phase schedule needs eta2".to_string())?;
                Ok(Schedule::TwoPhase { c, eta1, t1, eta2 })
            }
            "decay" | "step_decay" => {
                let (lv, every) = body.split_once('/').unwrap_or((body, ""));
                let levels = lv.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
                let every = if every.is_empty() {
                    DEFAULT_DECAY_EVERY
                } else {
                    every.parse::<usize>().map_err(|_| format!("bad decay interval '{every}'"))?
                };
                Ok(Schedule::StepDecay { levels, every })
            }
            _ => Err(format!("unknown schedule kind '{kind}' (expected fixed|two-phase|decay)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub schedule: Schedule,
    pub lambda: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub record_diagnostics: bool,
}

impl SolverConfig {
    pub fn new(method: Method, schedule: Schedule, max_iters: usize, tol: f64) -> Self {
        SolverConfig { method, schedule, lambda: DEFAULT_LAMBDA, max_iters, tol, record_diagnostics: true }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        self.schedule.validate()?;
        if !(self.tol > 0.0) {
            return Err(SolverError::Config("tol must be positive".into()));
        }
        if self.method == Method::ScaledGdLambda && !(self.lambda >= 0.0) {
            return Err(SolverError::Config("lambda must be ≥ 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterState {
    pub t: usize,
    pub x: Matrix,
    pub y: Option<Matrix>,
    pub last_error: f64,
}

impl IterState {
    pub fn new(x: Matrix, y: Option<Matrix>) -> Self {
        IterState { t: 0, x, y, last_error: f64::NAN }
    }
}

/// Relative cutoff for the pseudo-inverse step. The step never contracts
/// the null-space part of X, so round-off there stays at eps·‖X₀‖ while the
/// signal shrinks; an eps-relative cutoff would eventually invert that noise.
pub const PINV_RTOL: f64 = 1.5e-8;

/// `x(xᵀx)⁻¹` (inverse) or `x(xᵀx)†` together with the row-space projection
/// `(xᵀx)(xᵀx)†` (pseudo). For inverse mode the projection is the identity.
fn right_inverse(x: &Matrix, mode: Mode) -> Result<(Matrix, Option<Matrix>), MatError> {
    match mode {
        Mode::Inverse => Ok((matcore::right_inverse(x)?, None)),
        Mode::Pseudo => {
            let mut d = matcore::svd_thin(x)?;
            let cut = d.s.first().copied().unwrap_or(0.0) * PINV_RTOL;
            let k = d.s.iter().take_while(|&&v| v > cut && v > 0.0).count();
            d.u = d.u.columns(0, k).into_owned();
            d.v = d.v.columns(0, k).into_owned();
            d.s.truncate(k);
            let mut u_inv = d.u.clone();
            for (j, s) in d.s.iter().enumerate() {
                u_inv.column_mut(j).scale_mut(1.0 / s);
            }
            let w = u_inv * d.v.transpose();
            let proj = &d.v * d.v.transpose();
            Ok((w, Some(proj)))
        }
    }
}

/// X ← X − η(XXᵀ − A)X(XᵀX)⁻¹, or with (XᵀX)† in pseudo mode.
pub fn scaledgd_sym_step(x: &Matrix, a: &Matrix, eta: f64, mode: Mode) -> Result<Matrix, MatError> {
    let (w, proj) = right_inverse(x, mode)?;
    let pushed = a * w;
    Ok(match proj {
        None => x * (1.0 - eta) + pushed * eta,
        // XXᵀX(XᵀX)† = X·P with P the row-space projector of X
        Some(p) => x - (x * p) * eta + pushed * eta,
    })
}

/// Modified asymmetric ScaledGD: X is frozen at t = 0; afterwards X uses
/// (YᵀY)⁻¹ and Y uses (XᵀX)⁻¹, both from the pre-update iterates.
pub fn scaledgd_asym_step(state: &IterState, a: &Matrix, eta: f64, mode: Mode) -> Result<IterState, MatError> {
    let x = &state.x;
    let y = state
        .y
        .as_ref()
        .ok_or_else(|| MatError::InvalidArgument("asymmetric step needs a Y factor".into()))?;
    let y_next = {
        let (w, proj) = right_inverse(x, mode)?;
        let pushed = a.transpose() * w;
        match proj {
            None => y * (1.0 - eta) + pushed * eta,
            Some(p) => y - (y * p) * eta + pushed * eta,
        }
    };
    let x_next = if state.t == 0 {
        x.clone()
    } else {
        let (w, proj) = right_inverse(y, mode)?;
        let pushed = a * w;
        match proj {
            None => x * (1.0 - eta) + pushed * eta,
            Some(p) => x - (x * p) * eta + pushed * eta,
        }
    };
    Ok(IterState { t: state.t + 1, x: x_next, y: Some(y_next), last_error: state.last_error })
}

/// Plain gradient step; symmetric when `state.y` is absent, otherwise a
/// simultaneous step on both factors.
pub fn gd_step(state: &IterState, a: &Matrix, eta: f64) -> IterState {
    let x = &state.x;
    let (x_next, y_next) = match &state.y {
        None => {
            let grad = x * (x.transpose() * x) - a * x;
            (x - grad * eta, None)
        }
        Some(y) => {
            let resid = x * y.transpose() - a;
            let gx = &resid * y;
            let gy = resid.transpose() * x;
            (x - gx * eta, Some(y - gy * eta))
        }
    };
    IterState { t: state.t + 1, x: x_next, y: y_next, last_error: state.last_error }
}

/// X ← X − η(XXᵀ − A)X(XᵀX + λI)⁻¹.
pub fn scaledgd_lambda_step(x: &Matrix, a: &Matrix, eta: f64, lambda: f64) -> Result<Matrix, MatError> {
    let r = x.ncols();
    let g = matcore::symmetrize(&(x.transpose() * x)) + Matrix::identity(r, r) * lambda;
    let chol = Cholesky::new(g).ok_or(MatError::SingularGram { sigma_min: 0.0 })?;
    let grad = x * (x.transpose() * x) - a * x;
    let dir = chol.solve(&grad.transpose()).transpose();
    Ok(x - dir * eta)
}

struct Stepper {
    schedule: Schedule,
    eta1: f64,
    t1: usize,
    switch_error: f64,
    switched: bool,
}

impl Stepper {
    fn new(schedule: &Schedule, problem: &Problem, max_iters: usize) -> Stepper {
        let kappa = problem.kappa;
        let (eta1, t1) = match schedule {
            Schedule::TwoPhase { c, eta1, t1, .. } => {
                let e1 = eta1.unwrap_or_else(|| (c / (kappa.powi(3) * problem.a.norm())).min(1.0));
                let default_t1 = (kappa.powi(3) * (problem.r as f64).sqrt() * kappa.ln()).ceil();
                let t = t1.unwrap_or(if default_t1.is_finite() { default_t1 as usize } else { max_iters });
                (e1, t.min(max_iters))
            }
            _ => (f64::NAN, 0),
        };
        Stepper { schedule: schedule.clone(), eta1, t1, switch_error: 2.0 / (3.0 * kappa * kappa), switched: false }
    }

    fn eta(&mut self, t: usize, error: f64) -> f64 {
        match &self.schedule {
            Schedule::Fixed { eta } => *eta,
            Schedule::TwoPhase { eta2, .. } => {
                if t >= self.t1 || error <= self.switch_error {
                    self.switched = true;
                }
                if self.switched {
                    *eta2
                } else {
                    self.eta1
                }
            }
            Schedule::StepDecay { levels, every } => levels[(t / every).min(levels.len() - 1)],
        }
    }
}

fn step(method: Method, kind: Kind, state: &IterState, a: &Matrix, eta: f64, lambda: f64) -> Result<IterState, MatError> {
    let next = |x: Matrix| IterState { t: state.t + 1, x, y: None, last_error: state.last_error };
    match (method, kind) {
        (Method::Gd, _) => Ok(gd_step(state, a, eta)),
        (Method::ScaledGd, Kind::Symmetric) => scaledgd_sym_step(&state.x, a, eta, Mode::Inverse).map(next),
        (Method::ScaledGdPinv, Kind::Symmetric) => scaledgd_sym_step(&state.x, a, eta, Mode::Pseudo).map(next),
        (Method::ScaledGdLambda, Kind::Symmetric) => scaledgd_lambda_step(&state.x, a, eta, lambda).map(next),
        (Method::ScaledGd, Kind::Asymmetric) => scaledgd_asym_step(state, a, eta, Mode::Inverse),
        (Method::ScaledGdPinv, Kind::Asymmetric) => scaledgd_asym_step(state, a, eta, Mode::Pseudo),
        (Method::ScaledGdLambda, Kind::Asymmetric) => unreachable!("rejected in run"),
    }
}

/// Iterate until the tolerance, the budget, a non-finite iterate or a
/// singular Gram. Under-parametrized problems stop on the weak-optimality
/// residual instead of the optimality error.
pub fn run(problem: &Problem, init: &InitResult, config: &SolverConfig) -> Result<Trace, SolverError> {
    config.validate()?;
    let symmetric = problem.kind == Kind::Symmetric;
    if init.x0.shape() != (problem.m(), problem.r) {
        return Err(SolverError::Config(format!(
            "x0 is {}×{}, expected {}×{}",
            init.x0.nrows(),
            init.x0.ncols(),
            problem.m(),
            problem.r
        )));
    }
    match (&init.y0, symmetric) {
        (Some(_), true) => return Err(SolverError::Config("symmetric problem given a Y factor".into())),
        (None, false) => return Err(SolverError::Config("asymmetric problem needs a Y factor".into())),
        (Some(y), false) if y.shape() != (problem.n(), problem.r) => {
            return Err(SolverError::Config("y0 shape does not match the problem".into()))
        }
        _ => {}
    }
    if config.method == Method::ScaledGdLambda && !symmetric {
        return Err(SolverError::Config("scaledgd-lambda is defined for symmetric problems only".into()));
    }

    let empty = |termination| Trace {
        records: Vec::new(),
        termination,
        config: String::new(),
        final_x: init.x0.clone(),
        final_y: init.y0.clone(),
    };
    if config.max_iters == 0 {
        return Ok(empty(Termination::Budget));
    }
    if config.method == Method::ScaledGd && !init.rank_ok {
        return Ok(empty(Termination::RefusedStart));
    }

    let monitor = Monitor::new(
        &problem.a,
        &problem.u,
        &problem.sigma,
        if symmetric { None } else { Some(&problem.v) },
        config.record_diagnostics,
    );
    let metric = |rec: &IterRecord| if problem.regime == Regime::Up { rec.weak_opt } else { rec.error };
    let start = Instant::now();
    let elapsed = || start.elapsed().as_nanos() as u64;

    let mut state = IterState::new(init.x0.clone(), init.y0.clone());
    let first = monitor.record(0, &state.x, state.y.as_ref(), 0.0, elapsed());
    state.last_error = first.error;
    let mut records = vec![first];
    let mut stepper = Stepper::new(&config.schedule, problem, config.max_iters);

    let finish = |records, termination, state: IterState| Trace {
        records,
        termination,
        config: String::new(),
        final_x: state.x,
        final_y: state.y,
    };

    if metric(&records[0]) <= config.tol {
        return Ok(finish(records, Termination::Converged, state));
    }
    for t in 0..config.max_iters {
        let eta = stepper.eta(t, state.last_error);
        let next = match step(config.method, problem.kind, &state, &problem.a, eta, config.lambda) {
            Ok(s) => s,
            Err(MatError::SingularGram { .. }) => return Ok(finish(records, Termination::SingularGram, state)),
            Err(e) => return Err(e.into()),
        };
        state = next;
        let finite = matcore::all_finite(&state.x) && state.y.as_ref().is_none_or(matcore::all_finite);
        let rec = monitor.record(t + 1, &state.x, state.y.as_ref(), eta, elapsed());
        state.last_error = rec.error;
        records.push(rec);
        if !finite || !rec.error.is_finite() {
            return Ok(finish(records, Termination::Diverged, state));
        }
        if metric(&rec) <= config.tol {
            return Ok(finish(records, Termination::Converged, state));
        }
    }
    Ok(finish(records, Termination::Budget, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::{self, InitSpec};
    use crate::problems::{geometric_spectrum, TargetSpec};

    fn diag(v: &[f64]) -> Matrix {
        Matrix::from_diagonal(&nalgebra::DVector::from_vec(v.to_vec()))
    }

    #[test]
    fn sym_step_examples() {
        let i2 = Matrix::identity(2, 2);
        assert_eq!(scaledgd_sym_step(&i2, &i2, 0.3, Mode::Inverse).unwrap(), i2);
        let got = scaledgd_sym_step(&i2, &diag(&[4.0, 1.0]), 0.5, Mode::Inverse).unwrap();
        assert!((got - diag(&[2.5, 1.0])).norm() < 1e-15);
        let x = Matrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let got = scaledgd_sym_step(&x, &diag(&[1.0, 0.0]), 0.5, Mode::Pseudo).unwrap();
        assert!((got - x).norm() < 1e-15);
    }

    #[test]
    fn inverse_mode_refuses_singular() {
        let x = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            scaledgd_sym_step(&x, &Matrix::identity(2, 2), 0.5, Mode::Inverse),
            Err(MatError::SingularGram { .. })
        ));
        assert!(scaledgd_sym_step(&x, &Matrix::identity(2, 2), 0.5, Mode::Pseudo).is_ok());
    }

    #[test]
    fn gd_and_lambda_examples() {
        let st = IterState::new(Matrix::identity(2, 2), None);
        let got = gd_step(&st, &diag(&[4.0, 1.0]), 0.1);
        assert!((got.x - diag(&[1.3, 1.0])).norm() < 1e-15);
        let got = scaledgd_lambda_step(&Matrix::identity(2, 2), &diag(&[4.0, 1.0]), 0.5, 1.0).unwrap();
        assert!((got - diag(&[1.75, 1.0])).norm() < 1e-15);
        let x = matcore::gaussian(4, 2, 1.0, 1).unwrap();
        let a = diag(&[3.0, 1.0, 0.5, 0.1]);
        let damped = scaledgd_lambda_step(&x, &a, 0.5, 1e12).unwrap();
        assert!((damped - &x).norm() <= 1e-6 * x.norm());
    }

    #[test]
    fn asym_first_step_freezes_x() {
        let a = diag(&[2.0, 0.5]);
        let init = init::nystrom_init(&a, 2, Kind::Asymmetric, &InitSpec::nystrom(1.0, 3)).unwrap();
        let st = IterState::new(init.x0.clone(), init.y0.clone());
        let next = scaledgd_asym_step(&st, &a, 1.0, Mode::Inverse).unwrap();
        assert_eq!(next.x, init.x0);
        let err = (&next.x * next.y.unwrap().transpose() - &a).norm();
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn asym_op_one_step_pseudo() {
        let p = Problem::from_spec(&TargetSpec::asymmetric(4, 5, vec![1.0, 0.5, 0.2], 2), 5).unwrap();
        let init = init::initialize(&p, &InitSpec::nystrom(1.0, 1)).unwrap();
        let st = IterState::new(init.x0, init.y0);
        let next = scaledgd_asym_step(&st, &p.a, 1.0, Mode::Pseudo).unwrap();
        assert!((&next.x * next.y.unwrap().transpose() - &p.a).norm() <= 1e-9);
    }

    #[test]
    fn run_ep_converges_quickly() {
        let spec = TargetSpec::symmetric(100, geometric_spectrum(10, 100.0), 1);
        let p = Problem::from_spec(&spec, 10).unwrap();
        let init = init::initialize(&p, &InitSpec::nystrom(1.0, 2)).unwrap();
        let cfg = SolverConfig::new(Method::ScaledGd, Schedule::Fixed { eta: 0.5 }, 200, 1e-12);
        let tr = run(&p, &init, &cfg).unwrap();
        assert_eq!(tr.termination, Termination::Converged);
        assert!(tr.records.len() <= 61);
    }

    #[test]
    fn run_degenerate_budget_and_refusal() {
        let p = Problem::from_spec(&TargetSpec::symmetric(5, vec![1.0, 0.5], 1), 2).unwrap();
        let init = init::initialize(&p, &InitSpec::nystrom(1.0, 2)).unwrap();
        let cfg = SolverConfig::new(Method::ScaledGd, Schedule::Fixed { eta: 0.5 }, 0, 1e-12);
        let tr = run(&p, &init, &cfg).unwrap();
        assert!(tr.records.is_empty());
        assert_eq!(tr.termination, Termination::Budget);

        let mut bad = init.clone();
        bad.rank_ok = false;
        let cfg = SolverConfig::new(Method::ScaledGd, Schedule::Fixed { eta: 0.5 }, 10, 1e-12);
        assert_eq!(run(&p, &bad, &cfg).unwrap().termination, Termination::RefusedStart);
    }

    #[test]
    fn run_asym_ep_one_step() {
        let p = Problem::from_spec(&TargetSpec::asymmetric(12, 10, vec![1.0, 0.3, 0.05], 5), 3).unwrap();
        let init = init::initialize(&p, &InitSpec::nystrom(1.0, 6)).unwrap();
        let cfg = SolverConfig::new(Method::ScaledGd, Schedule::Fixed { eta: 1.0 }, 10, 1e-10);
        let tr = run(&p, &init, &cfg).unwrap();
        assert_eq!(tr.termination, Termination::Converged);
        assert_eq!(tr.last().unwrap().t, 1);
    }

    #[test]
    fn gd_divergence_is_recorded() {
        let p = Problem::from_spec(&TargetSpec::symmetric(6, vec![1.0, 0.5], 1), 2).unwrap();
        let init = init::initialize(&p, &InitSpec::nystrom(100.0, 2)).unwrap();
        let cfg = SolverConfig::new(Method::Gd, Schedule::Fixed { eta: 1.0 }, 500, 1e-12);
        assert_eq!(run(&p, &init, &cfg).unwrap().termination, Termination::Diverged);
    }

    #[test]
    fn schedule_text_round_trips() {
        for text in ["fixed:0.5", "two-phase:c=1.0,eta2=0.5", "two-phase:c=0.3,eta2=0.5,eta1=0.001,t1=40", "decay:0.5,0.1,0.01,0.001/50", "fixed:1e-5"] {
            let s: Schedule = text.parse().unwrap();
            assert_eq!(s.to_string(), text);
        }
        assert_eq!("decay:0.5,0.1".parse::<Schedule>().unwrap(), Schedule::StepDecay { levels: vec![0.5, 0.1], every: DEFAULT_DECAY_EVERY });
        assert!("fixed".parse::<Schedule>().is_err());
        assert!("two-phase:c=1".parse::<Schedule>().is_err());
        assert!("cosine:1".parse::<Schedule>().is_err());
    }

    #[test]
    fn schedules() {
        let p = Problem::from_spec(&TargetSpec::symmetric(6, vec![1.0, 0.1], 1), 2).unwrap();
        let mut s = Stepper::new(&Schedule::default_decay(), &p, 1000);
        assert_eq!(s.eta(0, 1.0), 0.5);
        assert_eq!(s.eta(50, 1.0), 0.1);
        assert_eq!(s.eta(10_000, 1.0), 0.001);
        let two = Schedule::TwoPhase { c: 1.0, eta1: None, t1: Some(5), eta2: 0.5 };
        let mut s = Stepper::new(&two, &p, 1000);
        let e1 = s.eta(0, 1.0);
        assert!((e1 - 1.0 / (1000.0 * p.a.norm())).abs() < 1e-15);
        // error below 2/(3κ²) switches early and stays switched
        assert_eq!(s.eta(1, 1e-5), 0.5);
        assert_eq!(s.eta(2, 1.0), 0.5);
        assert!(Schedule::Fixed { eta: 1.5 }.validate().is_err());
        assert!(Schedule::StepDecay { levels: vec![], every: 3 }.validate().is_err());
    }
}
