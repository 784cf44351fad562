//! Per-run verdicts: rate class plus a bitmap of invariant checks.

use std::fmt;

use mfcore::diagnostics::{classify_rate, sigma_r_lower_bound, IterRecord, RateEstimate, Termination};
use mfcore::init::InitKind;
use mfcore::problems::{Kind, Problem, Regime};
use mfcore::solvers::{Method, Schedule};

use crate::config::ExperimentConfig;
use crate::traceio::fmt_float;

pub const LEAKAGE_MAX: f64 = 1e-9;
pub const SIGMA_SLACK: f64 = 1e-9;
pub const CONTRACTION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Pass,
    Fail,
    NotApplicable,
}

impl Check {
    fn from_bool(ok: bool) -> Check {
        if ok {
            Check::Pass
        } else {
            Check::Fail
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Check::Pass => "pass",
            Check::Fail => "fail",
            Check::NotApplicable => "n/a",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub run_id: String,
    /// `None` when the trace is too short to classify.
    pub rate: Option<RateEstimate>,
    pub termination: String,
    pub align: Check,
    pub sigma_bound: Check,
    pub quad_contract: Check,
    pub weakopt_plateau: Check,
}

impl Verdict {
    pub fn verdict_name(&self) -> String {
        self.rate.as_ref().map(|r| r.verdict.to_string()).unwrap_or_else(|| "insufficient-data".into())
    }

    pub fn slope(&self) -> f64 {
        self.rate.as_ref().map(|r| r.phase2_slope).unwrap_or(f64::NAN)
    }

    pub fn row(&self) -> Vec<String> {
        vec![
            self.run_id.clone(),
            self.verdict_name(),
            fmt_float(self.slope()),
            self.termination.clone(),
            self.align.to_string(),
            self.sigma_bound.to_string(),
            self.quad_contract.to_string(),
            self.weakopt_plateau.to_string(),
        ]
    }

    /// Verdict with no invariant checks, e.g. for adapter runs.
    pub fn rate_only(run_id: String, metric: &[f64], scale: f64, termination: String) -> Verdict {
        Verdict {
            run_id,
            rate: classify_rate(metric, scale).ok(),
            termination,
            align: Check::NotApplicable,
            sigma_bound: Check::NotApplicable,
            quad_contract: Check::NotApplicable,
            weakopt_plateau: Check::NotApplicable,
        }
    }
}

fn sketched(init: InitKind) -> bool {
    matches!(init, InitKind::Nystrom | InitKind::NystromViaGradient)
}

fn scaled(method: Method) -> bool {
    matches!(method, Method::ScaledGd | Method::ScaledGdPinv)
}

fn fixed_eta(schedule: &Schedule) -> Option<f64> {
    match schedule {
        Schedule::Fixed { eta } => Some(*eta),
        _ => None,
    }
}

/// The series the rate classifier sees and the scale of its round-off floor:
/// weak-optimality residual for UP runs, optimality error otherwise.
pub fn metric(problem: &Problem, records: &[IterRecord]) -> (Vec<f64>, f64) {
    if problem.regime == Regime::Up {
        (records.iter().map(|r| r.weak_opt).collect(), (problem.r as f64).sqrt())
    } else {
        (records.iter().map(|r| r.error).collect(), problem.a.norm())
    }
}

/// Best guess at how a run ended, for traces read back from disk.
pub fn infer_termination(cfg: &ExperimentConfig, problem: &Problem, records: &[IterRecord]) -> Termination {
    let (m, _) = metric(problem, records);
    match m.last() {
        None if cfg.effective_max_iters() == 0 => Termination::Budget,
        None => Termination::RefusedStart,
        Some(v) if !v.is_finite() => Termination::Diverged,
        Some(v) if *v <= cfg.tol => Termination::Converged,
        _ if records.len() > cfg.effective_max_iters() => Termination::Budget,
        _ => Termination::SingularGram,
    }
}

pub fn assess(run_id: String, cfg: &ExperimentConfig, problem: &Problem, records: &[IterRecord], termination: Termination) -> Verdict {
    let (series, scale) = metric(problem, records);
    let rate = classify_rate(&series, scale).ok();
    let na = Check::NotApplicable;
    let nystrom_scaled = sketched(cfg.init) && scaled(cfg.solver) && !records.is_empty();

    let align = if nystrom_scaled {
        let worst = records.iter().map(|r| r.leakage_x.max(r.leakage_y.unwrap_or(0.0))).fold(0.0, f64::max);
        Check::from_bool(worst <= LEAKAGE_MAX)
    } else {
        na
    };

    let sym_full = nystrom_scaled && problem.kind == Kind::Symmetric && problem.regime != Regime::Up;
    let sigma_bound = match fixed_eta(&cfg.schedule) {
        Some(eta) if sym_full => {
            let sb0 = records[0].sigma_r_core;
            let sa = problem.sigma_min();
            let ok = records
                .windows(2)
                .enumerate()
                .all(|(t, w)| w[1].sigma_r_core >= sigma_r_lower_bound(t, eta, sb0, sa) - SIGMA_SLACK);
            Check::from_bool(ok)
        }
        _ => na,
    };

    let quad_contract = match fixed_eta(&cfg.schedule) {
        Some(eta) if sym_full && eta == 0.5 => {
            let k = problem.kappa;
            let entry = records
                .iter()
                .position(|r| r.error <= 2.0 / (3.0 * k * k) && r.sigma_r_core >= problem.sigma_min() / 3.0);
            match entry {
                Some(t0) => Check::from_bool(
                    records[t0..]
                        .windows(2)
                        .all(|w| w[1].error <= 0.75 * k * k * w[0].error * w[0].error + CONTRACTION_SLACK),
                ),
                None => na,
            }
        }
        _ => na,
    };

    let weakopt_plateau = match records.last() {
        Some(last) if problem.regime == Regime::Up && scaled(cfg.solver) => {
            Check::from_bool(last.weak_opt <= cfg.tol.max(last.eta_used * problem.r as f64))
        }
        _ => na,
    };

    Verdict { run_id, rate, termination: termination.to_string(), align, sigma_bound, quad_contract, weakopt_plateau }
}
