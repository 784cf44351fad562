//! Figure presets. Each expands to a fixed list of explicit configs.

use std::fmt;
use std::str::FromStr;

use mfcore::init::InitKind;
use mfcore::problems::{Kind, Regime};
use mfcore::solvers::{Method, Schedule};

use crate::config::{ExperimentConfig, EP_SPECTRUM, UP_SPECTRUM};

pub const PRESETS: &[&str] = &["fig1a", "fig1b", "fig1c", "fig5a", "fig5b"];

/// `desk` keeps the ranks and spectra of the original setup but shrinks m to
/// 100; `full` uses m = 1000.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

impl Scale {
    pub fn m(self) -> usize {
        match self {
            Scale::Desk => 100,
            Scale::Full => 1000,
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Desk => "desk",
            Scale::Full => "full",
        })
    }
}

impl FromStr for Scale {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            _ => Err(format!("unknown scale '{s}' (expected desk|full)")),
        }
    }
}

pub const UP_ETAS: [f64; 3] = [0.5, 0.1, 0.01];
pub const XI_SWEEP: [f64; 3] = [0.1, 1.0, 10.0];
pub const XI_N_SWEEP: [f64; 2] = [1e-6, 1e-3];
/// Fixed-η UP runs all cover the same η·t horizon so plateaus compare fairly.
pub const UP_HORIZON: f64 = 30.0;

/// Base config for one of the three symmetric synthetic problems.
pub fn regime_base(regime: Regime, scale: Scale) -> ExperimentConfig {
    let (spectrum, r) = match regime {
        Regime::Ep => (EP_SPECTRUM, 20),
        Regime::Op => (EP_SPECTRUM, 60),
        Regime::Up => (UP_SPECTRUM, 20),
    };
    let mut c = ExperimentConfig {
        kind: Kind::Symmetric,
        m: scale.m(),
        spectrum: spectrum.into(),
        r,
        regime: Some(regime),
        ..ExperimentConfig::default()
    };
    if regime == Regime::Op {
        c.solver = Method::ScaledGdPinv;
    }
    if regime == Regime::Up {
        c.schedule = Schedule::default_decay();
        c.max_iters = 4000;
        c.tol = 1e-6;
    }
    c
}

fn labeled(mut c: ExperimentConfig, label: &str) -> ExperimentConfig {
    c.label = label.into();
    c
}

fn gd_small(base: &ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig {
        init: InitKind::SmallGaussian,
        solver: Method::Gd,
        schedule: Schedule::Fixed { eta: 0.01 },
        max_iters: 1000,
        ..labeled(base.clone(), "gd-small")
    }
}

fn xi_and_noise(base: &ExperimentConfig) -> Vec<ExperimentConfig> {
    let mut out: Vec<ExperimentConfig> =
        XI_SWEEP.iter().map(|&xi| ExperimentConfig { xi, ..labeled(base.clone(), &format!("xi-{xi:?}")) }).collect();
    out.extend(XI_N_SWEEP.iter().map(|&xi_n| ExperimentConfig {
        init: InitKind::PerturbedNystrom,
        xi_n,
        ..labeled(base.clone(), &format!("xin-{xi_n:?}"))
    }));
    out
}

pub fn expand(name: &str, scale: Scale) -> Result<Vec<ExperimentConfig>, String> {
    let ep = regime_base(Regime::Ep, scale);
    let op = regime_base(Regime::Op, scale);
    let up = regime_base(Regime::Up, scale);
    let configs = match name {
        "fig1a" => vec![
            gd_small(&ep),
            ExperimentConfig { init: InitKind::SmallGaussian, ..labeled(ep.clone(), "scaledgd-small") },
            labeled(ep, "scaledgd-nystrom"),
        ],
        "fig1b" => xi_and_noise(&ep),
        "fig1c" => {
            let mut v: Vec<ExperimentConfig> = UP_ETAS
                .iter()
                .map(|&eta| ExperimentConfig {
                    schedule: Schedule::Fixed { eta },
                    horizon: Some(UP_HORIZON),
                    tol: 1e-12,
                    ..labeled(up.clone(), &format!("eta-{eta:?}"))
                })
                .collect();
            v.push(labeled(up, "step-decay"));
            v
        }
        "fig5a" => vec![
            gd_small(&op),
            ExperimentConfig { solver: Method::ScaledGdLambda, max_iters: 400, ..labeled(op.clone(), "scaledgd-lambda") },
            labeled(op, "scaledgd-nystrom"),
        ],
        "fig5b" => xi_and_noise(&op),
        _ => return Err(format!("unknown preset '{name}' (expected one of {})", PRESETS.join(", "))),
    };
    Ok(configs.into_iter().map(|c| ExperimentConfig { label: format!("{name}-{}", c.label), ..c }).collect())
}
