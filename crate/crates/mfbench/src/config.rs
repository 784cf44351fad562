//! Experiment configs as flat `key=value` text.
//!
//! The canonical form is one line, keys in a fixed order, separated by single
//! spaces; that line is what goes into the `# config:` header of every trace.
//! Parsing is more lenient: any whitespace separates pairs and `#` starts a
//! comment, so a config file can put one key per line.

use std::fmt;

use mfcore::init::{InitKind, InitSpec};
use mfcore::nora::{self, LinearFinetuneProblem, NoraConfig, Variant};
use mfcore::problems::{self, classify_regime, Kind, Problem, Regime, TargetSpec};
use mfcore::solvers::{Method, Schedule, SolverConfig};
use mfcore::Seed;
use thiserror::Error;

pub const EP_SPECTRUM: &str = "lin:1.0,-0.01,19,0.01";
pub const UP_SPECTRUM: &str = "lin:1.0,-0.01,37,0.05,0.025,0.01";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("bad value '{value}' for key '{key}': {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("duplicate config key '{0}'")]
    Duplicate(String),
    #[error("line {line}: expected key=value, got '{token}'")]
    Syntax { line: usize, token: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn bad(key: &str, value: &str, reason: impl fmt::Display) -> ConfigError {
    ConfigError::BadValue { key: key.into(), value: value.into(), reason: reason.to_string() }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| bad(key, value, e))
}

fn parse_word(key: &str, value: &str) -> Result<String, ConfigError> {
    let ok = !value.is_empty() && value.chars().all(|c| c.is_ascii_alphanumeric() || "._+-/".contains(c));
    if ok {
        Ok(value.to_string())
    } else {
        Err(bad(key, value, "only [A-Za-z0-9._+-/] allowed"))
    }
}

/// Split config text into (key, value) pairs, rejecting repeats.
pub fn tokenize(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .filter(|(k, _)| !k.is_empty())
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, token: tok.into() })?;
            if out.iter().any(|(seen, _)| seen == k) {
                return Err(ConfigError::Duplicate(k.into()));
            }
            out.push((k.into(), v.into()));
        }
    }
    Ok(out)
}

/// One experiment: target, initializer, solver, seeds and output location.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub label: String,
    pub kind: Kind,
    pub m: usize,
    /// Column count for asymmetric targets; `None` means square.
    pub n: Option<usize>,
    pub spectrum: String,
    pub r: usize,
    /// Expected regime, checked against the one implied by `spectrum` and `r`.
    pub regime: Option<Regime>,
    pub target_seed: Seed,
    pub init: InitKind,
    pub xi: f64,
    pub zeta: f64,
    pub xi_n: f64,
    pub solver: Method,
    pub schedule: Schedule,
    pub lambda: f64,
    pub max_iters: usize,
    /// With a fixed step, run ⌈horizon/η⌉ iterations instead of `max_iters`.
    pub horizon: Option<f64>,
    pub tol: f64,
    pub seed: Seed,
    pub repeats: usize,
    pub out: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            label: "run".into(),
            kind: Kind::Symmetric,
            m: 100,
            n: None,
            spectrum: EP_SPECTRUM.into(),
            r: 20,
            regime: None,
            target_seed: 0,
            init: InitKind::Nystrom,
            xi: mfcore::init::DEFAULT_XI,
            zeta: mfcore::init::DEFAULT_ZETA,
            xi_n: 0.0,
            solver: Method::ScaledGd,
            schedule: Schedule::Fixed { eta: 0.5 },
            lambda: mfcore::solvers::DEFAULT_LAMBDA,
            max_iters: 200,
            horizon: None,
            tol: 1e-12,
            seed: 0,
            repeats: 1,
            out: "mfbench-out".into(),
        }
    }
}

pub const EXPERIMENT_KEYS: &[&str] = &[
    "label", "kind", "m", "n", "spectrum", "r", "regime", "target_seed", "init", "xi", "zeta", "xi_n", "solver",
    "schedule", "eta", "lambda", "max_iters", "horizon", "tol", "seed", "repeats", "out",
];

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        for (k, v) in tokenize(text)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    /// Set one key. `eta` is shorthand for `schedule=fixed:<eta>`; `n` and
    /// `regime` accept `none`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "label" => self.label = parse_word(key, value)?,
            "kind" => self.kind = parse(key, value)?,
            "m" => self.m = parse(key, value)?,
            "n" => self.n = if value == "none" { None } else { Some(parse(key, value)?) },
            "spectrum" => {
                problems::parse_spectrum(value).map_err(|e| bad(key, value, e))?;
                self.spectrum = value.into();
            }
            "r" => self.r = parse(key, value)?,
            "regime" => self.regime = if value == "none" { None } else { Some(parse(key, value)?) },
            "target_seed" => self.target_seed = parse(key, value)?,
            "init" => self.init = parse(key, value)?,
            "xi" => self.xi = parse(key, value)?,
            "zeta" => self.zeta = parse(key, value)?,
            "xi_n" => self.xi_n = parse(key, value)?,
            "solver" => self.solver = parse(key, value)?,
            "schedule" => self.schedule = parse(key, value)?,
            "eta" => self.schedule = Schedule::Fixed { eta: parse(key, value)? },
            "lambda" => self.lambda = parse(key, value)?,
            "max_iters" => self.max_iters = parse(key, value)?,
            "horizon" => self.horizon = if value == "none" { None } else { Some(parse(key, value)?) },
            "tol" => self.tol = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "repeats" => self.repeats = parse(key, value)?,
            "out" => self.out = parse_word(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    pub fn cols(&self) -> usize {
        self.n.unwrap_or(self.m)
    }

    pub fn spectrum_values(&self) -> Result<Vec<f64>, ConfigError> {
        problems::parse_spectrum(&self.spectrum).map_err(|e| bad("spectrum", &self.spectrum, e))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));
        if self.m == 0 || self.cols() == 0 || self.r == 0 {
            return invalid("m, n and r must be ≥ 1".into());
        }
        if self.kind == Kind::Symmetric && self.n.is_some_and(|n| n != self.m) {
            return invalid(format!("symmetric target needs n == m, got n = {}", self.cols()));
        }
        let spec = self.spectrum_values()?;
        if spec.len() > self.m.min(self.cols()) {
            return invalid(format!("spectrum has {} values but the target is {}×{}", spec.len(), self.m, self.cols()));
        }
        if let Some(want) = self.regime {
            let got = classify_regime(spec.len(), self.r);
            if got != want {
                return invalid(format!("regime={want} but rank(A) = {} and r = {} make it {got}", spec.len(), self.r));
            }
        }
        if !(self.xi > 0.0 && self.xi.is_finite()) || !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return invalid("xi and zeta must be positive".into());
        }
        if !(self.xi_n >= 0.0 && self.xi_n.is_finite()) {
            return invalid("xi_n must be ≥ 0".into());
        }
        if self.solver == Method::ScaledGdLambda && self.kind == Kind::Asymmetric {
            return invalid("scaledgd-lambda is only defined for symmetric targets".into());
        }
        if self.repeats == 0 {
            return invalid("repeats must be ≥ 1".into());
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return invalid("horizon must be positive".into());
            }
            if !matches!(self.schedule, Schedule::Fixed { .. }) {
                return invalid("horizon needs a fixed schedule".into());
            }
        }
        self.solver_config().validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn target_spec(&self) -> Result<TargetSpec, ConfigError> {
        let spectrum = self.spectrum_values()?;
        Ok(match self.kind {
            Kind::Symmetric => TargetSpec::symmetric(self.m, spectrum, self.target_seed),
            Kind::Asymmetric => TargetSpec::asymmetric(self.m, self.cols(), spectrum, self.target_seed),
        })
    }

    pub fn problem(&self) -> Result<Problem, ConfigError> {
        Problem::from_spec(&self.target_spec()?, self.r).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn init_spec(&self, seed: Seed) -> InitSpec {
        InitSpec { kind: self.init, xi: self.xi, zeta: self.zeta, xi_n: self.xi_n, seed }
    }

    pub fn effective_max_iters(&self) -> usize {
        match (self.horizon, &self.schedule) {
            (Some(h), Schedule::Fixed { eta }) => (h / eta).ceil() as usize,
            _ => self.max_iters,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut c = SolverConfig::new(self.solver, self.schedule.clone(), self.effective_max_iters(), self.tol);
        c.lambda = self.lambda;
        c
    }

    /// Init seeds for the repeats: seed, seed + 1, …
    pub fn seeds(&self) -> impl Iterator<Item = Seed> + '_ {
        (0..self.repeats as u64).map(move |i| self.seed.wrapping_add(i))
    }

    pub fn run_id(&self, seed: Seed) -> String {
        format!("{}-s{seed}", self.label)
    }

    /// The config of one repeat: exactly reproduces the trace for `seed`.
    pub fn single(&self, seed: Seed) -> Self {
        Self { seed, repeats: 1, ..self.clone() }
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "label={} kind={} m={}", self.label, self.kind, self.m)?;
        if let Some(n) = self.n {
            write!(f, " n={n}")?;
        }
        write!(f, " spectrum={} r={}", self.spectrum, self.r)?;
        if let Some(reg) = self.regime {
            write!(f, " regime={reg}")?;
        }
        write!(
            f,
            " target_seed={} init={} xi={:?} zeta={:?} xi_n={:?} solver={} schedule={} lambda={:?} max_iters={}",
            self.target_seed, self.init, self.xi, self.zeta, self.xi_n, self.solver, self.schedule, self.lambda, self.max_iters
        )?;
        if let Some(h) = self.horizon {
            write!(f, " horizon={h:?}")?;
        }
        write!(f, " tol={:?} seed={} repeats={} out={}", self.tol, self.seed, self.repeats, self.out)
    }
}

/// A NoRA / NoRA+ run on the linear-adapter toy.
#[derive(Debug, Clone, PartialEq)]
pub struct NoraExperiment {
    pub label: String,
    pub variant: Variant,
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub spectrum: String,
    pub target_seed: Seed,
    pub xi: f64,
    pub lambda: f64,
    pub lr: f64,
    pub normalize: bool,
    pub max_iters: usize,
    /// Stop once the error is ≤ rtol·‖B − W₀‖_F.
    pub rtol: f64,
    pub seed: Seed,
    pub repeats: usize,
    pub out: String,
}

impl Default for NoraExperiment {
    fn default() -> Self {
        NoraExperiment {
            label: "nora".into(),
            variant: Variant::NoraPlus,
            m: 32,
            n: 32,
            r: 4,
            spectrum: "list:1.0,0.7,0.4,0.2".into(),
            target_seed: 0,
            xi: nora::DEFAULT_XI,
            lambda: nora::DEFAULT_LAMBDA,
            lr: 0.5,
            normalize: true,
            max_iters: 1000,
            rtol: 1e-6,
            seed: 100,
            repeats: 1,
            out: "mfbench-out".into(),
        }
    }
}

pub const NORA_KEYS: &[&str] = &[
    "label", "variant", "m", "n", "r", "spectrum", "target_seed", "xi", "lambda", "lr", "normalize", "max_iters", "rtol",
    "seed", "repeats", "out",
];

impl NoraExperiment {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = NoraExperiment::default();
        for (k, v) in tokenize(text)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "label" => self.label = parse_word(key, value)?,
            "variant" => self.variant = parse(key, value)?,
            "m" => self.m = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "r" => self.r = parse(key, value)?,
            "spectrum" => {
                problems::parse_spectrum(value).map_err(|e| bad(key, value, e))?;
                self.spectrum = value.into();
            }
            "target_seed" => self.target_seed = parse(key, value)?,
            "xi" => self.xi = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "normalize" => self.normalize = parse(key, value)?,
            "max_iters" => self.max_iters = parse(key, value)?,
            "rtol" => self.rtol = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "repeats" => self.repeats = parse(key, value)?,
            "out" => self.out = parse_word(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let spec = problems::parse_spectrum(&self.spectrum).map_err(|e| bad("spectrum", &self.spectrum, e))?;
        if self.m == 0 || self.n == 0 || self.r == 0 || self.repeats == 0 {
            return Err(ConfigError::Invalid("m, n, r and repeats must be ≥ 1".into()));
        }
        if spec.len() > self.m.min(self.n) {
            return Err(ConfigError::Invalid(format!("spectrum has {} values for a {}×{} update", spec.len(), self.m, self.n)));
        }
        if !(self.xi > 0.0) || !(self.lambda >= 0.0) || !(self.lr > 0.0) || !(self.rtol > 0.0) {
            return Err(ConfigError::Invalid("need xi > 0, lambda ≥ 0, lr > 0, rtol > 0".into()));
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<LinearFinetuneProblem, ConfigError> {
        let spec = problems::parse_spectrum(&self.spectrum).map_err(|e| bad("spectrum", &self.spectrum, e))?;
        nora::toy_problem(self.m, self.n, self.r, &spec, self.target_seed).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn nora_config(&self, scale: f64, seed: Seed) -> NoraConfig {
        NoraConfig {
            xi: self.xi,
            lambda: self.lambda,
            lr: self.lr,
            normalize: self.normalize,
            max_iters: self.max_iters,
            tol: self.rtol * scale,
            seed,
        }
    }

    pub fn seeds(&self) -> impl Iterator<Item = Seed> + '_ {
        (0..self.repeats as u64).map(move |i| self.seed.wrapping_add(i))
    }

    pub fn run_id(&self, seed: Seed) -> String {
        format!("{}-s{seed}", self.label)
    }

    /// The config of one repeat: exactly reproduces the trace for `seed`.
    pub fn single(&self, seed: Seed) -> Self {
        Self { seed, repeats: 1, ..self.clone() }
    }
}

impl fmt::Display for NoraExperiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "label={} variant={} m={} n={} r={} spectrum={} target_seed={} xi={:?} lambda={:?} lr={:?} normalize={} max_iters={} rtol={:?} seed={} repeats={} out={}",
            self.label,
            self.variant,
            self.m,
            self.n,
            self.r,
            self.spectrum,
            self.target_seed,
            self.xi,
            self.lambda,
            self.lr,
            self.normalize,
            self.max_iters,
            self.rtol,
            self.seed,
            self.repeats,
            self.out
        )
    }
}

/// Either kind of config, as found in a trace header.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyConfig {
    Experiment(ExperimentConfig),
    Nora(NoraExperiment),
}

impl AnyConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let pairs = tokenize(text)?;
        if pairs.iter().any(|(k, _)| k == "variant") {
            NoraExperiment::parse(text).map(AnyConfig::Nora)
        } else {
            ExperimentConfig::parse(text).map(AnyConfig::Experiment)
        }
    }
}
