use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfbench::commands::{self, BenchError, Grid};
use mfbench::config::{ConfigError, ExperimentConfig, NoraExperiment};
use mfbench::presets::{self, Scale};
use mfbench::traceio::TraceIoError;
use mfcore::problems::Regime;

#[derive(Parser)]
#[command(name = "mfbench", version, about = "Run and judge low-rank factorization experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one config (or a preset's configs) and write traces plus verdicts.csv
    Run(ExperimentArgs),
    /// Run the cross product of up to three parameters over the base config(s)
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Grid axis as key=v1,v2,... (repeat for up to three axes;
        /// schedule values are separated by ';')
        #[arg(long = "grid", value_name = "KEY=VALUES")]
        grid: Vec<String>,
    },
    /// Print verdicts and invariant checks for trace files
    Report {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Train a NoRA / NoRA+ adapter on the linear toy problem
    Nora(NoraArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// fig1a | fig1b | fig1c | fig5a | fig5b
    #[arg(long)]
    preset: Option<String>,
    /// desk | full (presets and --regime only)
    #[arg(long, default_value = "desk")]
    scale: String,
    /// Config file of key=value pairs
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    label: Option<String>,
    /// sym | asym
    #[arg(long)]
    kind: Option<String>,
    /// ep | op | up; alone, selects that synthetic problem
    #[arg(long)]
    regime: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    n: Option<String>,
    /// list:a,b,... | lin:start,step,count[,tail...] | geom:count,kappa
    #[arg(long)]
    spectrum: Option<String>,
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    target_seed: Option<String>,
    /// nystrom | small | perturbed | grad
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    xi: Option<String>,
    #[arg(long)]
    zeta: Option<String>,
    #[arg(long)]
    xi_n: Option<String>,
    /// gd | scaledgd | scaledgd-pinv | scaledgd-lambda
    #[arg(long)]
    solver: Option<String>,
    /// Fixed step size
    #[arg(long, conflicts_with = "schedule")]
    eta: Option<String>,
    /// fixed:η | two-phase:c=..,eta2=..[,eta1=..][,t1=..] | decay:η,η,.../every
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    /// Base init seed; repeat i uses seed + i
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    repeats: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<String>,
    /// Any other config key, as key=value
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ExperimentArgs {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        let pairs: [(&'static str, &Option<String>); 22] = [
            ("label", &self.label),
            ("kind", &self.kind),
            ("regime", &self.regime),
            ("m", &self.m),
            ("n", &self.n),
            ("spectrum", &self.spectrum),
            ("r", &self.r),
            ("target_seed", &self.target_seed),
            ("init", &self.init),
            ("xi", &self.xi),
            ("zeta", &self.zeta),
            ("xi_n", &self.xi_n),
            ("solver", &self.solver),
            ("eta", &self.eta),
            ("schedule", &self.schedule),
            ("lambda", &self.lambda),
            ("max_iters", &self.max_iters),
            ("horizon", &self.horizon),
            ("tol", &self.tol),
            ("seed", &self.seed),
            ("repeats", &self.repeats),
            ("out", &self.out),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k, v))).collect()
    }

    fn configs(&self) -> Result<Vec<ExperimentConfig>, BenchError> {
        let scale: Scale = self.scale.parse().map_err(|e: String| ConfigError::BadValue {
            key: "scale".into(),
            value: self.scale.clone(),
            reason: e,
        })?;
        let mut bases = if let Some(name) = &self.preset {
            presets::expand(name, scale).map_err(|e| ConfigError::BadValue { key: "preset".into(), value: name.clone(), reason: e })?
        } else if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|source| TraceIoError::Io { path: path.clone(), source })?;
            vec![ExperimentConfig::parse(&text)?]
        } else if let Some(reg) = &self.regime {
            let regime: Regime = reg
                .parse()
                .map_err(|e: String| ConfigError::BadValue { key: "regime".into(), value: reg.clone(), reason: e })?;
            vec![presets::regime_base(regime, scale)]
        } else {
            vec![ExperimentConfig::default()]
        };
        let overrides = self.overrides();
        for cfg in &mut bases {
            for (k, v) in &overrides {
                cfg.set(k, v)?;
            }
            for kv in &self.set {
                let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::Syntax { line: 1, token: kv.clone() })?;
                cfg.set(k, v)?;
            }
        }
        Ok(bases)
    }
}

#[derive(Args)]
struct NoraArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    label: Option<String>,
    /// nora | nora+
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    spectrum: Option<String>,
    #[arg(long)]
    target_seed: Option<String>,
    #[arg(long)]
    xi: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    /// Learning rate
    #[arg(long)]
    eta: Option<String>,
    /// Skip the Frobenius normalization of the preconditioner
    #[arg(long)]
    no_normalize: bool,
    #[arg(long)]
    max_iters: Option<String>,
    /// Relative tolerance on ‖B − W₀ − XYᵀ‖_F
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    repeats: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl NoraArgs {
    fn config(&self) -> Result<NoraExperiment, BenchError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| TraceIoError::Io { path: path.clone(), source })?;
                NoraExperiment::parse(&text)?
            }
            None => NoraExperiment::default(),
        };
        let pairs: [(&str, &Option<String>); 14] = [
            ("label", &self.label),
            ("variant", &self.variant),
            ("m", &self.m),
            ("n", &self.n),
            ("r", &self.r),
            ("spectrum", &self.spectrum),
            ("target_seed", &self.target_seed),
            ("xi", &self.xi),
            ("lambda", &self.lambda),
            ("lr", &self.eta),
            ("max_iters", &self.max_iters),
            ("rtol", &self.tol),
            ("seed", &self.seed),
            ("repeats", &self.repeats),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        if let Some(out) = &self.out {
            cfg.set("out", out)?;
        }
        if self.no_normalize {
            cfg.normalize = false;
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::Syntax { line: 1, token: kv.clone() })?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

fn print_verdict(v: &mfbench::verdict::Verdict, path: &std::path::Path) {
    println!(
        "{}: verdict={} slope={:.3} termination={} align={} sigma_bound={} quad_contract={} weakopt_plateau={} -> {}",
        v.run_id,
        v.verdict_name(),
        v.slope(),
        v.termination,
        v.align,
        v.sigma_bound,
        v.quad_contract,
        v.weakopt_plateau,
        path.display()
    );
}

fn dispatch(cli: Cli) -> Result<(), BenchError> {
    match cli.cmd {
        Cmd::Run(args) => {
            for o in commands::cmd_run(&args.configs()?)? {
                print_verdict(&o.verdict, &o.trace_path);
            }
        }
        Cmd::Sweep { exp, grid } => {
            let grid = Grid::parse(&grid)?;
            for row in commands::cmd_sweep(&exp.configs()?, &grid)? {
                let params: Vec<String> = row.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                print!("cell {} [{}] ", row.cell, params.join(" "));
                print_verdict(&row.outcome.verdict, &row.outcome.trace_path);
            }
        }
        Cmd::Report { traces } => print!("{}", commands::cmd_report(&traces)?),
        Cmd::Nora(args) => {
            for o in commands::cmd_nora(&args.config()?)? {
                print_verdict(&o.verdict, &o.trace_path);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
