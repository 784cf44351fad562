//! The `run`, `sweep`, `report` and `nora` subcommands, minus argument parsing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mfcore::diagnostics::Trace;
use mfcore::init;
use mfcore::nora;
use thiserror::Error;

use crate::config::{AnyConfig, ConfigError, ExperimentConfig, NoraExperiment};
use crate::traceio::{self, fmt_float, TraceIoError, VERDICT_HEADER};
use crate::verdict::{self, Verdict};

pub const MAX_GRID_AXES: usize = 3;
pub const VERDICTS_FILE: &str = "verdicts.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] TraceIoError),
    #[error("{0}")]
    Solver(String),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Solver(_) => 2,
            BenchError::Io(_) => 3,
        }
    }
}

/// One finished run: where its trace went and how it was judged.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub trace_path: PathBuf,
    pub verdict: Verdict,
    pub final_error: f64,
    pub final_weak_opt: f64,
}

fn execute(cfg: &ExperimentConfig, trace_name: impl Fn(u64) -> String) -> Result<Vec<RunOutcome>, BenchError> {
    cfg.validate()?;
    let problem = cfg.problem()?;
    let solver = cfg.solver_config();
    let mut out = Vec::new();
    for seed in cfg.seeds() {
        let start = init::initialize(&problem, &cfg.init_spec(seed)).map_err(|e| BenchError::Solver(e.to_string()))?;
        let trace: Trace = mfcore::solvers::run(&problem, &start, &solver).map_err(|e| BenchError::Solver(e.to_string()))?;
        let path = Path::new(&cfg.out).join(format!("{}.csv", trace_name(seed)));
        traceio::write_trace(&path, &cfg.single(seed).to_string(), &trace.records)?;
        let verdict = verdict::assess(cfg.run_id(seed), cfg, &problem, &trace.records, trace.termination);
        let last = trace.last();
        out.push(RunOutcome {
            config: cfg.clone(),
            seed,
            trace_path: path,
            verdict,
            final_error: last.map(|r| r.error).unwrap_or(f64::NAN),
            final_weak_opt: last.map(|r| r.weak_opt).unwrap_or(f64::NAN),
        });
    }
    Ok(out)
}

/// Write one verdict file per distinct output directory, in first-seen order.
fn write_verdicts(outcomes: &[RunOutcome]) -> Result<Vec<PathBuf>, BenchError> {
    let mut dirs: Vec<&str> = Vec::new();
    for o in outcomes {
        if !dirs.contains(&o.config.out.as_str()) {
            dirs.push(&o.config.out);
        }
    }
    let mut written = Vec::new();
    for dir in dirs {
        let rows: Vec<Vec<String>> = outcomes.iter().filter(|o| o.config.out == dir).map(|o| o.verdict.row()).collect();
        let path = Path::new(dir).join(VERDICTS_FILE);
        traceio::write_rows(&path, &VERDICT_HEADER, &rows)?;
        written.push(path);
    }
    Ok(written)
}

pub fn cmd_run(configs: &[ExperimentConfig]) -> Result<Vec<RunOutcome>, BenchError> {
    if configs.is_empty() {
        return Err(ConfigError::Invalid("nothing to run".into()).into());
    }
    for c in configs {
        c.validate()?;
    }
    let mut all = Vec::new();
    for c in configs {
        all.extend(execute(c, |seed| c.run_id(seed))?);
    }
    write_verdicts(&all)?;
    Ok(all)
}

/// A parameter grid: up to three (key, values) axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub axes: Vec<(String, Vec<String>)>,
}

impl Grid {
    /// Parse `key=v1,v2,…` specs.
    pub fn parse(specs: &[String]) -> Result<Grid, ConfigError> {
        let mut axes: Vec<(String, Vec<String>)> = Vec::new();
        for s in specs {
            let (k, vs) = s
                .split_once('=')
                .ok_or_else(|| ConfigError::Invalid(format!("grid axis '{s}' must look like key=v1,v2,...")))?;
            // schedule values contain commas of their own, so they are split on ';'
            let sep = if k == "schedule" { ';' } else { ',' };
            let values: Vec<String> = vs.split(sep).filter(|v| !v.is_empty()).map(String::from).collect();
            if values.is_empty() {
                return Err(ConfigError::Invalid(format!("grid axis '{k}' has no values")));
            }
            if axes.iter().any(|(seen, _)| seen == k) {
                return Err(ConfigError::Duplicate(k.into()));
            }
            axes.push((k.into(), values));
        }
        let grid = Grid { axes };
        grid.check()?;
        Ok(grid)
    }

    fn check(&self) -> Result<(), ConfigError> {
        if self.axes.is_empty() || self.axes.iter().any(|(_, v)| v.is_empty()) {
            return Err(ConfigError::Invalid("empty sweep grid".into()));
        }
        if self.axes.len() > MAX_GRID_AXES {
            return Err(ConfigError::Invalid(format!("a sweep takes at most {MAX_GRID_AXES} parameters")));
        }
        Ok(())
    }

    /// Cross product, first axis varying slowest.
    pub fn cells(&self) -> Vec<Vec<(String, String)>> {
        let mut cells: Vec<Vec<(String, String)>> = vec![Vec::new()];
        for (k, values) in &self.axes {
            cells = cells
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |v| {
                        let mut c = prefix.clone();
                        c.push((k.clone(), v.clone()));
                        c
                    })
                })
                .collect();
        }
        cells
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub cell: usize,
    pub params: Vec<(String, String)>,
    pub outcome: RunOutcome,
}

pub fn cmd_sweep(bases: &[ExperimentConfig], grid: &Grid) -> Result<Vec<SweepRow>, BenchError> {
    grid.check()?;
    if bases.is_empty() {
        return Err(ConfigError::Invalid("nothing to sweep".into()).into());
    }
    // build and validate every cell before running any of them
    let mut jobs = Vec::new();
    for base in bases {
        for (i, cell) in grid.cells().into_iter().enumerate() {
            let mut cfg = base.clone();
            for (k, v) in &cell {
                cfg.set(k, v)?;
            }
            cfg.validate()?;
            jobs.push((i, cell, cfg));
        }
    }
    let mut rows = Vec::new();
    for (i, cell, cfg) in jobs {
        for outcome in execute(&cfg, |seed| format!("{}-c{i}-s{seed}", cfg.label))? {
            rows.push(SweepRow { cell: i, params: cell.clone(), outcome });
        }
    }
    let outcomes: Vec<RunOutcome> = rows.iter().map(|r| r.outcome.clone()).collect();
    write_verdicts(&outcomes)?;

    let keys: Vec<&str> = grid.axes.iter().map(|(k, _)| k.as_str()).collect();
    let mut header = vec!["cell", "label"];
    header.extend(&keys);
    header.extend(["seed", "final_error", "final_weak_opt", "plateau", "verdict", "phase2_slope", "termination"]);
    let mut dirs: Vec<&str> = Vec::new();
    for r in &rows {
        if !dirs.contains(&r.outcome.config.out.as_str()) {
            dirs.push(&r.outcome.config.out);
        }
    }
    for dir in dirs {
        let table: Vec<Vec<String>> = rows
            .iter()
            .filter(|r| r.outcome.config.out == dir)
            .map(|r| {
                let o = &r.outcome;
                let up = o.config.r < o.config.spectrum_values().map(|s| s.len()).unwrap_or(0);
                let mut row = vec![r.cell.to_string(), o.config.label.clone()];
                row.extend(r.params.iter().map(|(_, v)| v.clone()));
                row.extend([
                    o.seed.to_string(),
                    fmt_float(o.final_error),
                    fmt_float(o.final_weak_opt),
                    if up { fmt_float(o.final_weak_opt) } else { String::new() },
                    o.verdict.verdict_name(),
                    fmt_float(o.verdict.slope()),
                    o.verdict.termination.clone(),
                ]);
                row
            })
            .collect();
        traceio::write_rows(&Path::new(dir).join(SUMMARY_FILE), &header, &table)?;
    }
    Ok(rows)
}

/// Re-derive a verdict for a trace on disk.
pub fn judge_file(path: &Path) -> Result<(String, Verdict, usize), BenchError> {
    let tf = traceio::read_trace(path)?;
    let malformed = |msg: String| TraceIoError::Malformed { path: path.to_path_buf(), line: 1, msg };
    let cfg = AnyConfig::parse(&tf.config).map_err(|e| malformed(e.to_string()))?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let verdict = match &cfg {
        AnyConfig::Experiment(c) => {
            c.validate().map_err(|e| malformed(e.to_string()))?;
            let problem = c.problem().map_err(|e| malformed(e.to_string()))?;
            let term = verdict::infer_termination(c, &problem, &tf.records);
            verdict::assess(id, c, &problem, &tf.records, term)
        }
        AnyConfig::Nora(c) => {
            c.validate().map_err(|e| malformed(e.to_string()))?;
            let prob = c.problem().map_err(|e| malformed(e.to_string()))?;
            let scale = prob.a_eff().norm();
            let errs: Vec<f64> = tf.records.iter().map(|r| r.error).collect();
            let term = match errs.last() {
                Some(e) if !e.is_finite() => "diverged",
                Some(e) if *e <= c.rtol * scale => "converged",
                _ => "budget",
            };
            Verdict::rate_only(id, &errs, scale, term.into())
        }
    };
    Ok((tf.config, verdict, tf.records.len()))
}

/// Human-readable report, one section per file in argument order.
pub fn cmd_report(paths: &[PathBuf]) -> Result<String, BenchError> {
    if paths.is_empty() {
        return Err(ConfigError::Invalid("report needs at least one trace file".into()).into());
    }
    let mut out = String::new();
    for path in paths {
        let (config, v, rows) = judge_file(path)?;
        let _ = writeln!(out, "== {}", path.display());
        let _ = writeln!(out, "config: {config}");
        let _ = writeln!(out, "iterations: {}", rows.saturating_sub(1));
        match &v.rate {
            Some(r) => {
                let _ = writeln!(
                    out,
                    "verdict: {} (slope {:.3}, ratio {:.3e}, fit residual {:.3}{})",
                    r.verdict,
                    r.phase2_slope,
                    r.ratio,
                    r.confidence,
                    if r.confident { "" } else { ", low confidence" }
                );
            }
            None => {
                let _ = writeln!(out, "verdict: insufficient-data");
            }
        }
        let _ = writeln!(out, "termination: {}", v.termination);
        let _ = writeln!(
            out,
            "checks: align {} | sigma_bound {} | quad_contract {} | weakopt_plateau {}",
            v.align, v.sigma_bound, v.quad_contract, v.weakopt_plateau
        );
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct NoraOutcome {
    pub trace_path: PathBuf,
    pub verdict: Verdict,
}

pub fn cmd_nora(cfg: &NoraExperiment) -> Result<Vec<NoraOutcome>, BenchError> {
    cfg.validate()?;
    let prob = cfg.problem()?;
    let scale = prob.a_eff().norm();
    let mut out = Vec::new();
    let mut rows = Vec::new();
    for seed in cfg.seeds() {
        let nc = cfg.nora_config(scale, seed);
        let trace = nora::run_nora(&prob, &nc, cfg.variant).map_err(|e| BenchError::Solver(e.to_string()))?;
        let path = Path::new(&cfg.out).join(format!("{}.csv", cfg.run_id(seed)));
        traceio::write_trace(&path, &cfg.single(seed).to_string(), &trace.records)?;
        let verdict = Verdict::rate_only(cfg.run_id(seed), &trace.errors(), scale, trace.termination.to_string());
        rows.push(verdict.row());
        out.push(NoraOutcome { trace_path: path, verdict });
    }
    traceio::write_rows(&Path::new(&cfg.out).join(VERDICTS_FILE), &VERDICT_HEADER, &rows)?;
    Ok(out)
}
