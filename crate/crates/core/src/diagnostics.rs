//! Per-iteration metrics, invariant checks and the convergence-rate
//! classifier.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::matcore::{self, MatError, Matrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub t: usize,
    pub error: f64,
    pub sigma_r_core: f64,
    pub leakage_x: f64,
    /// Absent for symmetric problems.
    pub leakage_y: Option<f64>,
    pub weak_opt: f64,
    pub eta_used: f64,
    pub elapsed_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    Converged,
    Budget,
    Diverged,
    SingularGram,
    RefusedStart,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::Budget => "budget",
            Termination::Diverged => "diverged",
            Termination::SingularGram => "singular-gram",
            Termination::RefusedStart => "refused-start",
        })
    }
}

impl FromStr for Termination {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "converged" => Ok(Termination::Converged),
            "budget" => Ok(Termination::Budget),
            "diverged" => Ok(Termination::Diverged),
            "singular-gram" => Ok(Termination::SingularGram),
            "refused-start" => Ok(Termination::RefusedStart),
            _ => Err(format!("unknown termination '{s}'")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub records: Vec<IterRecord>,
    pub termination: Termination,
    /// Canonical text of whatever produced the run; empty when unset.
    pub config: String,
    pub final_x: Matrix,
    pub final_y: Option<Matrix>,
}

impl Trace {
    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.error).collect()
    }

    pub fn last(&self) -> Option<&IterRecord> {
        self.records.last()
    }

    pub fn max_leakage(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.leakage_x.max(r.leakage_y.unwrap_or(0.0)))
            .fold(0.0, f64::max)
    }
}

/// ‖XXᵀ − A‖_F, or ‖XYᵀ − A‖_F when `y` is given.
pub fn optimality_error(x: &Matrix, y: Option<&Matrix>, a: &Matrix) -> f64 {
    match y {
        None => (x * x.transpose() - a).norm(),
        Some(y) => (x * y.transpose() - a).norm(),
    }
}

/// ‖XᵀA†X − I‖_F, or ‖YᵀA†X − I‖_F when `y` is given.
pub fn weak_opt_residual(x: &Matrix, y: Option<&Matrix>, a_pinv: &Matrix) -> f64 {
    let left = y.unwrap_or(x);
    let core = left.transpose() * (a_pinv * x);
    (core - Matrix::identity(x.ncols(), x.ncols())).norm()
}

/// ‖(I − QQᵀ)x‖_F / max(‖x‖_F, eps)
pub fn residual_leakage(x: &Matrix, q: &Matrix) -> f64 {
    let out = x - q * (q.transpose() * x);
    out.norm() / x.norm().max(f64::EPSILON)
}

/// Lower bound on σ_r(B_{t+1}) under a fixed step η.
pub fn sigma_r_lower_bound(t: usize, eta: f64, sigma_r_b0: f64, sigma_r_a: f64) -> f64 {
    let c = 1.0 - eta;
    let p = |k: usize| c.powi(k as i32);
    p(2 * t + 2) * sigma_r_b0 + c * sigma_r_a - p(2 * t + 3) * sigma_r_a
}

/// B = ΦΦᵀ with Φ = QᵀX.
pub fn core_matrix(x: &Matrix, q: &Matrix) -> Matrix {
    let phi = q.transpose() * x;
    &phi * phi.transpose()
}

/// k-th largest singular value of B = ΦΦᵀ, i.e. σ_k(Φ)², with k = min(r, r_A).
pub fn core_sigma(x: &Matrix, q: &Matrix) -> Result<f64, MatError> {
    let k = x.ncols().min(q.ncols());
    if k == 0 {
        return Ok(0.0);
    }
    let s = matcore::singular_values(&(q.transpose() * x))?;
    Ok(s.get(k - 1).map(|v| v * v).unwrap_or(0.0))
}

/// min over orthogonal R of ‖xR − x*‖_F.
pub fn procrustes_distance(x: &Matrix, x_star: &Matrix) -> f64 {
    assert_eq!(x.shape(), x_star.shape(), "procrustes_distance: shape mismatch");
    if x.ncols() == 0 {
        return 0.0;
    }
    let dec = matcore::svd_thin(&(x_star.transpose() * x)).expect("svd of an r×r matrix");
    let rot = dec.v * dec.u.transpose();
    (x * rot - x_star).norm()
}

/// Precomputed per-problem quantities for recording [`IterRecord`]s.
#[derive(Debug, Clone)]
pub struct Monitor {
    a: Matrix,
    a_pinv: Matrix,
    u: Matrix,
    v: Option<Matrix>,
    full: bool,
}

impl Monitor {
    /// `u`/`v` are the compact factors of A (`v` is `None` for symmetric
    /// problems). With `full == false` only the error and weak-optimality
    /// residual are computed; the rest are NaN.
    pub fn new(a: &Matrix, u: &Matrix, sigma: &[f64], v: Option<&Matrix>, full: bool) -> Monitor {
        let right = v.unwrap_or(u);
        let mut vs = right.clone();
        for (j, s) in sigma.iter().enumerate() {
            vs.column_mut(j).scale_mut(1.0 / s);
        }
        Monitor { a: a.clone(), a_pinv: vs * u.transpose(), u: u.clone(), v: v.cloned(), full }
    }

    pub fn a_pinv(&self) -> &Matrix {
        &self.a_pinv
    }

    pub fn record(&self, t: usize, x: &Matrix, y: Option<&Matrix>, eta_used: f64, elapsed_ns: u64) -> IterRecord {
        let error = optimality_error(x, y, &self.a);
        let weak_opt = weak_opt_residual(x, y, &self.a_pinv);
        let (sigma_r_core, leakage_x, leakage_y) = if self.full {
            let leak_y = match (y, &self.v) {
                (Some(y), Some(v)) => Some(residual_leakage(y, v)),
                _ => None,
            };
            let core = if matcore::all_finite(x) { core_sigma(x, &self.u).unwrap_or(f64::NAN) } else { f64::NAN };
            (core, residual_leakage(x, &self.u), leak_y)
        } else {
            (f64::NAN, f64::NAN, y.map(|_| f64::NAN))
        };
        IterRecord { t, error, sigma_r_core, leakage_x, leakage_y, weak_opt, eta_used, elapsed_ns }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RateVerdict {
    OneStep,
    Quadratic,
    Linear,
    Sublinear,
    Stalled,
}

impl fmt::Display for RateVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateVerdict::OneStep => "one_step",
            RateVerdict::Quadratic => "quadratic",
            RateVerdict::Linear => "linear",
            RateVerdict::Sublinear => "sublinear",
            RateVerdict::Stalled => "stalled",
        })
    }
}

impl FromStr for RateVerdict {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "one_step" => Ok(RateVerdict::OneStep),
            "quadratic" => Ok(RateVerdict::Quadratic),
            "linear" => Ok(RateVerdict::Linear),
            "sublinear" => Ok(RateVerdict::Sublinear),
            "stalled" => Ok(RateVerdict::Stalled),
            _ => Err(format!("unknown verdict '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    pub verdict: RateVerdict,
    /// p in log e_{t+1} ≈ p·log e_t + c; NaN for one-step verdicts.
    pub phase2_slope: f64,
    /// Indices (inclusive) into the input sequence used by the fit.
    pub window: (usize, usize),
    /// RMS residual of the fit in natural-log units.
    pub confidence: f64,
    /// False when the fit residual exceeds [`FIT_RESIDUAL_MAX`] or the slope
    /// falls outside both the linear and quadratic bands.
    pub confident: bool,
    /// Geometric-mean per-step contraction over the window.
    pub ratio: f64,
}

pub const ONE_STEP_RATIO: f64 = 1e-8;
pub const FLOOR_FACTOR: f64 = 100.0;
pub const WINDOW: usize = 5;
pub const FIT_RESIDUAL_MAX: f64 = 0.15;
pub const STALL_RATIO: f64 = 0.999;
pub const QUADRATIC_BAND: (f64, f64) = (1.7, 2.3);
pub const LINEAR_BAND: (f64, f64) = (0.8, 1.2);

/// Classify a positive error sequence. `scale` is ‖A‖_F (pass 1.0 for raw
/// sequences); values at or below 100·eps·scale are round-off and end the
/// usable prefix.
pub fn classify_rate(errors: &[f64], scale: f64) -> Result<RateEstimate, DiagError> {
    if errors.len() >= 2 && errors[0] > 0.0 && errors[0].is_finite() && errors[1] >= 0.0 {
        let drop = errors[1] / errors[0];
        if drop <= ONE_STEP_RATIO {
            return Ok(RateEstimate {
                verdict: RateVerdict::OneStep,
                phase2_slope: f64::NAN,
                window: (0, 1),
                confidence: 0.0,
                confident: true,
                ratio: drop,
            });
        }
    }
    let floor = FLOOR_FACTOR * f64::EPSILON * scale;
    let usable = errors.iter().take_while(|e| e.is_finite() && **e > floor).count();
    if usable < 3 {
        return Err(DiagError::InsufficientData(format!(
            "{usable} usable points above floor {floor:e} (need 3)"
        )));
    }
    let start = usable.saturating_sub(WINDOW);
    let w = &errors[start..usable];
    let k = w.len();
    let logs: Vec<f64> = w.iter().map(|e| e.ln()).collect();
    let xs = &logs[..k - 1];
    let ys = &logs[1..];
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let (p, c) = if sxx > 0.0 { (sxy / sxx, my - sxy / sxx * mx) } else { (f64::NAN, 0.0) };
    let resid = if p.is_nan() {
        0.0
    } else {
        (xs.iter().zip(ys).map(|(x, y)| (y - p * x - c).powi(2)).sum::<f64>() / n).sqrt()
    };
    let ratio = (w[k - 1] / w[0]).powf(1.0 / (k - 1) as f64);
    let mut confident = resid <= FIT_RESIDUAL_MAX;
    let in_band = |band: (f64, f64)| p >= band.0 && p <= band.1;

    let verdict = if !(ratio < STALL_RATIO) || p.is_nan() {
        RateVerdict::Stalled
    } else if in_band(QUADRATIC_BAND) {
        RateVerdict::Quadratic
    } else if in_band(LINEAR_BAND) {
        if decelerating(w) {
            RateVerdict::Sublinear
        } else {
            RateVerdict::Linear
        }
    } else if p < LINEAR_BAND.0 {
        RateVerdict::Sublinear
    } else {
        // between or beyond the bands: nearest band, flagged
        confident = false;
        if p < 1.5 {
            RateVerdict::Linear
        } else {
            RateVerdict::Quadratic
        }
    };
    Ok(RateEstimate {
        verdict,
        phase2_slope: p,
        window: (start, usable - 1),
        confidence: resid,
        confident,
        ratio,
    })
}

// Strictly rising per-step ratios whose gap to 1 shrank by at least 10%.
fn decelerating(w: &[f64]) -> bool {
    let ratios: Vec<f64> = w.windows(2).map(|p| p[1] / p[0]).collect();
    if ratios.len() < 2 {
        return false;
    }
    let rising = ratios.windows(2).all(|p| p[1] > p[0]);
    let (first, last) = (ratios[0], ratios[ratios.len() - 1]);
    rising && (1.0 - last) <= 0.9 * (1.0 - first)
}
