//! Spectrum-controlled synthetic targets and the EP/OP/UP split.

use std::fmt;
use std::str::FromStr;

use crate::matcore::{self, MatError, Matrix, Seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Symmetric,
    Asymmetric,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Symmetric => "sym",
            Kind::Asymmetric => "asym",
        })
    }
}

impl FromStr for Kind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sym" | "symmetric" => Ok(Kind::Symmetric),
            "asym" | "asymmetric" => Ok(Kind::Asymmetric),
            _ => Err(format!("unknown kind '{s}' (expected sym|asym)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// r == rank(A)
    Ep,
    /// r > rank(A)
    Op,
    /// r < rank(A)
    Up,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Ep => "ep",
            Regime::Op => "op",
            Regime::Up => "up",
        })
    }
}

impl FromStr for Regime {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ep" => Ok(Regime::Ep),
            "op" => Ok(Regime::Op),
            "up" => Ok(Regime::Up),
            _ => Err(format!("unknown regime '{s}' (expected ep|op|up)")),
        }
    }
}

pub fn classify_regime(r_a: usize, r: usize) -> Regime {
    use std::cmp::Ordering::*;
    match r.cmp(&r_a) {
        Equal => Regime::Ep,
        Greater => Regime::Op,
        Less => Regime::Up,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    pub m: usize,
    /// Ignored for symmetric targets (n = m).
    pub n: usize,
    pub spectrum: Vec<f64>,
    pub symmetric: bool,
    pub seed: Seed,
}

impl TargetSpec {
    pub fn symmetric(m: usize, spectrum: Vec<f64>, seed: Seed) -> Self {
        TargetSpec { m, n: m, spectrum, symmetric: true, seed }
    }

    pub fn asymmetric(m: usize, n: usize, spectrum: Vec<f64>, seed: Seed) -> Self {
        TargetSpec { m, n, spectrum, symmetric: false, seed }
    }

    pub fn cols(&self) -> usize {
        if self.symmetric {
            self.m
        } else {
            self.n
        }
    }

    pub fn validate(&self) -> Result<(), MatError> {
        let bad = |msg: String| Err(MatError::InvalidArgument(msg));
        if self.m == 0 || self.cols() == 0 {
            return bad("target dimensions must be positive".into());
        }
        if self.spectrum.is_empty() {
            return bad("spectrum is empty".into());
        }
        if self.spectrum.len() > self.m.min(self.cols()) {
            return bad(format!(
                "spectrum has {} values but min(m, n) = {}",
                self.spectrum.len(),
                self.m.min(self.cols())
            ));
        }
        if self.spectrum.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad("spectrum values must be finite and positive".into());
        }
        if self.spectrum.windows(2).any(|w| w[1] > w[0]) {
            return bad("spectrum must be non-increasing".into());
        }
        Ok(())
    }
}

/// A synthesized target together with its exact compact factors.
#[derive(Debug, Clone)]
pub struct Target {
    pub a: Matrix,
    pub u: Matrix,
    pub v: Matrix,
    pub sigma: Vec<f64>,
}

/// ChaCha stream for target factors, so an init drawn with the same seed
/// is not secretly aligned with the target.
pub const TARGET_STREAM: u64 = 1;

pub fn synthesize(spec: &TargetSpec) -> Result<Target, MatError> {
    spec.validate()?;
    let k = spec.spectrum.len();
    let factor = |rows, seed| matcore::gaussian_on_stream(rows, k, 1.0, seed, TARGET_STREAM).map(|g| matcore::orthonormalize(&g));
    let u = factor(spec.m, spec.seed)?;
    let v = if spec.symmetric {
        u.clone()
    } else {
        factor(spec.n, spec.seed.wrapping_add(1))?
    };
    let mut us = u.clone();
    for (j, s) in spec.spectrum.iter().enumerate() {
        us.column_mut(j).scale_mut(*s);
    }
    let mut a = us * v.transpose();
    if spec.symmetric {
        a = matcore::symmetrize(&a);
    }
    Ok(Target { a, u, v, sigma: spec.spectrum.clone() })
}

pub fn synthesize_target(spec: &TargetSpec) -> Result<Matrix, MatError> {
    synthesize(spec).map(|t| t.a)
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub a: Matrix,
    pub r: usize,
    pub kind: Kind,
    pub r_a: usize,
    pub kappa: f64,
    pub regime: Regime,
    /// Column basis of A (Q in the symmetric case).
    pub u: Matrix,
    /// Row basis of A; equals `u` for symmetric problems.
    pub v: Matrix,
    pub sigma: Vec<f64>,
}

impl Problem {
    pub fn from_spec(spec: &TargetSpec, r: usize) -> Result<Problem, MatError> {
        if r == 0 {
            return Err(MatError::InvalidArgument("factor rank r must be ≥ 1".into()));
        }
        let t = synthesize(spec)?;
        let kind = if spec.symmetric { Kind::Symmetric } else { Kind::Asymmetric };
        let r_a = t.sigma.len();
        Ok(Problem {
            kappa: t.sigma[0] / t.sigma[r_a - 1],
            regime: classify_regime(r_a, r),
            a: t.a,
            r,
            kind,
            r_a,
            u: t.u,
            v: t.v,
            sigma: t.sigma,
        })
    }

    /// Wrap an arbitrary matrix; bases and κ come from its numerical SVD.
    pub fn from_matrix(a: Matrix, r: usize, kind: Kind) -> Result<Problem, MatError> {
        if r == 0 {
            return Err(MatError::InvalidArgument("factor rank r must be ≥ 1".into()));
        }
        if !matcore::all_finite(&a) {
            return Err(MatError::InvalidArgument("target has non-finite entries".into()));
        }
        if kind == Kind::Symmetric {
            let scale = a.norm().max(f64::MIN_POSITIVE);
            if a.nrows() != a.ncols() || (&a - a.transpose()).norm() > 1e-12 * scale {
                return Err(MatError::InvalidArgument("symmetric target must be square and symmetric".into()));
            }
        }
        let d = matcore::svd(&a)?;
        if d.rank() == 0 {
            return Err(MatError::InvalidArgument("target is numerically zero".into()));
        }
        let r_a = d.rank();
        let (u, v) = if kind == Kind::Symmetric { (d.u.clone(), d.u.clone()) } else { (d.u, d.v) };
        Ok(Problem {
            kappa: d.s[0] / d.s[r_a - 1],
            regime: classify_regime(r_a, r),
            a,
            r,
            kind,
            r_a,
            u,
            v,
            sigma: d.s,
        })
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma[self.r_a - 1]
    }
}

/// Parse `list:1.0,0.99,0.01`, `lin:start,step,count,tail...` or
/// `geom:count,kappa` (σ_i = κ^{-(i-1)/(count-1)}).
pub fn parse_spectrum(text: &str) -> Result<Vec<f64>, String> {
    let (head, body) = text
        .split_once(':')
        .ok_or_else(|| format!("spectrum '{text}' needs a 'list:', 'lin:' or 'geom:' prefix"))?;
    let nums = |s: &str| -> Result<Vec<f64>, String> {
        s.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad number '{p}' in spectrum: {e}")))
            .collect()
    };
    let out = match head {
        "list" => nums(body)?,
        "lin" => {
            let v = nums(body)?;
            if v.len() < 3 {
                return Err("lin: expects start,step,count[,tail...]".into());
            }
            let count = v[2];
            if count < 1.0 || count.fract() != 0.0 {
                return Err(format!("lin: count must be a positive integer, got {count}"));
            }
            let mut out: Vec<f64> = (0..count as usize).map(|k| v[0] + k as f64 * v[1]).collect();
            out.extend_from_slice(&v[3..]);
            out
        }
        "geom" => {
            let v = nums(body)?;
            if v.len() != 2 || v[0] < 1.0 || v[0].fract() != 0.0 || !(v[1] >= 1.0) {
                return Err("geom: expects count,kappa with count ≥ 1 and kappa ≥ 1".into());
            }
            let k = v[0] as usize;
            geometric_spectrum(k, v[1])
        }
        _ => return Err(format!("unknown spectrum generator '{head}'")),
    };
    if out.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(format!("spectrum '{text}' contains non-positive values"));
    }
    if out.windows(2).any(|w| w[1] > w[0]) {
        return Err(format!("spectrum '{text}' is not non-increasing"));
    }
    Ok(out)
}

pub fn geometric_spectrum(count: usize, kappa: f64) -> Vec<f64> {
    if count == 1 {
        return vec![1.0];
    }
    (0..count).map(|i| kappa.powf(-(i as f64) / (count - 1) as f64)).collect()
}
