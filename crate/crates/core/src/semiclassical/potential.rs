//! Bounded external potentials with a prescribed nondegenerate critical
//! point.
//!
//! Every kind is `V(x) = v0 + q(x − x₀) χ(|x − x₀| / R)` where `q` vanishes
//! to second order at the origin and `χ` is a C² cutoff equal to 1 on
//! `[0, 1]` and to 0 beyond 2, so `V ≡ v0` outside `|x − x₀| ≥ 2R`.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::io::parse_key_values;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialKind {
    QuadraticMin,
    QuadraticMax,
    /// `q(y) = h11 (y₁² + 2s y₁)² / (8s²) + h12 y₁y₂ + ½ h22 y₂²`: a second,
    /// equally deep well at `y = (−2s, 0)` and a cubic asymmetry at `x₀`.
    DoubleWell,
    CustomCoefficients,
}

impl PotentialKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PotentialKind::QuadraticMin => "quadratic-min",
            PotentialKind::QuadraticMax => "quadratic-max",
            PotentialKind::DoubleWell => "double-well",
            PotentialKind::CustomCoefficients => "custom-coefficients",
        }
    }
}

impl FromStr for PotentialKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.replace('_', "-").as_str() {
            "quadratic-min" => PotentialKind::QuadraticMin,
            "quadratic-max" => PotentialKind::QuadraticMax,
            "double-well" => PotentialKind::DoubleWell,
            "custom-coefficients" | "custom" => PotentialKind::CustomCoefficients,
            _ => return Err(Error::Format(format!("unknown potential kind '{s}'"))),
        })
    }
}

/// Whether `x₀` is a minimum or a maximum of `V`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extremum {
    Min,
    Max,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub v0: f64,
    pub x0: [f64; 2],
    /// `D²V(x₀)`, symmetric.
    pub hessian: [[f64; 2]; 2],
    /// `R`: the bump is cut off between `R` and `2R` from `x₀`.
    pub flat_radius: f64,
    /// Half-distance `s` between the wells of [`PotentialKind::DoubleWell`].
    pub separation: f64,
}

pub const DEFAULT_FLAT_RADIUS: f64 = 1.6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialValue {
    pub v: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

/// `χ(t)`, `χ'(t)`, `χ''(t)` for the quintic smoothstep cutoff.
fn cutoff(t: f64) -> (f64, f64, f64) {
    if t <= 1.0 {
        (1.0, 0.0, 0.0)
    } else if t >= 2.0 {
        (0.0, 0.0, 0.0)
    } else {
        let s = t - 1.0;
        let s2 = s * s;
        (
            1.0 - s2 * s * (10.0 - 15.0 * s + 6.0 * s2),
            -30.0 * s2 * (1.0 - s) * (1.0 - s),
            -60.0 * s * (1.0 - s) * (1.0 - 2.0 * s),
        )
    }
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind, v0: f64, x0: [f64; 2], hessian: [[f64; 2]; 2], flat_radius: f64) -> Result<Self> {
        let p = PotentialSpec { kind, v0, x0, hessian, flat_radius, separation: 1.0 };
        p.validate()?;
        Ok(p)
    }

    /// `V ≡ v0`.
    pub fn constant(v0: f64) -> Result<Self> {
        Self::new(PotentialKind::CustomCoefficients, v0, [0.0, 0.0], [[0.0; 2]; 2], DEFAULT_FLAT_RADIUS)
    }

    pub fn quadratic_min(h11: f64, h12: f64, h22: f64) -> Result<Self> {
        Self::new(PotentialKind::QuadraticMin, 1.0, [0.0, 0.0], [[h11, h12], [h12, h22]], DEFAULT_FLAT_RADIUS)
    }

    /// The flat radius shrinks below the default when needed to keep
    /// `V > 0` on the cut-off annulus.
    pub fn quadratic_max(h11: f64, h12: f64, h22: f64) -> Result<Self> {
        let steep = 0.5 * (h11 + h22) - (0.25 * (h11 - h22).powi(2) + h12 * h12).sqrt();
        let r = if steep < 0.0 { DEFAULT_FLAT_RADIUS.min(0.9 * (0.5 / -steep).sqrt()) } else { DEFAULT_FLAT_RADIUS };
        Self::new(PotentialKind::QuadraticMax, 1.0, [0.0, 0.0], [[h11, h12], [h12, h22]], r)
    }

    /// Double well with `x₀ = (s, 0)` and the twin well at `(−s, 0)`.
    pub fn double_well(h11: f64, h22: f64, s: f64) -> Result<Self> {
        let p = PotentialSpec {
            kind: PotentialKind::DoubleWell,
            v0: 1.0,
            x0: [s, 0.0],
            hessian: [[h11, 0.0], [0.0, h22]],
            flat_radius: DEFAULT_FLAT_RADIUS,
            separation: s,
        };
        p.validate()?;
        Ok(p)
    }

    fn eigenvalues(&self) -> (f64, f64) {
        let [[a, b], [_, d]] = self.hessian;
        let m = 0.5 * (a + d);
        let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        (m - r, m + r)
    }

    pub fn extremum(&self) -> Result<Extremum> {
        let (lo, hi) = self.eigenvalues();
        if lo > 0.0 {
            Ok(Extremum::Min)
        } else if hi < 0.0 {
            Ok(Extremum::Max)
        } else {
            Err(Error::InvalidArgument(format!("D²V(x₀) is not definite (eigenvalues {lo}, {hi})")))
        }
    }

    fn validate(&self) -> Result<()> {
        let [[_, b], [c, _]] = self.hessian;
        let finite = self.hessian.iter().flatten().chain(&self.x0).all(|v| v.is_finite());
        if !finite || !self.v0.is_finite() || b != c {
            return Err(Error::InvalidArgument("potential coefficients must be finite and symmetric".into()));
        }
        if !(self.v0 > 0.0) {
            return Err(Error::InvalidArgument(format!("v0 = {} must be positive", self.v0)));
        }
        if !(self.flat_radius > 0.0) || !self.flat_radius.is_finite() {
            return Err(Error::InvalidArgument(format!("flat_radius = {} must be positive", self.flat_radius)));
        }
        let (lo, hi) = self.eigenvalues();
        match self.kind {
            PotentialKind::QuadraticMin if lo <= 0.0 => {
                return Err(Error::InvalidArgument("quadratic-min needs a positive definite Hessian".into()))
            }
            PotentialKind::QuadraticMax if hi >= 0.0 => {
                return Err(Error::InvalidArgument("quadratic-max needs a negative definite Hessian".into()))
            }
            PotentialKind::DoubleWell if lo <= 0.0 || !(self.separation > 0.0) => {
                return Err(Error::InvalidArgument(
                    "double-well needs a positive definite Hessian and separation > 0".into(),
                ))
            }
            _ => {}
        }
        // the bump is largest in magnitude at |y| ≤ 2R; sample it there
        let inf = self.infimum_estimate();
        if !(inf > 0.0) {
            return Err(Error::InvalidArgument(format!("inf V = {inf} must be positive; shrink flat_radius")));
        }
        Ok(())
    }

    /// Minimum of `V` over a polar sample of the cutoff disc.
    pub fn infimum_estimate(&self) -> f64 {
        let mut inf = self.v0;
        let r2 = 2.0 * self.flat_radius;
        for i in 0..=200 {
            let r = r2 * i as f64 / 200.0;
            for j in 0..128 {
                let t = 2.0 * std::f64::consts::PI * j as f64 / 128.0;
                let x = [self.x0[0] + r * t.cos(), self.x0[1] + r * t.sin()];
                inf = inf.min(self.value(x));
            }
        }
        inf
    }

    /// `q(y)`, `∇q`, `D²q` before the cutoff.
    fn bump(&self, y: [f64; 2]) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let [[h11, h12], [_, h22]] = self.hessian;
        let (y1, y2) = (y[0], y[1]);
        match self.kind {
            PotentialKind::DoubleWell => {
                let s = self.separation;
                let p = y1 * y1 + 2.0 * s * y1;
                let c = h11 / (8.0 * s * s);
                let dp = 2.0 * y1 + 2.0 * s;
                let q = c * p * p + h12 * y1 * y2 + 0.5 * h22 * y2 * y2;
                let g = [2.0 * c * p * dp + h12 * y2, h12 * y1 + h22 * y2];
                let h = [[2.0 * c * (dp * dp + 2.0 * p), h12], [h12, h22]];
                (q, g, h)
            }
            _ => {
                let q = 0.5 * (h11 * y1 * y1 + 2.0 * h12 * y1 * y2 + h22 * y2 * y2);
                (q, [h11 * y1 + h12 * y2, h12 * y1 + h22 * y2], self.hessian)
            }
        }
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        let y = [x[0] - self.x0[0], x[1] - self.x0[1]];
        let r = y[0].hypot(y[1]);
        let (chi, _, _) = cutoff(r / self.flat_radius);
        if chi == 0.0 {
            return self.v0;
        }
        self.v0 + self.bump(y).0 * chi
    }

    /// `½⟨D²V(x₀) y, y⟩`.
    pub fn q2(&self, y: [f64; 2]) -> f64 {
        let [[h11, h12], [_, h22]] = self.hessian;
        0.5 * (h11 * y[0] * y[0] + 2.0 * h12 * y[0] * y[1] + h22 * y[1] * y[1])
    }

    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let [[h11, h12], [_, h22]] = self.hessian;
        writeln!(s, "kind = {}", self.kind.as_str()).unwrap();
        writeln!(s, "v0 = {}", self.v0).unwrap();
        writeln!(s, "x0 = {},{}", self.x0[0], self.x0[1]).unwrap();
        writeln!(s, "h11 = {h11}").unwrap();
        writeln!(s, "h12 = {h12}").unwrap();
        writeln!(s, "h22 = {h22}").unwrap();
        writeln!(s, "flat_radius = {}", self.flat_radius).unwrap();
        if self.kind == PotentialKind::DoubleWell {
            writeln!(s, "separation = {}", self.separation).unwrap();
        }
        s
    }

    pub fn parse_config(text: &str) -> Result<Self> {
        let num = |k: &str, v: &str| -> Result<f64> {
            v.parse::<f64>().map_err(|_| Error::Format(format!("{k}: '{v}' is not a number")))
        };
        let mut kind = None;
        let (mut v0, mut x0, mut h, mut flat, mut sep) = (1.0, None, [0.0; 3], DEFAULT_FLAT_RADIUS, 1.0);
        for (k, v) in parse_key_values(text)? {
            match k.as_str() {
                "kind" => kind = Some(v.parse::<PotentialKind>()?),
                "v0" => v0 = num(&k, &v)?,
                "x0" => {
                    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
                    if parts.len() != 2 {
                        return Err(Error::Format(format!("x0: expected 'x,y', got '{v}'")));
                    }
                    x0 = Some([num(&k, parts[0])?, num(&k, parts[1])?]);
                }
                "h11" => h[0] = num(&k, &v)?,
                "h12" => h[1] = num(&k, &v)?,
                "h22" => h[2] = num(&k, &v)?,
                "flat_radius" => flat = num(&k, &v)?,
                "separation" => sep = num(&k, &v)?,
                other => return Err(Error::Format(format!("unknown potential key '{other}'"))),
            }
        }
        let kind = kind.ok_or_else(|| Error::Format("potential config lacks 'kind'".into()))?;
        let default_x0 = if kind == PotentialKind::DoubleWell { [sep, 0.0] } else { [0.0, 0.0] };
        let p = PotentialSpec {
            kind,
            v0,
            x0: x0.unwrap_or(default_x0),
            hessian: [[h[0], h[1]], [h[1], h[2]]],
            flat_radius: flat,
            separation: sep,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_config(&std::fs::read_to_string(path)?)
    }
}

/// `(V, ∇V, D²V)` at `x`.
pub fn eval_potential(p: &PotentialSpec, x: [f64; 2]) -> PotentialValue {
    let y = [x[0] - p.x0[0], x[1] - p.x0[1]];
    let r = y[0].hypot(y[1]);
    let big_r = p.flat_radius;
    let (chi, dchi, ddchi) = cutoff(r / big_r);
    if chi == 0.0 {
        return PotentialValue { v: p.v0, grad: [0.0; 2], hess: [[0.0; 2]; 2] };
    }
    let (q, gq, hq) = p.bump(y);
    if dchi == 0.0 && ddchi == 0.0 {
        return PotentialValue { v: p.v0 + q, grad: gq, hess: hq };
    }
    // ρ = |y|/R, ∇ρ = ŷ/R, D²ρ = (I − ŷŷᵀ)/(R|y|)
    let n = [y[0] / r, y[1] / r];
    let grho = [n[0] / big_r, n[1] / big_r];
    let mut grad = [0.0; 2];
    let mut hess = [[0.0; 2]; 2];
    for i in 0..2 {
        grad[i] = gq[i] * chi + q * dchi * grho[i];
        for j in 0..2 {
            let delta = if i == j { 1.0 } else { 0.0 };
            let d2rho = (delta - n[i] * n[j]) / (big_r * r);
            hess[i][j] = hq[i][j] * chi
                + (gq[i] * grho[j] + gq[j] * grho[i]) * dchi
                + q * (ddchi * grho[i] * grho[j] + dchi * d2rho);
        }
    }
    PotentialValue { v: p.v0 + q * chi, grad, hess }
}
