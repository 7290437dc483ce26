//! One-step methods for the per-mode rotation system.
//!
//! A scheme is the pair (A(h), b(h)) in
//! `z_{n+1} = A(h) z_n + √η · b(h) · δβ_n` with `h = λτ`.
//! This module holds the builtin family, table-driven and closure-driven custom
//! schemes, the symplecticity/admissibility classifier and the consistency
//! order check.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::spectrum::{Alpha, ModelSpec};
use crate::stats::linear_fit;
use crate::{Error, Result};

/// Relative tolerance on |det A − 1| below which a scheme counts as symplectic.
pub const DEFAULT_SYMPLECTIC_TOL: f64 = 1e-12;

/// Relative tolerance used to match a table row to a requested h.
pub const TABLE_MATCH_TOL: f64 = 1e-12;

/// Coefficients (a₁₁, a₁₂, a₂₁, a₂₂, b₁, b₂) of a one-step map at fixed h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coeffs {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub b1: f64,
    pub b2: f64,
}

impl Coeffs {
    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    /// 4·det A − (tr A)²; positive exactly when A has a complex eigenpair.
    pub fn discriminant(&self) -> f64 {
        4.0 * self.det() - self.trace().powi(2)
    }

    /// a₁₁b₁ + a₁₂b₂, the first component of A·b.
    pub fn p(&self) -> f64 {
        self.a11 * self.b1 + self.a12 * self.b2
    }

    /// a₂₁b₁ − a₁₁b₂.
    pub fn q(&self) -> f64 {
        self.a21 * self.b1 - self.a11 * self.b2
    }

    /// Same matrix, noise vector replaced by zero.
    pub fn without_noise(&self) -> Self {
        Self {
            b1: 0.0,
            b2: 0.0,
            ..*self
        }
    }

    /// A·(x, y).
    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.a11 * x + self.a12 * y, self.a21 * x + self.a22 * y)
    }

    fn is_finite(&self) -> bool {
        [self.a11, self.a12, self.a21, self.a22, self.b1, self.b2]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    EulerMaruyama,
    BackwardEuler,
    Midpoint,
}

impl Builtin {
    pub const ALL: [Builtin; 3] = [
        Builtin::EulerMaruyama,
        Builtin::BackwardEuler,
        Builtin::Midpoint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::EulerMaruyama => "euler_maruyama",
            Builtin::BackwardEuler => "backward_euler",
            Builtin::Midpoint => "midpoint",
        }
    }

    pub fn coeffs(self, h: f64, alpha: Alpha) -> Coeffs {
        let Alpha { a1, a2 } = alpha;
        match self {
            Builtin::EulerMaruyama => Coeffs {
                a11: 1.0,
                a12: h,
                a21: -h,
                a22: 1.0,
                b1: a1,
                b2: a2,
            },
            Builtin::BackwardEuler => {
                let d = 1.0 + h * h;
                Coeffs {
                    a11: 1.0 / d,
                    a12: h / d,
                    a21: -h / d,
                    a22: 1.0 / d,
                    b1: (a1 + h * a2) / d,
                    b2: (a2 - h * a1) / d,
                }
            }
            Builtin::Midpoint => {
                let q = 0.25 * h * h;
                let d = 1.0 + q;
                Coeffs {
                    a11: (1.0 - q) / d,
                    a12: h / d,
                    a21: -h / d,
                    a22: (1.0 - q) / d,
                    b1: (a1 + 0.5 * h * a2) / d,
                    b2: (a2 - 0.5 * h * a1) / d,
                }
            }
        }
    }
}

impl std::str::FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "euler_maruyama" | "em" => Ok(Builtin::EulerMaruyama),
            "backward_euler" | "be" => Ok(Builtin::BackwardEuler),
            "midpoint" | "mp" => Ok(Builtin::Midpoint),
            _ => Err(Error::UnknownScheme(s.to_string())),
        }
    }
}

/// Tabulated coefficients; b is stored absolutely and does not depend on α.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTable {
    rows: Vec<(f64, Coeffs)>,
    interpolate: bool,
}

impl CoeffTable {
    pub fn new(mut rows: Vec<(f64, Coeffs)>, interpolate: bool) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("coefficient table is empty".into()));
        }
        if rows
            .iter()
            .any(|(h, c)| !(*h > 0.0) || !h.is_finite() || !c.is_finite())
        {
            return Err(Error::InvalidArgument(
                "coefficient table rows need h > 0 and finite entries".into(),
            ));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { rows, interpolate })
    }

    /// Parses rows `h a11 a12 a21 a22 b1 b2` separated by commas or
    /// whitespace. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str, interpolate: bool) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>().map_err(|_| {
                        Error::InvalidArgument(format!(
                            "table line {}: cannot parse `{s}` as a number",
                            lineno + 1
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            if vals.len() != 7 {
                return Err(Error::InvalidArgument(format!(
                    "table line {}: expected 7 columns, found {}",
                    lineno + 1,
                    vals.len()
                )));
            }
            rows.push((
                vals[0],
                Coeffs {
                    a11: vals[1],
                    a12: vals[2],
                    a21: vals[3],
                    a22: vals[4],
                    b1: vals[5],
                    b2: vals[6],
                },
            ));
        }
        Self::new(rows, interpolate)
    }

    pub fn read(path: &Path, interpolate: bool) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, interpolate)
    }

    pub fn lookup(&self, h: f64) -> Result<Coeffs> {
        if let Some((_, c)) = self
            .rows
            .iter()
            .find(|(hr, _)| (hr - h).abs() <= TABLE_MATCH_TOL * hr.abs().max(h.abs()))
        {
            return Ok(*c);
        }
        if !self.interpolate {
            return Err(Error::TableMiss(h));
        }
        let idx = self.rows.partition_point(|(hr, _)| *hr < h);
        if idx == 0 || idx == self.rows.len() {
            return Err(Error::TableMiss(h));
        }
        let (h0, c0) = self.rows[idx - 1];
        let (h1, c1) = self.rows[idx];
        let w = (h - h0) / (h1 - h0);
        let lerp = |a: f64, b: f64| a + w * (b - a);
        Ok(Coeffs {
            a11: lerp(c0.a11, c1.a11),
            a12: lerp(c0.a12, c1.a12),
            a21: lerp(c0.a21, c1.a21),
            a22: lerp(c0.a22, c1.a22),
            b1: lerp(c0.b1, c1.b1),
            b2: lerp(c0.b2, c1.b2),
        })
    }
}

pub type CoeffFn = dyn Fn(f64, Alpha) -> Coeffs + Send + Sync;

#[derive(Clone)]
pub enum SchemeKind {
    Builtin(Builtin),
    Table(CoeffTable),
    Custom(Arc<CoeffFn>),
}

/// A named one-step method.
#[derive(Clone)]
pub struct SchemeDef {
    pub name: String,
    pub kind: SchemeKind,
    /// Symplecticity claimed by whoever registered the scheme; `classify`
    /// reports the measured property independently.
    pub claimed_symplectic: Option<bool>,
}

impl fmt::Debug for SchemeDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            SchemeKind::Builtin(b) => format!("Builtin({b:?})"),
            SchemeKind::Table(t) => format!("Table({} rows)", t.rows.len()),
            SchemeKind::Custom(_) => "Custom".to_string(),
        };
        f.debug_struct("SchemeDef")
            .field("name", &self.name)
            .field("kind", &kind)
            .field("claimed_symplectic", &self.claimed_symplectic)
            .finish()
    }
}

impl SchemeDef {
    pub fn custom<F>(name: &str, f: F) -> Self
    where
        F: Fn(f64, Alpha) -> Coeffs + Send + Sync + 'static,
    {
        Self {
            name: name.to_string(),
            kind: SchemeKind::Custom(Arc::new(f)),
            claimed_symplectic: None,
        }
    }

    pub fn table(name: &str, table: CoeffTable) -> Self {
        Self {
            name: name.to_string(),
            kind: SchemeKind::Table(table),
            claimed_symplectic: None,
        }
    }

    pub fn as_builtin(&self) -> Option<Builtin> {
        match self.kind {
            SchemeKind::Builtin(b) => Some(b),
            _ => None,
        }
    }

    /// Coefficients at rotation rate `h = λτ` for noise coefficients `alpha`.
    pub fn coeffs(&self, h: f64, alpha: Alpha) -> Result<Coeffs> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::NonPositiveStep(h));
        }
        let c = match &self.kind {
            SchemeKind::Builtin(b) => b.coeffs(h, alpha),
            SchemeKind::Table(t) => t.lookup(h)?,
            SchemeKind::Custom(f) => f(h, alpha),
        };
        if !c.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "scheme `{}` produced non-finite coefficients at h = {h}",
                self.name
            )));
        }
        Ok(c)
    }

    /// Coefficients after checking the complex-eigenvalue condition.
    pub fn admissible_coeffs(&self, h: f64, alpha: Alpha) -> Result<Coeffs> {
        let c = self.coeffs(h, alpha)?;
        let disc = c.discriminant();
        if !(disc > 0.0) || !(c.det() > 0.0) {
            return Err(Error::Inadmissible {
                scheme: self.name.clone(),
                h,
                discriminant: disc,
            });
        }
        Ok(c)
    }
}

/// Returns the named builtin scheme.
pub fn builtin(name: &str) -> Result<SchemeDef> {
    let b: Builtin = name.parse()?;
    Ok(b.into())
}

impl From<Builtin> for SchemeDef {
    fn from(b: Builtin) -> Self {
        SchemeDef {
            name: b.name().to_string(),
            kind: SchemeKind::Builtin(b),
            claimed_symplectic: Some(b == Builtin::Midpoint),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DetClass {
    Unit,
    Contractive,
    Expansive,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SchemeTraits {
    pub h: f64,
    pub det: f64,
    pub trace: f64,
    pub discriminant: f64,
    pub admissible: bool,
    pub symplectic: bool,
    pub det_class: DetClass,
}

/// Classifies the scheme's matrix at `h`. The noise vector plays no role, so
/// the coefficients are evaluated with α = (0, 1).
pub fn classify(scheme: &SchemeDef, h: f64, tol: f64) -> Result<SchemeTraits> {
    let c = scheme.coeffs(h, Alpha::new(0.0, 1.0))?;
    Ok(classify_coeffs(&c, h, tol))
}

pub fn classify_coeffs(c: &Coeffs, h: f64, tol: f64) -> SchemeTraits {
    let det = c.det();
    let trace = c.trace();
    let discriminant = c.discriminant();
    let symplectic = (det - 1.0).abs() <= tol;
    let det_class = if symplectic {
        DetClass::Unit
    } else if det < 1.0 {
        DetClass::Contractive
    } else {
        DetClass::Expansive
    };
    SchemeTraits {
        h,
        det,
        trace,
        discriminant,
        admissible: discriminant > 0.0 && det > 0.0,
        symplectic,
        det_class,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct OrderRow {
    pub tau: f64,
    pub h: f64,
    pub a_residual: f64,
    pub b_residual: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct OrderReport {
    pub scheme: String,
    pub rows: Vec<OrderRow>,
    /// Fitted log-log slope of the matrix residual; `None` when the residual
    /// vanishes identically.
    pub a_slope: Option<f64>,
    pub b_slope: Option<f64>,
    pub a_pass: bool,
    pub b_pass: bool,
}

impl OrderReport {
    pub fn pass(&self) -> bool {
        self.a_pass && self.b_pass
    }
}

pub const A_ORDER_THRESHOLD: f64 = 1.8;
pub const B_ORDER_THRESHOLD: f64 = 0.8;

fn residual_slope(taus: &[f64], res: &[f64]) -> Option<f64> {
    if res.iter().all(|&r| r == 0.0) {
        return None;
    }
    let pts: Vec<(f64, f64)> = taus
        .iter()
        .zip(res)
        .filter(|(_, &r)| r > 0.0)
        .map(|(&t, &r)| (t.ln(), r.ln()))
        .collect();
    if pts.len() < 2 {
        return Some(f64::NAN);
    }
    Some(linear_fit(&pts).slope)
}

/// Evaluates the consistency residuals
/// `|a₁₁−1|+|a₂₂−1|+|a₁₂−h|+|a₂₁+h|` and `|b₁−α₁|+|b₂−α₂|` at `h = λ₁τ` for
/// each τ and fits their orders in τ.
pub fn check_convergence_order(
    scheme: &SchemeDef,
    model: &ModelSpec,
    taus: &[f64],
) -> Result<OrderReport> {
    if taus.len() < 2 {
        return Err(Error::InvalidArgument(
            "order check needs at least two step sizes".into(),
        ));
    }
    if taus.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::NonPositiveStep(
            *taus.iter().find(|&&t| !(t > 0.0)).unwrap(),
        ));
    }
    if taus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(
            "step sizes must be strictly decreasing".into(),
        ));
    }
    let alpha = model.alpha();
    let lambda = model.lambda();
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        for &l in &lambda[..model.m()] {
            scheme.admissible_coeffs(l * tau, alpha)?;
        }
        let h = lambda[0] * tau;
        let c = scheme.coeffs(h, alpha)?;
        let a_residual =
            (c.a11 - 1.0).abs() + (c.a22 - 1.0).abs() + (c.a12 - h).abs() + (c.a21 + h).abs();
        let b_residual = (c.b1 - alpha.a1).abs() + (c.b2 - alpha.a2).abs();
        rows.push(OrderRow {
            tau,
            h,
            a_residual,
            b_residual,
        });
    }
    let a_res: Vec<f64> = rows.iter().map(|r| r.a_residual).collect();
    let b_res: Vec<f64> = rows.iter().map(|r| r.b_residual).collect();
    let a_slope = residual_slope(taus, &a_res);
    let b_slope = residual_slope(taus, &b_res);
    Ok(OrderReport {
        scheme: scheme.name.clone(),
        rows,
        a_pass: a_slope.is_none_or(|s| s >= A_ORDER_THRESHOLD),
        b_pass: b_slope.is_none_or(|s| s >= B_ORDER_THRESHOLD),
        a_slope,
        b_slope,
    })
}
