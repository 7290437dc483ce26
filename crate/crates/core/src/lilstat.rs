//! Statistical checks of the LIL claims: ratio statistics on geometric
//! checkpoint grids, variance-growth classification and empirical quadratic
//! variation of the discrete mode martingales.

use rayon::prelude::*;
use serde::Serialize;

use crate::compact::{CompactForm, ModeRotation};
use crate::constants::{discrete_qv, martingale_weights, phi_form, sup_phi, xi_constants};
use crate::noise::{Domain, NoiseStream};
use crate::sampler::{brownian_paths, sample_mode, Engine, Stepping, SystemPlan};
use crate::schemes::{classify, DetClass, SchemeDef, DEFAULT_SYMPLECTIC_TOL};
use crate::spectrum::{exact_lil_constant, ModelSpec};
use crate::stats::{linear_fit, mean, quantile, variance};
use crate::{Error, Result};

/// e², the first admissible checkpoint time is the smallest mⁱ above this.
pub const GRID_START: f64 = std::f64::consts::E * std::f64::consts::E;

/// Minimum number of paths accepted by [`variance_growth`].
pub const MIN_VARIANCE_PATHS: u64 = 1000;

/// r² required for the linear and geometric classes.
pub const R2_THRESHOLD: f64 = 0.99;
/// Relative slope tolerance for the linear and geometric classes.
pub const SLOPE_TOLERANCE: f64 = 0.15;
/// Largest relative variance change per decade for the saturation class.
pub const SATURATION_CHANGE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "eps")]
pub enum Scaling {
    SqrtTLogLogT,
    TPowEps(f64),
}

impl Scaling {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Scaling::SqrtTLogLogT => (t * t.ln().ln()).sqrt(),
            Scaling::TPowEps(eps) => t.powf(eps),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioPoint {
    pub t: f64,
    pub ratio: f64,
    /// Supremum of `ratio` over the statistic's window ending at `t`.
    pub running_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSeries {
    pub scaling: Scaling,
    pub points: Vec<RatioPoint>,
}

impl RatioSeries {
    pub fn final_value(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| p.running_sup)
    }

    /// Statistic at the first checkpoint with t ≥ `t`.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.points.iter().find(|p| p.t >= t).map(|p| p.running_sup)
    }
}

/// Geometric times mⁱ with e² < mⁱ ≤ `t_max`.
pub fn geometric_times(m: f64, t_max: f64) -> Result<Vec<f64>> {
    if !(m > 1.0) || !m.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "grid ratio must exceed 1, got {m}"
        )));
    }
    let lm = m.ln();
    let mut i = (GRID_START.ln() / lm).floor() as i64;
    while m.powf(i as f64) <= GRID_START {
        i += 1;
    }
    let mut out = Vec::new();
    loop {
        let t = m.powf(i as f64);
        if t > t_max * (1.0 + 1e-12) {
            break;
        }
        out.push(t.min(t_max));
        i += 1;
    }
    if out.is_empty() {
        return Err(Error::NoCheckpoint);
    }
    Ok(out)
}

/// Step indices ⌈t/τ⌉ of the given times, strictly increasing and ≥ 1.
pub fn checkpoint_steps(times: &[f64], tau: f64) -> Result<Vec<u64>> {
    if !(tau > 0.0) {
        return Err(Error::NonPositiveStep(tau));
    }
    let mut out: Vec<u64> = Vec::with_capacity(times.len());
    for &t in times {
        let q = t / tau;
        let r = q.round();
        let n = if (q - r).abs() <= 1e-9 * q.max(1.0) {
            r
        } else {
            q.ceil()
        };
        if n >= u64::MAX as f64 {
            return Err(Error::InvalidArgument(format!(
                "time {t} needs more than 2^64 steps"
            )));
        }
        let n = (n as u64).max(1);
        if out.last().is_none_or(|&l| n > l) {
            out.push(n);
        }
    }
    Ok(out)
}

/// `count` evenly spaced step indices ending at `n_max`.
pub fn linear_steps(n_max: u64, count: u64) -> Vec<u64> {
    let count = count.clamp(1, n_max.max(1));
    let mut out: Vec<u64> = (1..=count)
        .map(|i| ((i as u128 * n_max as u128) / count as u128) as u64)
        .filter(|&n| n > 0)
        .collect();
    out.dedup();
    out
}

/// Integer step grid with `per_decade` geometric points per decade from
/// `n_min` to `n_max` inclusive.
pub fn geometric_n_grid(n_min: u64, n_max: u64, per_decade: u32) -> Result<Vec<u64>> {
    if n_min == 0 || n_max < n_min || per_decade == 0 {
        return Err(Error::InvalidArgument(
            "geometric grid needs 1 <= n_min <= n_max and per_decade >= 1".into(),
        ));
    }
    let (lo, hi) = ((n_min as f64).log10(), (n_max as f64).log10());
    let count = ((hi - lo) * per_decade as f64).round() as u64;
    let mut out: Vec<u64> = (0..=count)
        .map(|i| {
            let e = if count == 0 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / count as f64
            };
            10f64.powf(e).round() as u64
        })
        .collect();
    out.dedup();
    Ok(out)
}

fn validate_series(series: &[(f64, f64)]) -> Result<()> {
    if series.iter().any(|&(_, v)| !(v >= 0.0)) {
        return Err(Error::InvalidArgument(
            "norm values must be non-negative".into(),
        ));
    }
    if series.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidArgument("times must be increasing".into()));
    }
    Ok(())
}

/// Indices of the data points matched to the grid mⁱ > e²: for each grid
/// time, the first data point at or after it.
fn grid_selection(series: &[(f64, f64)], m: f64) -> Result<Vec<usize>> {
    let t_last = series.last().ok_or(Error::NoCheckpoint)?.0;
    if t_last <= GRID_START {
        return Err(Error::NoCheckpoint);
    }
    let grid = geometric_times(m, t_last)?;
    let mut sel: Vec<usize> = Vec::with_capacity(grid.len());
    let mut j = 0usize;
    for g in grid {
        while j < series.len() && series[j].0 < g * (1.0 - 1e-12) {
            j += 1;
        }
        if j == series.len() {
            break;
        }
        if sel.last() != Some(&j) {
            sel.push(j);
        }
    }
    if sel.is_empty() {
        return Err(Error::NoCheckpoint);
    }
    Ok(sel)
}

/// Running supremum of value/√(t log log t) over the geometric grid.
pub fn ratio_statistic(series: &[(f64, f64)], m: f64) -> Result<RatioSeries> {
    validate_series(series)?;
    let scaling = Scaling::SqrtTLogLogT;
    let mut sup = f64::NEG_INFINITY;
    let points = grid_selection(series, m)?
        .into_iter()
        .map(|i| {
            let (t, v) = series[i];
            let ratio = v / scaling.eval(t);
            sup = sup.max(ratio);
            RatioPoint {
                t,
                ratio,
                running_sup: sup,
            }
        })
        .collect();
    Ok(RatioSeries { scaling, points })
}

/// Window over which the ε-statistic takes its supremum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsWindow {
    /// Supremum over all checkpoints so far.
    Running,
    /// Supremum over checkpoints in [t/factor, t].
    Trailing(f64),
}

/// value/t^ε on the geometric grid with the supremum taken over `window`.
pub fn eps_ratio_statistic(
    series: &[(f64, f64)],
    eps: f64,
    m: f64,
    window: EpsWindow,
) -> Result<RatioSeries> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if let EpsWindow::Trailing(f) = window {
        if !(f > 1.0) {
            return Err(Error::InvalidArgument(
                "trailing window factor must exceed 1".into(),
            ));
        }
    }
    validate_series(series)?;
    let scaling = Scaling::TPowEps(eps);
    let sel = grid_selection(series, m)?;
    let raw: Vec<(f64, f64)> = sel
        .iter()
        .map(|&i| {
            let (t, v) = series[i];
            (t, v / scaling.eval(t))
        })
        .collect();
    let mut points = Vec::with_capacity(raw.len());
    let mut lo = 0usize;
    let mut running = f64::NEG_INFINITY;
    for (i, &(t, ratio)) in raw.iter().enumerate() {
        let stat = match window {
            EpsWindow::Running => {
                running = running.max(ratio);
                running
            }
            EpsWindow::Trailing(f) => {
                while raw[lo].0 < t / f * (1.0 - 1e-12) {
                    lo += 1;
                }
                raw[lo..=i]
                    .iter()
                    .map(|p| p.1)
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        };
        points.push(RatioPoint {
            t,
            ratio,
            running_sup: stat,
        });
    }
    Ok(RatioSeries { scaling, points })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LilSummary {
    pub paths: usize,
    pub median_final: f64,
    pub q10: f64,
    pub q90: f64,
    pub analytic_target: Option<f64>,
}

pub fn estimate_lil(finals: &[f64], target: Option<f64>) -> LilSummary {
    LilSummary {
        paths: finals.len(),
        median_final: quantile(finals, 0.5),
        q10: quantile(finals, 0.1),
        q90: quantile(finals, 0.9),
        analytic_target: target,
    }
}

/// Which norm of the M-mode state a ratio statistic is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    X,
    Y,
    Joint,
}

/// Analytic LIL constant of `norm` for the engine, when one is known: the
/// exact constant for the continuous system, and √(ξη)-type constants for
/// symplectic schemes.
pub fn analytic_target(
    engine: Engine<'_>,
    model: &ModelSpec,
    tau: f64,
    norm: NormKind,
) -> Result<Option<f64>> {
    match engine {
        Engine::Exact => Ok(Some(exact_lil_constant(model))),
        Engine::Scheme(s) => {
            for &l in &model.lambda()[..model.m()] {
                if !classify(s, l * tau, DEFAULT_SYMPLECTIC_TOL)?.symplectic {
                    return Ok(None);
                }
            }
            let form = phi_form(s, model, tau)?;
            let value = match norm {
                NormKind::Joint => sup_phi(&form)?.value,
                NormKind::X => form
                    .blocks
                    .iter()
                    .map(|b| (b.xi.xi1 * b.eta).max(0.0).sqrt())
                    .fold(0.0, f64::max),
                NormKind::Y => form
                    .blocks
                    .iter()
                    .map(|b| (b.xi.xi2 * b.eta).max(0.0).sqrt())
                    .fold(0.0, f64::max),
            };
            Ok(Some(value))
        }
    }
}

/// Refuses long-horizon statistics for schemes with det A > 1 at some mode.
pub fn ensure_not_expansive(engine: Engine<'_>, model: &ModelSpec, tau: f64) -> Result<()> {
    if let Engine::Scheme(s) = engine {
        for &l in &model.lambda()[..model.m()] {
            let t = classify(s, l * tau, DEFAULT_SYMPLECTIC_TOL)?;
            if t.det_class == DetClass::Expansive {
                return Err(Error::Expansive(format!(
                    "scheme `{}` has det A = {} > 1 at h = {}",
                    s.name,
                    t.det,
                    l * tau
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LilRun {
    pub checkpoints: Vec<u64>,
    pub series: Vec<RatioSeries>,
    pub summary: LilSummary,
}

/// Parameters of a ratio-statistic experiment.
#[derive(Debug, Clone, Copy)]
pub struct LilConfig {
    pub tau: f64,
    pub horizon: f64,
    pub paths: u64,
    pub m: f64,
    pub seed: u64,
    pub stepping: Stepping,
    pub norm: NormKind,
    pub allow_expansive: bool,
}

fn norm_value(r: &crate::sampler::NormRecord, norm: NormKind) -> f64 {
    match norm {
        NormKind::X => r.norm_x,
        NormKind::Y => r.norm_y,
        NormKind::Joint => r.norm_joint,
    }
}

/// Simulates `paths` trajectories up to `horizon` and evaluates the
/// √(t log log t) ratio statistic on each.
pub fn lil_run(engine: Engine<'_>, model: &ModelSpec, cfg: &LilConfig) -> Result<LilRun> {
    if !cfg.allow_expansive {
        ensure_not_expansive(engine, model, cfg.tau)?;
    }
    let times = geometric_times(cfg.m, cfg.horizon)?;
    let checkpoints = checkpoint_steps(&times, cfg.tau)?;
    let plan = SystemPlan::new(engine, cfg.stepping, model, cfg.tau, &checkpoints)?;
    let series = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let recs = plan.run_path(cfg.seed, p);
            let data: Vec<(f64, f64)> = recs
                .iter()
                .map(|r| (r.t, norm_value(r, cfg.norm)))
                .collect();
            ratio_statistic(&data, cfg.m)
        })
        .collect::<Result<Vec<_>>>()?;
    let finals: Vec<f64> = series.iter().map(RatioSeries::final_value).collect();
    let target = analytic_target(engine, model, cfg.tau, cfg.norm)?;
    Ok(LilRun {
        checkpoints,
        series,
        summary: estimate_lil(&finals, target),
    })
}

/// ε-statistic of the X norm for `paths` trajectories.
pub fn eps_run(
    engine: Engine<'_>,
    model: &ModelSpec,
    cfg: &LilConfig,
    eps: f64,
    window: EpsWindow,
) -> Result<Vec<RatioSeries>> {
    if !cfg.allow_expansive {
        ensure_not_expansive(engine, model, cfg.tau)?;
    }
    let times = geometric_times(cfg.m, cfg.horizon)?;
    let checkpoints = checkpoint_steps(&times, cfg.tau)?;
    let plan = SystemPlan::new(engine, cfg.stepping, model, cfg.tau, &checkpoints)?;
    (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let recs = plan.run_path(cfg.seed, p);
            let data: Vec<(f64, f64)> = recs
                .iter()
                .map(|r| (r.t, norm_value(r, cfg.norm)))
                .collect();
            eps_ratio_statistic(&data, eps, cfg.m, window)
        })
        .collect()
}

/// Ratio statistic of |B(t)| for a standard Brownian motion; target √2.
pub fn brownian_lil_run(cfg: &LilConfig) -> Result<LilRun> {
    let times = geometric_times(cfg.m, cfg.horizon)?;
    let checkpoints = checkpoint_steps(&times, cfg.tau)?;
    let paths = brownian_paths(cfg.stepping, cfg.seed, cfg.paths, cfg.tau, &checkpoints)?;
    let series = paths
        .iter()
        .map(|p| ratio_statistic(p, cfg.m))
        .collect::<Result<Vec<_>>>()?;
    let finals: Vec<f64> = series.iter().map(RatioSeries::final_value).collect();
    Ok(LilRun {
        checkpoints,
        series,
        summary: estimate_lil(&finals, Some(std::f64::consts::SQRT_2)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthClass {
    LinearGrowth,
    Saturation,
    GeometricGrowth,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariancePoint {
    pub n: u64,
    pub t: f64,
    pub var: f64,
    /// Standard error of `var` from the sample fourth moment.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    /// Slope, intercept and r² of the fit that decided the class (the linear
    /// fit when inconclusive).
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub classification: GrowthClass,
    pub linear_slope: f64,
    pub linear_r2: f64,
    pub predicted_linear_slope: f64,
    pub log_slope: f64,
    pub log_r2: f64,
    pub predicted_log_slope: f64,
    /// Relative variance change per decade over [n_max/10, n_max].
    pub late_change_per_decade: f64,
    pub points: Vec<VariancePoint>,
}

/// Sample variance and its standard error.
pub fn variance_with_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = mean(xs);
    let v = variance(xs);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let se = ((m4 - v * v * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt();
    (v, se)
}

/// Fits the growth of Var(Xₙ) of mode `k` over `n_grid` and classifies it.
#[allow(clippy::too_many_arguments)]
pub fn variance_growth(
    engine: Engine<'_>,
    model: &ModelSpec,
    k: usize,
    tau: f64,
    n_grid: &[u64],
    paths: u64,
    seed: u64,
) -> Result<GrowthFit> {
    if paths < MIN_VARIANCE_PATHS {
        return Err(Error::InsufficientPaths {
            got: paths,
            need: MIN_VARIANCE_PATHS,
        });
    }
    if n_grid.len() < 3 {
        return Err(Error::InvalidArgument(
            "n_grid needs at least 3 points".into(),
        ));
    }
    let states = sample_mode(
        engine,
        Stepping::Stepwise,
        model,
        k,
        seed,
        paths,
        tau,
        n_grid,
    )?;
    let points: Vec<VariancePoint> = n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let xs: Vec<f64> = states.iter().map(|p| p[i].0).collect();
            let (var, se) = variance_with_se(&xs);
            VariancePoint {
                n,
                t: n as f64 * tau,
                var,
                se,
            }
        })
        .collect();

    let eta = model.eta()[k];
    let (pred_lin, pred_log) = match engine {
        Engine::Exact => (0.5 * eta * model.alpha().norm().powi(2), 0.0),
        Engine::Scheme(s) => {
            let h = model.lambda()[k] * tau;
            let (xi, rot) = xi_constants(s, h, model.alpha())?;
            (0.5 * xi.xi1 * eta, rot.det.ln())
        }
    };
    classify_growth(points, pred_lin, pred_log)
}

/// Classification rules applied to measured variance points.
pub fn classify_growth(
    points: Vec<VariancePoint>,
    pred_lin: f64,
    pred_log: f64,
) -> Result<GrowthFit> {
    if points.iter().any(|p| !(p.var > 0.0) || !p.var.is_finite()) {
        return Err(Error::InvalidArgument(
            "variance must be positive and finite at every grid point".into(),
        ));
    }
    let lin = linear_fit(&points.iter().map(|p| (p.t, p.var)).collect::<Vec<_>>());
    let geo = linear_fit(
        &points
            .iter()
            .map(|p| (p.n as f64, p.var.ln()))
            .collect::<Vec<_>>(),
    );
    let n_max = points.last().unwrap().n;
    let late: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.n * 10 >= n_max)
        .map(|p| ((p.n as f64).log10(), p.var.ln()))
        .collect();
    let late_fit = (late.len() >= 2).then(|| linear_fit(&late));
    let late_change = late_fit.map_or(f64::NAN, |f| f.slope.exp() - 1.0);

    let is_geo = pred_log > 0.0
        && geo.r2 > R2_THRESHOLD
        && (geo.slope - pred_log).abs() <= SLOPE_TOLERANCE * pred_log;
    let is_lin = pred_lin > 0.0
        && lin.r2 > R2_THRESHOLD
        && (lin.slope - pred_lin).abs() <= SLOPE_TOLERANCE * pred_lin;
    let is_sat = late_change.abs() < SATURATION_CHANGE;

    let (classification, chosen) = if is_geo {
        (GrowthClass::GeometricGrowth, geo)
    } else if is_lin {
        (GrowthClass::LinearGrowth, lin)
    } else if is_sat {
        (GrowthClass::Saturation, late_fit.unwrap())
    } else {
        (GrowthClass::Inconclusive, lin)
    };
    Ok(GrowthFit {
        slope: chosen.slope,
        intercept: chosen.intercept,
        r2: chosen.r2,
        classification,
        linear_slope: lin.slope,
        linear_r2: lin.r2,
        predicted_linear_slope: pred_lin,
        log_slope: geo.slope,
        log_r2: geo.r2,
        predicted_log_slope: pred_log,
        late_change_per_decade: late_change,
        points,
    })
}

/// Var(Xₙ) of the numerical recursion from zero initial data:
/// ητ Σ_{j<n} x_coeff(j)².
pub fn discrete_variance(
    scheme: &SchemeDef,
    h: f64,
    model: &ModelSpec,
    k: usize,
    tau: f64,
    n: u64,
) -> Result<(f64, f64)> {
    let form = CompactForm::new(scheme, h, model.alpha(), n)?;
    let w = model.eta()[k] * tau;
    let (mut vx, mut vy) = (0.0, 0.0);
    for j in 0..n {
        vx += form.x_coeff(j).powi(2);
        vy += form.y_coeff(j).powi(2);
    }
    Ok((w * vx, w * vy))
}

/// lim Var(Xₙ) = ητ Σ_{m≥0} w(m)² for a contractive scheme, where w(m) is the
/// weight of an increment m steps in the past.
pub fn stationary_variance(
    scheme: &SchemeDef,
    model: &ModelSpec,
    k: usize,
    tau: f64,
) -> Result<f64> {
    let h = model.lambda()[k] * tau;
    let c = scheme.coeffs(h, model.alpha())?;
    let rot = ModeRotation::from_coeffs(&c, h, &scheme.name)?;
    if rot.det >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "stationary variance needs det A < 1, got {}",
            rot.det
        )));
    }
    let mut sum = 0.0;
    let mut m = 0i64;
    let mut quiet = 0;
    while quiet < 64 && m < 100_000_000 {
        let w = -rot.det * rot.alpha_hat(m - 1) * c.b1 + c.p() * rot.alpha_hat(m);
        let term = w * w;
        sum += term;
        let envelope = rot.sqrt_det.powf(2.0 * m as f64) / (rot.sin_theta * rot.sin_theta);
        if envelope * (c.b1.abs() + c.p().abs()).powi(2) < 1e-17 * sum {
            quiet += 1;
        } else {
            quiet = 0;
        }
        m += 1;
    }
    Ok(model.eta()[k] * tau * sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QvComparison {
    pub sample: f64,
    pub predicted: f64,
    pub se: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QvReport {
    pub n: u64,
    pub paths: u64,
    pub martingales: [QvComparison; 4],
    /// E[M̃₁² + M̃₂²] against ξ₁ηtₙ.
    pub pair_x: QvComparison,
    /// E[M̃₃² + M̃₄²] against ξ₂ηtₙ.
    pub pair_y: QvComparison,
}

impl QvReport {
    pub fn max_abs_z(&self) -> f64 {
        self.martingales
            .iter()
            .chain([&self.pair_x, &self.pair_y])
            .map(|c| if c.z.is_nan() { 0.0 } else { c.z.abs() })
            .fold(0.0, f64::max)
    }
}

fn compare(samples: &[f64], predicted: f64) -> QvComparison {
    let n = samples.len() as f64;
    let sample = mean(samples);
    let se = (variance(samples) / n).sqrt();
    let z = if se > 0.0 {
        (sample - predicted) / se
    } else if sample == predicted {
        0.0
    } else {
        f64::INFINITY
    };
    QvComparison {
        sample,
        predicted,
        se,
        z,
    }
}

/// Sample second moments of the four discrete martingales of mode `k` after
/// `n` steps, driven by the same increments as the numerical engine, against
/// their closed-form quadratic variations.
#[allow(clippy::too_many_arguments)]
pub fn qv_empirical_check(
    scheme: &SchemeDef,
    model: &ModelSpec,
    k: usize,
    tau: f64,
    n: u64,
    paths: u64,
    seed: u64,
) -> Result<QvReport> {
    if paths < 2 {
        return Err(Error::InsufficientPaths {
            got: paths,
            need: 2,
        });
    }
    if k >= model.m() {
        return Err(Error::InvalidArgument(format!(
            "mode index {k} outside truncation"
        )));
    }
    let h = model.lambda()[k] * tau;
    let eta = model.eta()[k];
    let c = scheme.admissible_coeffs(h, model.alpha())?;
    let rot = ModeRotation::from_coeffs(&c, h, &scheme.name)?;
    let qv = discrete_qv(scheme, h, model.alpha(), tau, eta, n)?;
    let weights: Vec<[f64; 4]> = (0..n).map(|j| martingale_weights(&rot, &c, j)).collect();
    let scale = (eta * tau).sqrt();
    let sums: Vec<[f64; 4]> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut noise = NoiseStream::new(seed, Domain::Step, p, k as u64);
            let mut acc = [0.0; 4];
            for w in &weights {
                let g = noise.normal();
                for i in 0..4 {
                    acc[i] += w[i] * g;
                }
            }
            acc.map(|a| a * scale)
        })
        .collect();
    let sq = |i: usize| sums.iter().map(|s| s[i] * s[i]).collect::<Vec<f64>>();
    let preds = [qv.m1, qv.m2, qv.m3, qv.m4];
    let martingales = [0, 1, 2, 3].map(|i| compare(&sq(i), preds[i]));
    let px: Vec<f64> = sums.iter().map(|s| s[0] * s[0] + s[1] * s[1]).collect();
    let py: Vec<f64> = sums.iter().map(|s| s[2] * s[2] + s[3] * s[3]).collect();
    Ok(QvReport {
        n,
        paths,
        martingales,
        pair_x: compare(&px, eta * qv.xi.xi1 * qv.t),
        pair_y: compare(&py, eta * qv.xi.xi2 * qv.t),
    })
}
