//! Rotation-angle machinery and the closed-form solution of the one-step
//! recursion.
//!
//! For an admissible A the eigenvalues are `√det · e^{±iθ}` and Cayley–Hamilton
//! gives `Aⁿ = α̂ₙ A − det·α̂ₙ₋₁ I` with
//! `α̂ₙ = det^{(n−1)/2} sin(nθ)/sin θ`. Substituting into the recursion yields
//! every state as a deterministic part plus a weighted sum of the increments.

use crate::schemes::{Coeffs, SchemeDef};
use crate::spectrum::{Alpha, ModelSpec};
use crate::{Error, Result};

/// Below this value of sin θ a conditioning warning is attached.
pub const SIN_THETA_WARN: f64 = 1e-6;
/// Below this value of sin θ operations refuse to proceed.
pub const SIN_THETA_MIN: f64 = 1e-12;

/// Largest n for which [`compact_coeffs`] materializes whole streams.
pub const MAX_MATERIALIZED: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeRotation {
    pub h: f64,
    pub det: f64,
    pub trace: f64,
    /// Angle in (0, π) with cos θ = tr/(2√det).
    pub theta: f64,
    pub sqrt_det: f64,
    pub sin_theta: f64,
    pub cos_theta: f64,
    /// Set when sin θ is small enough that ξ-type quantities lose accuracy.
    pub ill_conditioned: bool,
}

impl ModeRotation {
    pub fn from_coeffs(c: &Coeffs, h: f64, scheme_name: &str) -> Result<Self> {
        let det = c.det();
        let trace = c.trace();
        let disc = c.discriminant();
        if !(det > 0.0) || !(disc > 0.0) {
            return Err(Error::Inadmissible {
                scheme: scheme_name.to_string(),
                h,
                discriminant: disc,
            });
        }
        let sqrt_det = det.sqrt();
        let theta = disc.sqrt().atan2(trace);
        let sin_theta = disc.sqrt() / (2.0 * sqrt_det);
        if sin_theta < SIN_THETA_MIN {
            return Err(Error::IllConditioned { h, sin_theta });
        }
        Ok(Self {
            h,
            det,
            trace,
            theta,
            sqrt_det,
            sin_theta,
            cos_theta: trace / (2.0 * sqrt_det),
            ill_conditioned: sin_theta < SIN_THETA_WARN,
        })
    }

    /// Rotation with prescribed angle and determinant, for analytic checks.
    pub fn from_angle(theta: f64, det: f64) -> Result<Self> {
        let sin_theta = theta.sin();
        if !(det > 0.0) || !(sin_theta >= SIN_THETA_MIN) {
            return Err(Error::IllConditioned { h: 0.0, sin_theta });
        }
        let sqrt_det = det.sqrt();
        Ok(Self {
            h: 0.0,
            det,
            trace: 2.0 * sqrt_det * theta.cos(),
            theta,
            sqrt_det,
            sin_theta,
            cos_theta: theta.cos(),
            ill_conditioned: sin_theta < SIN_THETA_WARN,
        })
    }

    pub fn warning(&self) -> Option<String> {
        self.ill_conditioned.then(|| {
            format!(
                "sin(theta) = {:.3e} at h = {}; results divided by sin^2(theta) are poorly conditioned",
                self.sin_theta, self.h
            )
        })
    }

    /// α̂ₙ = det^{(n−1)/2}·sin(nθ)/sin θ, valid for every integer n.
    #[inline]
    pub fn alpha_hat(&self, n: i64) -> f64 {
        let scale = if self.det == 1.0 {
            1.0
        } else {
            self.sqrt_det.powf((n - 1) as f64)
        };
        scale * (n as f64 * self.theta).sin() / self.sin_theta
    }
}

/// Rotation data of `scheme` at `h`; the matrix does not depend on α.
pub fn theta_of(scheme: &SchemeDef, h: f64) -> Result<ModeRotation> {
    let c = scheme.coeffs(h, Alpha::new(0.0, 1.0))?;
    ModeRotation::from_coeffs(&c, h, &scheme.name)
}

/// Closed forms of `Σ_{j=0}^{n−1} sin(2jθ)` and `Σ_{j=0}^{n−1} cos(2jθ)`.
pub fn trig_sums(theta: f64, n: u64) -> (f64, f64) {
    let s = theta.sin();
    let w = (2.0 * n as f64 - 1.0) * theta;
    (
        (theta.cos() - w.cos()) / (2.0 * s),
        0.5 + w.sin() / (2.0 * s),
    )
}

/// Closed forms of `Σ_{j=0}^{n−2} α̂ⱼ²` and `2Σ_{j=1}^{n−1} α̂ⱼα̂ⱼ₋₁` for a
/// rotation with unit determinant. Requires n ≥ 2.
pub fn unit_det_alpha_hat_sums(theta: f64, n: u64) -> (f64, f64) {
    let s = theta.sin();
    let s2 = s * s;
    let nf = n as f64;
    let squares = ((nf - 2.0) / 2.0 - ((2.0 * nf - 3.0) * theta).sin() / (4.0 * s) + 0.25) / s2;
    let cross = ((nf - 2.0) * theta.cos()
        - ((2.0 * (nf - 1.0) * theta).sin() - (2.0 * theta).sin()) / (2.0 * s))
        / s2;
    (squares, cross)
}

/// Closed form of the n-step solution for one mode, evaluated on demand.
#[derive(Debug, Clone, Copy)]
pub struct CompactForm {
    pub rot: ModeRotation,
    pub coeffs: Coeffs,
    pub n: u64,
}

impl CompactForm {
    pub fn new(scheme: &SchemeDef, h: f64, alpha: Alpha, n: u64) -> Result<Self> {
        let coeffs = scheme.coeffs(h, alpha)?;
        let rot = ModeRotation::from_coeffs(&coeffs, h, &scheme.name)?;
        Ok(Self { rot, coeffs, n })
    }

    /// Weight of increment j (0 ≤ j < n) in Xₙ, before the √η factor.
    #[inline]
    pub fn x_coeff(&self, j: u64) -> f64 {
        let c = &self.coeffs;
        let m = self.n as i64 - 1 - j as i64;
        -self.rot.det * self.rot.alpha_hat(m - 1) * c.b1 + c.p() * self.rot.alpha_hat(m)
    }

    /// Weight of increment j in Yₙ, before the √η factor.
    #[inline]
    pub fn y_coeff(&self, j: u64) -> f64 {
        let c = &self.coeffs;
        let m = self.n as i64 - 1 - j as i64;
        c.q() * self.rot.alpha_hat(m) + c.b2 * self.rot.alpha_hat(m + 1)
    }

    /// Contribution of the initial data, i.e. Aⁿ(x₀, y₀).
    pub fn det_part(&self, x0: f64, y0: f64) -> (f64, f64) {
        let c = &self.coeffs;
        let n = self.n as i64;
        let an = self.rot.alpha_hat(n);
        let x = -self.rot.det * self.rot.alpha_hat(n - 1) * x0 + an * (c.a11 * x0 + c.a12 * y0);
        let y = c.a21 * an * x0 + self.rot.alpha_hat(n + 1) * y0 - c.a11 * an * y0;
        (x, y)
    }

    /// Xₙ, Yₙ from the initial data and the increments δβ₀..δβₙ₋₁, consumed
    /// in order. Also returns Σ|weight·δβ| for X and Y, the natural scale
    /// against which rounding in the sum is judged.
    pub fn reconstruct<I>(&self, x0: f64, y0: f64, sqrt_eta: f64, increments: I) -> Reconstruction
    where
        I: IntoIterator<Item = f64>,
    {
        let (dx, dy) = self.det_part(x0, y0);
        let (mut sx, mut sy, mut ax, mut ay) = (0.0, 0.0, dx.abs(), dy.abs());
        let mut count = 0u64;
        for (j, d) in increments.into_iter().enumerate() {
            let j = j as u64;
            assert!(j < self.n, "more increments than steps");
            let tx = sqrt_eta * self.x_coeff(j) * d;
            let ty = sqrt_eta * self.y_coeff(j) * d;
            sx += tx;
            sy += ty;
            ax += tx.abs();
            ay += ty.abs();
            count += 1;
        }
        assert_eq!(count, self.n, "fewer increments than steps");
        Reconstruction {
            x: dx + sx,
            y: dy + sy,
            x_scale: ax,
            y_scale: ay,
        }
    }

    /// Streams (x_coeff, y_coeff) in blocks of at most `block` entries.
    pub fn blocks(&self, block: usize) -> impl Iterator<Item = (Vec<f64>, Vec<f64>)> + '_ {
        let block = block.max(1) as u64;
        (0..self.n.div_ceil(block)).map(move |b| {
            let lo = b * block;
            let hi = (lo + block).min(self.n);
            (
                (lo..hi).map(|j| self.x_coeff(j)).collect(),
                (lo..hi).map(|j| self.y_coeff(j)).collect(),
            )
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reconstruction {
    pub x: f64,
    pub y: f64,
    pub x_scale: f64,
    pub y_scale: f64,
}

/// Fully materialized weight streams for one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactCoeffs {
    pub n: usize,
    pub x_coeff: Vec<f64>,
    pub y_coeff: Vec<f64>,
    pub x_det_part: f64,
    pub y_det_part: f64,
}

fn mode_h(model: &ModelSpec, k: usize, tau: f64) -> Result<f64> {
    if k >= model.m() {
        return Err(Error::InvalidArgument(format!(
            "mode index {k} outside truncation M = {}",
            model.m()
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::NonPositiveStep(tau));
    }
    Ok(model.lambda()[k] * tau)
}

/// Materializes the weight streams of mode `k` (0-based) for `n` steps.
pub fn compact_coeffs(
    scheme: &SchemeDef,
    model: &ModelSpec,
    k: usize,
    tau: f64,
    n: usize,
) -> Result<CompactCoeffs> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if n > MAX_MATERIALIZED {
        return Err(Error::InvalidArgument(format!(
            "n = {n} exceeds {MAX_MATERIALIZED}; stream the weights with CompactForm::blocks"
        )));
    }
    let h = mode_h(model, k, tau)?;
    let form = CompactForm::new(scheme, h, model.alpha(), n as u64)?;
    let (x_det_part, y_det_part) = form.det_part(model.x0()[k], model.y0()[k]);
    Ok(CompactCoeffs {
        n,
        x_coeff: (0..n as u64).map(|j| form.x_coeff(j)).collect(),
        y_coeff: (0..n as u64).map(|j| form.y_coeff(j)).collect(),
        x_det_part,
        y_det_part,
    })
}

/// Applies the raw recursion `z ← A z + √η b δβ` once per increment.
pub fn iterate_reference(
    scheme: &SchemeDef,
    model: &ModelSpec,
    k: usize,
    tau: f64,
    increments: &[f64],
) -> Result<(f64, f64)> {
    let h = mode_h(model, k, tau)?;
    let c = scheme.coeffs(h, model.alpha())?;
    let s = model.eta()[k].sqrt();
    let (mut x, mut y) = (model.x0()[k], model.y0()[k]);
    for &d in increments {
        let (ax, ay) = c.apply(x, y);
        x = ax + s * c.b1 * d;
        y = ay + s * c.b2 * d;
    }
    Ok((x, y))
}
