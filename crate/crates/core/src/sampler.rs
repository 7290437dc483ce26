//! Trajectory engines.
//!
//! Two per-mode engines share one noise discipline: the exact Gaussian
//! transition of the continuous system and the raw one-step recursion of a
//! scheme. Both read increments from [`NoiseStream`]s in the step domain, so a
//! numerical path and an exact path with the same seed are driven by the same
//! Brownian increments. Long horizons are handled by jumping directly between
//! checkpoints with the aggregated transition over each interval.

use rayon::prelude::*;

use crate::noise::{Domain, NoiseStream};
use crate::schemes::{Coeffs, SchemeDef};
use crate::spectrum::ModelSpec;
use crate::{Error, Result};

/// Row-major 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &o.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }

    pub fn transpose(&self) -> Mat2 {
        let a = &self.0;
        Mat2([[a[0][0], a[1][0]], [a[0][1], a[1][1]]])
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let a = &self.0;
        (a[0][0] * x + a[0][1] * y, a[1][0] * x + a[1][1] * y)
    }

    /// self · s · selfᵀ
    pub fn congruence(&self, s: &Mat2) -> Mat2 {
        self.mul(s).mul(&self.transpose())
    }

    pub fn from_coeffs(c: &Coeffs) -> Mat2 {
        Mat2([[c.a11, c.a12], [c.a21, c.a22]])
    }
}

/// Lower Cholesky factor of a symmetric PSD matrix, clamping rounding-level
/// negative pivots to zero.
pub fn cholesky_psd(s: &Mat2) -> Mat2 {
    let c11 = s.0[0][0].max(0.0);
    let c21 = 0.5 * (s.0[1][0] + s.0[0][1]);
    let l11 = c11.sqrt();
    if l11 == 0.0 {
        return Mat2([[0.0, 0.0], [0.0, s.0[1][1].max(0.0).sqrt()]]);
    }
    let l21 = c21 / l11;
    let l22 = (s.0[1][1] - l21 * l21).max(0.0).sqrt();
    Mat2([[l11, 0.0], [l21, l22]])
}

/// Square-root factor F with F·Fᵀ = `s`, lower-triangular in the orthonormal
/// basis whose first vector is `dir`.
pub fn aligned_sqrt(s: &Mat2, dir: (f64, f64)) -> Mat2 {
    let n = dir.0.hypot(dir.1);
    let (u1, u2) = if n > 0.0 {
        (dir.0 / n, dir.1 / n)
    } else {
        (1.0, 0.0)
    };
    let p = Mat2([[u1, -u2], [u2, u1]]);
    let local = p.transpose().congruence(s);
    p.mul(&cholesky_psd(&local))
}

/// Exact one-interval transition of a mode: z ← R z + F g with g standard
/// normal in R² and F Fᵀ = C.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactTransition {
    pub rotation: Mat2,
    pub noise_cov: Mat2,
    /// Square-root factor of `noise_cov`; its first column is parallel to σ.
    pub chol: Mat2,
}

impl ExactTransition {
    #[inline]
    pub fn apply(&self, z: (f64, f64), g: (f64, f64)) -> (f64, f64) {
        let (rx, ry) = self.rotation.apply(z.0, z.1);
        let (nx, ny) = self.chol.apply(g.0, g.1);
        (rx + nx, ry + ny)
    }
}

/// Covariance of the stochastic convolution over [0, τ] for noise direction
/// σ = √η(α₁, α₂), rotation rate λ.
pub fn convolution_covariance(lambda: f64, eta: f64, a1: f64, a2: f64, tau: f64) -> Result<Mat2> {
    let (ic, is) = crate::constants::continuous_qv(tau, lambda, 1.0)?;
    let ics = crate::constants::continuous_cross(tau, lambda, 1.0)?;
    let vx = eta * (a1 * a1 * ic + a2 * a2 * is + 2.0 * a1 * a2 * ics);
    let vy = eta * (a1 * a1 * is + a2 * a2 * ic - 2.0 * a1 * a2 * ics);
    let cov = eta * (a1 * a2 * (ic - is) + (a2 * a2 - a1 * a1) * ics);
    Ok(Mat2([[vx, cov], [cov, vy]]))
}

pub fn exact_transition(model: &ModelSpec, k: usize, tau: f64) -> Result<ExactTransition> {
    check_mode(model, k)?;
    if !(tau > 0.0) {
        return Err(Error::NonPositiveStep(tau));
    }
    let lambda = model.lambda()[k];
    let eta = model.eta()[k];
    let a = model.alpha();
    let (s, c) = (lambda * tau).sin_cos();
    let rotation = Mat2([[c, s], [-s, c]]);
    let noise_cov = convolution_covariance(lambda, eta, a.a1, a.a2, tau)?;
    let chol = aligned_sqrt(&noise_cov, (a.a1, a.a2));
    Ok(ExactTransition {
        rotation,
        noise_cov,
        chol,
    })
}

/// (A^L, Σ_{i<L} A^i s Aⁱᵀ) by binary powering.
pub fn aggregate_steps(a: &Mat2, s: &Mat2, l: u64) -> (Mat2, Mat2) {
    let mut acc = (Mat2::IDENTITY, Mat2::ZERO);
    let mut base = (*a, *s);
    let mut rem = l;
    while rem > 0 {
        if rem & 1 == 1 {
            acc = (base.0.mul(&acc.0), base.0.congruence(&acc.1).add(&base.1));
        }
        rem >>= 1;
        if rem > 0 {
            base = (base.0.mul(&base.0), base.0.congruence(&base.1).add(&base.1));
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeState {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub k: usize,
}

/// Which dynamics drives the modes.
#[derive(Debug, Clone, Copy)]
pub enum Engine<'a> {
    Exact,
    Scheme(&'a SchemeDef),
}

impl Engine<'_> {
    pub fn label(&self) -> &str {
        match self {
            Engine::Exact => "exact",
            Engine::Scheme(s) => &s.name,
        }
    }
}

/// Whether every step is simulated or each checkpoint interval is sampled in
/// one draw from its aggregated Gaussian transition. Both give the same law at
/// the checkpoints; only the step-wise mode shares increments between engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stepping {
    Stepwise,
    CheckpointJump,
}

#[derive(Debug, Clone)]
enum Kernel {
    ExactStep { rot: Mat2, chol: Mat2 },
    SchemeStep { a: Coeffs, bx: f64, by: f64 },
    Jump(Vec<(Mat2, Mat2)>),
}

fn check_mode(model: &ModelSpec, k: usize) -> Result<()> {
    if k >= model.m() {
        return Err(Error::InvalidArgument(format!(
            "mode index {k} outside truncation M = {}",
            model.m()
        )));
    }
    Ok(())
}

fn check_checkpoints(checkpoints: &[u64]) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(Error::NoCheckpoint);
    }
    if checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "checkpoints must be strictly increasing step indices".into(),
        ));
    }
    Ok(())
}

fn interval_lengths(checkpoints: &[u64]) -> impl Iterator<Item = u64> + '_ {
    checkpoints.iter().scan(0u64, |prev, &c| {
        let l = c - *prev;
        *prev = c;
        Some(l)
    })
}

fn build_kernel(
    engine: Engine<'_>,
    stepping: Stepping,
    model: &ModelSpec,
    k: usize,
    tau: f64,
    checkpoints: &[u64],
) -> Result<Kernel> {
    check_mode(model, k)?;
    if !(tau > 0.0) {
        return Err(Error::NonPositiveStep(tau));
    }
    let h = model.lambda()[k] * tau;
    let eta = model.eta()[k];
    match (engine, stepping) {
        (Engine::Exact, Stepping::Stepwise) => {
            let tr = exact_transition(model, k, tau)?;
            Ok(Kernel::ExactStep {
                rot: tr.rotation,
                chol: tr.chol,
            })
        }
        (Engine::Scheme(s), Stepping::Stepwise) => {
            let a = s.admissible_coeffs(h, model.alpha())?;
            let scale = (eta * tau).sqrt();
            Ok(Kernel::SchemeStep {
                a,
                bx: scale * a.b1,
                by: scale * a.b2,
            })
        }
        (Engine::Exact, Stepping::CheckpointJump) => {
            let mut out = Vec::with_capacity(checkpoints.len());
            for l in interval_lengths(checkpoints) {
                if l == 0 {
                    out.push((Mat2::IDENTITY, Mat2::ZERO));
                } else {
                    let tr = exact_transition(model, k, l as f64 * tau)?;
                    out.push((tr.rotation, tr.chol));
                }
            }
            Ok(Kernel::Jump(out))
        }
        (Engine::Scheme(s), Stepping::CheckpointJump) => {
            let c = s.admissible_coeffs(h, model.alpha())?;
            let a = Mat2::from_coeffs(&c);
            let w = eta * tau;
            let s1 = Mat2([
                [w * c.b1 * c.b1, w * c.b1 * c.b2],
                [w * c.b1 * c.b2, w * c.b2 * c.b2],
            ]);
            let out = interval_lengths(checkpoints)
                .map(|l| {
                    let (al, sl) = aggregate_steps(&a, &s1, l);
                    (al, aligned_sqrt(&sl, (c.b1, c.b2)))
                })
                .collect();
            Ok(Kernel::Jump(out))
        }
    }
}

/// Runs one mode along one path and calls `emit(i, x, y)` at each checkpoint.
fn run_kernel<F: FnMut(usize, f64, f64)>(
    kernel: &Kernel,
    seed: u64,
    path: u64,
    k: usize,
    z0: (f64, f64),
    checkpoints: &[u64],
    mut emit: F,
) {
    let (mut x, mut y) = z0;
    match kernel {
        Kernel::ExactStep { rot, chol } => {
            let mut noise = NoiseStream::new(seed, Domain::Step, path, k as u64);
            let mut n = 0u64;
            for (i, &c) in checkpoints.iter().enumerate() {
                while n < c {
                    let g = noise.normal_pair();
                    let (rx, ry) = rot.apply(x, y);
                    let (nx, ny) = chol.apply(g.0, g.1);
                    x = rx + nx;
                    y = ry + ny;
                    n += 1;
                }
                emit(i, x, y);
            }
        }
        Kernel::SchemeStep { a, bx, by } => {
            let mut noise = NoiseStream::new(seed, Domain::Step, path, k as u64);
            let mut n = 0u64;
            for (i, &c) in checkpoints.iter().enumerate() {
                while n < c {
                    let g = noise.normal();
                    let (ax, ay) = a.apply(x, y);
                    x = ax + bx * g;
                    y = ay + by * g;
                    n += 1;
                }
                emit(i, x, y);
            }
        }
        Kernel::Jump(transitions) => {
            let mut noise = NoiseStream::new(seed, Domain::Jump, path, k as u64);
            for (i, (a, f)) in transitions.iter().enumerate() {
                let g = noise.normal_pair();
                let (ax, ay) = a.apply(x, y);
                let (nx, ny) = f.apply(g.0, g.1);
                x = ax + nx;
                y = ay + ny;
                emit(i, x, y);
            }
        }
    }
}

/// States of mode `k` at the checkpoint step indices under the given engine.
#[allow(clippy::too_many_arguments)]
pub fn evolve_mode(
    engine: Engine<'_>,
    stepping: Stepping,
    model: &ModelSpec,
    seed: u64,
    path: u64,
    k: usize,
    tau: f64,
    checkpoints: &[u64],
) -> Result<Vec<ModeState>> {
    check_checkpoints(checkpoints)?;
    let kernel = build_kernel(engine, stepping, model, k, tau, checkpoints)?;
    let mut out = Vec::with_capacity(checkpoints.len());
    run_kernel(
        &kernel,
        seed,
        path,
        k,
        (model.x0()[k], model.y0()[k]),
        checkpoints,
        |i, x, y| {
            out.push(ModeState {
                x,
                y,
                t: checkpoints[i] as f64 * tau,
                k,
            })
        },
    );
    Ok(out)
}

/// Exact transitions applied step by step.
pub fn evolve_exact(
    model: &ModelSpec,
    seed: u64,
    path: u64,
    k: usize,
    tau: f64,
    checkpoints: &[u64],
) -> Result<Vec<ModeState>> {
    evolve_mode(
        Engine::Exact,
        Stepping::Stepwise,
        model,
        seed,
        path,
        k,
        tau,
        checkpoints,
    )
}

/// The raw scheme recursion applied step by step.
pub fn evolve_numeric(
    scheme: &SchemeDef,
    model: &ModelSpec,
    seed: u64,
    path: u64,
    k: usize,
    tau: f64,
    checkpoints: &[u64],
) -> Result<Vec<ModeState>> {
    evolve_mode(
        Engine::Scheme(scheme),
        Stepping::Stepwise,
        model,
        seed,
        path,
        k,
        tau,
        checkpoints,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormRecord {
    pub t: f64,
    pub norm_x: f64,
    pub norm_y: f64,
    pub norm_joint: f64,
}

/// Prepared per-mode kernels for a whole system; reusable across paths.
pub struct SystemPlan {
    kernels: Vec<Kernel>,
    z0: Vec<(f64, f64)>,
    checkpoints: Vec<u64>,
    tau: f64,
}

impl SystemPlan {
    pub fn new(
        engine: Engine<'_>,
        stepping: Stepping,
        model: &ModelSpec,
        tau: f64,
        checkpoints: &[u64],
    ) -> Result<Self> {
        check_checkpoints(checkpoints)?;
        let kernels = (0..model.m())
            .map(|k| build_kernel(engine, stepping, model, k, tau, checkpoints))
            .collect::<Result<_>>()?;
        let z0 = (0..model.m())
            .map(|k| (model.x0()[k], model.y0()[k]))
            .collect();
        Ok(Self {
            kernels,
            z0,
            checkpoints: checkpoints.to_vec(),
            tau,
        })
    }

    pub fn checkpoints(&self) -> &[u64] {
        &self.checkpoints
    }

    /// Norms of one path at every checkpoint. Mode contributions are summed
    /// in index order.
    pub fn run_path(&self, seed: u64, path: u64) -> Vec<NormRecord> {
        let nc = self.checkpoints.len();
        let mut sx = vec![0.0; nc];
        let mut sy = vec![0.0; nc];
        for (k, kernel) in self.kernels.iter().enumerate() {
            run_kernel(
                kernel,
                seed,
                path,
                k,
                self.z0[k],
                &self.checkpoints,
                |i, x, y| {
                    sx[i] += x * x;
                    sy[i] += y * y;
                },
            );
        }
        self.checkpoints
            .iter()
            .zip(sx.iter().zip(&sy))
            .map(|(&c, (&a, &b))| NormRecord {
                t: c as f64 * self.tau,
                norm_x: a.sqrt(),
                norm_y: b.sqrt(),
                norm_joint: (a + b).sqrt(),
            })
            .collect()
    }

    /// States of a single mode for one path.
    pub fn run_mode(&self, seed: u64, path: u64, k: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.checkpoints.len());
        run_kernel(
            &self.kernels[k],
            seed,
            path,
            k,
            self.z0[k],
            &self.checkpoints,
            |_, x, y| out.push((x, y)),
        );
        out
    }
}

/// Norm series of one path of the full M-mode system.
#[allow(clippy::too_many_arguments)]
pub fn evolve_system(
    engine: Engine<'_>,
    stepping: Stepping,
    model: &ModelSpec,
    seed: u64,
    path: u64,
    tau: f64,
    checkpoints: &[u64],
) -> Result<Vec<NormRecord>> {
    Ok(SystemPlan::new(engine, stepping, model, tau, checkpoints)?.run_path(seed, path))
}

/// Norm series for paths `0..paths`, computed in parallel and returned in path
/// order.
pub fn simulate_paths(
    engine: Engine<'_>,
    stepping: Stepping,
    model: &ModelSpec,
    seed: u64,
    paths: u64,
    tau: f64,
    checkpoints: &[u64],
) -> Result<Vec<Vec<NormRecord>>> {
    let plan = SystemPlan::new(engine, stepping, model, tau, checkpoints)?;
    Ok((0..paths)
        .into_par_iter()
        .map(|p| plan.run_path(seed, p))
        .collect())
}

/// States of mode `k` for paths `0..paths`, in path order.
#[allow(clippy::too_many_arguments)]
pub fn sample_mode(
    engine: Engine<'_>,
    stepping: Stepping,
    model: &ModelSpec,
    k: usize,
    seed: u64,
    paths: u64,
    tau: f64,
    checkpoints: &[u64],
) -> Result<Vec<Vec<(f64, f64)>>> {
    check_checkpoints(checkpoints)?;
    check_mode(model, k)?;
    let kernel = build_kernel(engine, stepping, model, k, tau, checkpoints)?;
    let z0 = (model.x0()[k], model.y0()[k]);
    Ok((0..paths)
        .into_par_iter()
        .map(|p| {
            let mut out = Vec::with_capacity(checkpoints.len());
            run_kernel(&kernel, seed, p, k, z0, checkpoints, |_, x, y| {
                out.push((x, y))
            });
            out
        })
        .collect())
}

/// |B(t)| of a standard Brownian motion at the checkpoint times, for paths
/// `0..paths` in path order. Step-wise mode accumulates √τ·g per step.
pub fn brownian_paths(
    stepping: Stepping,
    seed: u64,
    paths: u64,
    tau: f64,
    checkpoints: &[u64],
) -> Result<Vec<Vec<(f64, f64)>>> {
    check_checkpoints(checkpoints)?;
    if !(tau > 0.0) {
        return Err(Error::NonPositiveStep(tau));
    }
    let st = tau.sqrt();
    Ok((0..paths)
        .into_par_iter()
        .map(|p| {
            let mut b = 0.0;
            let mut out = Vec::with_capacity(checkpoints.len());
            match stepping {
                Stepping::Stepwise => {
                    let mut noise = NoiseStream::new(seed, Domain::Brownian, p, 0);
                    let mut n = 0u64;
                    for &c in checkpoints {
                        while n < c {
                            b += st * noise.normal();
                            n += 1;
                        }
                        out.push((c as f64 * tau, b.abs()));
                    }
                }
                Stepping::CheckpointJump => {
                    let mut noise = NoiseStream::new(seed, Domain::BrownianJump, p, 0);
                    for (l, &c) in interval_lengths(checkpoints).zip(checkpoints) {
                        b += (l as f64 * tau).sqrt() * noise.normal();
                        out.push((c as f64 * tau, b.abs()));
                    }
                }
            }
            out
        })
        .collect())
}
