//! Closed-form LIL quantities: the per-mode variance rates ξ₁, ξ₂, ξ₃, the
//! quadratic form φ and its supremum on the unit sphere, continuous and
//! discrete quadratic variations, and the small-step preservation sweep.

use serde::Serialize;

use crate::compact::ModeRotation;
use crate::schemes::{check_convergence_order, classify, Coeffs, OrderReport, SchemeDef};
use crate::spectrum::{exact_lil_constant, Alpha, ModelSpec};
use crate::{Error, Result};

/// Values of |ξ₃| below this floor are treated as zero when judging
/// monotone convergence.
pub const XI3_FLOOR: f64 = 1e-12;

/// Tolerance on negative eigenvalues of a ξ block.
pub const PSD_TOL: f64 = 1e-10;

/// Variance rates of the discrete martingale pair of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XiTriple {
    pub xi1: f64,
    pub xi2: f64,
    pub xi3: f64,
}

impl XiTriple {
    pub const ZERO: XiTriple = XiTriple {
        xi1: 0.0,
        xi2: 0.0,
        xi3: 0.0,
    };

    /// Eigenvalues (min, max) of [[ξ₁, ξ₃/2], [ξ₃/2, ξ₂]].
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mid = 0.5 * (self.xi1 + self.xi2);
        let rad = (0.5 * (self.xi1 - self.xi2)).hypot(0.5 * self.xi3);
        (mid - rad, mid + rad)
    }

    /// Unit eigenvector for the largest eigenvalue.
    pub fn top_eigenvector(&self) -> (f64, f64) {
        let (_, lmax) = self.eigenvalues();
        let c = 0.5 * self.xi3;
        let u = (lmax - self.xi2, c);
        let v = (c, lmax - self.xi1);
        let (nu, nv) = (u.0.hypot(u.1), v.0.hypot(v.1));
        if nu == 0.0 && nv == 0.0 {
            return (1.0, 0.0);
        }
        let (w, n) = if nu >= nv { (u, nu) } else { (v, nv) };
        (w.0 / n, w.1 / n)
    }
}

/// ξ₁, ξ₂, ξ₃ from the coefficients and the cosine/sine of the rotation
/// angle.
pub fn xi_from_parts(c: &Coeffs, cos_t: f64, sin_t: f64) -> XiTriple {
    let (b1, b2, p, q) = (c.b1, c.b2, c.p(), c.q());
    let s2 = sin_t * sin_t;
    let cos2 = 2.0 * cos_t * cos_t - 1.0;
    XiTriple {
        xi1: (b1 * b1 + p * p - 2.0 * b1 * p * cos_t) / s2,
        xi2: (b2 * b2 + q * q + 2.0 * b2 * q * cos_t) / s2,
        xi3: (-b1 * b2 * cos2 + (b2 * p - b1 * q) * cos_t + p * q) / s2,
    }
}

/// ξ constants of `scheme` at `h` for noise coefficients `alpha`, with the
/// rotation data they were computed from.
pub fn xi_constants(scheme: &SchemeDef, h: f64, alpha: Alpha) -> Result<(XiTriple, ModeRotation)> {
    let c = scheme.coeffs(h, alpha)?;
    let rot = ModeRotation::from_coeffs(&c, h, &scheme.name)?;
    Ok((xi_from_parts(&c, rot.cos_theta, rot.sin_theta), rot))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiBlock {
    pub xi: XiTriple,
    pub eta: f64,
}

/// φ(ρ) = Σₖ (ξ₁ρ₁ₖ² + ξ₂ρ₂ₖ² + ξ₃ρ₁ₖρ₂ₖ)ηₖ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiForm {
    pub blocks: Vec<PhiBlock>,
}

impl PhiForm {
    pub fn new(blocks: Vec<PhiBlock>) -> Self {
        Self { blocks }
    }

    pub fn m(&self) -> usize {
        self.blocks.len()
    }

    pub fn evaluate(&self, rho: &[(f64, f64)]) -> f64 {
        assert_eq!(rho.len(), self.blocks.len());
        self.blocks
            .iter()
            .zip(rho)
            .map(|(b, &(r1, r2))| {
                (b.xi.xi1 * r1 * r1 + b.xi.xi2 * r2 * r2 + b.xi.xi3 * r1 * r2) * b.eta
            })
            .sum()
    }
}

/// φ for the first M modes of `model` under `scheme` at step `tau`.
pub fn phi_form(scheme: &SchemeDef, model: &ModelSpec, tau: f64) -> Result<PhiForm> {
    let blocks = (0..model.m())
        .map(|k| {
            let (xi, _) = xi_constants(scheme, model.lambda()[k] * tau, model.alpha())?;
            Ok(PhiBlock {
                xi,
                eta: model.eta()[k],
            })
        })
        .collect::<Result<_>>()?;
    Ok(PhiForm::new(blocks))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupPhi {
    /// sup of √φ over the unit sphere.
    pub value: f64,
    /// Index of the block carrying the maximizer.
    pub mode: usize,
    pub argmax: Vec<(f64, f64)>,
}

/// Supremum of √φ over Σ(ρ₁ₖ² + ρ₂ₖ²) = 1, attained on the block with the
/// largest λ_max·η. Ties go to the lowest index.
pub fn sup_phi(form: &PhiForm) -> Result<SupPhi> {
    if form.blocks.is_empty() {
        return Err(Error::EmptyForm);
    }
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (k, b) in form.blocks.iter().enumerate() {
        let (lmin, lmax) = b.xi.eigenvalues();
        let scale = lmax.abs().max(1.0);
        if lmin < -PSD_TOL * scale {
            return Err(Error::InvalidArgument(format!(
                "block {k} is not positive semidefinite (eigenvalue {lmin})"
            )));
        }
        let v = lmax * b.eta;
        if v > best.0 {
            best = (v, k);
        }
    }
    let (v, mode) = best;
    let mut argmax = vec![(0.0, 0.0); form.blocks.len()];
    argmax[mode] = form.blocks[mode].xi.top_eigenvector();
    Ok(SupPhi {
        value: v.max(0.0).sqrt(),
        mode,
        argmax,
    })
}

/// η(2x − sin 2x)/(4λ) with x = λt, accurate for small x.
fn half_x_minus_sin(x2: f64) -> f64 {
    if x2.abs() < 0.1 {
        let x = x2;
        let x2sq = x * x;
        let mut term = x * x2sq / 6.0;
        let mut sum = 0.0;
        let mut k = 3.0;
        for _ in 0..8 {
            sum += term;
            term *= -x2sq / ((k + 1.0) * (k + 2.0));
            k += 2.0;
        }
        sum
    } else {
        x2 - x2.sin()
    }
}

/// (η∫₀ᵗcos²(λs)ds, η∫₀ᵗsin²(λs)ds).
pub fn continuous_qv(t: f64, lambda: f64, eta: f64) -> Result<(f64, f64)> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "t must be non-negative, got {t}"
        )));
    }
    let qv_sin = eta * half_x_minus_sin(2.0 * lambda * t) / (4.0 * lambda);
    let qv_cos = eta * t - qv_sin;
    Ok((qv_cos, qv_sin))
}

/// η∫₀ᵗcos(λs)sin(λs)ds = η sin²(λt)/(2λ).
pub fn continuous_cross(t: f64, lambda: f64, eta: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let s = (lambda * t).sin();
    Ok(eta * s * s / (2.0 * lambda))
}

/// Quadratic variations of the four discrete mode martingales after n steps,
/// including the √η factor (so every entry carries a factor η).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscreteQv {
    pub n: u64,
    pub t: f64,
    pub xi: XiTriple,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub k1: f64,
    pub k2: f64,
    pub k1_bound: f64,
    pub k2_bound: f64,
}

/// Closed forms ⟨M̃₁⟩, ⟨M̃₂⟩ = η(ξ₁tₙ/2 ± K₁) and ⟨M̃₃⟩, ⟨M̃₄⟩ = η(ξ₂tₙ/2 ± K₂),
/// where M̃₁, M̃₂ weight δβⱼ by (−b₁cos((j+1)θ) + P cos jθ)/sin θ and its sine
/// analogue, and M̃₃, M̃₄ by (b₂cos((j−1)θ) + Q cos jθ)/sin θ and its sine
/// analogue.
pub fn discrete_qv(
    scheme: &SchemeDef,
    h: f64,
    alpha: Alpha,
    tau: f64,
    eta: f64,
    n: u64,
) -> Result<DiscreteQv> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::NonPositiveStep(tau));
    }
    let c = scheme.coeffs(h, alpha)?;
    let rot = ModeRotation::from_coeffs(&c, h, &scheme.name)?;
    let xi = xi_from_parts(&c, rot.cos_theta, rot.sin_theta);
    let (b1, b2, p, q) = (c.b1, c.b2, c.p(), c.q());
    let (s, cs, th) = (rot.sin_theta, rot.cos_theta, rot.theta);
    let s2 = s * s;
    let cos2 = 2.0 * cs * cs - 1.0;
    let w = (2 * n - 1) as f64 * th;
    let cos_sum = w.sin() / s + 1.0;
    let sin_sum = (cs - w.cos()) / (2.0 * s);

    let k1 = cos_sum * (b1 * b1 * cos2 + p * p - 2.0 * b1 * p * cs) * tau / (4.0 * s2)
        + (-b1 * cs + p) * b1 * s * sin_sum * tau / s2;
    let k2 = cos_sum * (b2 * b2 * cos2 + q * q + 2.0 * b2 * q * cs) * tau / (4.0 * s2)
        + (b2 * cs + q) * b2 * s * sin_sum * tau / s2;
    let k1_bound = (1.0 / s + 1.0) * (b1 * b1 + p * p + 2.0 * (b1 * p).abs()) * tau / (4.0 * s2)
        + ((-b1 * cs + p) * b1).abs() * tau / s2;
    let k2_bound = (1.0 / s + 1.0) * (b2 * b2 + q * q + 2.0 * (b2 * q).abs()) * tau / (4.0 * s2)
        + ((b2 * cs + q) * b2).abs() * tau / s2;

    let t = n as f64 * tau;
    Ok(DiscreteQv {
        n,
        t,
        xi,
        m1: eta * (0.5 * xi.xi1 * t + k1),
        m2: eta * (0.5 * xi.xi1 * t - k1),
        m3: eta * (0.5 * xi.xi2 * t + k2),
        m4: eta * (0.5 * xi.xi2 * t - k2),
        k1: eta * k1,
        k2: eta * k2,
        k1_bound: eta * k1_bound,
        k2_bound: eta * k2_bound,
    })
}

/// Increment weights (before √η) of the four discrete martingales at index j.
pub fn martingale_weights(rot: &ModeRotation, c: &Coeffs, j: u64) -> [f64; 4] {
    let th = rot.theta;
    let jf = j as f64;
    let (cj, sj) = ((jf * th).cos(), (jf * th).sin());
    let (cp, sp) = (((jf + 1.0) * th).cos(), ((jf + 1.0) * th).sin());
    let (cm, sm) = (((jf - 1.0) * th).cos(), ((jf - 1.0) * th).sin());
    let s = rot.sin_theta;
    [
        (-c.b1 * cp + c.p() * cj) / s,
        (-c.b1 * sp + c.p() * sj) / s,
        (c.b2 * cm + c.q() * cj) / s,
        (c.b2 * sm + c.q() * sj) / s,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreservationRow {
    pub m: usize,
    pub tau: f64,
    pub sup_x: f64,
    pub sup_y: f64,
    pub sup_phi: f64,
    pub phi_mode: usize,
    pub max_abs_xi3: f64,
    pub gap_x: f64,
    pub gap_y: f64,
    pub gap_phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreservationReport {
    pub scheme: String,
    pub exact: f64,
    pub order: OrderReport,
    pub rows: Vec<PreservationRow>,
    /// For every M, all gaps and |ξ₃| are non-increasing as τ decreases.
    pub monotone_in_tau: bool,
    /// For every τ, all gaps are non-increasing as M increases.
    pub monotone_in_m: bool,
}

impl PreservationReport {
    pub fn rows_for_m(&self, m: usize) -> impl Iterator<Item = &PreservationRow> {
        self.rows.iter().filter(move |r| r.m == m)
    }
}

fn non_increasing(vals: impl Iterator<Item = f64>, floor: f64) -> bool {
    let v: Vec<f64> = vals
        .map(|x| if x.abs() < floor { 0.0 } else { x })
        .collect();
    v.windows(2).all(|w| w[1] <= w[0])
}

/// Tabulates the discrete LIL constants over a decreasing τ sequence and an
/// increasing truncation sequence, with their distances to the exact
/// constant. Only symplectic, consistent schemes are accepted.
pub fn preservation_limit(
    scheme: &SchemeDef,
    model: &ModelSpec,
    taus: &[f64],
    ms: &[usize],
    tol: f64,
) -> Result<PreservationReport> {
    if taus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(
            "tau sequence must be decreasing".into(),
        ));
    }
    if ms.is_empty() || ms.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "M sequence must be increasing".into(),
        ));
    }
    let m_max = *ms.last().unwrap();
    if m_max > model.stored() {
        return Err(Error::InvalidArgument(format!(
            "M = {m_max} exceeds the {} stored modes",
            model.stored()
        )));
    }
    let full = model.with_truncation(m_max)?;
    for &tau in taus {
        for &l in &full.lambda()[..m_max] {
            let tr = classify(scheme, l * tau, tol)?;
            if !tr.symplectic {
                return Err(Error::NotSymplectic(format!(
                    "scheme `{}` has det A = {} at h = {}",
                    scheme.name,
                    tr.det,
                    l * tau
                )));
            }
        }
    }
    let order = check_convergence_order(scheme, &full, taus)?;
    if !order.pass() {
        return Err(Error::InvalidArgument(format!(
            "scheme `{}` fails the consistency-order check (A slope {:?}, b slope {:?})",
            scheme.name, order.a_slope, order.b_slope
        )));
    }
    let exact = exact_lil_constant(model);
    let mut rows = Vec::new();
    for &m in ms {
        let sub = model.with_truncation(m)?;
        for &tau in taus {
            let form = phi_form(scheme, &sub, tau)?;
            let sp = sup_phi(&form)?;
            let sup_x = form
                .blocks
                .iter()
                .map(|b| (b.xi.xi1 * b.eta).max(0.0).sqrt())
                .fold(0.0, f64::max);
            let sup_y = form
                .blocks
                .iter()
                .map(|b| (b.xi.xi2 * b.eta).max(0.0).sqrt())
                .fold(0.0, f64::max);
            let max_abs_xi3 = form
                .blocks
                .iter()
                .map(|b| b.xi.xi3.abs())
                .fold(0.0, f64::max);
            rows.push(PreservationRow {
                m,
                tau,
                sup_x,
                sup_y,
                sup_phi: sp.value,
                phi_mode: sp.mode,
                max_abs_xi3,
                gap_x: (sup_x - exact).abs(),
                gap_y: (sup_y - exact).abs(),
                gap_phi: (sp.value - exact).abs(),
            });
        }
    }
    let monotone_in_tau = ms.iter().all(|&m| {
        let sel: Vec<&PreservationRow> = rows.iter().filter(|r| r.m == m).collect();
        non_increasing(sel.iter().map(|r| r.gap_x), 0.0)
            && non_increasing(sel.iter().map(|r| r.gap_y), 0.0)
            && non_increasing(sel.iter().map(|r| r.gap_phi), 0.0)
            && non_increasing(sel.iter().map(|r| r.max_abs_xi3), XI3_FLOOR)
    });
    let monotone_in_m = taus.iter().all(|&tau| {
        let sel: Vec<&PreservationRow> = rows.iter().filter(|r| r.tau == tau).collect();
        non_increasing(sel.iter().map(|r| r.gap_x), 0.0)
            && non_increasing(sel.iter().map(|r| r.gap_y), 0.0)
            && non_increasing(sel.iter().map(|r| r.gap_phi), 0.0)
    });
    Ok(PreservationReport {
        scheme: scheme.name.clone(),
        exact,
        order,
        rows,
        monotone_in_tau,
        monotone_in_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compact::CompactForm;
    use crate::schemes::{builtin, Builtin, DEFAULT_SYMPLECTIC_TOL};
    use crate::spectrum::{build_model, Preset, PresetKind};
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn oscillator() -> ModelSpec {
        build_model(&Preset::new(PresetKind::Oscillator), &BTreeMap::new()).unwrap()
    }

    fn schrodinger(m: usize) -> ModelSpec {
        let mut o = BTreeMap::new();
        o.insert("M".to_string(), m as f64);
        o.insert("p".to_string(), 2.0);
        build_model(&Preset::new(PresetKind::Schrodinger), &o).unwrap()
    }

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
        let n = panels * 2;
        let hs = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * hs);
        }
        s * hs / 3.0
    }

    #[test]
    fn midpoint_limits() {
        let mp = builtin("midpoint").unwrap();
        let a = Alpha::new(0.0, 1.0);
        let mut prev = f64::INFINITY;
        for h in [0.1, 0.05, 0.025] {
            let (xi, _) = xi_constants(&mp, h, a).unwrap();
            let gap = (xi.xi1 - 1.0).abs().max((xi.xi2 - 1.0).abs());
            assert!(gap < prev);
            prev = gap;
            assert!(xi.xi3.abs() < 1e-12);
            let expect = 1.0 / (1.0 + h * h / 4.0);
            assert!((xi.xi1 - expect).abs() < 1e-13);
            assert!((xi.xi2 - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn midpoint_regression_h02() {
        let (xi, _) =
            xi_constants(&builtin("midpoint").unwrap(), 0.2, Alpha::new(0.0, 1.0)).unwrap();
        assert!((xi.xi1 - 0.990_099_009_900_990_1).abs() < 1e-13);
        assert!((xi.xi2 - 0.990_099_009_900_990_1).abs() < 1e-13);
        assert!(xi.xi3.abs() < 1e-12);
    }

    #[test]
    fn zero_noise_gives_zero_xi() {
        for b in Builtin::ALL {
            let (xi, _) = xi_constants(&b.into(), 0.3, Alpha::default()).unwrap();
            assert_eq!(xi, XiTriple::ZERO);
        }
    }

    #[test]
    fn xi_nonnegative_and_psd_on_grid() {
        for b in Builtin::ALL {
            for i in 1..=100 {
                let h = i as f64 / 100.0;
                for a in [
                    Alpha::new(0.0, 1.0),
                    Alpha::new(1.0, 0.0),
                    Alpha::new(0.6, -1.1),
                ] {
                    let (xi, _) = xi_constants(&b.into(), h, a).unwrap();
                    assert!(xi.xi1 >= 0.0 && xi.xi2 >= 0.0);
                    assert!(xi.eigenvalues().0 >= -1e-10, "{b:?} h={h}");
                }
            }
        }
    }

    #[test]
    fn reflection_invariance() {
        for h in [0.05, 0.4, 1.0, 1.9] {
            let c = Builtin::Midpoint.coeffs(h, Alpha::new(0.3, 0.8));
            let (xi, rot) =
                xi_constants(&Builtin::Midpoint.into(), h, Alpha::new(0.3, 0.8)).unwrap();
            let reflected = 2.0 * PI - rot.theta;
            let alt = xi_from_parts(&c, reflected.cos(), reflected.sin());
            assert!((alt.xi1 - xi.xi1).abs() < 1e-12 * xi.xi1.max(1.0));
            assert!((alt.xi2 - xi.xi2).abs() < 1e-12 * xi.xi2.max(1.0));
        }
    }

    #[test]
    fn midpoint_xi1_rate_is_second_order() {
        let mp = builtin("midpoint").unwrap();
        let hs = [0.2, 0.1, 0.05, 0.025];
        let pts: Vec<(f64, f64)> = hs
            .iter()
            .map(|&h| {
                let (xi, _) = xi_constants(&mp, h, Alpha::new(0.0, 1.0)).unwrap();
                (h.ln(), (xi.xi1 - 1.0).abs().ln())
            })
            .collect();
        assert!(crate::stats::linear_fit(&pts).slope >= 1.8);
    }

    #[test]
    fn sup_phi_examples() {
        let f = PhiForm::new(vec![PhiBlock {
            xi: XiTriple {
                xi1: 0.7,
                xi2: 1.2,
                xi3: 0.0,
            },
            eta: 2.0,
        }]);
        let s = sup_phi(&f).unwrap();
        assert!((s.value - 2.4f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.argmax, vec![(0.0, 1.0)]);

        let block = |v: f64| PhiBlock {
            xi: XiTriple {
                xi1: v,
                xi2: v,
                xi3: 0.0,
            },
            eta: 1.0,
        };
        let s = sup_phi(&PhiForm::new(vec![block(0.9), block(1.3)])).unwrap();
        assert!((s.value - 1.3f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.mode, 1);
        assert_eq!(s.argmax[0], (0.0, 0.0));

        let s = sup_phi(&PhiForm::new(vec![block(1.0), block(1.0)])).unwrap();
        assert_eq!(s.mode, 0);
        assert!(matches!(
            sup_phi(&PhiForm::new(vec![])),
            Err(Error::EmptyForm)
        ));
    }

    #[test]
    fn sup_phi_argmax_attains_value() {
        let f = PhiForm::new(vec![
            PhiBlock {
                xi: XiTriple {
                    xi1: 1.0,
                    xi2: 0.5,
                    xi3: 0.8,
                },
                eta: 1.0,
            },
            PhiBlock {
                xi: XiTriple {
                    xi1: 0.2,
                    xi2: 0.3,
                    xi3: -0.1,
                },
                eta: 0.5,
            },
        ]);
        let s = sup_phi(&f).unwrap();
        assert!((f.evaluate(&s.argmax).sqrt() - s.value).abs() < 1e-14);
    }

    #[test]
    fn continuous_qv_examples() {
        let (c, s) = continuous_qv(PI, 1.0, 1.0).unwrap();
        assert!((c - PI / 2.0).abs() < 1e-14 && (s - PI / 2.0).abs() < 1e-14);
        for t in [1e-6, 1e-3, 0.5, 3.0, 40.0] {
            let (c, s) = continuous_qv(t, 2.0, 0.7).unwrap();
            assert!((c + s - 0.7 * t).abs() < 1e-14 * t.max(1.0));
        }
        let t = 1e-4;
        let (c, s) = continuous_qv(t, 1.0, 1.0).unwrap();
        assert!((c - t).abs() < t * t * t);
        assert!((s - t * t * t / 3.0).abs() < 1e-6 * t * t * t);
        assert!(continuous_qv(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn continuous_qv_matches_quadrature() {
        for &lambda in &[0.5, 1.0, 4.0] {
            for &t in &[0.1, 1.0, 5.0] {
                let (c, s) = continuous_qv(t, lambda, 1.3).unwrap();
                let qc = 1.3 * simpson(|u| (lambda * u).cos().powi(2), 0.0, t, 4000);
                let qs = 1.3 * simpson(|u| (lambda * u).sin().powi(2), 0.0, t, 4000);
                let qx = 1.3 * simpson(|u| (lambda * u).cos() * (lambda * u).sin(), 0.0, t, 4000);
                assert!((c - qc).abs() < 1e-10, "{lambda} {t}");
                assert!((s - qs).abs() < 1e-10, "{lambda} {t}");
                assert!((continuous_cross(t, lambda, 1.3).unwrap() - qx).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn discrete_qv_matches_direct_sum() {
        let tau = 0.1;
        let eta = 0.8;
        for b in Builtin::ALL {
            for &h in &[0.05, 0.3, 0.9] {
                let alpha = Alpha::new(0.4, 1.1);
                let c = b.coeffs(h, alpha);
                let rot = ModeRotation::from_coeffs(&c, h, b.name()).unwrap();
                for &n in &[1u64, 2, 17, 500, 1000] {
                    let q = discrete_qv(&b.into(), h, alpha, tau, eta, n).unwrap();
                    let mut sums = [0.0; 4];
                    for j in 0..n {
                        let w = martingale_weights(&rot, &c, j);
                        for i in 0..4 {
                            sums[i] += eta * w[i] * w[i] * tau;
                        }
                    }
                    for (i, (got, want)) in [q.m1, q.m2, q.m3, q.m4].iter().zip(sums).enumerate() {
                        assert!(
                            (got - want).abs() <= 1e-9 * want.abs().max(1e-3),
                            "{b:?} h={h} n={n} i={i}: {got} vs {want}"
                        );
                    }
                    assert!((q.m1 + q.m2 - eta * q.xi.xi1 * q.t).abs() < 1e-12 * q.t.max(1.0));
                    assert!((q.m3 + q.m4 - eta * q.xi.xi2 * q.t).abs() < 1e-12 * q.t.max(1.0));
                }
            }
        }
    }

    #[test]
    fn martingales_reproduce_x() {
        let h = 0.3;
        let alpha = Alpha::new(0.2, 1.0);
        for b in Builtin::ALL {
            let c = b.coeffs(h, alpha);
            let rot = ModeRotation::from_coeffs(&c, h, b.name()).unwrap();
            if (rot.det - 1.0).abs() > 1e-12 {
                continue;
            }
            let n = 40u64;
            let form = CompactForm::new(&b.into(), h, alpha, n).unwrap();
            let th = (n as f64 - 1.0) * rot.theta;
            for j in 0..n {
                let w = martingale_weights(&rot, &c, j);
                let via = th.sin() * w[0] - th.cos() * w[1];
                assert!((via - form.x_coeff(j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn k_bounds_hold() {
        for b in Builtin::ALL {
            for &h in &[0.1, 0.5] {
                let alpha = Alpha::new(0.3, 1.0);
                let mut n = 1u64;
                while n <= 100_000 {
                    let q = discrete_qv(&b.into(), h, alpha, 0.1, 1.0, n).unwrap();
                    assert!(q.k1.abs() <= q.k1_bound * (1.0 + 1e-12));
                    assert!(q.k2.abs() <= q.k2_bound * (1.0 + 1e-12));
                    n = n * 3 + 1;
                }
            }
        }
    }

    #[test]
    fn preservation_oscillator() {
        let r = preservation_limit(
            &builtin("midpoint").unwrap(),
            &oscillator(),
            &[0.2, 0.1, 0.05, 0.025],
            &[1],
            DEFAULT_SYMPLECTIC_TOL,
        )
        .unwrap();
        assert!(r.monotone_in_tau);
        assert!(r.rows.last().unwrap().gap_x < 1e-3);
    }

    #[test]
    fn preservation_schrodinger_maximizer_first_mode() {
        let model = schrodinger(16);
        let r = preservation_limit(
            &builtin("midpoint").unwrap(),
            &model,
            &[0.01, 0.005],
            &[4, 8, 16],
            DEFAULT_SYMPLECTIC_TOL,
        )
        .unwrap();
        assert!(r.rows.iter().all(|row| row.phi_mode == 0));
        let by_m: Vec<f64> = r
            .rows
            .iter()
            .filter(|x| x.tau == 0.005)
            .map(|x| x.sup_phi)
            .collect();
        assert!(by_m.windows(2).all(|w| w[0] == w[1]));
        assert!(r.monotone_in_m);
    }

    #[test]
    fn preservation_rejects_non_symplectic() {
        let r = preservation_limit(
            &builtin("euler_maruyama").unwrap(),
            &oscillator(),
            &[0.1, 0.05],
            &[1],
            DEFAULT_SYMPLECTIC_TOL,
        );
        assert!(matches!(r, Err(Error::NotSymplectic(_))));
    }
}
