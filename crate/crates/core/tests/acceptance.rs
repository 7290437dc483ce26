//! Acceptance suite. Each criterion writes one PASS/FAIL line directly to
//! stderr; all criteria run before the final assertion.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use shs_lil::compact::{
    iterate_reference, trig_sums, unit_det_alpha_hat_sums, CompactForm, ModeRotation,
};
use shs_lil::constants::{
    continuous_cross, continuous_qv, discrete_qv, phi_form, preservation_limit, sup_phi, PhiForm,
    XI3_FLOOR,
};
use shs_lil::lilstat::{
    brownian_lil_run, eps_run, geometric_n_grid, lil_run, linear_steps, stationary_variance,
    variance_growth, variance_with_se, EpsWindow, GrowthClass, LilConfig, NormKind,
};
use shs_lil::noise::{Domain, NoiseStream};
use shs_lil::sampler::{convolution_covariance, sample_mode, Engine, Stepping};
use shs_lil::schemes::{builtin, Builtin, SchemeDef, DEFAULT_SYMPLECTIC_TOL};
use shs_lil::spectrum::{build_model, Alpha, ModelSpec, Preset, PresetKind};
use shs_lil::stats::median;

/// Frozen ratio-to-target bands for the √(t log log t) statistics (64 paths,
/// m = 1.01, horizon 1e8, checkpoint-jump sampling). Derived from the pilot
/// medians over seeds 1001..=1020 (see `tests/calibration.rs`), widened by
/// 0.05 on each side:
///
/// | run              | pilot min/target | pilot max/target |
/// |------------------|------------------|------------------|
/// | Brownian         | 1.1943           | 1.3130           |
/// | oscillator exact | 1.3793           | 1.5423           |
/// | midpoint τ = 0.5 | 1.4338           | 1.5736           |
const BROWNIAN_BAND: (f64, f64) = (1.14, 1.37);
const OSCILLATOR_BAND: (f64, f64) = (1.33, 1.60);
const MIDPOINT_BAND: (f64, f64) = (1.38, 1.63);
/// Seed of the acceptance runs; disjoint from the pilot seeds.
const ACCEPTANCE_SEED: u64 = 0;
/// Horizon of the ε-statistic run, with its trailing-decade window.
const EPS_HORIZON: f64 = 1e18;

type Criterion = (&'static str, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn oscillator() -> ModelSpec {
    build_model(&Preset::new(PresetKind::Oscillator), &BTreeMap::new()).unwrap()
}

fn report(id: &str, title: &str, started: Instant, o: &Outcome) {
    let line = format!(
        "{} criterion {id} ({title}) [{:.2}s]: {}\n",
        if o.pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64(),
        o.detail
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn compact_equivalence() -> Outcome {
    let alpha = Alpha::new(0.6, 0.8);
    let mut worst = 0.0f64;
    let mut caps = Vec::new();
    for b in Builtin::ALL {
        let scheme: SchemeDef = b.into();
        for h in [0.5, 0.1, 0.01] {
            let model =
                ModelSpec::new(vec![1.0], vec![1.0], alpha, vec![1.0], vec![-0.5], 1).unwrap();
            let det = scheme.coeffs(h, alpha).unwrap().det();
            let cap = if det > 1.0 {
                (1200.0 / det.ln()) as u64
            } else {
                u64::MAX
            };
            let mut ns: Vec<u64> = [1u64, 2, 3, 10, 100, 1000, 10_000]
                .iter()
                .map(|&n| n.min(cap))
                .collect();
            ns.dedup();
            if cap < 10_000 {
                caps.push(format!("{}@h={h}:n<={cap}", b.name()));
            }
            let n_max = *ns.last().unwrap();
            let mut noise = NoiseStream::new(17, Domain::Step, 0, 0);
            let inc: Vec<f64> = (0..n_max).map(|_| h.sqrt() * noise.normal()).collect();
            for n in ns {
                let used = &inc[..n as usize];
                let form = CompactForm::new(&scheme, h, alpha, n).unwrap();
                let rec = form.reconstruct(1.0, -0.5, 1.0, used.iter().copied());
                let (xr, yr) = iterate_reference(&scheme, &model, 0, h, used).unwrap();
                let ex = (rec.x - xr).abs() / xr.abs().max(rec.x_scale);
                let ey = (rec.y - yr).abs() / yr.abs().max(rec.y_scale);
                worst = worst.max(ex).max(ey);
            }
        }
    }
    outcome(
        worst <= 1e-10,
        format!("max relative error {worst:.3e} (tol 1e-10); expansive caps {caps:?}"),
    )
}

fn trig_identities() -> Outcome {
    let mut worst = 0.0f64;
    for theta in [0.3, FRAC_PI_4, FRAC_PI_2, 2.8] {
        let rot = ModeRotation::from_angle(theta, 1.0).unwrap();
        for n in [2u64, 17, 1000] {
            let (ss, cs) = trig_sums(theta, n);
            let ds: f64 = (0..n).map(|j| (2.0 * j as f64 * theta).sin()).sum();
            let dc: f64 = (0..n).map(|j| (2.0 * j as f64 * theta).cos()).sum();
            worst = worst.max((ss - ds).abs()).max((cs - dc).abs());
            let (sq, cr) = unit_det_alpha_hat_sums(theta, n);
            let dsq: f64 = (0..=n as i64 - 2).map(|j| rot.alpha_hat(j).powi(2)).sum();
            let dcr = 2.0
                * (1..n as i64)
                    .map(|j| rot.alpha_hat(j) * rot.alpha_hat(j - 1))
                    .sum::<f64>();
            worst = worst
                .max((sq - dsq).abs() / dsq.abs().max(1.0))
                .max((cr - dcr).abs() / dcr.abs().max(1.0));
        }
    }
    outcome(
        worst <= 1e-9,
        format!("max discrepancy {worst:.3e} (tol 1e-9)"),
    )
}

fn sci(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn preservation() -> Outcome {
    let model = oscillator();
    let alpha = model.alpha().norm();
    let mp = builtin("midpoint").unwrap();
    let taus = [0.2, 0.1, 0.05, 0.025];
    let r = match preservation_limit(&mp, &model, &taus, &[1], DEFAULT_SYMPLECTIC_TOL) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("error: {e}")),
    };
    let gaps: Vec<f64> = r.rows.iter().map(|row| row.gap_x).collect();
    let xi3: Vec<f64> = r.rows.iter().map(|row| row.max_abs_xi3).collect();
    let strictly = gaps.windows(2).all(|w| w[1] < w[0]);
    let xi3_mono = xi3
        .windows(2)
        .all(|w| w[1] <= w[0] || (w[0] < XI3_FLOOR && w[1] < XI3_FLOOR));
    let final_gap = *gaps.last().unwrap();
    outcome(
        strictly && xi3_mono && final_gap < 1e-3 * alpha,
        format!(
            "gaps [{}], |xi3| [{}], strictly decreasing={strictly}, xi3 monotone={xi3_mono}",
            sci(&gaps),
            sci(&xi3)
        ),
    )
}

fn variance_laws() -> Outcome {
    let model = oscillator();
    let eta = model.eta()[0];
    let mut pass = true;
    let mut notes = Vec::new();

    let mp = builtin("midpoint").unwrap();
    let (tau, n) = (0.1, 1000u64);
    let h = model.lambda()[0] * tau;
    let states = sample_mode(
        Engine::Scheme(&mp),
        Stepping::Stepwise,
        &model,
        0,
        ACCEPTANCE_SEED,
        10_000,
        tau,
        &[n],
    )
    .unwrap();
    let xs: Vec<f64> = states.iter().map(|p| p[0].0).collect();
    let (var, se) = variance_with_se(&xs);
    let qv = discrete_qv(&mp, h, model.alpha(), tau, eta, n).unwrap();
    let centre = 0.5 * eta * qv.xi.xi1 * qv.t;
    let half = qv.k1_bound;
    let in_band = (var - centre).abs() <= half + 5.0 * se;
    let (exact_var, _) = shs_lil::lilstat::discrete_variance(&mp, h, &model, 0, tau, n).unwrap();
    let exact_ok = (var - exact_var).abs() <= 5.0 * se;
    pass &= in_band && exact_ok;
    notes.push(format!(
        "(a) var={var:.4} se={se:.4} centre={centre:.4} K1 bound={half:.4} exact={exact_var:.4} band_ok={in_band} exact_ok={exact_ok}"
    ));

    let be = builtin("backward_euler").unwrap();
    let grid = geometric_n_grid(10, 10_000, 10).unwrap();
    let fit = variance_growth(
        Engine::Scheme(&be),
        &model,
        0,
        tau,
        &grid,
        10_000,
        ACCEPTANCE_SEED,
    )
    .unwrap();
    let plateau = fit.points.last().unwrap().var;
    let stationary = stationary_variance(&be, &model, 0, tau).unwrap();
    let sat_ok = fit.classification == GrowthClass::Saturation
        && (plateau - stationary).abs() <= 0.1 * stationary;
    pass &= sat_ok;
    notes.push(format!(
        "(b) class={:?} plateau={plateau:.4} stationary={stationary:.4} ok={sat_ok}",
        fit.classification
    ));

    let em = builtin("euler_maruyama").unwrap();
    let grid = linear_steps(10_000, 20);
    let fit = variance_growth(
        Engine::Scheme(&em),
        &model,
        0,
        tau,
        &grid,
        10_000,
        ACCEPTANCE_SEED,
    )
    .unwrap();
    let pred = (1.0 + h * h).ln();
    let geo_ok = fit.classification == GrowthClass::GeometricGrowth
        && (fit.log_slope - pred).abs() <= 0.15 * pred;
    pass &= geo_ok;
    notes.push(format!(
        "(c) class={:?} log_slope={:.5} predicted={pred:.5} ok={geo_ok}",
        fit.classification, fit.log_slope
    ));
    outcome(pass, notes.join("; "))
}

/// Adaptive Simpson quadrature on [a, b].
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + rec(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// Adaptive Simpson applied panel by panel, each panel at most `panel` wide.
fn panelled_quadrature(f: &dyn Fn(f64) -> f64, t: f64, panel: f64, tol: f64) -> f64 {
    let count = (t / panel).ceil().max(1.0) as usize;
    let w = t / count as f64;
    (0..count)
        .map(|i| adaptive_simpson(f, i as f64 * w, (i + 1) as f64 * w, tol / count as f64))
        .sum()
}

fn continuous_qv_check() -> Outcome {
    let mut worst = 0.0f64;
    for lambda in [0.25, 1.0, 4.0, 9.0] {
        for t in [0.01, 0.5, 1.0, PI, 10.0, 100.0] {
            let eta = 0.7;
            let (c, s) = continuous_qv(t, lambda, eta).unwrap();
            let x = continuous_cross(t, lambda, eta).unwrap();
            let qc = eta
                * panelled_quadrature(
                    &|u: f64| (lambda * u).cos().powi(2),
                    t,
                    0.25 / lambda,
                    1e-13,
                );
            let qs = eta
                * panelled_quadrature(
                    &|u: f64| (lambda * u).sin().powi(2),
                    t,
                    0.25 / lambda,
                    1e-13,
                );
            let qx = eta
                * panelled_quadrature(
                    &|u: f64| (lambda * u).cos() * (lambda * u).sin(),
                    t,
                    0.25 / lambda,
                    1e-13,
                );
            worst = worst
                .max((c - qc).abs())
                .max((s - qs).abs())
                .max((x - qx).abs());
        }
    }
    let quad_ok = worst <= 1e-10;

    let mut max_z = 0.0f64;
    let tau = 0.1;
    let models = [
        oscillator(),
        ModelSpec::new(
            vec![1.7],
            vec![0.5],
            Alpha::new(0.6, 0.8),
            vec![0.0],
            vec![0.0],
            1,
        )
        .unwrap(),
    ];
    for model in &models {
        let checkpoints = [10u64, 100, 1000];
        let states = sample_mode(
            Engine::Exact,
            Stepping::Stepwise,
            model,
            0,
            ACCEPTANCE_SEED,
            100_000,
            tau,
            &checkpoints,
        )
        .unwrap();
        for (i, &n) in checkpoints.iter().enumerate() {
            let t = n as f64 * tau;
            let a = model.alpha();
            let cov =
                convolution_covariance(model.lambda()[0], model.eta()[0], a.a1, a.a2, t).unwrap();
            let xs: Vec<f64> = states.iter().map(|p| p[i].0).collect();
            let ys: Vec<f64> = states.iter().map(|p| p[i].1).collect();
            let (vx, sx) = variance_with_se(&xs);
            let (vy, sy) = variance_with_se(&ys);
            let mx = xs.iter().sum::<f64>() / xs.len() as f64;
            let my = ys.iter().sum::<f64>() / ys.len() as f64;
            let prods: Vec<f64> = xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| (x - mx) * (y - my))
                .collect();
            let cxy = prods.iter().sum::<f64>() / (prods.len() as f64 - 1.0);
            let sxy = (prods.iter().map(|p| (p - cxy).powi(2)).sum::<f64>()
                / (prods.len() as f64 - 1.0)
                / prods.len() as f64)
                .sqrt();
            for (v, se, target) in [
                (vx, sx, cov.0[0][0]),
                (vy, sy, cov.0[1][1]),
                (cxy, sxy, cov.0[0][1]),
            ] {
                max_z = max_z.max((v - target).abs() / se);
            }
        }
    }
    let mc_ok = max_z <= 5.0;
    outcome(
        quad_ok && mc_ok,
        format!(
            "quadrature max error {worst:.3e} (tol 1e-10); covariance max |z| {max_z:.3} (tol 5)"
        ),
    )
}

fn lil_cfg(tau: f64, horizon: f64) -> LilConfig {
    LilConfig {
        tau,
        horizon,
        paths: 64,
        m: 1.01,
        seed: ACCEPTANCE_SEED,
        stepping: Stepping::CheckpointJump,
        norm: NormKind::X,
        allow_expansive: false,
    }
}

fn in_band(value: f64, target: f64, band: (f64, f64)) -> bool {
    let r = value / target;
    r >= band.0 && r <= band.1
}

fn lil_ratios() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();

    let b = brownian_lil_run(&lil_cfg(1.0, 1e8)).unwrap().summary;
    let ok = in_band(b.median_final, SQRT_2, BROWNIAN_BAND);
    pass &= ok;
    notes.push(format!(
        "(a) median={:.4} ratio={:.4} band={BROWNIAN_BAND:?} ok={ok}",
        b.median_final,
        b.median_final / SQRT_2
    ));

    let model = oscillator();
    let o = lil_run(Engine::Exact, &model, &lil_cfg(0.1, 1e8))
        .unwrap()
        .summary;
    let target = o.analytic_target.unwrap();
    let ok = in_band(o.median_final, target, OSCILLATOR_BAND);
    pass &= ok;
    notes.push(format!(
        "(b) median={:.4} ratio={:.4} band={OSCILLATOR_BAND:?} ok={ok}",
        o.median_final,
        o.median_final / target
    ));

    let mp = builtin("midpoint").unwrap();
    let m = lil_run(Engine::Scheme(&mp), &model, &lil_cfg(0.5, 1e8))
        .unwrap()
        .summary;
    let target = m.analytic_target.unwrap();
    let ok = in_band(m.median_final, target, MIDPOINT_BAND);
    pass &= ok;
    notes.push(format!(
        "(c) target={target:.4} median={:.4} ratio={:.4} band={MIDPOINT_BAND:?} ok={ok}",
        m.median_final,
        m.median_final / target
    ));

    let be = builtin("backward_euler").unwrap();
    let series = eps_run(
        Engine::Scheme(&be),
        &model,
        &lil_cfg(0.1, EPS_HORIZON),
        0.1,
        EpsWindow::Trailing(10.0),
    )
    .unwrap();
    let finals: Vec<f64> = series.iter().map(|s| s.final_value()).collect();
    let early: Vec<f64> = series.iter().map(|s| s.value_at(100.0).unwrap()).collect();
    let frac = median(&finals) / median(&early);
    let ok = frac < 0.05;
    pass &= ok;
    notes.push(format!(
        "(d) horizon={EPS_HORIZON:e} final/t100={frac:.4} ok={ok}"
    ));
    outcome(pass, notes.join("; "))
}

/// Maximizes φ over the unit sphere written as ρₖ = √wₖ(cos φₖ, sin φₖ):
/// an angular grid per block, then a grid over the weight simplex.
fn sphere_grid_sup(form: &PhiForm) -> f64 {
    let steps = 4000;
    let best_per_block: Vec<f64> = form
        .blocks
        .iter()
        .map(|b| {
            (0..steps)
                .map(|i| {
                    let a = PI * i as f64 / steps as f64;
                    let (c, s) = (a.cos(), a.sin());
                    b.eta * (b.xi.xi1 * c * c + b.xi.xi2 * s * s + b.xi.xi3 * c * s)
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let grid = 100;
    let mut best = f64::NEG_INFINITY;
    let m = best_per_block.len();
    let mut weights = vec![0usize; m];
    loop {
        if weights.iter().sum::<usize>() == grid {
            let v: f64 = weights
                .iter()
                .zip(&best_per_block)
                .map(|(&w, q)| w as f64 / grid as f64 * q)
                .sum();
            best = best.max(v);
        }
        let mut i = 0;
        loop {
            if i == m {
                return best.max(0.0).sqrt();
            }
            weights[i] += 1;
            if weights[i] <= grid {
                break;
            }
            weights[i] = 0;
            i += 1;
        }
    }
}

fn sup_phi_oracle() -> Outcome {
    let mut noise = NoiseStream::new(2024, Domain::Step, 0, 0);
    let mut uniform = move || 0.5 * (1.0 + libm::erf(noise.normal() / SQRT_2));
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = 1 + (uniform() * 3.0).floor().min(2.0) as usize;
        let lambda: Vec<f64> = {
            let mut v: Vec<f64> = (0..m).map(|_| 0.2 + 3.0 * uniform()).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let eta: Vec<f64> = (0..m).map(|_| 0.05 + uniform()).collect();
        let alpha = Alpha::new(2.0 * uniform() - 1.0, 2.0 * uniform() - 1.0);
        let model = ModelSpec::new(lambda, eta, alpha, vec![0.0; m], vec![0.0; m], m).unwrap();
        let scheme: SchemeDef = Builtin::ALL[(uniform() * 3.0).floor().min(2.0) as usize].into();
        let tau = 0.05 + 0.5 * uniform();
        let form = phi_form(&scheme, &model, tau).unwrap();
        let closed = sup_phi(&form).unwrap().value;
        worst = worst.max((closed - sphere_grid_sup(&form)).abs());
    }
    outcome(
        worst <= 1e-3,
        format!("max |block-eigen − grid| {worst:.3e} (tol 1e-3) over 20 forms"),
    )
}

fn run_cli(args: &[&str], threads: usize, out: &Path) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_shs-lil"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("LIL_THREADS", threads.to_string())
        .output()
        .expect("run shs-lil");
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    std::fs::read(out).unwrap()
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let experiments: [(&str, Vec<&str>); 3] = [
        (
            "estimate-lil",
            vec![
                "estimate-lil",
                "--exact",
                "--preset",
                "oscillator",
                "--tau",
                "0.1",
                "--horizon",
                "1e5",
                "--paths",
                "16",
                "--seed",
                "7",
                "--stepping",
                "jump",
            ],
        ),
        (
            "simulate",
            vec![
                "simulate",
                "--scheme",
                "midpoint",
                "--preset",
                "schrodinger",
                "--set",
                "M=4",
                "--tau",
                "0.01",
                "--steps",
                "2000",
                "--paths",
                "12",
                "--seed",
                "3",
                "--checkpoints",
                "linear:20",
            ],
        ),
        (
            "variance",
            vec![
                "variance",
                "--scheme",
                "backward_euler",
                "--preset",
                "oscillator",
                "--tau",
                "0.1",
                "--paths",
                "1000",
                "--n-grid",
                "geom:10:1000:5",
                "--seed",
                "11",
            ],
        ),
    ];
    let mut notes = Vec::new();
    let mut pass = true;
    for (name, args) in &experiments {
        let outputs: Vec<Vec<u8>> = [1usize, 4, 8]
            .iter()
            .map(|&t| run_cli(args, t, &dir.path().join(format!("{name}-{t}.out"))))
            .collect();
        let same = outputs.windows(2).all(|w| w[0] == w[1]) && !outputs[0].is_empty();
        pass &= same;
        notes.push(format!(
            "{name}: {} bytes identical={same}",
            outputs[0].len()
        ));
    }
    outcome(pass, notes.join("; "))
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 8] = [
        ("1", "compact-form equivalence", compact_equivalence),
        ("2", "trig and alpha-hat sum identities", trig_identities),
        ("3", "asymptotic preservation", preservation),
        ("4", "variance laws", variance_laws),
        ("5", "continuous quadratic variation", continuous_qv_check),
        ("6", "LIL ratio statistics", lil_ratios),
        ("7", "sup_phi oracle", sup_phi_oracle),
        ("8", "reproducibility across thread counts", reproducibility),
    ];
    let mut failed = Vec::new();
    for (id, title, f) in criteria {
        let started = Instant::now();
        let o = f();
        report(id, title, started, &o);
        if !o.pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
