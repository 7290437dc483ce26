//! Pilot runs used to freeze the ratio-statistic bands of the acceptance
//! suite. Run with `cargo test --release --test calibration -- --ignored --nocapture`.
//!
//! Each pilot repeats the acceptance protocol (64 paths, m = 1.01, horizon
//! 1e8) over seeds disjoint from the acceptance seed and prints the spread of
//! the median final running sup.

use std::collections::BTreeMap;

use shs_lil::lilstat::{brownian_lil_run, eps_run, lil_run, EpsWindow, LilConfig, NormKind};
use shs_lil::sampler::{Engine, Stepping};
use shs_lil::schemes::builtin;
use shs_lil::spectrum::{build_model, Preset, PresetKind};
use shs_lil::stats::{median, quantile};

const PILOT_SEEDS: std::ops::Range<u64> = 1001..1021;

fn cfg(tau: f64, horizon: f64, seed: u64) -> LilConfig {
    LilConfig {
        tau,
        horizon,
        paths: 64,
        m: 1.01,
        seed,
        stepping: Stepping::CheckpointJump,
        norm: NormKind::X,
        allow_expansive: false,
    }
}

fn report(label: &str, medians: &[f64], target: f64) {
    let lo = medians.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = medians.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "{label}: target={target:.6} min={lo:.6} q10={:.6} median={:.6} q90={:.6} max={hi:.6} ratio_lo={:.4} ratio_hi={:.4}",
        quantile(medians, 0.1),
        median(medians),
        quantile(medians, 0.9),
        lo / target,
        hi / target
    );
}

#[test]
#[ignore]
fn pilot_bands() {
    let osc = build_model(&Preset::new(PresetKind::Oscillator), &BTreeMap::new()).unwrap();
    let midpoint = builtin("midpoint").unwrap();

    let mut b = Vec::new();
    let mut o = Vec::new();
    let mut mp = Vec::new();
    let mut mp_target = 0.0;
    for seed in PILOT_SEEDS {
        b.push(
            brownian_lil_run(&cfg(1.0, 1e8, seed))
                .unwrap()
                .summary
                .median_final,
        );
        o.push(
            lil_run(Engine::Exact, &osc, &cfg(0.1, 1e8, seed))
                .unwrap()
                .summary
                .median_final,
        );
        let r = lil_run(Engine::Scheme(&midpoint), &osc, &cfg(0.5, 1e8, seed)).unwrap();
        mp_target = r.summary.analytic_target.unwrap();
        mp.push(r.summary.median_final);
    }
    report("brownian", &b, std::f64::consts::SQRT_2);
    report("oscillator_exact", &o, 1.0);
    report("midpoint_tau0.5", &mp, mp_target);
}

#[test]
#[ignore]
fn pilot_eps_decay() {
    let osc = build_model(&Preset::new(PresetKind::Oscillator), &BTreeMap::new()).unwrap();
    let be = builtin("backward_euler").unwrap();
    for horizon in [1e6, 1e10, 1e14, 1e17, 1e18] {
        for window in [EpsWindow::Running, EpsWindow::Trailing(10.0)] {
            let mut fractions = Vec::new();
            for seed in PILOT_SEEDS.take(5) {
                let series = eps_run(
                    Engine::Scheme(&be),
                    &osc,
                    &cfg(0.1, horizon, seed),
                    0.1,
                    window,
                )
                .unwrap();
                let finals: Vec<f64> = series.iter().map(|s| s.final_value()).collect();
                let early: Vec<f64> = series.iter().map(|s| s.value_at(100.0).unwrap()).collect();
                fractions.push(median(&finals) / median(&early));
            }
            println!(
                "eps horizon={horizon:e} window={window:?} final/t100: {:?}",
                fractions
                    .iter()
                    .map(|f| format!("{f:.4}"))
                    .collect::<Vec<_>>()
            );
        }
    }
}
