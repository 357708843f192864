//! Randomised invariants shared by the `properties` and `acceptance` targets.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use wtlab::analyze::{coarse_samples, extract_phase, fit_rate, ExtractionConfig, RateModel};
use wtlab::bloch::{eigenvalues, BlochContext};
use wtlab::evolve::modulated_wave;
use wtlab::modulation::{heat_apply, hj_solve, HjCoefficients, PhaseField};
use wtlab::spectral::{resample, shift, Field, PeriodicGrid};
use wtlab::wavetrain::{solve_profile, WaveTrain};

use super::{max_abs_diff, rgl_system, rgl_wave, rotating_wave};

pub const CASES: u32 = 128;

fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    })
}

/// A band-limited periodic signal from a handful of random modes.
fn signal(m: usize, modes: &[(f64, f64)]) -> Vec<f64> {
    (0..m)
        .map(|i| {
            let z = i as f64 / m as f64;
            modes
                .iter()
                .enumerate()
                .map(|(j, (c, s))| {
                    let w = 2.0 * PI * (j + 1) as f64 * z;
                    c * w.cos() + s * w.sin()
                })
                .sum()
        })
        .collect()
}

fn extraction_wave() -> &'static WaveTrain {
    static WT: OnceLock<WaveTrain> = OnceLock::new();
    WT.get_or_init(|| rgl_wave(0.5, 0.1, 32).1)
}

fn nearest_distance(set: &[Complex64], z: Complex64) -> f64 {
    set.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min)
}

pub fn heat_multiplier_obeys_maximum_principle() -> Result<(), String> {
    let strategy = (
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..6),
        -2.0..2.0f64,
        0.05..2.0f64,
        -1.0..1.0f64,
        0.0..40.0f64,
    );
    runner()
        .run(&strategy, |(modes, offset, d, a, t)| {
            let m = 128;
            let v: Vec<f64> = signal(m, &modes).iter().map(|x| x + offset).collect();
            // Extremes of the interpolant, not just of the samples.
            let fine = resample(&v, 16 * m);
            let hi = fine.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = fine.iter().copied().fold(f64::INFINITY, f64::min);
            let out = heat_apply(&v, 32.0, t, d, a);
            let tol = 1e-12 * (1.0 + hi.abs().max(lo.abs()));
            prop_assert!(out.iter().all(|x| *x <= hi + tol && *x >= lo - tol));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn profile_solve_commutes_with_translation() -> Result<(), String> {
    let strategy = (0.0..1.5f64, 0.05..0.6f64, -0.5..0.5f64, -0.05..0.05f64);
    runner()
        .run(&strategy, |(beta, q2, s, wobble)| {
            let sys = rgl_system(beta);
            let k = q2.sqrt() / (2.0 * PI);
            let m = 32;
            let mut guess = rotating_wave(m, (1.0 - q2).sqrt());
            for (i, v) in guess[0].iter_mut().enumerate() {
                *v += wobble * (4.0 * PI * i as f64 / m as f64).sin();
            }
            let omega0 = 0.8 * beta * (1.0 - q2) / (2.0 * PI);
            let base = solve_profile(&sys, k, &guess, omega0).unwrap();
            let moved: Vec<Vec<f64>> = guess.iter().map(|c| shift(c, s, 1.0)).collect();
            let other = solve_profile(&sys, k, &moved, omega0).unwrap();
            prop_assert!((base.omega - other.omega).abs() < 1e-10);
            for c in 0..2 {
                prop_assert!(max_abs_diff(&shift(&base.profile[c], s, 1.0), &other.profile[c]) < 1e-9);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn phase_solution_commutes_with_translation() -> Result<(), String> {
    let strategy = (
        prop::collection::vec((-0.5..0.5f64, -0.5..0.5f64), 1..4),
        -30.0..30.0f64,
        -0.5..0.5f64,
        0.2..2.0f64,
        -1.0..1.0f64,
        0.0..50.0f64,
    );
    runner()
        .run(&strategy, |(modes, s, a, d, nu, t)| {
            let grid = PeriodicGrid::new(256, 64).unwrap();
            let g = signal(256, &modes);
            let coeffs = HjCoefficients { a, d, nu };
            let base = hj_solve(&PhaseField::new(grid, g.clone(), 0.0).unwrap(), coeffs, &[t]).unwrap();
            let moved = PhaseField::new(grid, shift(&g, s, 64.0), 0.0).unwrap();
            let other = hj_solve(&moved, coeffs, &[t]).unwrap();
            prop_assert!(max_abs_diff(&shift(&base[0].gamma, s, 64.0), &other[0].gamma) < 1e-10);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn bloch_spectrum_is_conjugation_symmetric() -> Result<(), String> {
    let strategy = (0.0..1.5f64, 0.05..0.6f64, 0.0..PI);
    runner()
        .run(&strategy, |(beta, q2, xi)| {
            let (sys, wt) = rgl_wave(beta, q2, 32);
            let ctx = BlochContext::new(&sys, &wt, 6).unwrap();
            let plus = ctx.assemble(xi).unwrap();
            let ev_plus = plus.eigenvalues().unwrap();
            let ev_minus = ctx.assemble(-xi).unwrap().eigenvalues().unwrap();
            let ev_adj = eigenvalues(&plus.matrix.adjoint(), xi).unwrap();
            let scale = 1.0 + ev_plus.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for v in &ev_plus {
                prop_assert!(nearest_distance(&ev_minus, v.conj()) < 1e-10 * scale);
                prop_assert!(nearest_distance(&ev_adj, v.conj()) < 1e-10 * scale);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn extraction_recovers_synthesised_phase() -> Result<(), String> {
    let strategy = (-0.45..0.45f64, 0.0..0.4f64, 1i64..3, 0.0..(2.0 * PI), -0.2..0.2f64);
    runner()
        .run(&strategy, |(c, amp, mode, theta, nudge)| {
            // Slow modulation: |Γ'| ≤ 0.02 and |Γ''| ≤ 1e-3.
            let wt = extraction_wave();
            let grid = PeriodicGrid::new(256 * 16, 256).unwrap();
            let gamma: Vec<f64> = grid
                .points()
                .iter()
                .map(|z| c + amp * (grid.wavenumber(mode) * z + theta).sin())
                .collect();
            let u = Field::new(grid, modulated_wave(wt, &grid, &gamma), 0.0).unwrap();
            let cfg = ExtractionConfig::default();
            let init: Vec<f64> = coarse_samples(&gamma, &grid, &cfg)
                .unwrap()
                .iter()
                .map(|v| v + nudge)
                .collect();
            let e = extract_phase(&u, wt, &init, &cfg).unwrap();
            prop_assert!(max_abs_diff(&e.gamma, &gamma) < 1e-3);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn fit_rate_exponent_is_scale_invariant() -> Result<(), String> {
    let strategy = (
        -2.0..0.0f64,
        -1.0..1.0f64,
        0.1..10.0f64,
        1e-3..1e3f64,
        0.0..0.05f64,
        any::<bool>(),
    );
    runner()
        .run(&strategy, |(p, log_power, c, lambda, wiggle, with_log)| {
            let series: Vec<(f64, f64)> = (0..400)
                .map(|i| {
                    let t = 5.0 * i as f64;
                    let v = c * (1.0 + t).powf(p) * (2.0 + t).ln().powf(log_power) * (1.0 + wiggle * (0.7 * t).sin());
                    (t, v)
                })
                .collect();
            let scaled: Vec<(f64, f64)> = series.iter().map(|(t, v)| (*t, lambda * v)).collect();
            let model = if with_log {
                RateModel::PowerWithLog
            } else {
                RateModel::Power
            };
            let a = fit_rate(&series, (20.0, 1000.0), model).unwrap();
            let b = fit_rate(&scaled, (20.0, 1000.0), model).unwrap();
            prop_assert!((a.exponent - b.exponent).abs() < 1e-9);
            prop_assert!((b.prefactor / a.prefactor / lambda - 1.0).abs() < 1e-9);
            if with_log && wiggle == 0.0 {
                prop_assert!((a.exponent - p).abs() < 1e-6);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Every property by name, for the acceptance summary.
pub const ALL: [(&str, fn() -> Result<(), String>); 6] = [
    (
        "heat_multiplier_obeys_maximum_principle",
        heat_multiplier_obeys_maximum_principle,
    ),
    (
        "profile_solve_commutes_with_translation",
        profile_solve_commutes_with_translation,
    ),
    (
        "phase_solution_commutes_with_translation",
        phase_solution_commutes_with_translation,
    ),
    (
        "bloch_spectrum_is_conjugation_symmetric",
        bloch_spectrum_is_conjugation_symmetric,
    ),
    (
        "extraction_recovers_synthesised_phase",
        extraction_recovers_synthesised_phase,
    ),
    (
        "fit_rate_exponent_is_scale_invariant",
        fit_rate_exponent_is_scale_invariant,
    ),
];
