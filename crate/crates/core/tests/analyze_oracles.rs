mod common;

use std::f64::consts::PI;

use common::{max_abs_diff, rgl_family, rgl_wave};
use wtlab::analyze::{
    coarse_samples, extract_phase, fit_rate, inverse_modulated, inverse_phase, residual_plain, residual_refined,
    ExtractionConfig, RateModel,
};
use wtlab::evolve::{make_initial_data, modulated_wave, BaseShape, Gamma0Spec, InitialDataSpec, VRingSpec};
use wtlab::spectral::{derivative, sup_norm, sup_norm_scalar, Field, PeriodicGrid};
use wtlab::Error;

fn grid() -> PeriodicGrid {
    PeriodicGrid::new(4096, 256).unwrap()
}

fn slow_phase(grid: &PeriodicGrid, amplitude: f64) -> Vec<f64> {
    let l = grid.length_f64();
    grid.points()
        .iter()
        .map(|z| amplitude * (2.0 * PI * z / l).sin())
        .collect()
}

#[test]
fn constant_shift_is_recovered_exactly() {
    let (_, wt) = rgl_wave(0.5, 0.1, 32);
    let g = grid();
    let c = 0.3;
    let gamma = vec![c; g.m()];
    let u = Field::new(g, modulated_wave(&wt, &g, &gamma), 0.0).unwrap();
    let cfg = ExtractionConfig::default();
    let init = coarse_samples(&vec![0.2; g.m()], &g, &cfg).unwrap();
    let e = extract_phase(&u, &wt, &init, &cfg).unwrap();
    assert!(max_abs_diff(&e.gamma, &gamma) < 1e-8);
    let (_, plain) = residual_plain(&u, &e.gamma, &wt);
    assert!(plain < 1e-8);
}

#[test]
fn slowly_modulated_wave_round_trip() {
    let (_, wt) = rgl_wave(0.5, 0.1, 32);
    let g = grid();
    let spec = InitialDataSpec {
        gamma0: Gamma0Spec::ScaledProfile {
            shape: BaseShape::Sine,
            amplitude: 1.0,
            delta: 1.0 / 64.0,
        },
        vring0: VRingSpec::Zero,
        target_e0: None,
        seed: None,
    };
    let data = make_initial_data(&wt, &spec, &g).unwrap();
    let cfg = ExtractionConfig::default();
    // Start a quarter period off to exercise the Newton basin.
    let init: Vec<f64> = coarse_samples(&data.gamma0, &g, &cfg)
        .unwrap()
        .iter()
        .map(|v| v + 0.2)
        .collect();
    let e = extract_phase(&data.u0, &wt, &init, &cfg).unwrap();
    let err = max_abs_diff(&e.gamma, &data.gamma0);
    assert!(err < 1e-3, "round trip error {err}");
    let (_, plain) = residual_plain(&data.u0, &e.gamma, &wt);
    // The plain residual is the phase error times |φ₀'| = 2πr.
    assert!(plain <= 2.0 * PI * err * 1.01, "{plain}");
}

#[test]
fn brusselator_like_profile_round_trip() {
    // A non-circular profile: |φ'| varies along the period.
    let (_, mut wt) = rgl_wave(0.5, 0.1, 32);
    for (i, v) in wt.profile[0].iter_mut().enumerate() {
        *v += 0.3 * (4.0 * PI * i as f64 / 32.0).cos();
    }
    let g = grid();
    let gamma = slow_phase(&g, 0.8);
    let u = Field::new(g, modulated_wave(&wt, &g, &gamma), 0.0).unwrap();
    let cfg = ExtractionConfig::default();
    let e = extract_phase(&u, &wt, &coarse_samples(&gamma, &g, &cfg).unwrap(), &cfg).unwrap();
    assert!(max_abs_diff(&e.gamma, &gamma) < 1e-3);
}

#[test]
fn non_phase_perturbation_gives_no_phase() {
    let (_, wt) = rgl_wave(0.5, 0.1, 32);
    let g = grid();
    let eps = 1e-4;
    let base = modulated_wave(&wt, &g, &vec![0.0; g.m()]);
    // For the rotating wave, the radial direction is pointwise orthogonal to φ₀'.
    let values: Vec<Vec<f64>> = base
        .iter()
        .map(|c| c.iter().map(|v| v * (1.0 + eps)).collect())
        .collect();
    let u = Field::new(g, values, 0.0).unwrap();
    let cfg = ExtractionConfig::default();
    let e = extract_phase(&u, &wt, &coarse_samples(&vec![0.0; g.m()], &g, &cfg).unwrap(), &cfg).unwrap();
    assert!(sup_norm_scalar(&e.gamma) < 1e-6);
}

#[test]
fn plain_residual_of_constant_offset() {
    let (_, wt) = rgl_wave(0.5, 0.1, 32);
    let g = PeriodicGrid::new(512, 32).unwrap();
    let eps = 3e-3;
    let base = modulated_wave(&wt, &g, &vec![0.0; g.m()]);
    let values: Vec<Vec<f64>> = base.iter().map(|c| c.iter().map(|v| v + eps).collect()).collect();
    let u = Field::new(g, values, 0.0).unwrap();
    let (_, r) = residual_plain(&u, &vec![0.0; g.m()], &wt);
    assert!((r - eps).abs() < 1e-12);
}

#[test]
fn inverse_phase_and_inverse_modulation() {
    let (_, wt) = rgl_wave(0.5, 0.1, 32);
    let g = PeriodicGrid::new(2048, 128).unwrap();
    let forward = slow_phase(&g, 0.5);
    let inv = inverse_phase(&forward, &g).unwrap();
    // Oracle: γ(ζ) = Γ(ζ - γ(ζ)) with the exact sine for Γ.
    let l = g.length_f64();
    let direct: Vec<f64> = g
        .points()
        .iter()
        .zip(&inv)
        .map(|(z, v)| 0.5 * (2.0 * PI * (z - v) / l).sin())
        .collect();
    assert!(max_abs_diff(&direct, &inv) < 1e-10);

    let u = Field::new(g, modulated_wave(&wt, &g, &forward), 0.0).unwrap();
    let v = inverse_modulated(&u, &inv, &wt);
    assert!(sup_norm(&v) < 1e-8, "{}", sup_norm(&v));
    let zero = inverse_modulated(&u, &vec![0.0; g.m()], &wt);
    let base = modulated_wave(&wt, &g, &vec![0.0; g.m()]);
    for c in 0..2 {
        let expect: Vec<f64> = u.values[c].iter().zip(&base[c]).map(|(a, b)| a - b).collect();
        assert!(max_abs_diff(&zero[c], &expect) < 1e-12);
    }
}

#[test]
fn inverse_modulated_bounded_by_phase_gradient() {
    let (_, wt) = rgl_wave(0.5, 0.1, 32);
    let mut ratios = Vec::new();
    for (m, l) in [(2048, 128), (4096, 256)] {
        let g = PeriodicGrid::new(m, l).unwrap();
        let gamma = slow_phase(&g, 1.0);
        let u = Field::new(g, modulated_wave(&wt, &g, &gamma), 0.0).unwrap();
        // Use γ = 0 so the whole modulation lands in v.
        let v = inverse_modulated(&u, &vec![0.0; m], &wt);
        let gz = sup_norm_scalar(&derivative(&gamma, g.length_f64(), 1));
        let gs = sup_norm_scalar(&gamma);
        ratios.push(sup_norm(&v) / gs.max(gz));
    }
    assert!((ratios[0] / ratios[1] - 1.0).abs() < 0.1, "{ratios:?}");
}

#[test]
fn refined_residual_constant_and_synthetic() {
    let (_, fam) = rgl_family(0.5, 0.1, 32, 8);
    let wt = &fam.base;
    let interp = fam.interpolator();
    let g = PeriodicGrid::new(2048, 128).unwrap();

    let c = vec![0.37; g.m()];
    let u = Field::new(g, modulated_wave(wt, &g, &c), 0.0).unwrap();
    let (_, plain) = residual_plain(&u, &c, wt);
    let (_, refined) = residual_refined(&u, &c, wt.k, &interp).unwrap();
    assert!(plain < 1e-8 && refined < 1e-8);

    // Synthesis from the family itself: only the k-interpolation error remains.
    let gamma = slow_phase(&g, 0.4);
    let gz = derivative(&gamma, g.length_f64(), 1);
    let mut values = vec![vec![0.0; g.m()]; 2];
    let mut phi = [0.0; 2];
    for (i, z) in g.points().iter().enumerate() {
        let s = 1.0 + gz[i];
        interp.eval(wt.k * s, z + gamma[i] * s, &mut phi);
        values[0][i] = phi[0];
        values[1][i] = phi[1];
    }
    let u = Field::new(g, values, 0.0).unwrap();
    let (_, refined) = residual_refined(&u, &gamma, wt.k, &interp).unwrap();
    assert!(refined < 1e-6);

    // A gradient far outside the tabulated wavenumbers.
    let steep = slow_phase(&g, 10.0);
    match residual_refined(&u, &steep, wt.k, &interp) {
        Err(Error::WavenumberRange { max_gamma_zeta, .. }) => assert!(max_gamma_zeta > 0.4),
        other => panic!("expected a range error, got {other:?}"),
    }
}

#[test]
fn fit_rate_examples() {
    let ts: Vec<f64> = (0..=2000).map(|i| i as f64).collect();
    let power: Vec<(f64, f64)> = ts.iter().map(|&t| (t, 3.0 * (1.0 + t).powf(-0.5))).collect();
    let f = fit_rate(&power, (10.0, 2000.0), RateModel::Power).unwrap();
    assert!((f.exponent + 0.5).abs() < 1e-6);

    let logged: Vec<(f64, f64)> = ts.iter().map(|&t| (t, (2.0 + t).ln() / (1.0 + t))).collect();
    let f = fit_rate(&logged, (10.0, 2000.0), RateModel::PowerWithLog).unwrap();
    assert!((f.exponent + 1.0).abs() < 0.02);

    let constant: Vec<(f64, f64)> = ts.iter().map(|&t| (t, 0.7)).collect();
    let f = fit_rate(&constant, (10.0, 2000.0), RateModel::Power).unwrap();
    assert!(f.exponent.abs() < 1e-9);
}
