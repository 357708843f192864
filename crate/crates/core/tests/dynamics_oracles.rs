mod common;

use std::f64::consts::PI;

use common::{max_abs_diff, rgl_wave};
use wtlab::evolve::{
    integrate, integrate_rd, integrate_scalar, make_initial_data, sample_gamma0, tiled_profile, toy_integrate,
    toy_transform_check, BaseShape, Gamma0Spec, InitialDataSpec, ToyConfig, ToyInitial, VRingSpec,
};
use wtlab::modulation::{
    burgers_direct, burgers_solve, heat_apply, hj_direct, hj_solve, self_similar_front, FrontParams, HjCoefficients,
    PhaseField,
};
use wtlab::spectral::{derivative, shift, sup_norm, sup_norm_scalar, Field, PeriodicGrid};
use wtlab::Error;

const COEFFS: HjCoefficients = HjCoefficients {
    a: 0.3,
    d: 0.8,
    nu: 0.6,
};

fn bump(grid: &PeriodicGrid, amplitude: f64, width: f64) -> PhaseField {
    let c = 0.5 * grid.length_f64();
    let g = grid
        .points()
        .iter()
        .map(|z| amplitude * (-(z - c).powi(2) / (2.0 * width * width)).exp())
        .collect();
    PhaseField::new(*grid, g, 0.0).unwrap()
}

#[test]
fn heat_multiplier_is_a_semigroup() {
    let grid = PeriodicGrid::new(256, 64).unwrap();
    let v = bump(&grid, 1.0, 3.0).gamma;
    let l = grid.length_f64();
    let once = heat_apply(&v, l, 7.0, 0.8, 0.3);
    let twice = heat_apply(&heat_apply(&v, l, 2.5, 0.8, 0.3), l, 4.5, 0.8, 0.3);
    assert!(max_abs_diff(&once, &twice) < 1e-13);
}

#[test]
fn heat_multiplier_single_mode_closed_form() {
    // e^{(d∂² + a∂)t} sin(κζ) = e^{-dκ²t} sin(κ(ζ + at)).
    let grid = PeriodicGrid::new(128, 32).unwrap();
    let kappa = 2.0 * PI * 3.0 / 32.0;
    let (d, a, t) = (0.7, -0.4, 2.3);
    let v: Vec<f64> = grid.points().iter().map(|z| (kappa * z).sin()).collect();
    let out = heat_apply(&v, 32.0, t, d, a);
    for (z, o) in grid.points().iter().zip(&out) {
        let exact = (-d * kappa * kappa * t).exp() * (kappa * (z + a * t)).sin();
        assert!((o - exact).abs() < 1e-13);
    }
}

#[test]
fn cole_hopf_restart_matches_direct_solution() {
    let grid = PeriodicGrid::new(512, 128).unwrap();
    let g0 = bump(&grid, 1.5, 6.0);
    let direct = hj_solve(&g0, COEFFS, &[100.0]).unwrap();
    let half = hj_solve(&g0, COEFFS, &[50.0]).unwrap();
    let restart = hj_solve(&half[0], COEFFS, &[50.0]).unwrap();
    assert!(max_abs_diff(&direct[0].gamma, &restart[0].gamma) < 1e-9);
    assert!((restart[0].time - 100.0).abs() < 1e-12);
}

#[test]
fn cole_hopf_matches_time_stepping() {
    let grid = PeriodicGrid::new(512, 128).unwrap();
    let g0 = bump(&grid, 1.5, 6.0);
    let times = [0.0, 25.0, 100.0];
    let exact = hj_solve(&g0, COEFFS, &times).unwrap();
    let stepped = hj_direct(&g0, COEFFS, 100.0, 0.05, &times).unwrap();
    for (e, s) in exact.iter().zip(&stepped) {
        assert!(max_abs_diff(&e.gamma, &s.gamma) < 1e-8, "t = {}", e.time);
    }
}

#[test]
fn wavenumber_of_phase_solves_burgers() {
    let grid = PeriodicGrid::new(512, 128).unwrap();
    let g0 = bump(&grid, 1.0, 5.0);
    let times = [0.0, 10.0, 40.0];
    let k = burgers_solve(&g0, COEFFS, &times).unwrap();
    let k0 = PhaseField::new(grid, g0.derivative(), 0.0).unwrap();
    let kd = burgers_direct(&k0, COEFFS, 40.0, 0.02, &times).unwrap();
    for (a, b) in k.iter().zip(&kd) {
        assert!(max_abs_diff(&a.gamma, &b.gamma) < 1e-7);
    }
}

#[test]
fn phase_solution_obeys_the_bounds() {
    let grid = PeriodicGrid::new(256, 64).unwrap();
    let g0 = bump(&grid, 2.0, 4.0);
    let lo = g0.gamma.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = g0.gamma.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for p in hj_solve(&g0, COEFFS, &[1.0, 10.0, 100.0]).unwrap() {
        assert!(p.gamma.iter().all(|g| *g >= lo - 1e-10 && *g <= hi + 1e-10));
    }
}

#[test]
fn zero_diffusion_is_a_config_error() {
    let grid = PeriodicGrid::new(64, 16).unwrap();
    let g0 = bump(&grid, 1.0, 2.0);
    let bad = HjCoefficients {
        a: 0.0,
        d: 0.0,
        nu: 1.0,
    };
    assert!(matches!(hj_solve(&g0, bad, &[1.0]), Err(Error::Config(_))));
    assert!(matches!(hj_solve(&g0, COEFFS, &[-1.0]), Err(Error::Usage(_))));
}

#[test]
fn front_solves_the_phase_equation() {
    for nu in [0.0, 0.7, -0.9] {
        let p = FrontParams {
            gamma_minus: -0.4,
            gamma_plus: 0.6,
            a: 0.25,
            d: 1.3,
            nu,
        };
        assert!((self_similar_front(&p, -1e4, 0.0).unwrap() + 0.4).abs() < 1e-12);
        assert!((self_similar_front(&p, 1e4, 0.0).unwrap() - 0.6).abs() < 1e-12);
        let f = |z: f64, t: f64| self_similar_front(&p, z, t).unwrap();
        let (h, ht) = (1e-3, 1e-3);
        for &t in &[0.0, 3.0, 20.0] {
            for &z in &[-5.0, -0.7, 0.0, 1.9, 6.0] {
                let t = t + ht;
                let gt = (f(z, t + ht) - f(z, t - ht)) / (2.0 * ht);
                let gz = (f(z + h, t) - f(z - h, t)) / (2.0 * h);
                let gzz = (f(z + h, t) - 2.0 * f(z, t) + f(z - h, t)) / (h * h);
                let res = gt - (p.d * gzz + p.a * gz + p.nu * gz * gz);
                assert!(res.abs() < 1e-6, "nu = {nu}, residual {res}");
            }
        }
    }
}

#[test]
fn scaled_profile_derivative_follows_chain_rule() {
    let grid = PeriodicGrid::new(4096, 256).unwrap();
    let delta = 1.0 / 64.0;
    let spec = Gamma0Spec::ScaledProfile {
        shape: BaseShape::Sine,
        amplitude: 1.0,
        delta,
    };
    let g = sample_gamma0(&spec, &grid);
    let measured = sup_norm_scalar(&derivative(&g, 256.0, 1));
    assert!((measured - delta * BaseShape::Sine.derivative_sup()).abs() < 1e-10);
}

#[test]
fn random_perturbation_hits_target_and_is_reproducible() {
    let (_, wt) = rgl_wave(0.5, 0.1, 32);
    let grid = PeriodicGrid::new(1024, 64).unwrap();
    let spec = InitialDataSpec {
        gamma0: Gamma0Spec::ScaledProfile {
            shape: BaseShape::Cosine,
            amplitude: 1.0,
            delta: 1.0 / 16.0,
        },
        vring0: VRingSpec::RandomSmooth {
            amplitude: None,
            correlation_length: 4.0,
        },
        target_e0: Some(0.15),
        seed: Some(7),
    };
    let a = make_initial_data(&wt, &spec, &grid).unwrap();
    let b = make_initial_data(&wt, &spec, &grid).unwrap();
    assert_eq!(a.u0.values, b.u0.values);
    assert!((a.e0 - 0.15).abs() < 1e-10);
    assert!((sup_norm(&a.vring0) - (0.15 - a.gamma0_prime_sup)).abs() < 1e-12);
    let other = make_initial_data(
        &wt,
        &InitialDataSpec {
            seed: Some(8),
            ..spec.clone()
        },
        &grid,
    )
    .unwrap();
    assert_ne!(a.vring0, other.vring0);
    let missing = InitialDataSpec { seed: None, ..spec };
    assert!(matches!(make_initial_data(&wt, &missing, &grid), Err(Error::Config(_))));
}

#[test]
fn wave_train_is_stationary_in_the_comoving_frame() {
    let (sys, wt) = rgl_wave(0.5, 0.1, 32);
    let grid = PeriodicGrid::new(16 * 32, 16).unwrap();
    let u0 = Field::new(grid, tiled_profile(&wt, &grid), 0.0).unwrap();
    let out = integrate(&sys, &wt, &u0, 50.0, 0.1, &[0.0, 50.0]).unwrap();
    assert!(out.history.iter().all(|h| h.deviation < 1e-10));
}

#[test]
fn lab_frame_wave_travels_at_its_phase_speed() {
    // Without the ωu_ζ term, φ₀ is carried to φ₀(ζ - ωt).
    let (sys, wt) = rgl_wave(0.5, 0.1, 32);
    let grid = PeriodicGrid::new(4 * 32, 4).unwrap();
    let phi = tiled_profile(&wt, &grid);
    let u0 = Field::new(grid, phi.clone(), 0.0).unwrap();
    let t = 10.0;
    let out = integrate_rd(&sys, wt.k, 0.0, &u0, &phi, t, 0.02, &[t]).unwrap();
    let u = &out.snapshots[0];
    for c in 0..2 {
        let expected = shift(&phi[c], -wt.omega * t, 4.0);
        assert!(max_abs_diff(&u.values[c], &expected) < 1e-9);
    }
}

#[test]
fn time_stepping_is_fourth_order() {
    let grid = PeriodicGrid::new(128, 32).unwrap();
    let w0: Vec<f64> = grid.points().iter().map(|z| (2.0 * PI * z / 32.0).sin()).collect();
    let run = |dt: f64| {
        integrate_scalar(
            &grid,
            &w0,
            0.5,
            0.2,
            |w, wz| 0.8 * wz * wz - 0.3 * w * wz,
            4.0,
            dt,
            &[4.0],
        )
        .unwrap()
        .pop()
        .unwrap()
        .1
    };
    let (a, b, c) = (run(0.4), run(0.2), run(0.1));
    let ratio = max_abs_diff(&a, &b) / max_abs_diff(&b, &c);
    assert!((ratio.log2() - 4.0).abs() < 0.5, "observed order {}", ratio.log2());
}

fn toy(mu: f64, nu: f64) -> ToyConfig {
    ToyConfig {
        mu,
        d: 1.0,
        a: 0.2,
        nu,
        length: 64,
        m: 256,
        w0: ToyInitial::Mode {
            amplitude: 0.5,
            mode: 1,
        },
        a_interp: 0.0,
    }
}

#[test]
fn toy_transform_agrees_with_direct_run() {
    let times: Vec<f64> = (0..=10).map(|i| 5.0 * i as f64).collect();
    let disc = toy_transform_check(&toy(0.5, 0.5), 50.0, 0.01, &times).unwrap();
    assert!(disc < 1e-6, "discrepancy {disc}");
}

#[test]
fn toy_with_small_slope_decays() {
    let cfg = toy(1.0, 0.0);
    let s = toy_integrate(&cfg, 200.0, 0.1, &[0.0, 50.0, 200.0]).unwrap();
    assert!(s.wz_sup.windows(2).all(|w| w[1] < w[0]));
    assert!(s.w_sup.iter().all(|w| *w <= s.w0_sup + 1e-12));
}
