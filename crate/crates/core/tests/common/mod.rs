#![allow(dead_code)]

pub mod props;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use wtlab::model::{build_system, rgl, RdSystem};
use wtlab::wavetrain::{solve_profile, WaveTrain, WaveTrainFamily};

pub fn rgl_system(beta: f64) -> RdSystem {
    let p: BTreeMap<String, f64> = [("beta".to_string(), beta)].into();
    build_system("rgl", &p).unwrap()
}

pub fn brusselator_system(a: f64, b: f64, d1: f64, d2: f64) -> RdSystem {
    let p: BTreeMap<String, f64> = [("A", a), ("B", b), ("d1", d1), ("d2", d2)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    build_system("brusselator", &p).unwrap()
}

/// Rotating-wave samples `r(cos 2πζ, sin 2πζ)`, computed independently of the solver.
pub fn rotating_wave(m: usize, r: f64) -> Vec<Vec<f64>> {
    vec![
        (0..m).map(|i| r * (2.0 * PI * i as f64 / m as f64).cos()).collect(),
        (0..m).map(|i| r * (2.0 * PI * i as f64 / m as f64).sin()).collect(),
    ]
}

pub fn rgl_wave(beta: f64, q2: f64, m: usize) -> (RdSystem, WaveTrain) {
    let sys = rgl_system(beta);
    let k = rgl::k_of_q2(q2);
    let r = (1.0 - q2).sqrt();
    let wt = solve_profile(&sys, k, &rotating_wave(m, r), rgl::omega(beta, k)).unwrap();
    (sys, wt)
}

pub fn rgl_family(beta: f64, q2: f64, m: usize, steps: usize) -> (RdSystem, WaveTrainFamily) {
    let (sys, wt) = rgl_wave(beta, q2, m);
    let fam = WaveTrainFamily::build(&sys, &wt, wt.k / 100.0, steps).unwrap();
    (sys, fam)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
