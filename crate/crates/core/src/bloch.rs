//! Bloch operators `L(ξ) = k₀²D(∂+iξ)² + ω₀(∂+iξ) + f'(φ₀)` in a truncated
//! Fourier basis, spectral stability checks and the critical curve through 0.
//!
//! Basis functions are `e^{2πijζ}` for `|j| ≤ M`, with the layout
//! `c·(2M+1) + (j+M)`. The `L²(0,1)` pairing becomes the Euclidean product of
//! coefficient vectors, so the adjoint operator is the conjugate transpose.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RdSystem;
use crate::spectral::{fourier_coefficients, resample, signed_index};
use crate::wavetrain::WaveTrain;

type C = Complex64;

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 10_000;

/// Precomputed data shared by all `L(ξ)` of one wave train.
#[derive(Debug, Clone)]
pub struct BlochContext {
    pub n: usize,
    pub modes: usize,
    pub k0: f64,
    pub omega0: f64,
    diffusion: Vec<f64>,
    /// `jac_coeffs[c*n+e][p + 2M]` = Fourier coefficient `p` of `f'(φ₀)_{ce}`.
    jac_coeffs: Vec<Vec<C>>,
    /// Coefficients of `φ₀'` in the basis.
    pub phi0_prime: DVector<C>,
}

impl BlochContext {
    pub fn new(system: &RdSystem, wt: &WaveTrain, modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::Usage("Bloch truncation M must be positive".into()));
        }
        let n = wt.n();
        let m = wt.m();
        // Profile content beyond M cannot be represented.
        for comp in &wt.profile {
            let coeffs = fourier_coefficients(comp);
            let tail = coeffs
                .iter()
                .enumerate()
                .filter(|(j, _)| signed_index(*j, m).unsigned_abs() as usize > modes)
                .fold(0.0f64, |a, (_, c)| a.max(c.norm()));
            if tail > 1e-12 {
                return Err(Error::Resolution(format!(
                    "profile Fourier tail {tail:.2e} beyond M = {modes} exceeds 1e-12"
                )));
            }
        }
        // f'(φ₀) has content up to 2M in principle; sample it on a fine grid.
        let big = (4 * modes + 2).next_power_of_two().max(m);
        let fine: Vec<Vec<f64>> = wt.profile.iter().map(|c| resample(c, big)).collect();
        let mut jac_grid = vec![vec![0.0; big]; n * n];
        let mut jac = vec![0.0; n * n];
        let mut u = vec![0.0; n];
        for i in 0..big {
            for c in 0..n {
                u[c] = fine[c][i];
            }
            system.jac(&u, &mut jac);
            for (entry, v) in jac_grid.iter_mut().zip(&jac) {
                entry[i] = *v;
            }
        }
        let jac_coeffs = jac_grid
            .iter()
            .map(|g| {
                let all = fourier_coefficients(g);
                (-(2 * modes as i64)..=(2 * modes as i64))
                    .map(|p| {
                        if p.unsigned_abs() as usize >= big / 2 {
                            C::new(0.0, 0.0)
                        } else {
                            all[p.rem_euclid(big as i64) as usize]
                        }
                    })
                    .collect()
            })
            .collect();
        let dm = system.diffusion();
        let diffusion = (0..n * n).map(|idx| dm[(idx / n, idx % n)]).collect();
        let width = 2 * modes + 1;
        let mut phi0_prime = DVector::zeros(n * width);
        for (c, comp) in wt.profile.iter().enumerate() {
            let coeffs = fourier_coefficients(comp);
            for jj in 0..width {
                let j = jj as i64 - modes as i64;
                if j.unsigned_abs() as usize >= m / 2 {
                    continue;
                }
                let cj = coeffs[j.rem_euclid(m as i64) as usize];
                phi0_prime[c * width + jj] = C::new(0.0, 2.0 * PI * j as f64) * cj;
            }
        }
        Ok(Self {
            n,
            modes,
            k0: wt.k,
            omega0: wt.omega,
            diffusion,
            jac_coeffs,
            phi0_prime,
        })
    }

    pub fn dim(&self) -> usize {
        self.n * (2 * self.modes + 1)
    }

    fn assemble_with(&self, xi: f64, jac_coeffs: &[Vec<C>]) -> DMatrix<C> {
        let n = self.n;
        let mm = self.modes as i64;
        let width = 2 * self.modes + 1;
        let mut a = DMatrix::zeros(n * width, n * width);
        for c in 0..n {
            for e in 0..n {
                let conv = &jac_coeffs[c * n + e];
                for jj in 0..width {
                    let j = jj as i64 - mm;
                    for ll in 0..width {
                        let l = ll as i64 - mm;
                        a[(c * width + jj, e * width + ll)] = conv[(j - l + 2 * mm) as usize];
                    }
                    let kappa = 2.0 * PI * j as f64 + xi;
                    let mut diag = C::new(-self.k0 * self.k0 * self.diffusion[c * n + e] * kappa * kappa, 0.0);
                    if c == e {
                        diag += C::new(0.0, self.omega0 * kappa);
                    }
                    a[(c * width + jj, e * width + jj)] += diag;
                }
            }
        }
        a
    }

    pub fn assemble(&self, xi: f64) -> Result<BlochOperator> {
        if !(xi.abs() <= PI) {
            return Err(Error::Usage(format!("Bloch frequency {xi} outside [-π, π]")));
        }
        Ok(BlochOperator {
            xi,
            modes: self.modes,
            matrix: self.assemble_with(xi, &self.jac_coeffs),
        })
    }

    /// `L(ξ)` with `f'(φ₀)` replaced by a constant matrix (row-major).
    pub fn assemble_constant(&self, xi: f64, constant: &[f64]) -> DMatrix<C> {
        let mm = 2 * self.modes;
        let coeffs: Vec<Vec<C>> = constant
            .iter()
            .map(|v| {
                let mut row = vec![C::new(0.0, 0.0); 2 * mm + 1];
                row[mm] = C::new(*v, 0.0);
                row
            })
            .collect();
        self.assemble_with(xi, &coeffs)
    }

    /// Sample a coefficient vector as an n-component function at `m` points.
    pub fn to_grid(&self, v: &DVector<C>, xi_weight: f64, m: usize) -> Vec<Vec<C>> {
        let width = 2 * self.modes + 1;
        (0..self.n)
            .map(|c| {
                (0..m)
                    .map(|i| {
                        let z = i as f64 / m as f64;
                        (0..width)
                            .map(|jj| {
                                let j = jj as f64 - self.modes as f64;
                                v[c * width + jj] * C::from_polar(1.0, 2.0 * PI * j * z + xi_weight * z)
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }

    /// Coefficients of a real n-component 1-periodic function.
    pub fn coefficients_of(&self, f: &[Vec<f64>]) -> DVector<C> {
        let width = 2 * self.modes + 1;
        let mut out = DVector::zeros(self.n * width);
        for (c, comp) in f.iter().enumerate() {
            let m = comp.len();
            let coeffs = fourier_coefficients(comp);
            for jj in 0..width {
                let j = jj as i64 - self.modes as i64;
                if j.unsigned_abs() as usize >= m / 2 {
                    continue;
                }
                out[c * width + jj] = coeffs[j.rem_euclid(m as i64) as usize];
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct BlochOperator {
    pub xi: f64,
    pub modes: usize,
    pub matrix: DMatrix<C>,
}

impl BlochOperator {
    pub fn eigenvalues(&self) -> Result<Vec<C>> {
        eigenvalues(&self.matrix, self.xi)
    }
}

pub fn assemble_bloch(system: &RdSystem, wt: &WaveTrain, xi: f64, modes: usize) -> Result<BlochOperator> {
    BlochContext::new(system, wt, modes)?.assemble(xi)
}

pub fn eigenvalues(a: &DMatrix<C>, xi: f64) -> Result<Vec<C>> {
    let schur = Schur::try_new(a.clone(), SCHUR_EPS, SCHUR_MAX_ITER).ok_or(Error::Eigensolver { xi })?;
    let ev = schur.eigenvalues().ok_or(Error::Eigensolver { xi })?;
    if ev.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Eigensolver { xi });
    }
    Ok(ev.iter().copied().collect())
}

/// Eigenvector for a known eigenvalue by inverse iteration.
pub fn eigenvector(a: &DMatrix<C>, lambda: C, xi: f64) -> Result<DVector<C>> {
    let dim = a.nrows();
    let shift = lambda + C::new(1e-11 * (1.0 + lambda.norm()), 0.0);
    let mut shifted = a.clone();
    for i in 0..dim {
        shifted[(i, i)] -= shift;
    }
    let lu = shifted.lu();
    let mut v = DVector::from_fn(dim, |i, _| C::new(1.0 + 0.1 * (i as f64).sin(), 0.3 * (i as f64).cos()));
    for _ in 0..4 {
        let w = lu.solve(&v).ok_or(Error::Eigensolver { xi })?;
        let norm = w.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Eigensolver { xi });
        }
        v = w / C::new(norm, 0.0);
    }
    Ok(v)
}

fn dot(u: &DVector<C>, v: &DVector<C>) -> C {
    u.dotc(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub xi_grid: Vec<f64>,
    pub spectra: Vec<Vec<C>>,
    pub max_real: Vec<f64>,
    pub theta_hat: f64,
    pub d1_ok: bool,
    pub d2_ok: bool,
    pub d3_ok: bool,
    pub zero_eigenvalue_gap: f64,
    pub zero_eigenvalue: C,
}

/// Default stability grid: uniform on `[-π, π)` plus a geometric refinement
/// towards 0 on both sides.
pub fn default_xi_grid(uniform: usize, finest: f64) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..uniform)
        .map(|i| -PI + 2.0 * PI * i as f64 / uniform as f64)
        .collect();
    let coarse = 2.0 * PI / uniform as f64;
    let mut x = finest;
    while x < coarse {
        grid.push(x);
        grid.push(-x);
        x *= 2.0;
    }
    if !grid.contains(&0.0) {
        grid.push(0.0);
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    grid
}

pub fn verify_stability(system: &RdSystem, wt: &WaveTrain, xi_grid: &[f64], modes: usize) -> Result<StabilityReport> {
    if !xi_grid.contains(&0.0) {
        return Err(Error::Usage("xi grid must contain 0".into()));
    }
    let ctx = BlochContext::new(system, wt, modes)?;
    let spectra: Vec<Vec<C>> = xi_grid
        .par_iter()
        .map(|&xi| ctx.assemble(xi)?.eigenvalues())
        .collect::<Result<_>>()?;

    let zero_idx = xi_grid.iter().position(|x| *x == 0.0).unwrap();
    let mut sorted = spectra[zero_idx].clone();
    sorted.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
    let zero_eigenvalue = sorted[0];
    let zero_eigenvalue_gap = sorted.get(1).map_or(f64::INFINITY, |v| v.norm());
    let d3_ok = zero_eigenvalue.norm() < 1e-8 && zero_eigenvalue_gap > 1e-4;
    let d1_ok = sorted[1..].iter().all(|v| v.re < -1e-10);

    let max_real: Vec<f64> = spectra
        .iter()
        .map(|s| s.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let theta_hat = xi_grid
        .iter()
        .zip(&max_real)
        .filter(|(xi, _)| **xi != 0.0)
        .map(|(xi, mr)| -mr / (xi * xi))
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    let theta_hat = if theta_hat.is_finite() { theta_hat } else { 0.0 };
    Ok(StabilityReport {
        xi_grid: xi_grid.to_vec(),
        spectra,
        max_real,
        theta_hat,
        d1_ok,
        d2_ok: theta_hat > 0.0,
        d3_ok,
        zero_eigenvalue_gap,
        zero_eigenvalue,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalCurve {
    pub modes: usize,
    pub xi_samples: Vec<f64>,
    pub lambda_c: Vec<C>,
    /// Fourier coefficients of `Φ_ξ` in the layout of [`BlochContext`].
    pub phi_xi: Vec<Vec<C>>,
    pub phi_tilde_xi: Vec<Vec<C>>,
    /// `⟨Φ̃_ξ, Φ_ξ⟩` after normalisation.
    pub normalization: Vec<C>,
    /// `⟨Φ̃₀, Φ_ξ⟩` after normalisation.
    pub projection: Vec<C>,
    /// Distance from `λ_c(ξ)` to the rest of the spectrum.
    pub gaps: Vec<f64>,
    pub xi0_hat: f64,
}

impl CriticalCurve {
    pub fn lambda_at(&self, xi: f64) -> Option<C> {
        self.xi_samples
            .iter()
            .position(|x| (x - xi).abs() < 1e-14)
            .map(|i| self.lambda_c[i])
    }
}

fn nearest(spec: &[C], target: C) -> (usize, f64, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    let mut second = f64::INFINITY;
    for (i, v) in spec.iter().enumerate() {
        let d = (v - target).norm();
        if d < best.1 {
            second = best.1;
            best = (i, d);
        } else if d < second {
            second = d;
        }
    }
    (best.0, best.1, second)
}

fn gap(spec: &[C], idx: usize) -> f64 {
    spec.iter()
        .enumerate()
        .filter(|(i, _)| *i != idx)
        .map(|(_, v)| (v - spec[idx]).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Track the critical eigenvalue from `from` to `to` starting at `lambda`,
/// halving the step whenever the nearest-neighbour match is ambiguous.
fn track(ctx: &BlochContext, from: f64, to: f64, lambda: C, depth: usize) -> Result<(C, Vec<C>, usize)> {
    let spec = ctx.assemble(to)?.eigenvalues()?;
    let (idx, d, second) = nearest(&spec, lambda);
    let g = gap(&spec, idx);
    if g < 1e-6 {
        return Err(Error::Tracking {
            xi: to,
            reason: format!("spectral gap {g:.2e} below 1e-6"),
        });
    }
    if second < 2.0 * d && d > 1e-12 {
        if depth >= 12 {
            return Err(Error::Tracking {
                xi: to,
                reason: "ambiguous nearest-neighbour match after repeated step halving".into(),
            });
        }
        let mid = 0.5 * (from + to);
        let (lm, _, _) = track(ctx, from, mid, lambda, depth + 1)?;
        return track(ctx, mid, to, lm, depth + 1);
    }
    Ok((spec[idx], spec, idx))
}

pub fn critical_curve(
    system: &RdSystem,
    wt: &WaveTrain,
    xi_max: f64,
    samples: usize,
    modes: usize,
) -> Result<CriticalCurve> {
    if samples < 3 || xi_max <= 0.0 || xi_max > PI {
        return Err(Error::Usage(
            "critical curve needs xi_max in (0, π] and >= 3 samples".into(),
        ));
    }
    let ctx = BlochContext::new(system, wt, modes)?;
    // Symmetric grid with 0 in the middle.
    let half = samples / 2;
    let xis: Vec<f64> = (0..=2 * half)
        .map(|i| xi_max * (i as f64 - half as f64) / half as f64)
        .collect();

    let a0 = ctx.assemble(0.0)?;
    let spec0 = a0.eigenvalues()?;
    let (i0, d0, _) = nearest(&spec0, C::new(0.0, 0.0));
    if d0 > 1e-8 {
        return Err(Error::Singular(format!(
            "no eigenvalue of L(0) near 0 (closest {d0:.2e})"
        )));
    }
    let gap0 = gap(&spec0, i0);
    if gap0 < 1e-6 {
        return Err(Error::Tracking {
            xi: 0.0,
            reason: format!("zero eigenvalue not isolated (gap {gap0:.2e})"),
        });
    }

    // Sequential tracking outward on each side.
    let mut lambdas = vec![C::new(0.0, 0.0); xis.len()];
    let mut gaps = vec![gap0; xis.len()];
    let mut spectra: Vec<Option<Vec<C>>> = vec![None; xis.len()];
    for dir in [1i64, -1] {
        let mut prev_xi = 0.0;
        let mut prev = C::new(0.0, 0.0);
        let mut prev2: Option<(f64, C)> = None;
        let mut i = half as i64 + dir;
        while i >= 0 && i < xis.len() as i64 {
            let xi = xis[i as usize];
            // Linear extrapolation sharpens the match on curved branches.
            let target = match prev2 {
                Some((x2, l2)) => prev + (prev - l2) * ((xi - prev_xi) / (prev_xi - x2)),
                None => prev,
            };
            let (lam, spec, idx) = track(&ctx, prev_xi, xi, target, 0)?;
            gaps[i as usize] = gap(&spec, idx);
            lambdas[i as usize] = lam;
            spectra[i as usize] = Some(spec);
            prev2 = Some((prev_xi, prev));
            prev_xi = xi;
            prev = lam;
            i += dir;
        }
    }
    lambdas[half] = C::new(0.0, 0.0);

    // Eigenfunctions; Φ₀ := φ₀' exactly.
    let phi0 = ctx.phi0_prime.clone();
    let a0h = a0.matrix.adjoint();
    let mut tilde0 = eigenvector(&a0h, spec0[i0].conj(), 0.0)?;
    let s = dot(&tilde0, &phi0);
    tilde0 /= s.conj();

    let results: Vec<(DVector<C>, DVector<C>)> = xis
        .par_iter()
        .map(|&xi| {
            if xi == 0.0 {
                return Ok((phi0.clone(), tilde0.clone()));
            }
            let lam = lambdas[xis.iter().position(|x| *x == xi).unwrap()];
            let a = ctx.assemble(xi)?.matrix;
            let mut v = eigenvector(&a, lam, xi)?;
            let p = dot(&tilde0, &v);
            v /= p;
            let mut w = eigenvector(&a.adjoint(), lam.conj(), xi)?;
            let q = dot(&w, &v);
            w /= q.conj();
            Ok((v, w))
        })
        .collect::<Result<_>>()?;

    let normalization = results.iter().map(|(v, w)| dot(w, v)).collect();
    let projection = results.iter().map(|(v, _)| dot(&tilde0, v)).collect();
    let xi0_hat = xis
        .iter()
        .zip(&gaps)
        .filter(|(_, g)| **g > 1e-4)
        .map(|(x, _)| x.abs())
        .fold(0.0, f64::max);
    Ok(CriticalCurve {
        modes,
        xi_samples: xis,
        lambda_c: lambdas,
        phi_xi: results.iter().map(|(v, _)| v.iter().copied().collect()).collect(),
        phi_tilde_xi: results.iter().map(|(_, w)| w.iter().copied().collect()).collect(),
        normalization,
        projection,
        gaps,
        xi0_hat,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub a_fit: f64,
    pub d_fit: f64,
    /// `Re c₁`, which vanishes for a real operator family.
    pub linear_real: f64,
    /// `Im c₂`, which vanishes for a real operator family.
    pub quadratic_imag: f64,
    /// `sup |λ_c - iaξ + dξ²| / |ξ|³` over the samples.
    pub cubic_residual: f64,
    /// Sup of the polynomial fit residual.
    pub fit_residual: f64,
}

/// Least-squares fit `λ_c(ξ) ≈ Σ_{p=1}^{P} c_p ξ^p`.
pub fn fit_expansion(curve: &CriticalCurve) -> Result<ExpansionFit> {
    let pts: Vec<(f64, C)> = curve
        .xi_samples
        .iter()
        .zip(&curve.lambda_c)
        .filter(|(x, _)| **x != 0.0)
        .map(|(x, l)| (*x, *l))
        .collect();
    if pts.len() < 6 {
        return Err(Error::Fit("expansion fit needs at least 7 symmetric samples".into()));
    }
    let degree = 8.min(pts.len() - 1);
    let scale = pts.iter().fold(0.0f64, |a, (x, _)| a.max(x.abs()));
    let mut basis = DMatrix::zeros(pts.len(), degree);
    for (r, (x, _)) in pts.iter().enumerate() {
        for p in 0..degree {
            basis[(r, p)] = (x / scale).powi(p as i32 + 1);
        }
    }
    let re = DVector::from_iterator(pts.len(), pts.iter().map(|(_, l)| l.re));
    let im = DVector::from_iterator(pts.len(), pts.iter().map(|(_, l)| l.im));
    let svd = basis.clone().svd(true, true);
    let cre = svd.solve(&re, 1e-14).map_err(|e| Error::Fit(e.to_string()))?;
    let cim = svd.solve(&im, 1e-14).map_err(|e| Error::Fit(e.to_string()))?;
    let c1 = C::new(cre[0], cim[0]) / scale;
    let c2 = C::new(cre[1], cim[1]) / (scale * scale);
    let fitted_re = &basis * &cre;
    let fitted_im = &basis * &cim;
    let mut fit_residual = 0.0f64;
    let mut cubic_residual = 0.0f64;
    for (r, (x, l)) in pts.iter().enumerate() {
        fit_residual = fit_residual.max((C::new(fitted_re[r], fitted_im[r]) - l).norm());
        let model = C::new(0.0, c1.im * x) - C::new(-c2.re * x * x, 0.0);
        cubic_residual = cubic_residual.max((l - model).norm() / x.abs().powi(3));
    }
    let magnitude = pts.iter().fold(0.0f64, |a, (_, l)| a.max(l.norm()));
    if fit_residual > 1e-9 * magnitude.max(1e-3) {
        return Err(Error::Fit(format!(
            "critical-curve fit residual {fit_residual:.2e} too large; refine the samples"
        )));
    }
    Ok(ExpansionFit {
        a_fit: c1.im,
        d_fit: -c2.re,
        linear_real: c1.re,
        quadratic_imag: c2.im,
        cubic_residual,
        fit_residual,
    })
}
