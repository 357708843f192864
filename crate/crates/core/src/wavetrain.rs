//! Periodic profiles `k²Dφ'' + ωφ' + f(φ) = 0` on `[0, 1)`, their continuation
//! in the wavenumber and the k-derivatives of the family.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RdSystem;
use crate::spectral::{self, derivative, diff_matrix, shift, FourierSeries};

/// Newton stops once the residual drops below this.
const NEWTON_TARGET: f64 = 1e-11;
/// Residual a profile must meet to be accepted.
pub const RESIDUAL_TOL: f64 = 1e-10;
const MAX_NEWTON: usize = 50;
const MIN_POINTS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveTrain {
    pub k: f64,
    pub omega: f64,
    /// Component-major samples on `m` points of `[0, 1)`.
    pub profile: Vec<Vec<f64>>,
    pub residual_norm: f64,
    pub newton_steps: usize,
}

impl WaveTrain {
    pub fn m(&self) -> usize {
        self.profile[0].len()
    }

    pub fn n(&self) -> usize {
        self.profile.len()
    }

    pub fn derivative(&self, order: u32) -> Vec<Vec<f64>> {
        self.profile.iter().map(|c| derivative(c, 1.0, order)).collect()
    }

    /// Per-component series for evaluation at arbitrary points.
    pub fn series(&self) -> Vec<FourierSeries> {
        self.profile
            .iter()
            .map(|c| FourierSeries::from_samples(c, 1.0))
            .collect()
    }

    /// The same wave train resampled on `m` points.
    pub fn resampled(&self, m: usize) -> WaveTrain {
        WaveTrain {
            profile: self.profile.iter().map(|c| spectral::resample(c, m)).collect(),
            ..self.clone()
        }
    }
}

/// Residual `k²Dφ'' + ωφ' + f(φ)` on the collocation grid.
pub fn profile_residual(system: &RdSystem, k: f64, omega: f64, phi: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = phi.len();
    let m = phi[0].len();
    let d1: Vec<Vec<f64>> = phi.iter().map(|c| derivative(c, 1.0, 1)).collect();
    let d2: Vec<Vec<f64>> = phi.iter().map(|c| derivative(c, 1.0, 2)).collect();
    let dm = system.diffusion();
    let mut out = vec![vec![0.0; m]; n];
    let mut u = vec![0.0; n];
    let mut fu = vec![0.0; n];
    for i in 0..m {
        for c in 0..n {
            u[c] = phi[c][i];
        }
        system.f(&u, &mut fu);
        for c in 0..n {
            let mut diff = 0.0;
            for e in 0..n {
                diff += dm[(c, e)] * d2[e][i];
            }
            out[c][i] = k * k * diff + omega * d1[c][i] + fu[c];
        }
    }
    out
}

/// Collocation matrix of `L₀ = k²D∂² + ω∂ + f'(φ)` in component-major order.
pub fn linearization_matrix(system: &RdSystem, k: f64, omega: f64, phi: &[Vec<f64>]) -> DMatrix<f64> {
    let n = phi.len();
    let m = phi[0].len();
    let dmat1 = diff_matrix(m, 1.0, 1);
    let dmat2 = diff_matrix(m, 1.0, 2);
    let dm = system.diffusion();
    let mut l = DMatrix::zeros(n * m, n * m);
    for c in 0..n {
        for e in 0..n {
            let dce = k * k * dm[(c, e)];
            let diag = if c == e { omega } else { 0.0 };
            if dce == 0.0 && diag == 0.0 {
                continue;
            }
            for i in 0..m {
                for j in 0..m {
                    l[(c * m + i, e * m + j)] = dce * dmat2[(i, j)] + diag * dmat1[(i, j)];
                }
            }
        }
    }
    let mut jac = vec![0.0; n * n];
    let mut u = vec![0.0; n];
    for i in 0..m {
        for c in 0..n {
            u[c] = phi[c][i];
        }
        system.jac(&u, &mut jac);
        for c in 0..n {
            for e in 0..n {
                l[(c * m + i, e * m + i)] += jac[c * n + e];
            }
        }
    }
    l
}

fn flatten(v: &[Vec<f64>]) -> DVector<f64> {
    DVector::from_iterator(v.iter().map(|c| c.len()).sum(), v.iter().flatten().copied())
}

fn unflatten(v: &[f64], n: usize) -> Vec<Vec<f64>> {
    let m = v.len() / n;
    (0..n).map(|c| v[c * m..(c + 1) * m].to_vec()).collect()
}

fn sup(v: &[Vec<f64>]) -> f64 {
    spectral::sup_norm(v)
}

/// Discrete `L²(0,1)` inner product `(1/m) Σ u·v`.
pub fn inner(u: &[Vec<f64>], v: &[Vec<f64>]) -> f64 {
    spectral::l2_inner(1.0, u, v)
}

struct NewtonOutcome {
    phi: Vec<Vec<f64>>,
    omega: f64,
    residual: f64,
    steps: usize,
}

/// Damped Newton for `(φ, ω)` with phase condition `⟨ref', φ - ref⟩ = 0`.
fn newton(
    system: &RdSystem,
    k: f64,
    guess: &[Vec<f64>],
    omega_guess: f64,
    reference: &[Vec<f64>],
) -> Result<NewtonOutcome> {
    let n = guess.len();
    let m = guess[0].len();
    let ref_d1: Vec<Vec<f64>> = reference.iter().map(|c| derivative(c, 1.0, 1)).collect();
    let phase = |phi: &[Vec<f64>]| -> f64 {
        let diff: Vec<Vec<f64>> = phi
            .iter()
            .zip(reference)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        inner(&ref_d1, &diff)
    };
    let merit = |phi: &[Vec<f64>], omega: f64| -> (Vec<Vec<f64>>, f64, f64) {
        let r = profile_residual(system, k, omega, phi);
        let p = phase(phi);
        let s = sup(&r);
        (r, p, s.max(p.abs()))
    };

    let mut phi = guess.to_vec();
    let mut omega = omega_guess;
    let (mut res, mut ph, mut norm) = merit(&phi, omega);
    let mut trace = vec![norm];
    let mut steps = 0;
    while norm >= NEWTON_TARGET {
        if steps == MAX_NEWTON || !norm.is_finite() {
            return Err(Error::NewtonDivergence {
                iterations: steps,
                trace,
            });
        }
        let d1: Vec<Vec<f64>> = phi.iter().map(|c| derivative(c, 1.0, 1)).collect();
        if sup(&d1) < 1e-8 {
            return Err(Error::Degenerate(format!(
                "Newton iterate collapsed to a constant state at k = {k}"
            )));
        }
        let size = n * m + 1;
        let mut jac = DMatrix::zeros(size, size);
        jac.view_mut((0, 0), (n * m, n * m))
            .copy_from(&linearization_matrix(system, k, omega, &phi));
        for (idx, v) in d1.iter().flatten().enumerate() {
            jac[(idx, n * m)] = *v;
        }
        for (idx, v) in ref_d1.iter().flatten().enumerate() {
            jac[(n * m, idx)] = *v / m as f64;
        }
        let mut rhs = DVector::zeros(size);
        for (idx, v) in res.iter().flatten().enumerate() {
            rhs[idx] = -v;
        }
        rhs[n * m] = -ph;
        let delta = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("profile Newton matrix".into()))?;
        let dphi = unflatten(&delta.as_slice()[..n * m], n);
        let domega = delta[n * m];

        // Backtrack until the residual decreases.
        let mut lambda = 1.0;
        loop {
            let trial: Vec<Vec<f64>> = phi
                .iter()
                .zip(&dphi)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + lambda * y).collect())
                .collect();
            let t_omega = omega + lambda * domega;
            let (r, p, s) = merit(&trial, t_omega);
            if s < norm || lambda < 1.0 / 64.0 || s < NEWTON_TARGET {
                phi = trial;
                omega = t_omega;
                res = r;
                ph = p;
                norm = s;
                break;
            }
            lambda *= 0.5;
        }
        steps += 1;
        trace.push(norm);
    }
    let d1: Vec<Vec<f64>> = phi.iter().map(|c| derivative(c, 1.0, 1)).collect();
    if sup(&d1) < 1e-8 {
        return Err(Error::Degenerate(format!(
            "profile equation converged to a constant state at k = {k}"
        )));
    }
    Ok(NewtonOutcome {
        phi,
        omega,
        residual: sup(&res),
        steps,
    })
}

fn check_resolution(phi: &[Vec<f64>]) -> Result<()> {
    for c in phi {
        let tail = spectral::spectral_tail(c, 0.75);
        if tail > 1e-12 {
            return Err(Error::Resolution(format!(
                "profile Fourier tail {tail:.2e} exceeds 1e-12; increase the profile resolution"
            )));
        }
    }
    Ok(())
}

/// Solve for the wave train with wavenumber `k` starting from `guess`.
pub fn solve_profile(system: &RdSystem, k: f64, guess: &[Vec<f64>], omega_guess: f64) -> Result<WaveTrain> {
    validate_guess(system, guess)?;
    let out = newton(system, k, guess, omega_guess, guess)?;
    check_resolution(&out.phi)?;
    Ok(WaveTrain {
        k,
        omega: out.omega,
        profile: out.phi,
        residual_norm: out.residual,
        newton_steps: out.steps,
    })
}

fn validate_guess(system: &RdSystem, guess: &[Vec<f64>]) -> Result<()> {
    if guess.len() != system.n() {
        return Err(Error::Validation(format!(
            "guess has {} components, system has {}",
            guess.len(),
            system.n()
        )));
    }
    let m = guess[0].len();
    if m < MIN_POINTS || !m.is_power_of_two() || guess.iter().any(|c| c.len() != m) {
        return Err(Error::Validation(format!(
            "profile grid must be a power of two >= {MIN_POINTS}, got {m}"
        )));
    }
    if guess.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Validation("guess contains non-finite values".into()));
    }
    Ok(())
}

/// Adjoint zero mode `Φ̃₀` of `L₀`, normalised so that `⟨Φ̃₀, φ₀'⟩ = 1`.
pub fn adjoint_zero(system: &RdSystem, wt: &WaveTrain) -> Result<Vec<Vec<f64>>> {
    let n = wt.n();
    let m = wt.m();
    let l0 = linearization_matrix(system, wt.k, wt.omega, &wt.profile);
    let d1 = flatten(&wt.derivative(1));
    let size = n * m + 1;
    let mut b = DMatrix::zeros(size, size);
    b.view_mut((0, 0), (n * m, n * m)).copy_from(&l0.transpose());
    for i in 0..n * m {
        b[(i, n * m)] = d1[i];
        b[(n * m, i)] = d1[i];
    }
    let mut rhs = DVector::zeros(size);
    rhs[n * m] = 1.0;
    let sol = b
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("adjoint bordered system".into()))?;
    let x: Vec<f64> = sol.as_slice()[..n * m].iter().map(|v| v * m as f64).collect();
    // A nonzero multiplier means φ₀' is not orthogonal to ker L₀ᵀ.
    let resid = (&l0.transpose() * DVector::from_column_slice(&x)).amax();
    if !resid.is_finite() || resid > 1e-6 * x.iter().fold(0.0f64, |a, v| a.max(v.abs())) {
        return Err(Error::Singular(format!("adjoint residual {resid:.2e}")));
    }
    Ok(unflatten(&x, n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyDerivatives {
    pub dk_profile: Vec<Vec<f64>>,
    pub dzk_profile: Vec<Vec<f64>>,
    pub dzzk_profile: Vec<Vec<f64>>,
    pub dkk_profile: Vec<Vec<f64>>,
    pub omega_p: f64,
    pub omega_pp: f64,
    /// Sup-norm residuals of the first and second differentiated equations.
    pub residuals: [f64; 2],
}

fn bordered_solve(
    l0: &DMatrix<f64>,
    column: &DVector<f64>,
    row: &DVector<f64>,
    rhs: &DVector<f64>,
) -> Result<(DVector<f64>, f64)> {
    let nm = l0.nrows();
    let mut b = DMatrix::zeros(nm + 1, nm + 1);
    b.view_mut((0, 0), (nm, nm)).copy_from(l0);
    for i in 0..nm {
        b[(i, nm)] = column[i];
        b[(nm, i)] = row[i];
    }
    let mut r = DVector::zeros(nm + 1);
    r.rows_mut(0, nm).copy_from(rhs);
    let lu = b.lu();
    let sol = lu
        .solve(&r)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular("bordered k-derivative system".into()))?;
    Ok((sol.rows(0, nm).into_owned(), sol[nm]))
}

fn apply_diffusion(system: &RdSystem, v: &[Vec<f64>], scale: f64) -> Vec<Vec<f64>> {
    let dm = system.diffusion();
    let n = v.len();
    let m = v[0].len();
    (0..n)
        .map(|c| {
            (0..m)
                .map(|i| scale * (0..n).map(|e| dm[(c, e)] * v[e][i]).sum::<f64>())
                .collect()
        })
        .collect()
}

/// k-derivatives of the family at the base wave train, gauged by
/// `⟨Φ̃₀, ∂_kφ⟩ = 0`.
pub fn family_derivatives(system: &RdSystem, base: &WaveTrain, adjoint: &[Vec<f64>]) -> Result<FamilyDerivatives> {
    let n = base.n();
    let m = base.m();
    let k0 = base.k;
    let l0 = linearization_matrix(system, k0, base.omega, &base.profile);
    let d1 = base.derivative(1);
    let d2 = base.derivative(2);
    let col = flatten(&d1);
    let row = flatten(adjoint) / m as f64;

    // L₀φ_k + ω'φ₀' = -2k₀Dφ₀''
    let rhs1 = flatten(&apply_diffusion(system, &d2, -2.0 * k0));
    let (phik, omega_p) = bordered_solve(&l0, &col, &row, &rhs1)?;
    let res1 = (&l0 * &phik + &col * omega_p - &rhs1).amax();
    let dk = unflatten(phik.as_slice(), n);
    let dzk: Vec<Vec<f64>> = dk.iter().map(|c| derivative(c, 1.0, 1)).collect();
    let dzzk: Vec<Vec<f64>> = dk.iter().map(|c| derivative(c, 1.0, 2)).collect();

    // L₀φ_kk + ω''φ₀' = -[f''(φ_k,φ_k) + 2Dφ₀'' + 4k₀Dφ_k'' + 2ω'φ_k']
    let mut rhs2 = vec![vec![0.0; m]; n];
    let mut u = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut h = vec![0.0; n];
    for i in 0..m {
        for c in 0..n {
            u[c] = base.profile[c][i];
            p[c] = dk[c][i];
        }
        system.hess(&u, &p, &p, &mut h);
        for c in 0..n {
            rhs2[c][i] = -h[c] - 2.0 * omega_p * dzk[c][i];
        }
    }
    let dd2 = apply_diffusion(system, &d2, -2.0);
    let dzz = apply_diffusion(system, &dzzk, -4.0 * k0);
    for c in 0..n {
        for i in 0..m {
            rhs2[c][i] += dd2[c][i] + dzz[c][i];
        }
    }
    let rhs2 = flatten(&rhs2);
    let (phikk, omega_pp) = bordered_solve(&l0, &col, &row, &rhs2)?;
    let res2 = (&l0 * &phikk + &col * omega_pp - &rhs2).amax();
    if res1 > 1e-9 || res2 > 1e-9 {
        return Err(Error::Singular(format!(
            "differentiated profile equations not solved (residuals {res1:.2e}, {res2:.2e})"
        )));
    }
    Ok(FamilyDerivatives {
        dk_profile: dk,
        dzk_profile: dzk,
        dzzk_profile: dzzk,
        dkk_profile: unflatten(phikk.as_slice(), n),
        omega_p,
        omega_pp,
        residuals: [res1, res2],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationFailure {
    pub last_good_k: f64,
    pub message: String,
}

/// Wave-train family tabulated on a uniform k-grid around `k₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveTrainFamily {
    pub base: WaveTrain,
    /// Half-width of the tabulated k-interval actually reached.
    pub r0: f64,
    pub dk: f64,
    /// Ascending k values; the base sits at `base_index`.
    pub k_table: Vec<f64>,
    pub omega_table: Vec<f64>,
    pub residuals: Vec<f64>,
    pub profiles: Vec<Vec<Vec<f64>>>,
    pub base_index: usize,
    pub adjoint_zero: Vec<Vec<f64>>,
    pub derivatives: Option<FamilyDerivatives>,
    pub failure: Option<ContinuationFailure>,
}

/// Shift `s` with `⟨Φ̃₀, φ(·+s) - φ₀⟩ = 0`, nearest to zero.
fn regauge(phi: &[Vec<f64>], base: &[Vec<f64>], adjoint: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let series: Vec<FourierSeries> = phi.iter().map(|c| FourierSeries::from_samples(c, 1.0)).collect();
    let m = phi[0].len();
    let mut s = 0.0;
    for _ in 0..30 {
        let mut g = 0.0;
        let mut dg = 0.0;
        for (c, ser) in series.iter().enumerate() {
            for i in 0..m {
                let (v, d, _) = ser.eval_with_derivatives(i as f64 / m as f64 + s);
                g += adjoint[c][i] * (v - base[c][i]);
                dg += adjoint[c][i] * d;
            }
        }
        g /= m as f64;
        dg /= m as f64;
        if dg.abs() < 1e-12 {
            return Err(Error::Singular("gauge condition degenerate along family".into()));
        }
        let step = g / dg;
        s -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    Ok(phi.iter().map(|c| shift(c, s, 1.0)).collect())
}

/// Secant continuation in k on both sides of the base wave train.
pub fn continue_family(system: &RdSystem, base: &WaveTrain, dk: f64, steps: usize) -> Result<WaveTrainFamily> {
    let adjoint = adjoint_zero(system, base)?;
    let mut failure = None;
    let mut sides: [Vec<(f64, f64, f64, Vec<Vec<f64>>)>; 2] = [Vec::new(), Vec::new()];
    for (side, sign) in [(0usize, -1.0f64), (1, 1.0)] {
        let mut prev: Vec<(f64, f64, Vec<Vec<f64>>)> = vec![(base.k, base.omega, base.profile.clone())];
        for step in 1..=steps {
            let k = base.k + sign * dk * step as f64;
            let (pk, pomega, pphi) = prev.last().unwrap().clone();
            let (guess, omega_guess) = if prev.len() >= 2 {
                let (_, o2, ref p2) = prev[prev.len() - 2];
                let g: Vec<Vec<f64>> = pphi
                    .iter()
                    .zip(p2)
                    .map(|(a, b)| a.iter().zip(b).map(|(x, y)| 2.0 * x - y).collect())
                    .collect();
                (g, 2.0 * pomega - o2)
            } else {
                (pphi.clone(), pomega)
            };
            let outcome = newton(system, k, &guess, omega_guess, &pphi)
                .and_then(|o| check_resolution(&o.phi).map(|_| o))
                .and_then(|o| {
                    if o.residual >= RESIDUAL_TOL {
                        Err(Error::Numerical(format!("residual {:.2e}", o.residual)))
                    } else {
                        Ok(o)
                    }
                });
            match outcome {
                Ok(o) => {
                    let gauged = regauge(&o.phi, &base.profile, &adjoint)?;
                    sides[side].push((k, o.omega, o.residual, gauged.clone()));
                    prev.push((k, o.omega, gauged));
                }
                Err(e) => {
                    failure = Some(ContinuationFailure {
                        last_good_k: pk,
                        message: e.to_string(),
                    });
                    break;
                }
            }
        }
    }
    let reached = sides[0].len().min(sides[1].len());
    let [lower, upper] = sides;
    let mut k_table = Vec::new();
    let mut omega_table = Vec::new();
    let mut residuals = Vec::new();
    let mut profiles = Vec::new();
    for (k, o, r, p) in lower.into_iter().rev() {
        k_table.push(k);
        omega_table.push(o);
        residuals.push(r);
        profiles.push(p);
    }
    let base_index = k_table.len();
    k_table.push(base.k);
    omega_table.push(base.omega);
    residuals.push(base.residual_norm);
    profiles.push(base.profile.clone());
    for (k, o, r, p) in upper {
        k_table.push(k);
        omega_table.push(o);
        residuals.push(r);
        profiles.push(p);
    }
    Ok(WaveTrainFamily {
        base: base.clone(),
        r0: reached as f64 * dk,
        dk,
        k_table,
        omega_table,
        residuals,
        profiles,
        base_index,
        adjoint_zero: adjoint,
        derivatives: None,
        failure,
    })
}

impl WaveTrainFamily {
    /// Continue and attach the k-derivatives in one go.
    pub fn build(system: &RdSystem, base: &WaveTrain, dk: f64, steps: usize) -> Result<Self> {
        let mut fam = continue_family(system, base, dk, steps)?;
        fam.derivatives = Some(family_derivatives(system, base, &fam.adjoint_zero)?);
        Ok(fam)
    }

    pub fn derivatives(&self) -> Result<&FamilyDerivatives> {
        self.derivatives
            .as_ref()
            .ok_or_else(|| Error::Dependency("family k-derivatives have not been computed".into()))
    }

    pub fn k_range(&self) -> (f64, f64) {
        (self.k_table[0], *self.k_table.last().unwrap())
    }

    /// Divided-difference estimates of `ω'(k₀)` and `ω''(k₀)` from the table,
    /// using the widest centred stencil available (up to five points).
    pub fn table_omega_derivatives(&self) -> Option<(f64, f64)> {
        let i = self.base_index;
        let w = &self.omega_table;
        let h = self.dk;
        let avail = i.min(self.k_table.len() - 1 - i);
        match avail {
            0 => None,
            1 => Some((
                (w[i + 1] - w[i - 1]) / (2.0 * h),
                (w[i + 1] - 2.0 * w[i] + w[i - 1]) / (h * h),
            )),
            _ => Some((
                (-w[i + 2] + 8.0 * w[i + 1] - 8.0 * w[i - 1] + w[i - 2]) / (12.0 * h),
                (-w[i + 2] + 16.0 * w[i + 1] - 30.0 * w[i] + 16.0 * w[i - 1] - w[i - 2]) / (12.0 * h * h),
            )),
        }
    }

    pub fn interpolator(&self) -> FamilyInterpolator {
        FamilyInterpolator::new(self)
    }
}

/// Evaluates `φ(ζ; k)` for off-table k by Lagrange interpolation of the
/// tabulated Fourier coefficients.
#[derive(Debug, Clone)]
pub struct FamilyInterpolator {
    k_table: Vec<f64>,
    /// `coeffs[table][component]`, positive modes with Nyquist halved.
    coeffs: Vec<Vec<Vec<Complex64>>>,
    stencil: usize,
}

impl FamilyInterpolator {
    const STENCIL: usize = 6;

    pub fn new(fam: &WaveTrainFamily) -> Self {
        let coeffs = fam
            .profiles
            .iter()
            .map(|p| {
                p.iter()
                    .map(|c| FourierSeries::from_samples(c, 1.0).coefficients().to_vec())
                    .collect()
            })
            .collect();
        Self {
            k_table: fam.k_table.clone(),
            coeffs,
            stencil: Self::STENCIL.min(fam.k_table.len()),
        }
    }

    pub fn range(&self) -> (f64, f64) {
        (self.k_table[0], *self.k_table.last().unwrap())
    }

    pub fn contains(&self, k: f64) -> bool {
        let (lo, hi) = self.range();
        let slack = 1e-12 * hi.abs().max(1.0);
        k >= lo - slack && k <= hi + slack
    }

    /// Stencil start index and Lagrange weights for `k`.
    fn weights(&self, k: f64) -> (usize, Vec<f64>) {
        let len = self.k_table.len();
        let p = self.stencil;
        let pos = self.k_table.partition_point(|&x| x < k);
        let start = pos.saturating_sub(p / 2).min(len - p);
        let nodes = &self.k_table[start..start + p];
        let w = (0..p)
            .map(|j| {
                (0..p)
                    .filter(|&l| l != j)
                    .map(|l| (k - nodes[l]) / (nodes[j] - nodes[l]))
                    .product()
            })
            .collect();
        (start, w)
    }

    /// Series of `φ(·; k)` per component.
    pub fn series_at(&self, k: f64) -> Vec<FourierSeries> {
        let (start, w) = self.weights(k);
        let n = self.coeffs[0].len();
        (0..n)
            .map(|c| {
                let len = self.coeffs[0][c].len();
                let mut acc = vec![Complex64::new(0.0, 0.0); len];
                for (j, wj) in w.iter().enumerate() {
                    for (a, b) in acc.iter_mut().zip(&self.coeffs[start + j][c]) {
                        *a += b * *wj;
                    }
                }
                FourierSeries::from_coefficients(acc, 1.0)
            })
            .collect()
    }

    /// `φ(x; k)` for all components.
    pub fn eval(&self, k: f64, x: f64, out: &mut [f64]) {
        let (start, w) = self.weights(k);
        for (c, o) in out.iter_mut().enumerate() {
            let len = self.coeffs[0][c].len();
            let step = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * x);
            let mut phase = Complex64::new(1.0, 0.0);
            let mut v = 0.0;
            for mode in 0..len {
                let mut cm = Complex64::new(0.0, 0.0);
                for (j, wj) in w.iter().enumerate() {
                    cm += self.coeffs[start + j][c][mode] * *wj;
                }
                let term = cm * phase;
                v += if mode == 0 { term.re } else { 2.0 * term.re };
                phase *= step;
            }
            *o = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_system, rgl};
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn rgl_system(beta: f64) -> RdSystem {
        let p: BTreeMap<String, f64> = [("beta".to_string(), beta)].into();
        build_system("rgl", &p).unwrap()
    }

    fn rgl_guess(m: usize, r: f64) -> Vec<Vec<f64>> {
        let z: Vec<f64> = (0..m).map(|i| i as f64 / m as f64).collect();
        vec![
            z.iter().map(|z| r * (2.0 * PI * z).cos()).collect(),
            z.iter().map(|z| r * (2.0 * PI * z).sin()).collect(),
        ]
    }

    #[test]
    fn rgl_profile_matches_rotating_wave() {
        let beta = 1.0;
        let k = rgl::k_of_q2(0.2);
        let sys = rgl_system(beta);
        let r = rgl::amplitude(k).unwrap();
        // Perturbed guess so Newton actually iterates.
        let guess = rgl_guess(32, 0.9 * r);
        let wt = solve_profile(&sys, k, &guess, 0.9 * rgl::omega(beta, k)).unwrap();
        assert!(wt.residual_norm < RESIDUAL_TOL);
        assert!((wt.omega - rgl::omega(beta, k)).abs() < 1e-10);
        let amp = (wt.profile[0][0].powi(2) + wt.profile[1][0].powi(2)).sqrt();
        assert!((amp - r).abs() < 1e-10);
    }

    #[test]
    fn exact_guess_takes_no_steps() {
        let beta = 0.5;
        let k = rgl::k_of_q2(0.1);
        let sys = rgl_system(beta);
        let guess = rgl_guess(32, rgl::amplitude(k).unwrap());
        let wt = solve_profile(&sys, k, &guess, rgl::omega(beta, k)).unwrap();
        assert_eq!(wt.newton_steps, 0);
        assert_eq!(wt.profile, guess);
    }

    #[test]
    fn no_wave_beyond_unit_wavenumber() {
        let sys = rgl_system(1.0);
        let k = rgl::k_of_q2(1.2);
        let guess = rgl_guess(32, 0.05);
        let err = solve_profile(&sys, k, &guess, 0.0).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)), "{err}");
    }

    #[test]
    fn adjoint_and_derivatives_for_rgl() {
        let beta = 0.5;
        let k = rgl::k_of_q2(0.1);
        let sys = rgl_system(beta);
        let guess = rgl_guess(32, rgl::amplitude(k).unwrap());
        let wt = solve_profile(&sys, k, &guess, rgl::omega(beta, k)).unwrap();
        let adj = adjoint_zero(&sys, &wt).unwrap();
        assert!((inner(&adj, &wt.derivative(1)) - 1.0).abs() < 1e-10);
        let der = family_derivatives(&sys, &wt, &adj).unwrap();
        assert!(inner(&adj, &der.dk_profile).abs() < 1e-10);
        assert!((der.omega_p - rgl::omega_p(beta, k)).abs() < 1e-8);
        assert!((der.omega_pp / rgl::omega_pp(beta) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn continuation_table_and_interpolation() {
        let beta = 0.5;
        let k = rgl::k_of_q2(0.1);
        let sys = rgl_system(beta);
        let guess = rgl_guess(32, rgl::amplitude(k).unwrap());
        let wt = solve_profile(&sys, k, &guess, rgl::omega(beta, k)).unwrap();
        let fam = WaveTrainFamily::build(&sys, &wt, k / 100.0, 6).unwrap();
        assert!(fam.failure.is_none());
        assert_eq!(fam.k_table.len(), 13);
        for (kk, w) in fam.k_table.iter().zip(&fam.omega_table) {
            assert!((w / rgl::omega(beta, *kk) - 1.0).abs() < 1e-8);
        }
        // Every tabulated profile satisfies the gauge.
        for p in &fam.profiles {
            let diff: Vec<Vec<f64>> = p
                .iter()
                .zip(&wt.profile)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect();
            assert!(inner(&fam.adjoint_zero, &diff).abs() < 1e-12);
        }
        let interp = fam.interpolator();
        let kq = k * 1.0234;
        let mut out = [0.0; 2];
        interp.eval(kq, 0.3, &mut out);
        let r = rgl::amplitude(kq).unwrap();
        assert!(((out[0].powi(2) + out[1].powi(2)).sqrt() - r).abs() < 1e-9);
        let steps0 = continue_family(&sys, &wt, k / 100.0, 0).unwrap();
        assert_eq!(steps0.k_table, vec![k]);
        assert_eq!(steps0.omega_table, vec![wt.omega]);
    }
}
