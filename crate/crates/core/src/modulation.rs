//! Predicted phase dynamics: the viscous Hamilton–Jacobi equation
//! `γ_t = dγ_ζζ + aγ_ζ + νγ_ζ²` solved exactly through `y = e^{(ν/d)γ}`, its
//! Burgers form for `k = γ_ζ`, and the self-similar front.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::integrate_scalar;
use crate::spectral::{derivative, fourier_coefficients, from_fourier_coefficients, mean, signed_index, PeriodicGrid};
use crate::whitham::WhithamCoefficients;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseField {
    pub grid: PeriodicGrid,
    pub gamma: Vec<f64>,
    pub time: f64,
}

impl PhaseField {
    pub fn new(grid: PeriodicGrid, gamma: Vec<f64>, time: f64) -> Result<Self> {
        if gamma.len() != grid.m() {
            return Err(Error::Validation("phase field length does not match grid".into()));
        }
        if gamma.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("phase field is not finite".into()));
        }
        Ok(Self { grid, gamma, time })
    }

    pub fn derivative(&self) -> Vec<f64> {
        derivative(&self.gamma, self.grid.length_f64(), 1)
    }
}

/// The three numbers the phase equation needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HjCoefficients {
    pub a: f64,
    pub d: f64,
    pub nu: f64,
}

impl From<&WhithamCoefficients> for HjCoefficients {
    fn from(c: &WhithamCoefficients) -> Self {
        Self {
            a: c.a,
            d: c.d,
            nu: c.nu,
        }
    }
}

impl HjCoefficients {
    fn validate(&self) -> Result<()> {
        if !(self.d > 0.0) || !self.a.is_finite() || !self.nu.is_finite() {
            return Err(Error::Config(format!("invalid phase coefficients {self:?}")));
        }
        Ok(())
    }
}

/// `e^{(d∂² + a∂)t} v` by exact Fourier multipliers on `[0, length)`.
pub fn heat_apply(values: &[f64], length: f64, t: f64, d: f64, a: f64) -> Vec<f64> {
    if t == 0.0 {
        return values.to_vec();
    }
    let m = values.len();
    let mut coeffs = fourier_coefficients(values);
    for (j, c) in coeffs.iter_mut().enumerate() {
        let kappa = 2.0 * std::f64::consts::PI * signed_index(j, m) as f64 / length;
        let decay = (-d * kappa * kappa * t).exp();
        if m.is_multiple_of(2) && j == m / 2 {
            // The Nyquist cosine can only be damped and dephased, not shifted.
            *c *= decay * (a * kappa * t).cos();
        } else {
            *c *= Complex64::from_polar(decay, a * kappa * t);
        }
    }
    from_fourier_coefficients(&coeffs)
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::Usage("output times must be nonnegative".into()));
    }
    Ok(())
}

/// Exact solution of the phase equation at each output time, each computed
/// directly from `t = 0`.
pub fn hj_solve(gamma0: &PhaseField, coeffs: HjCoefficients, output_times: &[f64]) -> Result<Vec<PhaseField>> {
    coeffs.validate()?;
    check_times(output_times)?;
    let l = gamma0.grid.length_f64();
    let HjCoefficients { a, d, nu } = coeffs;
    let base = gamma0.time;
    if nu == 0.0 {
        return output_times
            .iter()
            .map(|&t| PhaseField::new(gamma0.grid, heat_apply(&gamma0.gamma, l, t, d, a), base + t))
            .collect();
    }
    // Recentre before exponentiating; the constant passes through exactly.
    let c = mean(&gamma0.gamma);
    let centred: Vec<f64> = gamma0.gamma.iter().map(|g| g - c).collect();
    let m_bound = centred.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let y0: Vec<f64> = centred.iter().map(|g| (nu / d * g).exp()).collect();
    let lo = (-(nu.abs()) * m_bound / d).exp();
    let hi = (nu.abs() * m_bound / d).exp();
    output_times
        .iter()
        .map(|&t| {
            let y = heat_apply(&y0, l, t, d, a);
            let slack = 1e-10 * hi;
            if let Some(bad) = y.iter().find(|v| !(**v > 0.0) || **v < lo - slack || **v > hi + slack) {
                return Err(Error::Numerical(format!(
                    "Cole-Hopf variable {bad:.3e} left [{lo:.3e}, {hi:.3e}] at t = {t}; refine the grid"
                )));
            }
            let gamma = y.iter().map(|v| c + d / nu * v.ln()).collect();
            PhaseField::new(gamma0.grid, gamma, base + t)
        })
        .collect()
}

/// Direct exponential-integrator solution of the phase equation, used as an
/// independent check of [`hj_solve`].
pub fn hj_direct(
    gamma0: &PhaseField,
    coeffs: HjCoefficients,
    t_final: f64,
    dt: f64,
    output_times: &[f64],
) -> Result<Vec<PhaseField>> {
    coeffs.validate()?;
    let nu = coeffs.nu;
    integrate_scalar(
        &gamma0.grid,
        &gamma0.gamma,
        coeffs.d,
        coeffs.a,
        move |_, gz| nu * gz * gz,
        t_final,
        dt,
        output_times,
    )?
    .into_iter()
    .map(|(t, g)| PhaseField::new(gamma0.grid, g, gamma0.time + t))
    .collect()
}

/// Wavenumber field `k̆ = γ̆_ζ` from the exact phase solution.
pub fn burgers_solve(gamma0: &PhaseField, coeffs: HjCoefficients, output_times: &[f64]) -> Result<Vec<PhaseField>> {
    Ok(hj_solve(gamma0, coeffs, output_times)?
        .into_iter()
        .map(|p| PhaseField {
            gamma: p.derivative(),
            ..p
        })
        .collect())
}

/// Direct integration of `k_t = dk_ζζ + ak_ζ + ν(k²)_ζ`.
pub fn burgers_direct(
    k0: &PhaseField,
    coeffs: HjCoefficients,
    t_final: f64,
    dt: f64,
    output_times: &[f64],
) -> Result<Vec<PhaseField>> {
    coeffs.validate()?;
    let nu = coeffs.nu;
    integrate_scalar(
        &k0.grid,
        &k0.gamma,
        coeffs.d,
        coeffs.a,
        move |k, kz| 2.0 * nu * k * kz,
        t_final,
        dt,
        output_times,
    )?
    .into_iter()
    .map(|(t, g)| PhaseField::new(k0.grid, g, k0.time + t))
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontParams {
    pub gamma_minus: f64,
    pub gamma_plus: f64,
    pub a: f64,
    pub d: f64,
    pub nu: f64,
}

impl FrontParams {
    pub fn gamma_d(&self) -> f64 {
        self.gamma_plus - self.gamma_minus
    }
}

/// `(1/√(4π)) ∫_{-∞}^{z} e^{-s²/4} ds = ½(1 + erf(z/2))` in terms of the
/// standard error function.
pub fn erf_gauss(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(0.5 * z))
}

/// Self-similar front connecting `γ₋` (as `ζ → -∞`) to `γ₊`.
///
/// Both branches use the similarity variable `(ζ + a(t+1))/√(d(t+1))`, which
/// makes each an exact solution of the phase equation.
pub fn self_similar_front(p: &FrontParams, zeta: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) || !(p.d > 0.0) {
        return Err(Error::Usage("front needs t >= 0 and d > 0".into()));
    }
    let s = t + 1.0;
    let arg = (zeta + p.a * s) / (p.d * s).sqrt();
    let e = erf_gauss(arg);
    if p.nu == 0.0 {
        return Ok(p.gamma_minus + p.gamma_d() * e);
    }
    let inner = 1.0 + ((p.nu / p.d * p.gamma_d()).exp() - 1.0) * e;
    if !(inner > 0.0) {
        return Err(Error::Numerical(format!("front log argument {inner} is not positive")));
    }
    Ok(p.gamma_minus + p.d / p.nu * inner.ln())
}
