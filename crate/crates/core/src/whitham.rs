//! Coefficients `a, d, ν` of the phase equation `γ_t = dγ_ζζ + aγ_ζ + νγ_ζ²`
//! and their independent cross-checks.
//!
//! In the co-moving frame the diffusion enters as `k₀²D`, so both inner-product
//! formulas carry a factor `k₀²`:
//! `d = k₀²⟨Φ̃₀, Dφ₀' + 2k₀D∂_ζkφ⟩` and `ν = k₀²⟨Φ̃₀, f_p⟩ = -½k₀²ω''(k₀)`.

use serde::{Deserialize, Serialize};

use crate::bloch::ExpansionFit;
use crate::error::{Error, Result};
use crate::model::RdSystem;
use crate::wavetrain::{inner, WaveTrainFamily};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhithamCoefficients {
    pub a: f64,
    pub d: f64,
    pub nu: f64,
    pub a_fit: Option<f64>,
    pub d_fit: Option<f64>,
    pub nu_fp: f64,
    #[serde(skip)]
    pub fp_profile: Vec<Vec<f64>>,
}

/// Agreement of the independent routes to the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientChecks {
    pub a_rel: Option<f64>,
    pub d_rel: Option<f64>,
    pub nu_rel: f64,
    pub d_positive: bool,
}

impl CoefficientChecks {
    pub fn passes(&self, tol: f64) -> bool {
        self.d_positive && self.a_rel.is_none_or(|e| e < tol) && self.d_rel.is_none_or(|e| e < tol) && self.nu_rel < tol
    }
}

impl WhithamCoefficients {
    /// Explicit coefficients with no cross-check data.
    pub fn explicit(a: f64, d: f64, nu: f64) -> Result<Self> {
        if !(d > 0.0) || !a.is_finite() || !nu.is_finite() {
            return Err(Error::Config(format!(
                "need finite a, nu and d > 0 (got a = {a}, d = {d}, nu = {nu})"
            )));
        }
        Ok(Self {
            a,
            d,
            nu,
            a_fit: None,
            d_fit: None,
            nu_fp: nu,
            fp_profile: Vec::new(),
        })
    }

    pub fn attach_fit(&mut self, fit: &ExpansionFit) {
        self.a_fit = Some(fit.a_fit);
        self.d_fit = Some(fit.d_fit);
    }

    pub fn checks(&self) -> CoefficientChecks {
        CoefficientChecks {
            a_rel: self.a_fit.map(|f| (self.a - f).abs() / self.a.abs().max(1.0)),
            d_rel: self.d_fit.map(|f| (self.d - f).abs() / self.d.abs()),
            nu_rel: (self.nu - self.nu_fp).abs() / self.nu.abs().max(1.0),
            d_positive: self.d > 0.0,
        }
    }
}

fn apply_d(system: &RdSystem, v: &[Vec<f64>], i: usize, c: usize) -> f64 {
    let dm = system.diffusion();
    (0..v.len()).map(|e| dm[(c, e)] * v[e][i]).sum()
}

/// `f_p = ½f''(φ₀)(∂_kφ, ∂_kφ) + ω'∂_ζkφ + D(φ₀'' + 2k₀∂_ζζkφ)` and
/// `ν_fp = k₀²⟨Φ̃₀, f_p⟩`.
pub fn compute_fp(system: &RdSystem, family: &WaveTrainFamily) -> Result<(Vec<Vec<f64>>, f64)> {
    let der = family.derivatives()?;
    let base = &family.base;
    let n = base.n();
    let m = base.m();
    let k0 = base.k;
    let d2 = base.derivative(2);
    let mut fp = vec![vec![0.0; m]; n];
    let mut u = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut h = vec![0.0; n];
    for i in 0..m {
        for c in 0..n {
            u[c] = base.profile[c][i];
            p[c] = der.dk_profile[c][i];
        }
        system.hess(&u, &p, &p, &mut h);
        for c in 0..n {
            fp[c][i] = 0.5 * h[c]
                + der.omega_p * der.dzk_profile[c][i]
                + apply_d(system, &d2, i, c)
                + 2.0 * k0 * apply_d(system, &der.dzzk_profile, i, c);
        }
    }
    let nu_fp = k0 * k0 * inner(&family.adjoint_zero, &fp);
    Ok((fp, nu_fp))
}

pub fn compute_coefficients(system: &RdSystem, family: &WaveTrainFamily) -> Result<WhithamCoefficients> {
    let base = &family.base;
    let k0 = base.k;
    if k0 == 0.0 {
        return Err(Error::Validation(
            "wavenumber k0 must be nonzero (homogeneous oscillations are excluded)".into(),
        ));
    }
    let der = family.derivatives()?;
    let a = base.omega - k0 * der.omega_p;
    let nu = -0.5 * k0 * k0 * der.omega_pp;
    let d1 = base.derivative(1);
    let n = base.n();
    let m = base.m();
    let integrand: Vec<Vec<f64>> = (0..n)
        .map(|c| {
            (0..m)
                .map(|i| apply_d(system, &d1, i, c) + 2.0 * k0 * apply_d(system, &der.dzk_profile, i, c))
                .collect()
        })
        .collect();
    let d = k0 * k0 * inner(&family.adjoint_zero, &integrand);
    let (fp_profile, nu_fp) = compute_fp(system, family)?;
    Ok(WhithamCoefficients {
        a,
        d,
        nu,
        a_fit: None,
        d_fit: None,
        nu_fp,
        fp_profile,
    })
}
