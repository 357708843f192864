//! Reaction–diffusion systems `u_t = D u_xx + f(u)` with analytic first and
//! second derivatives of the kinetics.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Built-in kinetics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kinetics {
    /// Real form of `A_t = A + A_xx - (1 + iβ)|A|²A` with `A = u₁ + iu₂`.
    Rgl { beta: f64 },
    /// `f = (A - (B+1)u + u²v, Bu - u²v)`.
    Brusselator { a: f64, b: f64 },
}

/// JSON form of a system: `{"name": "...", "params": {...}, "D": [[..]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdSystem {
    name: String,
    params: BTreeMap<String, f64>,
    diffusion: DMatrix<f64>,
    kinetics: Kinetics,
}

fn param(params: &BTreeMap<String, f64>, key: &str, model: &str) -> Result<f64> {
    let v = *params
        .get(key)
        .ok_or_else(|| Error::Config(format!("model {model} requires parameter '{key}'")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("parameter '{key}' must be finite")));
    }
    Ok(v)
}

fn check_known(params: &BTreeMap<String, f64>, known: &[&str], model: &str) -> Result<()> {
    match params.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(Error::Config(format!("unknown parameter '{k}' for model {model}"))),
        None => Ok(()),
    }
}

pub fn build_system(name: &str, params: &BTreeMap<String, f64>) -> Result<RdSystem> {
    let (kinetics, diffusion) = match name {
        "rgl" => {
            check_known(params, &["beta"], name)?;
            let beta = param(params, "beta", name)?;
            (Kinetics::Rgl { beta }, DMatrix::identity(2, 2))
        }
        "brusselator" => {
            check_known(params, &["A", "B", "d1", "d2"], name)?;
            let a = param(params, "A", name)?;
            let b = param(params, "B", name)?;
            let d1 = param(params, "d1", name)?;
            let d2 = param(params, "d2", name)?;
            (
                Kinetics::Brusselator { a, b },
                DMatrix::from_row_slice(2, 2, &[d1, 0.0, 0.0, d2]),
            )
        }
        other => return Err(Error::Config(format!("unknown model '{other}'"))),
    };
    RdSystem::new(name, params.clone(), diffusion, kinetics)
}

pub fn build_from_spec(spec: &SystemSpec) -> Result<RdSystem> {
    let sys = build_system(&spec.name, &spec.params)?;
    match &spec.diffusion {
        None => Ok(sys),
        Some(rows) => {
            let n = sys.n();
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Config(format!("D must be {n}x{n}")));
            }
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            let d = DMatrix::from_row_slice(n, n, &flat);
            RdSystem::new(&spec.name, spec.params.clone(), d, sys.kinetics)
        }
    }
}

impl RdSystem {
    pub fn new(name: &str, params: BTreeMap<String, f64>, diffusion: DMatrix<f64>, kinetics: Kinetics) -> Result<Self> {
        check_spd(&diffusion)?;
        let sys = Self {
            name: name.to_string(),
            params,
            diffusion,
            kinetics,
        };
        sys.validate_derivatives(20, 0x5eed)?;
        Ok(sys)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn kinetics(&self) -> Kinetics {
        self.kinetics
    }

    pub fn n(&self) -> usize {
        2
    }

    pub fn diffusion(&self) -> &DMatrix<f64> {
        &self.diffusion
    }

    pub fn spec(&self) -> SystemSpec {
        let n = self.n();
        SystemSpec {
            name: self.name.clone(),
            params: self.params.clone(),
            diffusion: Some(
                (0..n)
                    .map(|i| (0..n).map(|j| self.diffusion[(i, j)]).collect())
                    .collect(),
            ),
        }
    }

    /// Box in which derivative checks sample random points.
    pub fn validation_box(&self) -> (f64, f64) {
        match self.kinetics {
            Kinetics::Rgl { .. } => (-1.5, 1.5),
            Kinetics::Brusselator { .. } => (0.0, 4.0),
        }
    }

    pub fn f(&self, u: &[f64], out: &mut [f64]) {
        match self.kinetics {
            Kinetics::Rgl { beta } => {
                let s = u[0] * u[0] + u[1] * u[1];
                out[0] = (1.0 - s) * u[0] + beta * s * u[1];
                out[1] = (1.0 - s) * u[1] - beta * s * u[0];
            }
            Kinetics::Brusselator { a, b } => {
                let uuv = u[0] * u[0] * u[1];
                out[0] = a - (b + 1.0) * u[0] + uuv;
                out[1] = b * u[0] - uuv;
            }
        }
    }

    /// Jacobian, row-major `n × n`.
    pub fn jac(&self, u: &[f64], out: &mut [f64]) {
        match self.kinetics {
            Kinetics::Rgl { beta } => {
                let (x, y) = (u[0], u[1]);
                let s = x * x + y * y;
                out[0] = 1.0 - s - 2.0 * x * x + 2.0 * beta * x * y;
                out[1] = -2.0 * x * y + beta * (s + 2.0 * y * y);
                out[2] = -2.0 * x * y - beta * (s + 2.0 * x * x);
                out[3] = 1.0 - s - 2.0 * y * y - 2.0 * beta * x * y;
            }
            Kinetics::Brusselator { b, .. } => {
                let (x, y) = (u[0], u[1]);
                out[0] = -(b + 1.0) + 2.0 * x * y;
                out[1] = x * x;
                out[2] = b - 2.0 * x * y;
                out[3] = -x * x;
            }
        }
    }

    /// Second derivative `f''(u)(p, q)`.
    pub fn hess(&self, u: &[f64], p: &[f64], q: &[f64], out: &mut [f64]) {
        match self.kinetics {
            Kinetics::Rgl { beta } => {
                let pq = p[0] * q[0] + p[1] * q[1];
                let uq = u[0] * q[0] + u[1] * q[1];
                let up = u[0] * p[0] + u[1] * p[1];
                // J v = (v₂, -v₁)
                for c in 0..2 {
                    let (jc_u, jc_p, jc_q) = if c == 0 {
                        (u[1], p[1], q[1])
                    } else {
                        (-u[0], -p[0], -q[0])
                    };
                    out[c] =
                        -2.0 * (pq * u[c] + uq * p[c] + up * q[c]) + 2.0 * beta * (pq * jc_u + uq * jc_p + up * jc_q);
                }
            }
            Kinetics::Brusselator { .. } => {
                let h = 2.0 * u[1] * p[0] * q[0] + 2.0 * u[0] * (p[0] * q[1] + p[1] * q[0]);
                out[0] = h;
                out[1] = -h;
            }
        }
    }

    /// Central finite-difference check of `jac` against `f` and of `hess`
    /// against `jac` at random points of the validation box.
    pub fn validate_derivatives(&self, samples: usize, seed: u64) -> Result<()> {
        let n = self.n();
        let (lo, hi) = self.validation_box();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 1e-5;
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        let mut jac = vec![0.0; n * n];
        let mut jp = vec![0.0; n * n];
        let mut jm = vec![0.0; n * n];
        let mut hv = vec![0.0; n];
        for _ in 0..samples {
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
            self.jac(&u, &mut jac);
            for j in 0..n {
                let mut up = u.clone();
                let mut um = u.clone();
                up[j] += h;
                um[j] -= h;
                self.f(&up, &mut fp);
                self.f(&um, &mut fm);
                self.jac(&up, &mut jp);
                self.jac(&um, &mut jm);
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                for i in 0..n {
                    let fd = (fp[i] - fm[i]) / (2.0 * h);
                    let exact = jac[i * n + j];
                    if (fd - exact).abs() > 1e-6 * exact.abs().max(1.0) {
                        return Err(Error::Validation(format!(
                            "jacobian entry ({i},{j}) of {} fails finite-difference check at {u:?}",
                            self.name
                        )));
                    }
                }
                // Column j of the Hessian applied to e_j and each e_l.
                for l in 0..n {
                    let mut el = vec![0.0; n];
                    el[l] = 1.0;
                    self.hess(&u, &e, &el, &mut hv);
                    for i in 0..n {
                        let fd = (jp[i * n + l] - jm[i * n + l]) / (2.0 * h);
                        if (fd - hv[i]).abs() > 1e-6 * hv[i].abs().max(1.0) {
                            return Err(Error::Validation(format!(
                                "hessian entry ({i},{j},{l}) of {} fails finite-difference check",
                                self.name
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_spd(d: &DMatrix<f64>) -> Result<()> {
    if !d.is_square() || d.nrows() == 0 {
        return Err(Error::Validation("diffusion matrix must be square".into()));
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("diffusion matrix must be finite".into()));
    }
    if (d - d.transpose()).amax() > 1e-14 * d.amax().max(1.0) {
        return Err(Error::Validation("diffusion matrix must be symmetric".into()));
    }
    let min = SymmetricEigen::new(d.clone()).eigenvalues.min();
    if min <= 0.0 {
        return Err(Error::Validation(format!(
            "diffusion matrix must be positive definite (smallest eigenvalue {min})"
        )));
    }
    Ok(())
}

/// Closed forms for the rgl wave trains `A = r e^{2πi(kx - ωt)}`.
pub mod rgl {
    use super::PI;

    /// `q = 2πk`.
    pub fn q(k: f64) -> f64 {
        2.0 * PI * k
    }

    pub fn amplitude(k: f64) -> Option<f64> {
        let r2 = 1.0 - q(k).powi(2);
        (r2 > 0.0).then(|| r2.sqrt())
    }

    pub fn omega(beta: f64, k: f64) -> f64 {
        beta * (1.0 - q(k).powi(2)) / (2.0 * PI)
    }

    pub fn omega_p(beta: f64, k: f64) -> f64 {
        -4.0 * PI * beta * k
    }

    pub fn omega_pp(beta: f64) -> f64 {
        -4.0 * PI * beta
    }

    pub fn a(beta: f64, k: f64) -> f64 {
        omega(beta, k) - k * omega_p(beta, k)
    }

    pub fn nu(beta: f64, k: f64) -> f64 {
        -0.5 * k * k * omega_pp(beta)
    }

    /// Effective diffusion in ζ units.
    pub fn d(beta: f64, k: f64) -> f64 {
        let q2 = q(k).powi(2);
        k * k * (1.0 - 2.0 * q2 * (1.0 + beta * beta) / (1.0 - q2))
    }

    /// `q²` at which sideband stability is lost.
    pub fn eckhaus_q2(beta: f64) -> f64 {
        1.0 / (3.0 + 2.0 * beta * beta)
    }

    /// Wavenumber with the given `q²`.
    pub fn k_of_q2(q2: f64) -> f64 {
        q2.sqrt() / (2.0 * PI)
    }
}
