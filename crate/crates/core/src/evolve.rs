//! Modulated initial data, co-moving-frame integration of the full system and
//! the scalar toy models.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::Fft;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::etdrk4::{two_thirds_mask, Etdrk4, Workspace};
use crate::model::RdSystem;
use crate::spectral::{
    derivative, plan_forward, plan_inverse, signed_index, spectral_tail, sup_norm, sup_norm_scalar, Field, PeriodicGrid,
};
use crate::wavetrain::WaveTrain;

type C = Complex64;

/// Base shape `g₀` of a scaled phase profile `γ₀(ζ) = A g₀(δζ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseShape {
    /// `sin(πs/2)`, period 4.
    Sine,
    /// `cos(πs/2)`, period 4.
    Cosine,
}

impl BaseShape {
    fn eval(self, s: f64) -> (f64, f64) {
        let w = 0.5 * PI;
        match self {
            BaseShape::Sine => ((w * s).sin(), w * (w * s).cos()),
            BaseShape::Cosine => ((w * s).cos(), -w * (w * s).sin()),
        }
    }

    /// `sup |g₀'|`.
    pub fn derivative_sup(self) -> f64 {
        0.5 * PI
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gamma0Spec {
    Zero,
    Constant {
        c: f64,
    },
    ScaledProfile {
        shape: BaseShape,
        amplitude: f64,
        delta: f64,
    },
    /// Gaussian bump `A e^{-(ζ-ζc)²/(2w²)}`.
    Bump {
        amplitude: f64,
        width: f64,
        center: f64,
    },
    /// Gaussian-windowed oscillation; `γ₀` and `γ₀'` are both mean-free.
    MeanZeroWavepacket {
        amplitude: f64,
        width: f64,
        center: f64,
        cycles: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VRingSpec {
    Zero,
    /// Gaussian random field with sup-norm `amplitude` (or sized to hit the
    /// target `E₀`) and Gaussian spectrum of the given correlation length.
    RandomSmooth {
        #[serde(default)]
        amplitude: Option<f64>,
        correlation_length: f64,
    },
    Mode {
        amplitude: f64,
        mode: i64,
        component: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDataSpec {
    pub gamma0: Gamma0Spec,
    pub vring0: VRingSpec,
    /// Target `E₀ = ‖v̊₀‖∞ + ‖γ₀'‖∞`, used to size a random perturbation.
    #[serde(default)]
    pub target_e0: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub u0: Field,
    pub gamma0: Vec<f64>,
    pub vring0: Vec<Vec<f64>>,
    pub gamma0_prime_sup: f64,
    pub vring_sup: f64,
    pub e0: f64,
    pub m_bound: f64,
}

fn wrap_distance(z: f64, center: f64, length: f64) -> f64 {
    (z - center + 0.5 * length).rem_euclid(length) - 0.5 * length
}

pub fn sample_gamma0(spec: &Gamma0Spec, grid: &PeriodicGrid) -> Vec<f64> {
    let l = grid.length_f64();
    grid.points()
        .iter()
        .map(|&z| match *spec {
            Gamma0Spec::Zero => 0.0,
            Gamma0Spec::Constant { c } => c,
            Gamma0Spec::ScaledProfile {
                shape,
                amplitude,
                delta,
            } => amplitude * shape.eval(delta * z).0,
            Gamma0Spec::Bump {
                amplitude,
                width,
                center,
            } => {
                let s = wrap_distance(z, center, l);
                amplitude * (-s * s / (2.0 * width * width)).exp()
            }
            Gamma0Spec::MeanZeroWavepacket {
                amplitude,
                width,
                center,
                cycles,
            } => {
                let s = wrap_distance(z, center, l);
                amplitude * (-s * s / (2.0 * width * width)).exp() * (2.0 * PI * cycles * s / width).sin()
            }
        })
        .collect()
}

fn random_smooth(grid: &PeriodicGrid, n: usize, corr: f64, seed: u64) -> Vec<Vec<f64>> {
    let m = grid.m();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inv = plan_inverse(m);
    (0..n)
        .map(|_| {
            let mut buf = vec![C::new(0.0, 0.0); m];
            for j in 1..m / 2 {
                let kappa = grid.wavenumber(j as i64);
                let amp = (-(kappa * corr).powi(2) / 4.0).exp();
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                let c = C::new(re, im) * amp;
                buf[j] = c;
                buf[m - j] = c.conj();
            }
            inv.process(&mut buf);
            buf.iter().map(|c| c.re).collect()
        })
        .collect()
}

/// Sample `φ₀(ζ + γ₀(ζ))` on the grid.
pub fn modulated_wave(wt: &WaveTrain, grid: &PeriodicGrid, gamma: &[f64]) -> Vec<Vec<f64>> {
    let series = wt.series();
    let pts = grid.points();
    series
        .iter()
        .map(|s| pts.iter().zip(gamma).map(|(z, g)| s.eval(z + g)).collect())
        .collect()
}

/// `φ₀` tiled over the grid.
pub fn tiled_profile(wt: &WaveTrain, grid: &PeriodicGrid) -> Vec<Vec<f64>> {
    modulated_wave(wt, grid, &vec![0.0; grid.m()])
}

pub fn make_initial_data(wt: &WaveTrain, spec: &InitialDataSpec, grid: &PeriodicGrid) -> Result<InitialData> {
    let n = wt.n();
    let m = grid.m();
    let l = grid.length_f64();
    let gamma0 = sample_gamma0(&spec.gamma0, grid);
    if gamma0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("gamma0 is not finite".into()));
    }
    let tail = spectral_tail(&gamma0, 0.5);
    if tail > 1e-8 {
        return Err(Error::Resolution(format!(
            "gamma0 Fourier tail {tail:.2e} exceeds 1e-8 (not smooth and periodic on the torus)"
        )));
    }
    let gamma0_prime_sup = sup_norm_scalar(&derivative(&gamma0, l, 1));

    let vring0 = match spec.vring0 {
        VRingSpec::Zero => vec![vec![0.0; m]; n],
        VRingSpec::Mode {
            amplitude,
            mode,
            component,
        } => {
            if component >= n {
                return Err(Error::Config(format!(
                    "perturbation component {component} out of range"
                )));
            }
            let mut v = vec![vec![0.0; m]; n];
            for (i, z) in grid.points().iter().enumerate() {
                v[component][i] = amplitude * (grid.wavenumber(mode) * z).cos();
            }
            v
        }
        VRingSpec::RandomSmooth {
            amplitude,
            correlation_length,
        } => {
            let seed = spec
                .seed
                .ok_or_else(|| Error::Config("a seed is required for random perturbations".into()))?;
            let amp = match (amplitude, spec.target_e0) {
                (Some(a), _) => a,
                (None, Some(e0)) => {
                    let a = e0 - gamma0_prime_sup;
                    if a < 0.0 {
                        return Err(Error::Config(format!(
                            "target E0 = {e0} is below ||gamma0'|| = {gamma0_prime_sup}"
                        )));
                    }
                    a
                }
                (None, None) => {
                    return Err(Error::Config(
                        "random perturbation needs an amplitude or a target E0".into(),
                    ))
                }
            };
            let raw = random_smooth(grid, n, correlation_length, seed);
            let s = sup_norm(&raw);
            raw.into_iter()
                .map(|c| c.into_iter().map(|v| if s > 0.0 { amp * v / s } else { 0.0 }).collect())
                .collect()
        }
    };
    for c in &vring0 {
        let tail = spectral_tail(c, 0.5);
        if tail > 1e-8 {
            return Err(Error::Resolution(format!(
                "perturbation Fourier tail {tail:.2e} exceeds 1e-8"
            )));
        }
    }
    let base = modulated_wave(wt, grid, &gamma0);
    let values: Vec<Vec<f64>> = base
        .iter()
        .zip(&vring0)
        .map(|(b, v)| b.iter().zip(v).map(|(x, y)| x + y).collect())
        .collect();
    let vring_sup = sup_norm(&vring0);
    Ok(InitialData {
        u0: Field::new(*grid, values, 0.0)?,
        m_bound: sup_norm_scalar(&gamma0),
        gamma0,
        vring0,
        gamma0_prime_sup,
        vring_sup,
        e0: vring_sup + gamma0_prime_sup,
    })
}

struct FftPair {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<C>,
    m: usize,
}

impl FftPair {
    fn new(m: usize) -> Self {
        let fwd = plan_forward(m);
        let scratch = vec![
            C::new(0.0, 0.0);
            fwd.get_inplace_scratch_len()
                .max(plan_inverse(m).get_inplace_scratch_len())
        ];
        Self {
            fwd,
            inv: plan_inverse(m),
            scratch,
            m,
        }
    }

    /// Normalised forward transform of real data.
    fn forward(&mut self, input: &[f64], out: &mut [C]) {
        let s = 1.0 / self.m as f64;
        for (o, v) in out.iter_mut().zip(input) {
            *o = C::new(*v * s, 0.0);
        }
        self.fwd.process_with_scratch(out, &mut self.scratch);
    }

    /// Inverse transform, keeping the real part.
    fn inverse(&mut self, coeffs: &[C], buf: &mut [C], out: &mut [f64]) {
        buf.copy_from_slice(coeffs);
        self.inv.process_with_scratch(buf, &mut self.scratch);
        for (o, b) in out.iter_mut().zip(buf.iter()) {
            *o = b.re;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub t: f64,
    /// `‖u(t) - φ₀‖∞`.
    pub deviation: f64,
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationOutput {
    pub snapshots: Vec<Field>,
    pub history: Vec<NormRecord>,
    pub steps: usize,
}

fn output_steps(output_times: &[f64], dt: f64, t_final: f64) -> Result<Vec<usize>> {
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(Error::Usage(format!(
            "need dt > 0 and T >= 0 (dt = {dt}, T = {t_final})"
        )));
    }
    let mut steps: Vec<usize> = output_times
        .iter()
        .map(|&t| {
            if !(0.0..=t_final * (1.0 + 1e-12)).contains(&t) {
                Err(Error::Usage(format!("output time {t} outside [0, {t_final}]")))
            } else {
                Ok((t / dt).round() as usize)
            }
        })
        .collect::<Result<_>>()?;
    steps.sort_unstable();
    steps.dedup();
    Ok(steps)
}

/// Integrate `u_t = k²Du_ζζ + ωu_ζ + f(u)` on the periodic grid of `u0`.
///
/// `reference` is the field against which the deviation norm is recorded.
pub fn integrate_rd(
    system: &RdSystem,
    k: f64,
    omega: f64,
    u0: &Field,
    reference: &[Vec<f64>],
    t_final: f64,
    dt: f64,
    output_times: &[f64],
) -> Result<IntegrationOutput> {
    let grid = u0.grid;
    let n = u0.components();
    let m = grid.m();
    let total = (t_final / dt).round() as usize;
    let outs = output_steps(output_times, dt, t_final)?;

    // Diagonalise D = QΛQᵀ; a diagonal D is used as is to keep it exact.
    let dm = system.diffusion();
    let is_diag = (0..n).all(|i| (0..n).all(|j| i == j || dm[(i, j)] == 0.0));
    let (lams, q) = if is_diag {
        ((0..n).map(|i| dm[(i, i)]).collect::<Vec<_>>(), DMatrix::identity(n, n))
    } else {
        let eig = SymmetricEigen::new(dm.clone());
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };

    let mut symbol = Vec::with_capacity(n * m);
    for lam in &lams {
        for j in 0..m {
            let kappa = grid.wavenumber(signed_index(j, m));
            let drift = if m.is_multiple_of(2) && j == m / 2 { 0.0 } else { omega * kappa };
            symbol.push(C::new(-k * k * lam * kappa * kappa, drift));
        }
    }
    let mask1 = two_thirds_mask(m);
    let mask: Vec<f64> = (0..n).flat_map(|_| mask1.iter().copied()).collect();
    let scheme = Etdrk4::new(&symbol, mask, dt);
    let mut ws = Workspace::new(n * m);

    let mut fft = FftPair::new(m);
    let to_w = |uhat: &[Vec<C>], out: &mut [C]| {
        for e in 0..n {
            for j in 0..m {
                out[e * m + j] = (0..n).map(|c| q[(c, e)] * uhat[c][j]).sum();
            }
        }
    };
    let to_u = |w: &[C], out: &mut [Vec<C>]| {
        for c in 0..n {
            for j in 0..m {
                out[c][j] = (0..n).map(|e| q[(c, e)] * w[e * m + j]).sum();
            }
        }
    };

    let mut uhat = vec![vec![C::new(0.0, 0.0); m]; n];
    for c in 0..n {
        fft.forward(&u0.values[c], &mut uhat[c]);
    }
    let mut v = vec![C::new(0.0, 0.0); n * m];
    to_w(&uhat, &mut v);

    let mut phys = vec![vec![0.0; m]; n];
    let mut fphys = vec![vec![0.0; m]; n];
    let mut buf = vec![C::new(0.0, 0.0); m];
    let mut pt = vec![0.0; n];
    let mut fv = vec![0.0; n];

    let physical = |v: &[C], uhat: &mut [Vec<C>], phys: &mut [Vec<f64>], fft: &mut FftPair, buf: &mut [C]| {
        to_u(v, uhat);
        for c in 0..n {
            fft.inverse(&uhat[c], buf, &mut phys[c]);
        }
    };

    let record = |t: f64, phys: &[Vec<f64>]| NormRecord {
        t,
        deviation: phys
            .iter()
            .zip(reference)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max),
        sup: sup_norm(phys),
    };

    let mut history = Vec::with_capacity(total + 1);
    let mut snapshots = Vec::with_capacity(outs.len());
    physical(&v, &mut uhat, &mut phys, &mut fft, &mut buf);
    history.push(record(0.0, &phys));
    let mut next_out = 0;
    if outs.first() == Some(&0) {
        snapshots.push(Field::new(grid, phys.clone(), 0.0)?);
        next_out = 1;
    }

    let mut nl_uhat = vec![vec![C::new(0.0, 0.0); m]; n];
    let mut nl_hat = vec![vec![C::new(0.0, 0.0); m]; n];
    let mut nonlinear = |w: &[C], out: &mut [C]| {
        physical(w, &mut nl_uhat, &mut phys, &mut fft, &mut buf);
        for i in 0..m {
            for c in 0..n {
                pt[c] = phys[c][i];
            }
            system.f(&pt, &mut fv);
            for c in 0..n {
                fphys[c][i] = fv[c];
            }
        }
        for c in 0..n {
            fft.forward(&fphys[c], &mut nl_hat[c]);
        }
        to_w(&nl_hat, out);
    };

    let mut last_good = 0.0;
    let mut out_phys = vec![vec![0.0; m]; n];
    let mut fft_rec = FftPair::new(m);
    let mut buf_rec = vec![C::new(0.0, 0.0); m];
    let mut uhat_rec = vec![vec![C::new(0.0, 0.0); m]; n];
    for step in 1..=total {
        scheme.step(&mut v, &mut ws, &mut nonlinear);
        let t = step as f64 * dt;
        to_u(&v, &mut uhat_rec);
        for c in 0..n {
            fft_rec.inverse(&uhat_rec[c], &mut buf_rec, &mut out_phys[c]);
        }
        let rec = record(t, &out_phys);
        if !rec.sup.is_finite() {
            return Err(Error::BlowUp {
                last_good_time: last_good,
            });
        }
        last_good = t;
        history.push(rec);
        if next_out < outs.len() && outs[next_out] == step {
            snapshots.push(Field::new(grid, out_phys.clone(), t)?);
            next_out += 1;
        }
    }
    Ok(IntegrationOutput {
        snapshots,
        history,
        steps: total,
    })
}

/// Integrate the co-moving-frame system from `u0` around the wave train `wt`.
pub fn integrate(
    system: &RdSystem,
    wt: &WaveTrain,
    u0: &Field,
    t_final: f64,
    dt: f64,
    output_times: &[f64],
) -> Result<IntegrationOutput> {
    if u0.components() != system.n() {
        return Err(Error::Validation("initial field does not match the system".into()));
    }
    let reference = tiled_profile(wt, &u0.grid);
    integrate_rd(system, wt.k, wt.omega, u0, &reference, t_final, dt, output_times)
}

/// Integrate the scalar equation `w_t = dw_ζζ + aw_ζ + N(w, w_ζ)` and return
/// the solution at each output time.
pub fn integrate_scalar<N>(
    grid: &PeriodicGrid,
    w0: &[f64],
    d: f64,
    a: f64,
    nonlinear: N,
    t_final: f64,
    dt: f64,
    output_times: &[f64],
) -> Result<Vec<(f64, Vec<f64>)>>
where
    N: Fn(f64, f64) -> f64,
{
    let m = grid.m();
    let total = (t_final / dt).round() as usize;
    let outs = output_steps(output_times, dt, t_final)?;
    let symbol: Vec<C> = (0..m)
        .map(|j| {
            let kappa = grid.wavenumber(signed_index(j, m));
            let drift = if j == m / 2 { 0.0 } else { a * kappa };
            C::new(-d * kappa * kappa, drift)
        })
        .collect();
    let scheme = Etdrk4::new(&symbol, two_thirds_mask(m), dt);
    let mut ws = Workspace::new(m);
    let mut fft = FftPair::new(m);
    let ik: Vec<C> = (0..m)
        .map(|j| {
            if j == m / 2 {
                C::new(0.0, 0.0)
            } else {
                C::new(0.0, grid.wavenumber(signed_index(j, m)))
            }
        })
        .collect();

    let mut v = vec![C::new(0.0, 0.0); m];
    fft.forward(w0, &mut v);
    let mut buf = vec![C::new(0.0, 0.0); m];
    let mut dhat = vec![C::new(0.0, 0.0); m];
    let mut w = vec![0.0; m];
    let mut wz = vec![0.0; m];
    let mut nl = vec![0.0; m];
    let mut out = Vec::with_capacity(outs.len());
    let mut next = 0;
    if outs.first() == Some(&0) {
        out.push((0.0, w0.to_vec()));
        next = 1;
    }
    let mut fft_n = FftPair::new(m);
    let mut nonlin = |vh: &[C], o: &mut [C]| {
        fft_n.inverse(vh, &mut buf, &mut w);
        for j in 0..m {
            dhat[j] = vh[j] * ik[j];
        }
        fft_n.inverse(&dhat, &mut buf, &mut wz);
        for i in 0..m {
            nl[i] = nonlinear(w[i], wz[i]);
        }
        fft_n.forward(&nl, o);
    };
    let mut buf2 = vec![C::new(0.0, 0.0); m];
    let mut phys = vec![0.0; m];
    for step in 1..=total {
        scheme.step(&mut v, &mut ws, &mut nonlin);
        if v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::BlowUp {
                last_good_time: (step - 1) as f64 * dt,
            });
        }
        if next < outs.len() && outs[next] == step {
            fft.inverse(&v, &mut buf2, &mut phys);
            out.push((step as f64 * dt, phys.clone()));
            next += 1;
        }
    }
    Ok(out)
}

/// Initial data for the toy models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ToyInitial {
    /// Raised plateau `offset + (J/2)(tanh((ζ-L/4)/ℓ) - tanh((ζ-3L/4)/ℓ))`
    /// with `ℓ = J/(2s)`, so the slope is `s` and the height `J`.
    Plateau {
        jump: f64,
        slope: f64,
        offset: f64,
    },
    Mode {
        amplitude: f64,
        mode: i64,
    },
    Constant {
        c: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub mu: f64,
    #[serde(default = "one")]
    pub d: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub nu: f64,
    pub length: usize,
    pub m: usize,
    pub w0: ToyInitial,
    /// Interpolation exponent `α ∈ [0, 1/6)`, reported only.
    #[serde(default)]
    pub a_interp: f64,
}

fn one() -> f64 {
    1.0
}

impl ToyConfig {
    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.m, self.length)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0) {
            return Err(Error::Config(format!("toy model needs d > 0, got {}", self.d)));
        }
        if !(0.0..1.0 / 6.0).contains(&self.a_interp) {
            return Err(Error::Config("interpolation exponent must lie in [0, 1/6)".into()));
        }
        Ok(())
    }

    pub fn initial(&self) -> Result<Vec<f64>> {
        let grid = self.grid()?;
        let l = grid.length_f64();
        Ok(grid
            .points()
            .iter()
            .map(|&z| match self.w0 {
                ToyInitial::Plateau { jump, slope, offset } => {
                    let ell = jump / (2.0 * slope);
                    offset + 0.5 * jump * (((z - 0.25 * l) / ell).tanh() - ((z - 0.75 * l) / ell).tanh())
                }
                ToyInitial::Mode { amplitude, mode } => amplitude * (grid.wavenumber(mode) * z).sin(),
                ToyInitial::Constant { c } => c,
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySeries {
    pub times: Vec<f64>,
    pub w_sup: Vec<f64>,
    pub wz_sup: Vec<f64>,
    pub w0_prime_sup: f64,
    pub w0_sup: f64,
}

/// `w_t = dw_ζζ + aw_ζ + νw_ζ² + μw_ζ³`.
pub fn toy_integrate(config: &ToyConfig, t_final: f64, dt: f64, output_times: &[f64]) -> Result<ToySeries> {
    config.validate()?;
    let grid = config.grid()?;
    let w0 = config.initial()?;
    let (nu, mu) = (config.nu, config.mu);
    let sol = integrate_scalar(
        &grid,
        &w0,
        config.d,
        config.a,
        move |_, wz| nu * wz * wz + mu * wz * wz * wz,
        t_final,
        dt,
        output_times,
    )?;
    let l = grid.length_f64();
    Ok(ToySeries {
        times: sol.iter().map(|(t, _)| *t).collect(),
        w_sup: sol.iter().map(|(_, w)| sup_norm_scalar(w)).collect(),
        wz_sup: sol.iter().map(|(_, w)| sup_norm_scalar(&derivative(w, l, 1))).collect(),
        w0_prime_sup: sup_norm_scalar(&derivative(&w0, l, 1)),
        w0_sup: sup_norm_scalar(&w0),
    })
}

/// Integrate the toy model directly and through `v = e^{(ν/d)w}`, returning
/// the largest discrepancy `‖e^{(ν/d)w} - v‖∞` over the output times.
pub fn toy_transform_check(config: &ToyConfig, t_final: f64, dt: f64, output_times: &[f64]) -> Result<f64> {
    config.validate()?;
    if config.nu == 0.0 {
        return Err(Error::Config("transform check needs nu != 0".into()));
    }
    let grid = config.grid()?;
    let w0 = config.initial()?;
    let (d, nu, mu) = (config.d, config.nu, config.mu);
    let direct = integrate_scalar(
        &grid,
        &w0,
        d,
        config.a,
        move |_, wz| nu * wz * wz + mu * wz * wz * wz,
        t_final,
        dt,
        output_times,
    )?;
    let v0: Vec<f64> = w0.iter().map(|w| (nu / d * w).exp()).collect();
    let coef = mu * d * d / (nu * nu);
    let transformed = integrate_scalar(
        &grid,
        &v0,
        d,
        config.a,
        move |v, vz| coef * vz * vz * vz / (v * v),
        t_final,
        dt,
        output_times,
    )?;
    let mut worst = 0.0f64;
    for ((t, w), (_, v)) in direct.iter().zip(&transformed) {
        if v.iter().any(|x| *x <= 0.0) {
            return Err(Error::TransformDomain(format!("v became non-positive at t = {t}")));
        }
        let diff = w
            .iter()
            .zip(v)
            .map(|(w, v)| ((nu / d * w).exp() - v).abs())
            .fold(0.0, f64::max);
        worst = worst.max(diff);
    }
    Ok(worst)
}
