//! Periodic grids, fields and Fourier calculus on the torus.
//!
//! All transforms use the normalisation `c_j = (1/m) Σ_i v_i e^{-2πi j ζ_i / L}` so
//! that `v(ζ) = Σ_j c_j e^{2πi j ζ / L}` is the trigonometric interpolant. The
//! Nyquist coefficient of an even-length real signal is treated as a cosine.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub fn plan_forward(m: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(m))
}

pub fn plan_inverse(m: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(m))
}

/// Uniform grid on `[0, length)` where `length` counts profile periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    m: usize,
    length: usize,
}

impl PeriodicGrid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(m: usize, length: usize) -> Result<Self> {
        if m < Self::MIN_POINTS || !m.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid size must be a power of two >= {}, got {m}",
                Self::MIN_POINTS
            )));
        }
        if length == 0 {
            return Err(Error::Config("grid length must be a positive integer".into()));
        }
        Ok(Self { m, length })
    }

    /// Grid over a single profile period.
    pub fn unit(m: usize) -> Result<Self> {
        Self::new(m, 1)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn length_f64(&self) -> f64 {
        self.length as f64
    }

    pub fn spacing(&self) -> f64 {
        self.length as f64 / self.m as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.point(i)).collect()
    }

    /// Points per profile period, when integral.
    pub fn points_per_period(&self) -> Option<usize> {
        self.m.is_multiple_of(self.length).then(|| self.m / self.length)
    }

    /// Angular wavenumber `2π j / L` of (signed) mode `j`.
    pub fn wavenumber(&self, j: i64) -> f64 {
        2.0 * PI * j as f64 / self.length as f64
    }
}

/// Signed mode index of FFT slot `j` for transform length `m`.
pub fn signed_index(j: usize, m: usize) -> i64 {
    if j <= m / 2 {
        j as i64
    } else {
        j as i64 - m as i64
    }
}

/// Multi-component sampled field on a periodic grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub grid: PeriodicGrid,
    /// Component-major samples: `values[c][i]`.
    pub values: Vec<Vec<f64>>,
    pub time: f64,
}

impl Field {
    pub fn new(grid: PeriodicGrid, values: Vec<Vec<f64>>, time: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("field must have at least one component".into()));
        }
        for comp in &values {
            if comp.len() != grid.m() {
                return Err(Error::Validation(format!(
                    "component length {} does not match grid size {}",
                    comp.len(),
                    grid.m()
                )));
            }
            if comp.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation("field contains non-finite values".into()));
            }
        }
        Ok(Self { grid, values, time })
    }

    pub fn scalar(grid: PeriodicGrid, values: Vec<f64>, time: f64) -> Result<Self> {
        Self::new(grid, vec![values], time)
    }

    pub fn components(&self) -> usize {
        self.values.len()
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }
}

pub fn sup_norm(values: &[Vec<f64>]) -> f64 {
    values
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

pub fn sup_norm_scalar(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `L²(0, length)` inner product of real multi-component samples by the
/// trapezoid rule.
pub fn l2_inner(length: f64, u: &[Vec<f64>], v: &[Vec<f64>]) -> f64 {
    let m = u[0].len();
    let sum: f64 = u
        .iter()
        .zip(v)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
        .sum();
    sum * length / m as f64
}

/// Normalised Fourier coefficients of a real sample vector.
pub fn fourier_coefficients(values: &[f64]) -> Vec<Complex64> {
    let m = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan_forward(m).process(&mut buf);
    let scale = 1.0 / m as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

/// Inverse of [`fourier_coefficients`], returning the real part.
pub fn from_fourier_coefficients(coeffs: &[Complex64]) -> Vec<f64> {
    let mut buf = coeffs.to_vec();
    plan_inverse(coeffs.len()).process(&mut buf);
    buf.iter().map(|c| c.re).collect()
}

/// Fourier multiplier `(i κ_j)^order` for the trigonometric interpolant; the
/// Nyquist mode is dropped for odd orders so the output stays real.
fn derivative_multiplier(j: usize, m: usize, length: f64, order: u32) -> Complex64 {
    if order == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if m.is_multiple_of(2) && j == m / 2 && order % 2 == 1 {
        return Complex64::new(0.0, 0.0);
    }
    let kappa = 2.0 * PI * signed_index(j, m) as f64 / length;
    Complex64::new(0.0, kappa).powu(order)
}

/// Exact derivative of the trigonometric interpolant of `values` on `[0, length)`.
pub fn derivative(values: &[f64], length: f64, order: u32) -> Vec<f64> {
    let m = values.len();
    let mut coeffs = fourier_coefficients(values);
    for (j, c) in coeffs.iter_mut().enumerate() {
        *c *= derivative_multiplier(j, m, length, order);
    }
    from_fourier_coefficients(&coeffs)
}

pub fn spectral_derivative(field: &Field, order: u32) -> Result<Field> {
    if !(1..=4).contains(&order) {
        return Err(Error::Usage(format!("derivative order must be 1..=4, got {order}")));
    }
    let length = field.grid.length_f64();
    let values = field.values.iter().map(|c| derivative(c, length, order)).collect();
    Ok(Field {
        grid: field.grid,
        values,
        time: field.time,
    })
}

/// Dense matrix of the spectral derivative of the given order on `m` points.
pub fn diff_matrix(m: usize, length: f64, order: u32) -> DMatrix<f64> {
    let mut mat = DMatrix::zeros(m, m);
    let mut unit = vec![0.0; m];
    for j in 0..m {
        unit[j] = 1.0;
        let col = derivative(&unit, length, order);
        for (i, v) in col.into_iter().enumerate() {
            mat[(i, j)] = v;
        }
        unit[j] = 0.0;
    }
    mat
}

/// Band-limited resampling onto `new_m` points by Fourier padding or truncation.
pub fn resample(values: &[f64], new_m: usize) -> Vec<f64> {
    let m = values.len();
    if new_m == m {
        return values.to_vec();
    }
    let coeffs = fourier_coefficients(values);
    let mut out = vec![Complex64::new(0.0, 0.0); new_m];
    let keep = m.min(new_m) / 2;
    for j in 0..keep {
        out[j] = coeffs[j];
        if j > 0 {
            out[new_m - j] = coeffs[m - j];
        }
    }
    // Split or fold the Nyquist mode of the shorter transform.
    if new_m > m {
        let nyq = coeffs[m / 2];
        out[m / 2] += 0.5 * nyq;
        out[new_m - m / 2] += 0.5 * nyq;
    } else {
        let nyq = coeffs[new_m / 2] + coeffs[m - new_m / 2];
        out[new_m / 2] = Complex64::new(nyq.re, 0.0);
    }
    from_fourier_coefficients(&out)
}

/// Samples of `v(ζ + s)` for the trigonometric interpolant `v`.
pub fn shift(values: &[f64], s: f64, length: f64) -> Vec<f64> {
    let m = values.len();
    let mut coeffs = fourier_coefficients(values);
    for (j, c) in coeffs.iter_mut().enumerate() {
        if m.is_multiple_of(2) && j == m / 2 {
            // cos(κ(ζ+s)) is not representable on the grid; keep its cosine part.
            let kappa = PI * m as f64 / length;
            *c *= (kappa * s).cos();
            continue;
        }
        let kappa = 2.0 * PI * signed_index(j, m) as f64 / length;
        *c *= Complex64::from_polar(1.0, kappa * s);
    }
    from_fourier_coefficients(&coeffs)
}

/// Largest coefficient magnitude among modes with `|j| >= frac * m/2`.
pub fn spectral_tail(values: &[f64], frac: f64) -> f64 {
    let m = values.len();
    let cutoff = (frac * (m / 2) as f64).ceil() as i64;
    fourier_coefficients(values)
        .iter()
        .enumerate()
        .filter(|(j, _)| signed_index(*j, m).abs() >= cutoff)
        .fold(0.0f64, |acc, (_, c)| acc.max(c.norm()))
}

/// Real trigonometric series `c_0 + 2 Re Σ_{j≥1} c_j e^{iκ_j x}` evaluable at
/// arbitrary points, with derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries {
    length: f64,
    /// Coefficients for `j = 0..=jmax`; the Nyquist term (if any) is stored
    /// already halved so the series formula applies uniformly.
    coeffs: Vec<Complex64>,
}

impl FourierSeries {
    pub fn from_samples(values: &[f64], length: f64) -> Self {
        let m = values.len();
        let all = fourier_coefficients(values);
        let mut coeffs: Vec<Complex64> = all[..=m / 2].to_vec();
        if m.is_multiple_of(2) {
            coeffs[m / 2] = Complex64::new(0.5 * all[m / 2].re, 0.0);
        }
        Self { length, coeffs }
    }

    pub fn from_coefficients(coeffs: Vec<Complex64>, length: f64) -> Self {
        Self { length, coeffs }
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_derivatives(x).0
    }

    /// Value and first two derivatives at `x`.
    pub fn eval_with_derivatives(&self, x: f64) -> (f64, f64, f64) {
        let base = 2.0 * PI / self.length;
        let step = Complex64::from_polar(1.0, base * x);
        let mut phase = step;
        let mut v = self.coeffs[0].re;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for (j, c) in self.coeffs.iter().enumerate().skip(1) {
            let term = c * phase;
            let kappa = base * j as f64;
            v += 2.0 * term.re;
            d1 -= 2.0 * kappa * term.im;
            d2 -= 2.0 * kappa * kappa * term.re;
            phase *= step;
        }
        (v, d1, d2)
    }

    /// Samples on `m` uniform points of `[0, length)` after shifting by `s`.
    pub fn sample_shifted(&self, m: usize, s: f64) -> Vec<f64> {
        let h = self.length / m as f64;
        (0..m).map(|i| self.eval(i as f64 * h + s)).collect()
    }
}

/// Interpolator for large band-limited fields at arbitrary points: Fourier
/// upsampling followed by local Lagrange interpolation.
#[derive(Debug, Clone)]
pub struct BandlimitedInterpolator {
    fine: Vec<f64>,
    h: f64,
    length: f64,
    weights: Vec<f64>,
}

impl BandlimitedInterpolator {
    const UPSAMPLE: usize = 8;
    const STENCIL: usize = 12;

    pub fn new(values: &[f64], length: f64) -> Self {
        let fine = resample(values, values.len() * Self::UPSAMPLE);
        let h = length / fine.len() as f64;
        // Barycentric weights of equispaced nodes.
        let p = Self::STENCIL;
        let mut weights = vec![0.0; p];
        let mut binom = 1.0;
        for (j, w) in weights.iter_mut().enumerate() {
            if j > 0 {
                binom = binom * (p - j) as f64 / j as f64;
            }
            *w = if j % 2 == 0 { binom } else { -binom };
        }
        Self {
            fine,
            h,
            length,
            weights,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.fine.len() as i64;
        let xr = x.rem_euclid(self.length) / self.h;
        let base = xr.floor() as i64;
        let frac = xr - base as f64;
        let p = Self::STENCIL as i64;
        let first = base - (p / 2 - 1);
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..p {
            let node = (first + j) as f64 - base as f64;
            let dx = frac - node;
            let idx = (first + j).rem_euclid(n) as usize;
            if dx.abs() < 1e-14 {
                return self.fine[idx];
            }
            let w = self.weights[j as usize] / dx;
            num += w * self.fine[idx];
            den += w;
        }
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(m: usize, l: usize) -> PeriodicGrid {
        PeriodicGrid::new(m, l).unwrap()
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(PeriodicGrid::new(8, 1).is_err());
        assert!(PeriodicGrid::new(48, 1).is_err());
        assert!(PeriodicGrid::new(64, 0).is_err());
        let g = grid(64, 4);
        assert_eq!(g.spacing(), 4.0 / 64.0);
        assert_eq!(g.points_per_period(), Some(16));
    }

    #[test]
    fn derivative_of_sine_is_exact() {
        let g = grid(64, 3);
        let l = g.length_f64();
        let w = 2.0 * PI / l;
        let f = Field::scalar(g, g.points().iter().map(|z| (w * z).sin()).collect(), 0.0).unwrap();
        let d = spectral_derivative(&f, 1).unwrap();
        for (z, v) in g.points().iter().zip(&d.values[0]) {
            assert!((v - w * (w * z).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = grid(32, 2);
        let f = Field::scalar(g, vec![3.5; 32], 0.0).unwrap();
        for order in 1..=4 {
            let d = spectral_derivative(&f, order).unwrap();
            assert!(d.sup_norm() < 1e-12);
        }
        assert!(spectral_derivative(&f, 5).is_err());
        assert!(spectral_derivative(&f, 0).is_err());
    }

    #[test]
    fn second_derivative_matches_fourth_order_differences() {
        // Oracle: 4th-order central differences, error O(h^4).
        let f = |z: f64, l: f64| (2.0 * PI * z / l).sin().exp();
        let mut errs = Vec::new();
        for &m in &[64usize, 128] {
            let g = grid(m, 1);
            let h = g.spacing();
            let vals: Vec<f64> = g.points().iter().map(|&z| f(z, 1.0)).collect();
            let d2 = derivative(&vals, 1.0, 2);
            let err = (0..m)
                .map(|i| {
                    let z = g.point(i);
                    let fd = (-f(z + 2.0 * h, 1.0) + 16.0 * f(z + h, 1.0) - 30.0 * f(z, 1.0) + 16.0 * f(z - h, 1.0)
                        - f(z - 2.0 * h, 1.0))
                        / (12.0 * h * h);
                    (fd - d2[i]).abs()
                })
                .fold(0.0f64, f64::max);
            errs.push(err);
        }
        // Halving h must reduce the discrepancy by ~16.
        assert!(errs[0] < 0.05, "{errs:?}");
        assert!(errs[0] / errs[1] > 12.0, "{errs:?}");
    }

    #[test]
    fn shift_and_series_agree() {
        let m = 32;
        let vals: Vec<f64> = (0..m)
            .map(|i| {
                let z = i as f64 / m as f64;
                (2.0 * PI * z).cos() + 0.3 * (6.0 * PI * z).sin()
            })
            .collect();
        let shifted = shift(&vals, 0.123, 1.0);
        let series = FourierSeries::from_samples(&vals, 1.0);
        for i in 0..m {
            let z = i as f64 / m as f64;
            assert!((series.eval(z + 0.123) - shifted[i]).abs() < 1e-13);
        }
        let (_, d1, d2) = series.eval_with_derivatives(0.3);
        let z: f64 = 0.3;
        let e1 = -2.0 * PI * (2.0 * PI * z).sin() + 0.3 * 6.0 * PI * (6.0 * PI * z).cos();
        let e2 = -4.0 * PI * PI * (2.0 * PI * z).cos() - 0.3 * 36.0 * PI * PI * (6.0 * PI * z).sin();
        assert!((d1 - e1).abs() < 1e-11);
        assert!((d2 - e2).abs() < 1e-10);
    }

    #[test]
    fn resample_round_trip() {
        let m = 32;
        let vals: Vec<f64> = (0..m).map(|i| (2.0 * PI * i as f64 / m as f64).sin().exp()).collect();
        let up = resample(&vals, 128);
        let down = resample(&up, 32);
        for (a, b) in vals.iter().zip(&down) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn bandlimited_interpolator_is_accurate() {
        let l = 8.0;
        let m = 128;
        let f = |z: f64| (2.0 * PI * z / l).sin() + 0.2 * (2.0 * PI * 7.0 * z / l).cos();
        let vals: Vec<f64> = (0..m).map(|i| f(i as f64 * l / m as f64)).collect();
        let it = BandlimitedInterpolator::new(&vals, l);
        for k in 0..97 {
            let x = -3.0 + 0.137 * k as f64;
            assert!((it.eval(x) - f(x)).abs() < 1e-11, "x = {x}");
        }
    }

    #[test]
    fn diff_matrix_matches_fft_derivative() {
        let m = 16;
        let d1 = diff_matrix(m, 1.0, 1);
        let vals: Vec<f64> = (0..m).map(|i| (2.0 * PI * i as f64 / m as f64).cos()).collect();
        let v = nalgebra::DVector::from_vec(vals.clone());
        let out = &d1 * v;
        let expect = derivative(&vals, 1.0, 1);
        for i in 0..m {
            assert!((out[i] - expect[i]).abs() < 1e-12);
        }
        // Odd-order matrix is skew-symmetric.
        assert!((&d1 + d1.transpose()).amax() < 1e-12);
    }
}
