//! Phase extraction from simulated fields, the modulated residuals, decay-rate
//! fits and the verification report.
//!
//! The extracted phase `Γ` is the forward modulation, `u(ζ) ≈ φ₀(ζ + Γ(ζ))`.
//! Its inverse `γ`, defined by `u(ζ - γ(ζ)) ≈ φ₀(ζ)`, solves the fixed point
//! `γ(ζ) = Γ(ζ - γ(ζ))`; it is the phase used for the inverse-modulated
//! perturbation and, through `γ(1 + γ_ζ) ≈ Γ`, for the refined residual.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    derivative, fourier_coefficients, from_fourier_coefficients, resample, signed_index, sup_norm, sup_norm_scalar,
    BandlimitedInterpolator, Field, FourierSeries, PeriodicGrid,
};
use crate::wavetrain::{FamilyInterpolator, WaveTrain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    /// Gaussian window width in periods.
    pub sigma: f64,
    /// Coarse extraction points per period.
    pub coarse_per_period: usize,
    /// Accepted RMS misfit relative to the RMS of `φ₀ - mean φ₀`.
    pub tolerance: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub scan_samples: usize,
    /// Remove the `σ²/2 Γ''` bias of the window average.
    pub curvature_correction: bool,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            sigma: 4.0,
            coarse_per_period: 1,
            tolerance: 1.0,
            newton_tol: 1e-12,
            max_newton: 30,
            scan_samples: 32,
            curvature_correction: true,
        }
    }
}

/// Profile values at the residue classes of the grid modulo one period.
struct ProfileTable {
    series: Vec<FourierSeries>,
    /// Offsets `x_r` of the classes within a period.
    offsets: Vec<f64>,
    /// Class of each grid point.
    class_of: Vec<usize>,
    rms: f64,
}

impl ProfileTable {
    fn new(wt: &WaveTrain, grid: &PeriodicGrid) -> Self {
        let series = wt.series();
        let (offsets, class_of) = match grid.points_per_period() {
            Some(p) => (
                (0..p).map(|r| r as f64 / p as f64).collect(),
                (0..grid.m()).map(|i| i % p).collect(),
            ),
            None => (grid.points(), (0..grid.m()).collect()),
        };
        let rms = (wt
            .profile
            .iter()
            .map(|c| {
                let mu = c.iter().sum::<f64>() / c.len() as f64;
                c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / c.len() as f64
            })
            .sum::<f64>())
        .sqrt();
        Self {
            series,
            offsets,
            class_of,
            rms,
        }
    }
}

/// Window sums per residue class for one coarse point.
struct WindowSums {
    /// `s[r][c] = Σ_{i ∈ r} w_i u_c(ζ_i)`.
    s: Vec<Vec<f64>>,
    w: Vec<f64>,
    uu: f64,
    total: f64,
}

impl WindowSums {
    fn objective(&self, table: &ProfileTable, gamma: f64) -> (f64, f64, f64) {
        let n = table.series.len();
        let (mut j, mut j1, mut j2) = (self.uu, 0.0, 0.0);
        for (r, x) in table.offsets.iter().enumerate() {
            if self.w[r] == 0.0 {
                continue;
            }
            let (mut ps, mut p1s, mut p2s, mut pp, mut pp1, mut p1p1, mut pp2) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
            for c in 0..n {
                let (p, p1, p2) = table.series[c].eval_with_derivatives(x + gamma);
                let s = self.s[r][c];
                ps += p * s;
                p1s += p1 * s;
                p2s += p2 * s;
                pp += p * p;
                pp1 += p * p1;
                p1p1 += p1 * p1;
                pp2 += p * p2;
            }
            let w = self.w[r];
            j += -2.0 * ps + w * pp;
            j1 += -2.0 * p1s + 2.0 * w * pp1;
            j2 += -2.0 * p2s + 2.0 * w * (p1p1 + pp2);
        }
        (j, j1, j2)
    }
}

/// Result of extracting the phase from one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseExtraction {
    pub time: f64,
    /// Raw window minimisers at the coarse points (the warm start for the next
    /// snapshot).
    pub coarse: Vec<f64>,
    /// Forward phase `Γ` on the full grid.
    pub gamma: Vec<f64>,
    /// RMS misfit per coarse point, relative to the profile RMS.
    pub residual: Vec<f64>,
}

fn coarse_layout(grid: &PeriodicGrid, cfg: &ExtractionConfig) -> Result<(usize, usize)> {
    let nc = grid.length() * cfg.coarse_per_period;
    if nc < 2 || !nc.is_multiple_of(2) || !grid.m().is_multiple_of(nc) {
        return Err(Error::Config(format!(
            "{nc} coarse points must be even and divide the {} grid points",
            grid.m()
        )));
    }
    Ok((nc, grid.m() / nc))
}

/// Coarse-point samples of a full-grid field.
pub fn coarse_samples(values: &[f64], grid: &PeriodicGrid, cfg: &ExtractionConfig) -> Result<Vec<f64>> {
    let (nc, stride) = coarse_layout(grid, cfg)?;
    Ok((0..nc).map(|j| values[j * stride]).collect())
}

fn gaussian_weights(grid: &PeriodicGrid, sigma: f64) -> (i64, Vec<f64>) {
    let h = grid.spacing();
    let half = ((4.0 * sigma) / h).ceil() as i64;
    let half = half.min(grid.m() as i64 / 2 - 1);
    let w = (-half..=half)
        .map(|o| {
            let s = o as f64 * h / sigma;
            (-0.5 * s * s).exp()
        })
        .collect();
    (half, w)
}

fn minimise(sums: &WindowSums, table: &ProfileTable, init: f64, cfg: &ExtractionConfig) -> Option<f64> {
    let mut g = init;
    for _ in 0..cfg.max_newton {
        let (_, j1, j2) = sums.objective(table, g);
        if !(j2 > 0.0) {
            return None;
        }
        let step = (j1 / j2).clamp(-0.25, 0.25);
        g -= step;
        if step.abs() < cfg.newton_tol {
            return (g - init).abs().lt(&0.5).then_some(g);
        }
    }
    None
}

/// Extract the forward phase from one snapshot, starting each coarse point
/// from `init` (coarse samples of the previous phase).
pub fn extract_phase(
    snapshot: &Field,
    wt: &WaveTrain,
    init: &[f64],
    cfg: &ExtractionConfig,
) -> Result<PhaseExtraction> {
    let grid = snapshot.grid;
    let (nc, stride) = coarse_layout(&grid, cfg)?;
    if init.len() != nc {
        return Err(Error::Validation(format!(
            "expected {nc} initial phases, got {}",
            init.len()
        )));
    }
    if snapshot.components() != wt.n() {
        return Err(Error::Validation(
            "snapshot and wave train have different component counts".into(),
        ));
    }
    let table = ProfileTable::new(wt, &grid);
    let (half, weights) = gaussian_weights(&grid, cfg.sigma);
    let m = grid.m() as i64;
    let n = wt.n();
    let classes = table.offsets.len();
    let mut coarse = Vec::with_capacity(nc);
    let mut residual = Vec::with_capacity(nc);
    for (j, &g0) in init.iter().enumerate() {
        let centre = (j * stride) as i64;
        let mut sums = WindowSums {
            s: vec![vec![0.0; n]; classes],
            w: vec![0.0; classes],
            uu: 0.0,
            total: 0.0,
        };
        for (o, w) in (-half..=half).zip(&weights) {
            let i = (centre + o).rem_euclid(m) as usize;
            let r = table.class_of[i];
            for c in 0..n {
                let u = snapshot.values[c][i];
                sums.s[r][c] += w * u;
                sums.uu += w * u * u;
            }
            sums.w[r] += w;
            sums.total += w;
        }
        let g = match minimise(&sums, &table, g0, cfg) {
            Some(g) => g,
            None => {
                let best = (0..=cfg.scan_samples)
                    .map(|s| g0 - 0.5 + s as f64 / cfg.scan_samples as f64)
                    .map(|x| (x, sums.objective(&table, x).0))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|p| p.0)
                    .unwrap_or(g0);
                minimise(&sums, &table, best, cfg).ok_or(Error::Extraction {
                    zeta: grid.point(j * stride),
                    t: snapshot.time,
                })?
            }
        };
        let j_min = sums.objective(&table, g).0.max(0.0);
        let misfit = (j_min / sums.total).sqrt() / table.rms.max(f64::MIN_POSITIVE);
        if !(misfit < cfg.tolerance) {
            return Err(Error::Extraction {
                zeta: grid.point(j * stride),
                t: snapshot.time,
            });
        }
        coarse.push(g);
        residual.push(misfit);
    }
    for j in 0..nc {
        if (coarse[(j + 1) % nc] - coarse[j]).abs() >= 0.5 {
            return Err(Error::Extraction {
                zeta: grid.point(j * stride),
                t: snapshot.time,
            });
        }
    }
    let corrected = if cfg.curvature_correction {
        curvature_correct(&coarse, grid.length_f64(), cfg.sigma)
    } else {
        coarse.clone()
    };
    Ok(PhaseExtraction {
        time: snapshot.time,
        gamma: resample(&corrected, grid.m()),
        coarse,
        residual,
    })
}

/// `g - (σ²/2) ∂²(G_σ * g)`: the window average of a smooth phase equals the
/// phase plus `σ²/2` times its curvature to leading order.
fn curvature_correct(values: &[f64], length: f64, sigma: f64) -> Vec<f64> {
    let m = values.len();
    let mut c = fourier_coefficients(values);
    for (j, v) in c.iter_mut().enumerate() {
        let kappa = 2.0 * std::f64::consts::PI * signed_index(j, m) as f64 / length;
        let k2s2 = kappa * kappa * sigma * sigma;
        *v *= 1.0 + 0.5 * k2s2 * (-0.5 * k2s2).exp();
    }
    from_fourier_coefficients(&c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedModulation {
    pub times: Vec<f64>,
    /// Forward phase on the full grid, per snapshot.
    pub gamma: Vec<Vec<f64>>,
    pub gamma_zeta: Vec<Vec<f64>>,
    /// Per-coarse-point relative misfit, per snapshot.
    pub residual: Vec<Vec<f64>>,
}

/// Extract the phase from a time-ordered sequence of snapshots, warm-starting
/// each from the previous one and the first from `gamma0`.
pub fn extract_series(
    snapshots: &[Field],
    wt: &WaveTrain,
    gamma0: &[f64],
    cfg: &ExtractionConfig,
) -> Result<ExtractedModulation> {
    let mut out = ExtractedModulation {
        times: Vec::with_capacity(snapshots.len()),
        gamma: Vec::with_capacity(snapshots.len()),
        gamma_zeta: Vec::with_capacity(snapshots.len()),
        residual: Vec::with_capacity(snapshots.len()),
    };
    let Some(first) = snapshots.first() else {
        return Ok(out);
    };
    let mut init = coarse_samples(gamma0, &first.grid, cfg)?;
    for s in snapshots {
        let e = extract_phase(s, wt, &init, cfg)?;
        init = e.coarse;
        out.times.push(e.time);
        out.gamma_zeta.push(derivative(&e.gamma, s.grid.length_f64(), 1));
        out.gamma.push(e.gamma);
        out.residual.push(e.residual);
    }
    Ok(out)
}

/// Inverse phase: `γ(ζ) = Γ(ζ - γ(ζ))` by fixed-point iteration.
pub fn inverse_phase(forward: &[f64], grid: &PeriodicGrid) -> Result<Vec<f64>> {
    let interp = BandlimitedInterpolator::new(forward, grid.length_f64());
    let slope = sup_norm_scalar(&derivative(forward, grid.length_f64(), 1));
    if slope >= 0.5 {
        return Err(Error::Numerical(format!(
            "phase slope {slope:.3} too large to invert the modulation"
        )));
    }
    let pts = grid.points();
    let mut gamma = forward.to_vec();
    for _ in 0..100 {
        let next: Vec<f64> = pts.iter().zip(&gamma).map(|(z, g)| interp.eval(z - g)).collect();
        let change = next.iter().zip(&gamma).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        gamma = next;
        if change < 1e-14 * (1.0 + sup_norm_scalar(&gamma)) {
            return Ok(gamma);
        }
    }
    Err(Error::Numerical("inverse phase iteration did not converge".into()))
}

/// `ẘ = u - φ₀(· + Γ)` and its sup-norm.
pub fn residual_plain(snapshot: &Field, gamma: &[f64], wt: &WaveTrain) -> (Vec<Vec<f64>>, f64) {
    let series = wt.series();
    let pts = snapshot.grid.points();
    let field: Vec<Vec<f64>> = series
        .iter()
        .zip(&snapshot.values)
        .map(|(s, u)| {
            pts.iter()
                .zip(gamma)
                .zip(u)
                .map(|((z, g), u)| u - s.eval(z + g))
                .collect()
        })
        .collect();
    let sup = sup_norm(&field);
    (field, sup)
}

/// `u - φ(· + γ(1 + γ_ζ); k₀(1 + γ_ζ))` and its sup-norm, with the profile at
/// off-table wavenumbers taken from the family interpolant.
pub fn residual_refined(
    snapshot: &Field,
    gamma: &[f64],
    k0: f64,
    family: &FamilyInterpolator,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let grid = snapshot.grid;
    let gz = derivative(gamma, grid.length_f64(), 1);
    let max_gz = sup_norm_scalar(&gz);
    let (lo, hi) = family.range();
    if gz.iter().any(|g| !family.contains(k0 * (1.0 + g))) {
        return Err(Error::WavenumberRange {
            k: k0 * (1.0 + max_gz),
            lo,
            hi,
            max_gamma_zeta: max_gz,
        });
    }
    let n = snapshot.components();
    let mut field = vec![vec![0.0; grid.m()]; n];
    let mut phi = vec![0.0; n];
    for (i, z) in grid.points().iter().enumerate() {
        let s = 1.0 + gz[i];
        family.eval(k0 * s, z + gamma[i] * s, &mut phi);
        for c in 0..n {
            field[c][i] = snapshot.values[c][i] - phi[c];
        }
    }
    let sup = sup_norm(&field);
    Ok((field, sup))
}

/// `v(ζ) = u(ζ - γ(ζ)) - φ₀(ζ)` with the inverse phase `γ`.
pub fn inverse_modulated(snapshot: &Field, gamma: &[f64], wt: &WaveTrain) -> Vec<Vec<f64>> {
    let grid = snapshot.grid;
    let pts = grid.points();
    let series = wt.series();
    snapshot
        .values
        .iter()
        .zip(&series)
        .map(|(u, s)| {
            let interp = BandlimitedInterpolator::new(u, grid.length_f64());
            pts.iter()
                .zip(gamma)
                .map(|(z, g)| interp.eval(z - g) - s.eval(*z))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    Power,
    PowerWithLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub model: RateModel,
    pub exponent: f64,
    pub prefactor: f64,
    /// Coefficient of `log log(2 + t)` for the log-corrected model.
    pub log_power: Option<f64>,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub std_error: f64,
    pub r_squared: f64,
}

pub const MIN_FIT_POINTS: usize = 10;
pub const MIN_FIT_DECADES: f64 = 1.5;

/// Least-squares fit of `log v` against `log(1+t)` (and `log log(2+t)`).
pub fn fit_rate(series: &[(f64, f64)], window: (f64, f64), model: RateModel) -> Result<RateFit> {
    let (t_min, t_max) = window;
    if !(t_min >= 0.0 && t_max > t_min) {
        return Err(Error::Usage(format!("bad fit window [{t_min}, {t_max}]")));
    }
    let decades = ((1.0 + t_max) / (1.0 + t_min)).log10();
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= t_min && *t <= t_max)
        .collect();
    if pts.len() < MIN_FIT_POINTS || decades < MIN_FIT_DECADES {
        return Err(Error::Usage(format!(
            "fit window [{t_min}, {t_max}] holds {} points over {decades:.2} decades; need {MIN_FIT_POINTS} over {MIN_FIT_DECADES}",
            pts.len()
        )));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Fit(format!("series value {v} at t = {t} is not positive")));
    }
    let cols = match model {
        RateModel::Power => 2,
        RateModel::PowerWithLog => 3,
    };
    let n = pts.len();
    let x = DMatrix::from_fn(n, cols, |i, j| {
        let t = pts[i].0;
        match j {
            0 => 1.0,
            1 => (1.0 + t).ln(),
            _ => (2.0 + t).ln().ln(),
        }
    });
    let y = DVector::from_iterator(n, pts.iter().map(|p| p.1.ln()));
    let svd = x.clone().svd(true, true);
    let beta = svd
        .solve(&y, 1e-14)
        .map_err(|e| Error::Fit(format!("least squares failed: {e}")))?;
    let resid = &y - &x * &beta;
    let sse = resid.norm_squared();
    let ybar = y.mean();
    let sst = y.iter().map(|v| (v - ybar).powi(2)).sum::<f64>();
    let r_squared = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    let dof = (n - cols) as f64;
    let cov = (x.transpose() * &x)
        .try_inverse()
        .ok_or_else(|| Error::Fit("singular regression matrix".into()))?;
    let std_error = (sse / dof * cov[(1, 1)]).max(0.0).sqrt();
    Ok(RateFit {
        model,
        exponent: beta[1],
        prefactor: beta[0].exp(),
        log_power: (cols == 3).then(|| beta[2]),
        t_min,
        t_max,
        points: n,
        std_error,
        r_squared,
    })
}

/// Per-snapshot norms of a verification run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub t: f64,
    pub w_ring: f64,
    pub y_ring: f64,
    pub v_inv: f64,
    pub gamma_diff_sup: f64,
    pub gamma_zeta_diff_sup: f64,
    pub gamma_sup: f64,
    pub gamma_zeta_sup: f64,
    pub u_sup: f64,
    pub extraction_misfit: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub rows: Vec<ResidualRow>,
}

impl ResidualSeries {
    pub fn column(&self, f: impl Fn(&ResidualRow) -> f64) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.t, f(r))).collect()
    }
}

/// Norms of one snapshot given its forward phase and the prediction `γ̆`.
pub fn residual_row(
    snapshot: &Field,
    extraction_misfit: f64,
    gamma_forward: &[f64],
    prediction: &[f64],
    wt: &WaveTrain,
    family: &FamilyInterpolator,
) -> Result<ResidualRow> {
    let grid = snapshot.grid;
    let l = grid.length_f64();
    let gz = derivative(gamma_forward, l, 1);
    let pz = derivative(prediction, l, 1);
    let inv = inverse_phase(gamma_forward, &grid)?;
    let (_, w_ring) = residual_plain(snapshot, gamma_forward, wt);
    let (_, y_ring) = residual_refined(snapshot, &inv, wt.k, family)?;
    let v = inverse_modulated(snapshot, &inv, wt);
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok(ResidualRow {
        t: snapshot.time,
        w_ring,
        y_ring,
        v_inv: sup_norm(&v),
        gamma_diff_sup: diff(gamma_forward, prediction),
        gamma_zeta_diff_sup: diff(&gz, &pz),
        gamma_sup: sup_norm_scalar(gamma_forward),
        gamma_zeta_sup: sup_norm_scalar(&gz),
        u_sup: snapshot.sup_norm(),
        extraction_misfit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    /// Fit window; `None` means `[20, T/2]`.
    pub window: Option<(f64, f64)>,
    /// Series whose sup over the window stays below this are at machine level
    /// and pass trivially.
    pub trivial_level: f64,
    /// Runs with `E₀` above this are labelled out of hypothesis.
    pub e0_hypothesis: f64,
    pub gamma_slope: (f64, f64),
    pub decay_exponent: (f64, f64),
    pub refined_exponent: (f64, f64),
    pub gamma_zeta_diff_max: f64,
    pub gamma_diff_ratio: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            window: None,
            trivial_level: 1e-9,
            e0_hypothesis: 0.2,
            gamma_slope: (-0.2, 0.05),
            decay_exponent: (-0.6, -0.4),
            refined_exponent: (-1.2, -0.8),
            gamma_zeta_diff_max: -0.4,
            gamma_diff_ratio: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: String,
    pub description: String,
    pub passed: bool,
    pub trivial: bool,
    pub measured: Option<f64>,
    pub bounds: (f64, f64),
    pub fit: Option<RateFit>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub passed: bool,
    pub out_of_hypothesis: bool,
    pub e0: f64,
    pub window: (f64, f64),
    pub criteria: Vec<Criterion>,
    /// Range of `‖v‖∞ / (‖ẘ‖∞ + ‖γ_ζ‖∞)` over the run.
    pub equivalence_ratio: Option<(f64, f64)>,
    /// Fraction of windowed times with `y_ring ≤ w_ring`.
    pub refined_better_fraction: f64,
}

/// Everything the report needs beyond the residual series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub t_final: f64,
    pub e0: f64,
    pub phi0_sup: f64,
    pub gamma0_sup: f64,
    pub blew_up: bool,
}

fn rate_criterion(
    id: &str,
    description: &str,
    series: &[(f64, f64)],
    window: (f64, f64),
    model: RateModel,
    bounds: (f64, f64),
    trivial_level: f64,
) -> Criterion {
    let windowed_max = series
        .iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .map(|p| p.1)
        .fold(0.0, f64::max);
    let mut c = Criterion {
        id: id.into(),
        description: description.into(),
        passed: false,
        trivial: false,
        measured: None,
        bounds,
        fit: None,
        note: None,
    };
    if windowed_max < trivial_level {
        c.passed = true;
        c.trivial = true;
        c.note = Some(format!("machine-level norm {windowed_max:.2e}"));
        return c;
    }
    match fit_rate(series, window, model) {
        Ok(fit) => {
            c.measured = Some(fit.exponent);
            c.passed = fit.exponent >= bounds.0 && fit.exponent <= bounds.1;
            c.fit = Some(fit);
        }
        Err(e) => c.note = Some(e.to_string()),
    }
    c
}

fn merge(id: &str, description: &str, parts: Vec<Criterion>) -> Criterion {
    let passed = parts.iter().all(|c| c.passed);
    let worst = parts
        .iter()
        .find(|c| !c.passed)
        .or(parts.first())
        .expect("at least one part");
    Criterion {
        id: id.into(),
        description: description.into(),
        passed,
        trivial: parts.iter().all(|c| c.trivial),
        measured: worst.measured,
        bounds: worst.bounds,
        fit: worst.fit.clone(),
        note: Some(
            parts
                .iter()
                .map(|c| match c.measured {
                    Some(m) => format!("{}: {m:.4}", c.description),
                    None => format!("{}: {}", c.description, c.note.clone().unwrap_or_default()),
                })
                .collect::<Vec<_>>()
                .join("; "),
        ),
    }
}

/// The six-criterion report on a finished run.
pub fn verify_theorem(series: &ResidualSeries, run: &RunSummary, cfg: &VerifyConfig) -> Result<TheoremReport> {
    if series.rows.is_empty() {
        return Err(Error::Dependency("no residual series to verify".into()));
    }
    let window = cfg.window.unwrap_or((20.0, 0.5 * run.t_final));
    let tl = cfg.trivial_level;

    let bound = 2.0 * (run.phi0_sup + run.e0 + 1.0);
    let u_max = series.rows.iter().map(|r| r.u_sup).fold(0.0, f64::max);
    let no_blowup = !run.blew_up && u_max.is_finite() && u_max <= bound;
    let c1 = Criterion {
        id: "i".into(),
        description: "no blow-up".into(),
        passed: no_blowup,
        trivial: false,
        measured: Some(u_max),
        bounds: (0.0, bound),
        fit: None,
        note: run.blew_up.then(|| "integration blew up".into()),
    };
    let c2 = rate_criterion(
        "ii",
        "gamma bounded",
        &series.column(|r| r.gamma_sup),
        window,
        RateModel::Power,
        cfg.gamma_slope,
        tl,
    );
    let c3 = merge(
        "iii",
        "gamma_zeta and w_ring decay",
        vec![
            rate_criterion(
                "iii",
                "gamma_zeta",
                &series.column(|r| r.gamma_zeta_sup),
                window,
                RateModel::Power,
                cfg.decay_exponent,
                tl,
            ),
            rate_criterion(
                "iii",
                "w_ring",
                &series.column(|r| r.w_ring),
                window,
                RateModel::Power,
                cfg.decay_exponent,
                tl,
            ),
        ],
    );
    let c4 = rate_criterion(
        "iv",
        "refined residual decay",
        &series.column(|r| r.y_ring),
        window,
        RateModel::PowerWithLog,
        cfg.refined_exponent,
        tl,
    );
    let mut c5 = rate_criterion(
        "v",
        "gamma - prediction bounded",
        &series.column(|r| r.gamma_diff_sup),
        window,
        RateModel::Power,
        cfg.gamma_slope,
        tl,
    );
    let last = series.rows.last().expect("nonempty");
    if !c5.trivial {
        let ratio = if run.gamma0_sup > 0.0 {
            last.gamma_diff_sup / run.gamma0_sup
        } else {
            f64::INFINITY
        };
        let ok = ratio < cfg.gamma_diff_ratio;
        c5.passed &= ok;
        c5.note = Some(format!(
            "final ratio to ||gamma0|| = {ratio:.4} (limit {})",
            cfg.gamma_diff_ratio
        ));
    }
    let c6 = rate_criterion(
        "vi",
        "gamma_zeta - prediction decay",
        &series.column(|r| r.gamma_zeta_diff_sup),
        window,
        RateModel::Power,
        (f64::NEG_INFINITY, cfg.gamma_zeta_diff_max),
        tl,
    );
    let criteria = vec![c1, c2, c3, c4, c5, c6];

    let ratios: Vec<f64> = series
        .rows
        .iter()
        .filter(|r| r.w_ring + r.gamma_zeta_sup > tl)
        .map(|r| r.v_inv / (r.w_ring + r.gamma_zeta_sup))
        .collect();
    let equivalence_ratio = (!ratios.is_empty()).then(|| {
        (
            ratios.iter().copied().fold(f64::INFINITY, f64::min),
            ratios.iter().copied().fold(0.0, f64::max),
        )
    });
    let windowed: Vec<&ResidualRow> = series
        .rows
        .iter()
        .filter(|r| r.t >= window.0 && r.t <= window.1)
        .collect();
    let refined_better_fraction = if windowed.is_empty() {
        0.0
    } else {
        windowed.iter().filter(|r| r.y_ring <= r.w_ring).count() as f64 / windowed.len() as f64
    };
    Ok(TheoremReport {
        passed: criteria.iter().all(|c| c.passed),
        out_of_hypothesis: run.e0 > cfg.e0_hypothesis,
        e0: run.e0,
        window,
        criteria,
        equivalence_ratio,
        refined_better_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_exact_power() {
        let s: Vec<(f64, f64)> = (0..=200)
            .map(|i| i as f64 * 10.0)
            .map(|t| (t, 3.0 / (1.0 + t).sqrt()))
            .collect();
        let f = fit_rate(&s, (10.0, 2000.0), RateModel::Power).unwrap();
        assert!((f.exponent + 0.5).abs() < 1e-10);
        assert!((f.prefactor - 3.0).abs() < 1e-9);
        assert!(f.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn fit_window_rules() {
        let s: Vec<(f64, f64)> = (0..=100).map(|i| (i as f64, 1.0)).collect();
        assert!(matches!(
            fit_rate(&s, (20.0, 50.0), RateModel::Power),
            Err(Error::Usage(_))
        ));
        let sparse: Vec<(f64, f64)> = (0..5).map(|i| (10f64.powi(i), 1.0)).collect();
        assert!(matches!(
            fit_rate(&sparse, (0.0, 1e4), RateModel::Power),
            Err(Error::Usage(_))
        ));
        let zero: Vec<(f64, f64)> = (0..=100).map(|i| (i as f64 * 10.0, 0.0)).collect();
        assert!(matches!(
            fit_rate(&zero, (10.0, 1000.0), RateModel::Power),
            Err(Error::Fit(_))
        ));
    }

    #[test]
    fn curvature_correction_single_mode() {
        let m = 256;
        let l = 256.0;
        let kappa = 2.0 * std::f64::consts::PI / l;
        let sigma = 4.0;
        // Window average of cos(κζ) is e^{-σ²κ²/2} cos(κζ).
        let avg: Vec<f64> = (0..m)
            .map(|i| (-0.5 * (sigma * kappa).powi(2)).exp() * (kappa * i as f64).cos())
            .collect();
        let c = curvature_correct(&avg, l, sigma);
        let raw_err = avg
            .iter()
            .enumerate()
            .map(|(i, v)| (v - (kappa * i as f64).cos()).abs())
            .fold(0.0, f64::max);
        let err = c
            .iter()
            .enumerate()
            .map(|(i, v)| (v - (kappa * i as f64).cos()).abs())
            .fold(0.0, f64::max);
        assert!(raw_err > 4e-3);
        assert!(err < 1e-4, "{err}");
    }
}
