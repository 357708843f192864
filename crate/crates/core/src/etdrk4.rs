//! Fourth-order exponential time differencing (Kassam–Trefethen) for
//! `v̂_t = Λ v̂ + N̂(v̂)` with a diagonal linear symbol.
//!
//! The φ-function coefficients are evaluated by contour averages so that they
//! stay accurate for `hΛ → 0`.

use num_complex::Complex64;

type C = Complex64;

const CONTOUR_POINTS: usize = 64;

/// Per-mode coefficients for one fixed step size.
#[derive(Debug, Clone)]
pub struct Etdrk4 {
    pub dt: f64,
    e: Vec<C>,
    e2: Vec<C>,
    q: Vec<C>,
    f1: Vec<C>,
    f2: Vec<C>,
    f3: Vec<C>,
    mask: Vec<f64>,
}

/// Scratch buffers for a step.
#[derive(Debug, Clone)]
pub struct Workspace {
    nv: Vec<C>,
    a: Vec<C>,
    na: Vec<C>,
    b: Vec<C>,
    nb: Vec<C>,
    c: Vec<C>,
    nc: Vec<C>,
}

impl Workspace {
    pub fn new(len: usize) -> Self {
        let z = vec![C::new(0.0, 0.0); len];
        Self {
            nv: z.clone(),
            a: z.clone(),
            na: z.clone(),
            b: z.clone(),
            nb: z.clone(),
            c: z.clone(),
            nc: z,
        }
    }
}

impl Etdrk4 {
    /// `symbol[i]` is the linear multiplier of unknown `i`; `mask[i]` multiplies
    /// the nonlinear term (1 keeps it, 0 dealiases it away).
    pub fn new(symbol: &[C], mask: Vec<f64>, dt: f64) -> Self {
        assert_eq!(symbol.len(), mask.len());
        let roots: Vec<C> = (1..=CONTOUR_POINTS)
            .map(|j| C::from_polar(1.0, std::f64::consts::PI * (j as f64 - 0.5) / CONTOUR_POINTS as f64))
            .collect();
        let len = symbol.len();
        let mut e = Vec::with_capacity(len);
        let mut e2 = Vec::with_capacity(len);
        let mut q = Vec::with_capacity(len);
        let mut f1 = Vec::with_capacity(len);
        let mut f2 = Vec::with_capacity(len);
        let mut f3 = Vec::with_capacity(len);
        for &l in symbol {
            let z = l * dt;
            e.push(z.exp());
            e2.push((z / 2.0).exp());
            let (mut sq, mut s1, mut s2, mut s3) = (C::default(), C::default(), C::default(), C::default());
            // Full circle: the symbol may be complex, so the conjugate-symmetry
            // shortcut of the real case does not apply.
            for r in roots.iter().flat_map(|r| [*r, -*r]) {
                let lr = z + r;
                let el = lr.exp();
                let lr3 = lr * lr * lr;
                sq += ((lr / 2.0).exp() - 1.0) / lr;
                s1 += (-4.0 - lr + el * (4.0 - 3.0 * lr + lr * lr)) / lr3;
                s2 += (2.0 + lr + el * (lr - 2.0)) / lr3;
                s3 += (-4.0 - 3.0 * lr - lr * lr + el * (4.0 - lr)) / lr3;
            }
            let inv = dt / (2 * CONTOUR_POINTS) as f64;
            q.push(sq * inv);
            f1.push(s1 * inv);
            f2.push(s2 * inv);
            f3.push(s3 * inv);
        }
        Self {
            dt,
            e,
            e2,
            q,
            f1,
            f2,
            f3,
            mask,
        }
    }

    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }

    /// One step. `nonlinear(v, out)` writes `N̂(v)`; masking is applied here.
    pub fn step<F>(&self, v: &mut [C], ws: &mut Workspace, nonlinear: &mut F)
    where
        F: FnMut(&[C], &mut [C]),
    {
        let len = self.len();
        let masked = |out: &mut [C], mask: &[f64]| {
            for (o, m) in out.iter_mut().zip(mask) {
                *o *= *m;
            }
        };
        nonlinear(v, &mut ws.nv);
        masked(&mut ws.nv, &self.mask);
        for i in 0..len {
            ws.a[i] = self.e2[i] * v[i] + self.q[i] * ws.nv[i];
        }
        nonlinear(&ws.a, &mut ws.na);
        masked(&mut ws.na, &self.mask);
        for i in 0..len {
            ws.b[i] = self.e2[i] * v[i] + self.q[i] * ws.na[i];
        }
        nonlinear(&ws.b, &mut ws.nb);
        masked(&mut ws.nb, &self.mask);
        for i in 0..len {
            ws.c[i] = self.e2[i] * ws.a[i] + self.q[i] * (2.0 * ws.nb[i] - ws.nv[i]);
        }
        nonlinear(&ws.c, &mut ws.nc);
        masked(&mut ws.nc, &self.mask);
        for i in 0..len {
            v[i] = self.e[i] * v[i]
                + ws.nv[i] * self.f1[i]
                + 2.0 * (ws.na[i] + ws.nb[i]) * self.f2[i]
                + ws.nc[i] * self.f3[i];
        }
    }
}

/// 2/3-rule mask for an FFT of length `m` (modes with `|j| > m/3` removed).
pub fn two_thirds_mask(m: usize) -> Vec<f64> {
    (0..m)
        .map(|j| {
            let s = crate::spectral::signed_index(j, m).unsigned_abs() as usize;
            if 3 * s > m {
                0.0
            } else {
                1.0
            }
        })
        .collect()
}
