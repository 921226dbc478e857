//! The conformal factor `μ` of a metric `g = e^{2μ}(dx² + dy²)` on `R²/Γ`,
//! stored as a finite Fourier series over the dual lattice, and its pointwise
//! differential invariants.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// One Fourier term `amp · exp(2πi (k1 s + k2 t))` in lattice coordinates `(s, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub k: (i32, i32),
    pub amp: Complex64,
}

#[derive(Debug, Clone, Copy)]
struct HalfMode {
    k: (i32, i32),
    omega: [f64; 2],
    amp: Complex64,
}

/// Γ-periodic conformal factor `μ`.
#[derive(Debug, Clone)]
pub struct ConformalFactor {
    lattice: Lattice,
    modes: BTreeMap<(i32, i32), Complex64>,
    mean: f64,
    half: Vec<HalfMode>,
    max_degree: u32,
}

/// `μ` and its partial derivatives up to order three at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricJet {
    pub mu: f64,
    pub mu_x: f64,
    pub mu_y: f64,
    pub mu_xx: f64,
    pub mu_xy: f64,
    pub mu_yy: f64,
    pub mu_xxx: f64,
    pub mu_xxy: f64,
    pub mu_xyy: f64,
    pub mu_yyy: f64,
}

/// Christoffel symbols `Γ^i_{jk}` of a conformal metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Christoffels {
    pub g1_11: f64,
    pub g1_12: f64,
    pub g1_22: f64,
    pub g2_11: f64,
    pub g2_12: f64,
    pub g2_22: f64,
}

impl Christoffels {
    /// `Γ^i_{jk}` with zero-based indices.
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        match (i, j.min(k), j.max(k)) {
            (0, 0, 0) => self.g1_11,
            (0, 0, 1) => self.g1_12,
            (0, 1, 1) => self.g1_22,
            (1, 0, 0) => self.g2_11,
            (1, 0, 1) => self.g2_12,
            (1, 1, 1) => self.g2_22,
            _ => panic!("index out of range"),
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.g1_11, self.g1_12, self.g1_22, self.g2_11, self.g2_12, self.g2_22]
    }
}

impl MetricJet {
    pub fn lambda(&self) -> f64 {
        (2.0 * self.mu).exp()
    }

    pub fn christoffels(&self) -> Christoffels {
        christoffels(self)
    }

    /// Gaussian curvature `K = -e^{-2μ} Δμ`.
    pub fn curvature(&self) -> f64 {
        -(-2.0 * self.mu).exp() * (self.mu_xx + self.mu_yy)
    }
}

/// Christoffel symbols of `e^{2μ}(dx² + dy²)` from the first derivatives of `μ`.
pub fn christoffels(jet: &MetricJet) -> Christoffels {
    Christoffels {
        g1_11: jet.mu_x,
        g1_12: jet.mu_y,
        g1_22: -jet.mu_x,
        g2_11: -jet.mu_y,
        g2_12: jet.mu_x,
        g2_22: jet.mu_y,
    }
}

/// All partial derivatives `∂x^a ∂y^b μ` with `a + b <= 4`, indexed `d[a][b]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Partials4 {
    pub d: [[f64; 5]; 5],
}

impl ConformalFactor {
    /// Flat metric `μ ≡ 0`.
    pub fn flat(lattice: Lattice) -> Self {
        Self::from_map(lattice, BTreeMap::new()).expect("empty table is hermitian")
    }

    /// Builds `μ` from a table that must already be Hermitian.
    pub fn new(lattice: Lattice, modes: impl IntoIterator<Item = FourierMode>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for m in modes {
            *map.entry(m.k).or_insert(Complex64::new(0.0, 0.0)) += m.amp;
        }
        for (&(k1, k2), &a) in &map {
            let partner = map.get(&(-k1, -k2)).copied().unwrap_or(Complex64::new(0.0, 0.0));
            if (partner - a.conj()).norm() > 1e-14 * (1.0 + a.norm()) {
                return Err(Error::NotHermitian(k1, k2));
            }
        }
        Self::from_map(lattice, map)
    }

    /// Builds `μ` from a half-space listing; the conjugate partners are
    /// filled in. Entries listed on both sides must agree.
    pub fn with_hermitian_closure(lattice: Lattice, modes: impl IntoIterator<Item = FourierMode>) -> Result<Self> {
        let mut map: BTreeMap<(i32, i32), Complex64> = BTreeMap::new();
        for m in modes {
            let (k1, k2) = m.k;
            if k1 == 0 && k2 == 0 {
                if m.amp.im.abs() > 1e-14 {
                    return Err(Error::NotHermitian(0, 0));
                }
            }
            for (key, val) in [((k1, k2), m.amp), ((-k1, -k2), m.amp.conj())] {
                match map.get(&key) {
                    Some(prev) if (prev - val).norm() > 1e-14 * (1.0 + val.norm()) => {
                        return Err(Error::NotHermitian(key.0, key.1));
                    }
                    _ => {
                        map.insert(key, val);
                    }
                }
            }
        }
        Self::from_map(lattice, map)
    }

    fn from_map(lattice: Lattice, mut map: BTreeMap<(i32, i32), Complex64>) -> Result<Self> {
        map.retain(|_, a| a.norm() > 0.0);
        let mean = map.get(&(0, 0)).map(|a| a.re).unwrap_or(0.0);
        let mut half = Vec::new();
        let mut max_degree = 0u32;
        for (&(k1, k2), &amp) in &map {
            if (k1, k2) == (0, 0) {
                continue;
            }
            max_degree = max_degree.max(k1.unsigned_abs()).max(k2.unsigned_abs());
            if k1 > 0 || (k1 == 0 && k2 > 0) {
                half.push(HalfMode {
                    k: (k1, k2),
                    omega: lattice.wavevector(k1, k2),
                    amp,
                });
            }
        }
        Ok(Self {
            lattice,
            modes: map,
            mean,
            half,
            max_degree,
        })
    }

    /// Fits `μ = ½ log λ` for a positive periodic `λ` given pointwise, keeping
    /// Fourier amplitudes above `cutoff`. Used to represent metrics such as
    /// Liouville metrics whose conformal factor is not a trigonometric polynomial.
    pub fn fit_from_lambda(lattice: Lattice, n: usize, cutoff: f64, lambda: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let p = lattice.point(i as f64 / n as f64, j as f64 / n as f64);
                let l = lambda(p);
                if !(l > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "lambda must be positive, got {l} at {p:?}"
                    )));
                }
                data[i * n + j] = Complex64::new(0.5 * l.ln(), 0.0);
            }
        }
        fft2(&mut data, n, false);
        let scale = 1.0 / (n * n) as f64;
        let half_n = (n / 2) as i32;
        let mut modes = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let k1 = signed_freq(i, n);
                let k2 = signed_freq(j, n);
                if k1.abs() >= half_n || k2.abs() >= half_n {
                    continue;
                }
                let a = data[i * n + j] * scale;
                if a.norm() > cutoff {
                    modes.push(FourierMode { k: (k1, k2), amp: a });
                }
            }
        }
        // symmetrize against round-off before the hermitian check
        let mut map: BTreeMap<(i32, i32), Complex64> = BTreeMap::new();
        for m in &modes {
            map.insert(m.k, m.amp);
        }
        let keys: Vec<_> = map.keys().copied().collect();
        for (k1, k2) in keys {
            let a = map[&(k1, k2)];
            let b = map.get(&(-k1, -k2)).copied().unwrap_or(a.conj());
            let avg = 0.5 * (a + b.conj());
            map.insert((k1, k2), avg);
            map.insert((-k1, -k2), avg.conj());
        }
        if let Some(z) = map.get_mut(&(0, 0)) {
            z.im = 0.0;
        }
        Self::from_map(lattice, map)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Full Hermitian coefficient table.
    pub fn modes(&self) -> Vec<FourierMode> {
        self.modes.iter().map(|(&k, &amp)| FourierMode { k, amp }).collect()
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    /// True when `μ` is constant.
    pub fn is_flat(&self) -> bool {
        self.half.is_empty()
    }

    /// Default fundamental-domain grid size `max(128, 4·max_degree)`.
    pub fn default_grid_n(&self) -> usize {
        128.max(4 * self.max_degree as usize)
    }

    /// Smallest admissible grid size `4·max_degree` (at least 8).
    pub fn min_grid_n(&self) -> usize {
        8.max(4 * self.max_degree as usize)
    }

    /// Calls `f` with every half-space mode and its term `amp · e^{iω·p}`.
    /// Long series take the phases from per-axis tables in lattice
    /// coordinates, which needs `O(max_degree)` sines instead of one per mode.
    fn for_each_term(&self, p: [f64; 2], mut f: impl FnMut(&HalfMode, Complex64)) {
        let d = self.max_degree as usize;
        if self.half.len() <= 4 * d + 2 {
            for m in &self.half {
                let ph = m.omega[0] * p[0] + m.omega[1] * p[1];
                f(m, m.amp * Complex64::from_polar(1.0, ph));
            }
            return;
        }
        let st = self.lattice.coords(p);
        let table = |x: f64| -> Vec<Complex64> {
            (0..=2 * d)
                .map(|i| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (i as f64 - d as f64) * x))
                .collect()
        };
        let (z1, z2) = (table(st[0]), table(st[1]));
        for m in &self.half {
            let e = z1[(m.k.0 + d as i32) as usize] * z2[(m.k.1 + d as i32) as usize];
            f(m, m.amp * e);
        }
    }

    pub fn value(&self, p: [f64; 2]) -> f64 {
        let mut v = self.mean;
        self.for_each_term(p, |_, e| v += 2.0 * e.re);
        v
    }

    /// Evaluates the full complex series (before discarding the imaginary
    /// part). For a Hermitian table the imaginary part is round-off.
    pub fn value_complex(&self, p: [f64; 2]) -> Complex64 {
        let mut v = Complex64::new(0.0, 0.0);
        for (&(k1, k2), &a) in &self.modes {
            let w = self.lattice.wavevector(k1, k2);
            let ph = w[0] * p[0] + w[1] * p[1];
            v += a * Complex64::from_polar(1.0, ph);
        }
        v
    }

    /// `(μ, μ_x, μ_y)`.
    pub fn gradient(&self, p: [f64; 2]) -> (f64, f64, f64) {
        let (mut v, mut vx, mut vy) = (self.mean, 0.0, 0.0);
        self.for_each_term(p, |m, e| {
            v += 2.0 * e.re;
            vx -= 2.0 * m.omega[0] * e.im;
            vy -= 2.0 * m.omega[1] * e.im;
        });
        (v, vx, vy)
    }

    /// Analytic jet of `μ` to order three.
    pub fn jet(&self, p: [f64; 2]) -> MetricJet {
        let d = self.partials(p, 3);
        MetricJet {
            mu: d.d[0][0],
            mu_x: d.d[1][0],
            mu_y: d.d[0][1],
            mu_xx: d.d[2][0],
            mu_xy: d.d[1][1],
            mu_yy: d.d[0][2],
            mu_xxx: d.d[3][0],
            mu_xxy: d.d[2][1],
            mu_xyy: d.d[1][2],
            mu_yyy: d.d[0][3],
        }
    }

    /// All partials `∂x^a ∂y^b μ` with `a + b <= order` (order at most 4).
    pub fn partials(&self, p: [f64; 2], order: usize) -> Partials4 {
        assert!(order <= 4);
        let mut out = Partials4::default();
        out.d[0][0] = self.mean;
        self.for_each_term(p, |m, e| {
            // Re((iωx)^a (iωy)^b e) = ωx^a ωy^b Re(i^{a+b} e), doubled
            let r = [2.0 * e.re, -2.0 * e.im, -2.0 * e.re, 2.0 * e.im];
            let mut pa = 1.0;
            for a in 0..=order {
                let mut pab = pa;
                for b in 0..=(order - a) {
                    out.d[a][b] += pab * r[(a + b) & 3];
                    pab *= m.omega[1];
                }
                pa *= m.omega[0];
            }
        });
        out
    }

    pub fn lambda(&self, p: [f64; 2]) -> f64 {
        (2.0 * self.value(p)).exp()
    }

    pub fn christoffels(&self, p: [f64; 2]) -> Christoffels {
        christoffels(&self.jet(p))
    }

    /// Gaussian curvature `K = -e^{-2μ}(μ_xx + μ_yy)`.
    pub fn gaussian_curvature(&self, p: [f64; 2]) -> f64 {
        let d = self.partials(p, 2);
        -(-2.0 * d.d[0][0]).exp() * (d.d[2][0] + d.d[0][2])
    }

    /// `(μ, K, K_x, K_y)` from a single pass over the series.
    pub fn mu_and_curvature_gradient(&self, p: [f64; 2]) -> (f64, f64, f64, f64) {
        let d = self.partials(p, 3);
        let (k, kx, ky) = curvature_from_partials(&d).0;
        (d.d[0][0], k, kx, ky)
    }

    /// `(K, K_x, K_y)` with coordinate partial derivatives.
    pub fn curvature_gradient(&self, p: [f64; 2]) -> (f64, f64, f64) {
        let d = self.partials(p, 3);
        curvature_from_partials(&d).0
    }

    /// `(K, ∇K, Hess K)` with coordinate partial derivatives;
    /// the Hessian is returned as `[K_xx, K_xy, K_yy]`.
    pub fn curvature_hessian(&self, p: [f64; 2]) -> ((f64, f64, f64), [f64; 3]) {
        let d = self.partials(p, 4);
        curvature_from_partials(&d)
    }

    /// The same metric in coordinates `z'` with `z = a z'`: the lattice
    /// becomes `Γ / a` and `μ'(z') = μ(a z') + log|a|`.
    pub fn transformed(&self, a: Complex64) -> Result<Self> {
        if a.norm() == 0.0 {
            return Err(Error::InvalidArgument("a must be nonzero".into()));
        }
        let lattice = self.lattice.transformed(a)?;
        let mut map = self.modes.clone();
        let z = map.entry((0, 0)).or_insert(Complex64::new(0.0, 0.0));
        z.re += a.norm().ln();
        Self::from_map(lattice, map)
    }

    /// Same Fourier table with every amplitude multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let map = self.modes.iter().map(|(&k, &a)| (k, a * s)).collect();
        Self::from_map(self.lattice, map).expect("scaling keeps hermitian symmetry")
    }
}

fn curvature_from_partials(d: &Partials4) -> ((f64, f64, f64), [f64; 3]) {
    let mu = d.d[0][0];
    let (mx, my) = (d.d[1][0], d.d[0][1]);
    let (mxx, mxy, myy) = (d.d[2][0], d.d[1][1], d.d[0][2]);
    let l = mxx + myy;
    let lx = d.d[3][0] + d.d[1][2];
    let ly = d.d[2][1] + d.d[0][3];
    let lxx = d.d[4][0] + d.d[2][2];
    let lxy = d.d[3][1] + d.d[1][3];
    let lyy = d.d[2][2] + d.d[0][4];
    let e = (-2.0 * mu).exp();
    let k = -e * l;
    let kx = -e * (lx - 2.0 * mx * l);
    let ky = -e * (ly - 2.0 * my * l);
    let kxx = -e * (lxx - 4.0 * mx * lx - 2.0 * mxx * l + 4.0 * mx * mx * l);
    let kyy = -e * (lyy - 4.0 * my * ly - 2.0 * myy * l + 4.0 * my * my * l);
    let kxy = -e * (lxy - 2.0 * mx * ly - 2.0 * my * lx - 2.0 * mxy * l + 4.0 * mx * my * l);
    ((k, kx, ky), [kxx, kxy, kyy])
}

pub(crate) fn signed_freq(i: usize, n: usize) -> i32 {
    if i <= n / 2 {
        i as i32
    } else {
        i as i32 - n as i32
    }
}

/// In-place unnormalized 2D FFT of a row-major `n × n` array.
pub(crate) fn fft2(data: &mut [Complex64], n: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    for row in data.chunks_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = data[i * n + j];
        }
        fft.process(&mut col);
        for i in 0..n {
            data[i * n + j] = col[i];
        }
    }
}
