//! Uniform periodic grids on the fundamental domain and FFT-based spectral
//! differentiation.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::lattice::Lattice;
use crate::metric::{signed_freq, ConformalFactor};

/// `N × N` grid uniform in lattice coordinates; sample `(i, j)` sits at
/// `(i/N) e1 + (j/N) e2` and is stored at index `i N + j`.
#[derive(Clone)]
pub struct Grid {
    lattice: Lattice,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    kx: Vec<f64>,
    ky: Vec<f64>,
    nyquist: Vec<bool>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("lattice", &self.lattice)
            .field("n", &self.n)
            .finish()
    }
}

impl Grid {
    pub fn new(lattice: Lattice, n: usize) -> Self {
        assert!(n >= 4 && n % 2 == 0, "grid size must be even and >= 4");
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut kx = vec![0.0; n * n];
        let mut ky = vec![0.0; n * n];
        let mut nyquist = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                let w = lattice.wavevector(signed_freq(i, n), signed_freq(j, n));
                kx[i * n + j] = w[0];
                ky[i * n + j] = w[1];
                nyquist[i * n + j] = i == n / 2 || j == n / 2;
            }
        }
        Self {
            lattice,
            n,
            fwd,
            inv,
            kx,
            ky,
            nyquist,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn area(&self) -> f64 {
        self.lattice.area()
    }

    pub fn point(&self, idx: usize) -> [f64; 2] {
        let (i, j) = (idx / self.n, idx % self.n);
        self.lattice.point(i as f64 / self.n as f64, j as f64 / self.n as f64)
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64 + Sync) -> Vec<f64> {
        (0..self.len()).into_par_iter().map(|k| f(self.point(k))).collect()
    }

    /// Wave vector of Fourier slot `idx`.
    pub fn wavevector(&self, idx: usize) -> [f64; 2] {
        [self.kx[idx], self.ky[idx]]
    }

    pub fn is_nyquist(&self, idx: usize) -> bool {
        self.nyquist[idx]
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let plan = if inverse { &self.inv } else { &self.fwd };
        data.par_chunks_mut(n).for_each(|row| plan.process(row));
        let mut t = vec![Complex64::new(0.0, 0.0); n * n];
        transpose(data, &mut t, n);
        t.par_chunks_mut(n).for_each(|row| plan.process(row));
        transpose(&t, data, n);
    }

    /// Fourier coefficients normalized so that `f = Σ c_k e^{iω_k·x}`.
    pub fn fft(&self, f: &[f64]) -> Vec<Complex64> {
        assert_eq!(f.len(), self.len());
        let mut data: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft_complex_in_place(&mut data);
        data
    }

    pub fn fft_complex_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, false);
        let s = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|c| *c *= s);
    }

    /// Inverse of [`Grid::fft`], complex output.
    pub fn ifft_complex_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    /// Inverse of [`Grid::fft`], keeping the real part.
    pub fn ifft_real(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut data, true);
        data.into_iter().map(|c| c.re).collect()
    }

    /// Applies the Fourier multiplier `sym(ω)` to a real field. When `odd` is
    /// set the Nyquist row and column are dropped so the result stays real.
    pub fn apply_symbol(&self, f: &[f64], odd: bool, sym: impl Fn([f64; 2]) -> Complex64 + Sync) -> Vec<f64> {
        let mut c = self.fft(f);
        self.mul_symbol(&mut c, odd, &sym);
        self.ifft_real(c)
    }

    fn mul_symbol(&self, c: &mut [Complex64], odd: bool, sym: &(impl Fn([f64; 2]) -> Complex64 + Sync)) {
        c.par_iter_mut().enumerate().for_each(|(k, v)| {
            if odd && self.nyquist[k] {
                *v = Complex64::new(0.0, 0.0);
            } else {
                *v *= sym([self.kx[k], self.ky[k]]);
            }
        });
    }

    pub fn dx(&self, f: &[f64]) -> Vec<f64> {
        self.apply_symbol(f, true, |w| Complex64::new(0.0, w[0]))
    }

    pub fn dy(&self, f: &[f64]) -> Vec<f64> {
        self.apply_symbol(f, true, |w| Complex64::new(0.0, w[1]))
    }

    /// `(∂x f, ∂y f)` from one forward transform.
    pub fn gradient(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let c = self.fft(f);
        let mut cx = c.clone();
        let mut cy = c;
        self.mul_symbol(&mut cx, true, &|w: [f64; 2]| Complex64::new(0.0, w[0]));
        self.mul_symbol(&mut cy, true, &|w: [f64; 2]| Complex64::new(0.0, w[1]));
        (self.ifft_real(cx), self.ifft_real(cy))
    }

    /// Flat Laplacian `∂x² + ∂y²`.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        self.apply_symbol(f, false, |w| Complex64::new(-(w[0] * w[0] + w[1] * w[1]), 0.0))
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() / f.len() as f64
    }

    /// `∫ f dx dy` over one fundamental domain.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.mean(f) * self.area()
    }

    /// Evaluates the trigonometric interpolant of `f` at an arbitrary point.
    pub fn interpolate(&self, coeffs: &[Complex64], p: [f64; 2]) -> f64 {
        let mut s = 0.0;
        for (k, c) in coeffs.iter().enumerate() {
            if self.nyquist[k] {
                continue;
            }
            let ph = self.kx[k] * p[0] + self.ky[k] * p[1];
            s += (c * Complex64::from_polar(1.0, ph)).re;
        }
        s
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const B: usize = 16;
    for ib in (0..n).step_by(B) {
        for jb in (0..n).step_by(B) {
            for i in ib..(ib + B).min(n) {
                for j in jb..(jb + B).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}

/// A grid together with the metric sampled on it.
#[derive(Debug, Clone)]
pub struct MetricGrid {
    pub grid: Grid,
    pub cf: ConformalFactor,
    pub mu: Vec<f64>,
    pub mu_x: Vec<f64>,
    pub mu_y: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl MetricGrid {
    pub fn new(cf: &ConformalFactor, n: usize) -> Arc<Self> {
        let grid = Grid::new(*cf.lattice(), n);
        let pts = grid.points();
        let g: Vec<(f64, f64, f64)> = pts.par_iter().map(|&p| cf.gradient(p)).collect();
        let mu: Vec<f64> = g.iter().map(|t| t.0).collect();
        let lambda = mu.iter().map(|m| (2.0 * m).exp()).collect();
        Arc::new(Self {
            grid,
            cf: cf.clone(),
            mu,
            mu_x: g.iter().map(|t| t.1).collect(),
            mu_y: g.iter().map(|t| t.2).collect(),
            lambda,
        })
    }

    pub fn with_default_n(cf: &ConformalFactor) -> Arc<Self> {
        Self::new(cf, cf.default_grid_n())
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `∫ f dσ` with `dσ = λ dx dy`.
    pub fn integrate_area(&self, f: &[f64]) -> f64 {
        let s: f64 = f.iter().zip(&self.lambda).map(|(a, l)| a * l).sum();
        s / f.len() as f64 * self.grid.area()
    }

    /// Riemannian area of the torus.
    pub fn total_area(&self) -> f64 {
        self.grid.integrate(&self.lambda)
    }

    /// `e^{2kμ}` sampled on the grid.
    pub fn lambda_pow(&self, k: f64) -> Vec<f64> {
        self.mu.iter().map(|m| (2.0 * k * m).exp()).collect()
    }

    /// Gaussian curvature sampled from the analytic jet.
    pub fn curvature(&self) -> Vec<f64> {
        let pts = self.grid.points();
        pts.par_iter().map(|&p| self.cf.gaussian_curvature(p)).collect()
    }
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
