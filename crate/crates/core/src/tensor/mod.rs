//! Symmetric tensor fields on the torus in isothermal coordinates.
//!
//! A rank-`m` field is stored as its `m + 1` distinct components, component
//! `k` being `f_{1…1 2…2}` with `k` twos.

mod harmonic;
mod ops;
pub(crate) mod poly;

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{max_abs, MetricGrid};
pub use harmonic::{chain_coefficient, ChainResidual, HarmonicDecomposition};
pub(crate) use ops::{divergence_op, inner_derivative_op};
use poly::{binom, Poly};

/// Full symmetric tensor field of rank `m`.
#[derive(Debug, Clone)]
pub struct SymTensorField {
    mg: Arc<MetricGrid>,
    comps: Vec<Vec<f64>>,
}

/// Trace-free field of rank `m` given by `a = f_{1…1}` and `b = f_{1…12}`.
/// Rank 0 is allowed and stands for the scalar `a` (then `b` is unused).
#[derive(Debug, Clone)]
pub struct TraceFreeField {
    mg: Arc<MetricGrid>,
    rank: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

fn check_grid(a: &Arc<MetricGrid>, b: &Arc<MetricGrid>) -> Result<()> {
    if Arc::ptr_eq(a, b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

impl SymTensorField {
    pub fn new(mg: Arc<MetricGrid>, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.is_empty() {
            return Err(Error::InvalidArgument("a field needs at least one component".into()));
        }
        if comps.iter().any(|c| c.len() != mg.len()) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { mg, comps })
    }

    pub fn zeros(mg: Arc<MetricGrid>, rank: usize) -> Self {
        let n = mg.len();
        Self {
            mg,
            comps: vec![vec![0.0; n]; rank + 1],
        }
    }

    pub fn scalar(mg: Arc<MetricGrid>, u: Vec<f64>) -> Result<Self> {
        Self::new(mg, vec![u])
    }

    /// Samples a field from a function returning the `rank + 1` components.
    pub fn from_fn(mg: Arc<MetricGrid>, rank: usize, f: impl Fn([f64; 2]) -> Vec<f64> + Sync) -> Self {
        let vals: Vec<Vec<f64>> = (0..mg.len())
            .into_par_iter()
            .map(|i| {
                let v = f(mg.grid.point(i));
                assert_eq!(v.len(), rank + 1);
                v
            })
            .collect();
        let comps = (0..=rank).map(|k| vals.iter().map(|v| v[k]).collect()).collect();
        Self { mg, comps }
    }

    /// The metric tensor `g = λ(dx² + dy²)`.
    pub fn metric(mg: Arc<MetricGrid>) -> Self {
        let l = mg.lambda.clone();
        let z = vec![0.0; mg.len()];
        Self {
            comps: vec![l.clone(), z, l],
            mg,
        }
    }

    pub fn rank(&self) -> usize {
        self.comps.len() - 1
    }

    pub fn comps(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn comp(&self, k: usize) -> &[f64] {
        &self.comps[k]
    }

    pub fn into_comps(self) -> Vec<Vec<f64>> {
        self.comps
    }

    pub fn metric_grid(&self) -> &Arc<MetricGrid> {
        &self.mg
    }

    fn same_shape(&self, o: &Self) -> Result<()> {
        check_grid(&self.mg, &o.mg)?;
        if self.rank() != o.rank() {
            return Err(Error::InvalidArgument(format!(
                "rank mismatch: {} vs {}",
                self.rank(),
                o.rank()
            )));
        }
        Ok(())
    }

    pub fn lin_comb(&self, s: f64, o: &Self, t: f64) -> Result<Self> {
        self.same_shape(o)?;
        let comps = self
            .comps
            .iter()
            .zip(&o.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| s * x + t * y).collect())
            .collect();
        Ok(Self {
            mg: self.mg.clone(),
            comps,
        })
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.lin_comb(1.0, o, 1.0)
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.lin_comb(1.0, o, -1.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            mg: self.mg.clone(),
            comps: self.comps.iter().map(|c| c.iter().map(|v| v * s).collect()).collect(),
        }
    }

    /// Largest absolute component value.
    pub fn max_norm(&self) -> f64 {
        self.comps.iter().map(|c| max_abs(c)).fold(0.0, f64::max)
    }

    /// Symmetric product `σ(f ⊗ h)`: in polynomial form, the product of the
    /// two polynomials.
    pub fn sym_product(&self, h: &Self) -> Result<Self> {
        check_grid(&self.mg, &h.mg)?;
        let (m, n) = (self.rank(), h.rank());
        let mut comps = vec![vec![0.0; self.mg.len()]; m + n + 1];
        for (i, fi) in self.comps.iter().enumerate() {
            for (j, hj) in h.comps.iter().enumerate() {
                let w = binom(m, i) * binom(n, j) / binom(m + n, i + j);
                let out = &mut comps[i + j];
                out.par_iter_mut()
                    .zip(fi.par_iter().zip(hj.par_iter()))
                    .for_each(|(o, (a, b))| *o += w * a * b);
            }
        }
        Ok(Self {
            mg: self.mg.clone(),
            comps,
        })
    }

    /// `i f = σ(f ⊗ g)`, rank `m → m + 2`.
    pub fn op_i(&self) -> Self {
        let m = self.rank();
        let n = self.mg.len();
        let comps = (0..=m + 2)
            .map(|k| {
                // polynomial: λ (ξ1² + ξ2²) P
                let w0 = if k <= m { binom(m, k) } else { 0.0 };
                let w2 = if k >= 2 { binom(m, k - 2) } else { 0.0 };
                let c = binom(m + 2, k);
                (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let mut s = 0.0;
                        if w0 != 0.0 {
                            s += w0 * self.comps[k][i];
                        }
                        if w2 != 0.0 {
                            s += w2 * self.comps[k - 2][i];
                        }
                        self.mg.lambda[i] * s / c
                    })
                    .collect()
            })
            .collect();
        Self {
            mg: self.mg.clone(),
            comps,
        }
    }

    /// Trace `j f = g^{pq} f_{pq…}`, rank `m → m − 2`.
    pub fn op_j(&self) -> Result<Self> {
        let m = self.rank();
        if m < 2 {
            return Err(Error::RankTooLow { required: 2, actual: m });
        }
        let comps = (0..=m - 2)
            .map(|k| {
                self.comps[k]
                    .par_iter()
                    .zip(self.comps[k + 2].par_iter())
                    .zip(self.mg.lambda.par_iter())
                    .map(|((a, b), l)| (a + b) / l)
                    .collect()
            })
            .collect();
        Ok(Self {
            mg: self.mg.clone(),
            comps,
        })
    }

    /// Orthogonal projection onto trace-free tensors, as a trace-free field.
    pub fn trace_free_part(&self) -> TraceFreeField {
        let m = self.rank();
        let n = self.mg.len();
        if m == 0 {
            return TraceFreeField {
                mg: self.mg.clone(),
                rank: 0,
                a: self.comps[0].clone(),
                b: vec![0.0; n],
            };
        }
        if m == 2 {
            // f − ½ (jf) g
            let a = (0..n).map(|i| 0.5 * (self.comps[0][i] - self.comps[2][i])).collect();
            return TraceFreeField {
                mg: self.mg.clone(),
                rank: 2,
                a,
                b: self.comps[1].clone(),
            };
        }
        // Gram projection onto span{A, B}; ⟨A, A⟩ = ⟨B, B⟩ = 2^{m−1}
        let norm = 2f64.powi(m as i32 - 1);
        let mut wa = vec![0.0; m + 1];
        let mut wb = vec![0.0; m + 1];
        for k in 0..=m {
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if k % 2 == 0 {
                wa[k] = binom(m, k) * sign / norm;
            } else {
                wb[k] = binom(m, k) * sign / norm;
            }
        }
        let proj = |w: &[f64]| -> Vec<f64> {
            (0..n)
                .into_par_iter()
                .map(|i| (0..=m).map(|k| w[k] * self.comps[k][i]).sum())
                .collect()
        };
        TraceFreeField {
            mg: self.mg.clone(),
            rank: m,
            a: proj(&wa),
            b: proj(&wb),
        }
    }

    /// `p f` as a full field.
    pub fn op_p(&self) -> Self {
        self.trace_free_part().to_sym()
    }

    /// Inner derivative `d = σ∇`, rank `m → m + 1`.
    pub fn d(&self) -> Self {
        let op = inner_derivative_op(self.rank());
        Self {
            comps: op.apply(&self.mg, &self.comps),
            mg: self.mg.clone(),
        }
    }

    /// Divergence `(δf)_{i…} = g^{pq} ∇_p f_{q i…}`, rank `m → m − 1`.
    pub fn delta(&self) -> Result<Self> {
        let m = self.rank();
        if m == 0 {
            return Err(Error::RankTooLow { required: 1, actual: 0 });
        }
        let op = divergence_op(m);
        Ok(Self {
            comps: op.apply(&self.mg, &self.comps),
            mg: self.mg.clone(),
        })
    }

    /// Pointwise metric inner product `λ^{−m} Σ_k C(m,k) f_k h_k`.
    pub fn fiber_inner(&self, h: &Self) -> Result<Vec<f64>> {
        self.same_shape(h)?;
        let m = self.rank();
        let l = self.mg.lambda_pow(-(m as f64));
        Ok((0..self.mg.len())
            .into_par_iter()
            .map(|i| {
                let s: f64 = (0..=m).map(|k| binom(m, k) * self.comps[k][i] * h.comps[k][i]).sum();
                s * l[i]
            })
            .collect())
    }

    /// `L²` inner product with respect to `dσ = λ dx dy`.
    pub fn l2_inner(&self, h: &Self) -> Result<f64> {
        let f = self.fiber_inner(h)?;
        Ok(self.mg.integrate_area(&f))
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_inner(self).expect("same field").max(0.0).sqrt()
    }

    /// `f_{i…} ξ^i…` at grid sample `idx`.
    pub fn polynomial_at(&self, idx: usize, xi: [f64; 2]) -> f64 {
        let f: Vec<f64> = self.comps.iter().map(|c| c[idx]).collect();
        Poly::from_components(&f).eval(xi)
    }

    pub fn harmonic_decompose(&self) -> HarmonicDecomposition {
        harmonic::decompose(self)
    }

    /// Residuals of the chain equations relating the harmonics of `f`;
    /// all vanish iff `f` is a Killing field.
    pub fn chain_residuals(&self) -> Vec<ChainResidual> {
        harmonic::chain_residuals(self)
    }

    /// True when `‖df‖_∞ <= tol_rel · ‖f‖_∞`.
    pub fn is_killing(&self, tol_rel: f64) -> bool {
        self.d().max_norm() <= tol_rel * self.max_norm()
    }
}

impl TraceFreeField {
    pub fn new(mg: Arc<MetricGrid>, rank: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != mg.len() || b.len() != mg.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { mg, rank, a, b })
    }

    pub fn zeros(mg: Arc<MetricGrid>, rank: usize) -> Self {
        let n = mg.len();
        Self {
            mg,
            rank,
            a: vec![0.0; n],
            b: vec![0.0; n],
        }
    }

    pub fn from_fn(mg: Arc<MetricGrid>, rank: usize, f: impl Fn([f64; 2]) -> (f64, f64) + Sync) -> Self {
        let v: Vec<(f64, f64)> = (0..mg.len()).into_par_iter().map(|i| f(mg.grid.point(i))).collect();
        Self {
            rank,
            a: v.iter().map(|t| t.0).collect(),
            b: if rank == 0 {
                vec![0.0; mg.len()]
            } else {
                v.iter().map(|t| t.1).collect()
            },
            mg,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn metric_grid(&self) -> &Arc<MetricGrid> {
        &self.mg
    }

    /// All components by the sign pattern `f_{…22} = −f_{…}`.
    pub fn to_sym(&self) -> SymTensorField {
        let comps = (0..=self.rank)
            .map(|k| {
                let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
                let src = if k % 2 == 0 { &self.a } else { &self.b };
                src.iter().map(|v| sign * v).collect()
            })
            .collect();
        SymTensorField {
            mg: self.mg.clone(),
            comps,
        }
    }

    pub fn lin_comb(&self, s: f64, o: &Self, t: f64) -> Result<Self> {
        check_grid(&self.mg, &o.mg)?;
        if self.rank != o.rank {
            return Err(Error::InvalidArgument("rank mismatch".into()));
        }
        let comb = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| s * p + t * q).collect();
        Ok(Self {
            mg: self.mg.clone(),
            rank: self.rank,
            a: comb(&self.a, &o.a),
            b: comb(&self.b, &o.b),
        })
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.lin_comb(1.0, o, 1.0)
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.lin_comb(1.0, o, -1.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            mg: self.mg.clone(),
            rank: self.rank,
            a: self.a.iter().map(|v| v * s).collect(),
            b: self.b.iter().map(|v| v * s).collect(),
        }
    }

    pub fn max_norm(&self) -> f64 {
        max_abs(&self.a).max(max_abs(&self.b))
    }

    /// `L²` inner product of the expanded fields.
    pub fn l2_inner(&self, o: &Self) -> Result<f64> {
        self.to_sym().l2_inner(&o.to_sym())
    }

    pub fn l2_norm(&self) -> f64 {
        self.to_sym().l2_norm()
    }

    /// Divergence through the two-component formulas
    /// `(λ^{−1}(a_x + b_y), λ^{−1}(−a_y + b_x))`.
    pub fn delta(&self) -> Result<Self> {
        if self.rank == 0 {
            return Err(Error::RankTooLow { required: 1, actual: 0 });
        }
        let g = &self.mg.grid;
        let (ax, ay) = g.gradient(&self.a);
        let (bx, by) = g.gradient(&self.b);
        let l = &self.mg.lambda;
        let n = self.mg.len();
        let a = (0..n).map(|i| (ax[i] + by[i]) / l[i]).collect();
        let b = if self.rank == 1 {
            vec![0.0; n]
        } else {
            (0..n).map(|i| (-ay[i] + bx[i]) / l[i]).collect()
        };
        Ok(Self {
            mg: self.mg.clone(),
            rank: self.rank - 1,
            a,
            b,
        })
    }

    /// `p d f` through the Cauchy–Riemann form
    /// `½ e^{2mμ} (∂x(e^{−2mμ}a) − ∂y(e^{−2mμ}b), ∂y(e^{−2mμ}a) + ∂x(e^{−2mμ}b))`.
    pub fn pd(&self) -> Self {
        let n = self.mg.len();
        if self.rank == 0 {
            let (ux, uy) = self.mg.grid.gradient(&self.a);
            return Self {
                mg: self.mg.clone(),
                rank: 1,
                a: ux,
                b: uy,
            };
        }
        let (c1, c2) = self.cauchy_riemann_residual();
        let w = self.mg.lambda_pow(self.rank as f64);
        Self {
            mg: self.mg.clone(),
            rank: self.rank + 1,
            a: (0..n).map(|i| 0.5 * w[i] * c1[i]).collect(),
            b: (0..n).map(|i| 0.5 * w[i] * c2[i]).collect(),
        }
    }

    /// `pd` computed by the general route `p(d(f))`.
    pub fn pd_general(&self) -> Self {
        self.to_sym().d().trace_free_part()
    }

    /// Residual grids of the Cauchy–Riemann system; both vanish iff `pdf = 0`.
    pub fn cauchy_riemann_residual(&self) -> (Vec<f64>, Vec<f64>) {
        let w = self.mg.lambda_pow(-(self.rank as f64));
        let ea: Vec<f64> = self.a.iter().zip(&w).map(|(x, y)| x * y).collect();
        let eb: Vec<f64> = self.b.iter().zip(&w).map(|(x, y)| x * y).collect();
        let g = &self.mg.grid;
        let (ax, ay) = g.gradient(&ea);
        let (bx, by) = g.gradient(&eb);
        let n = self.mg.len();
        (
            (0..n).map(|i| ax[i] - by[i]).collect(),
            (0..n).map(|i| ay[i] + bx[i]).collect(),
        )
    }

    /// Restriction of the associated polynomial to the unit circle bundle,
    /// `e^{−mμ}(a cos mθ + b sin mθ)`, at an arbitrary point (components are
    /// interpolated spectrally).
    pub fn to_polynomial(&self, p: [f64; 2], theta: f64) -> f64 {
        let g = &self.mg.grid;
        let a = g.interpolate(&g.fft(&self.a), p);
        let b = g.interpolate(&g.fft(&self.b), p);
        self.polynomial_value(p, a, b, theta)
    }

    /// Same as [`TraceFreeField::to_polynomial`] at grid sample `idx`.
    pub fn to_polynomial_at(&self, idx: usize, theta: f64) -> f64 {
        let p = self.mg.grid.point(idx);
        self.polynomial_value(p, self.a[idx], self.b[idx], theta)
    }

    fn polynomial_value(&self, p: [f64; 2], a: f64, b: f64, theta: f64) -> f64 {
        let m = self.rank as f64;
        let mu = self.mg.cf.value(p);
        (-m * mu).exp() * (a * (m * theta).cos() + b * (m * theta).sin())
    }

    /// `(∫ a dσ, ∫ b dσ)`.
    pub fn mean_values(&self) -> [f64; 2] {
        [self.mg.integrate_area(&self.a), self.mg.integrate_area(&self.b)]
    }

    /// Range test of `δpd`: both component means below
    /// `1e−9 · area · ‖f‖_∞`.
    pub fn in_range(&self) -> (bool, [f64; 2]) {
        let means = self.mean_values();
        let tol = 1e-9 * self.mg.total_area() * self.max_norm().max(f64::MIN_POSITIVE);
        (means[0].abs() <= tol && means[1].abs() <= tol, means)
    }
}
