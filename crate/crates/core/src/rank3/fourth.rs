//! The fourth-order equation `½Δ²u + div(K∇u) = −c²Λ₁ + c¹Λ₂` and the
//! transport equation `(∇^⊥K)u = c¹Λ₁ + c²Λ₂` for `u = w + α·x`.

use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::Serialize;

use super::{check_weight3, covariant_hessian, lambda_form, make_t, max_abs2};
use crate::error::Result;
use crate::linalg::pcg;
use crate::metric::ConformalFactor;
use crate::solver::{smallest_generalized, PseudoVector, EPS_POT};
use crate::spectral::{max_abs, MetricGrid};
use crate::tensor::TraceFreeField;

#[derive(Debug, Clone, Copy)]
pub struct FourthOrderOptions {
    /// Relative residual of the PCG solve.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FourthOrderOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 5000,
        }
    }
}

/// `L w = ½Δ₀(λ^{−1}Δ₀w) + ∇₀·(K∇₀w)`, i.e. `λ(½Δ²w + div(K∇w))` in flat
/// operators; symmetric and nonnegative on mean-free fields.
pub struct FourthOrderOperator {
    mg: Arc<MetricGrid>,
    inv_lambda: Vec<f64>,
    k: Vec<f64>,
    kx: Vec<f64>,
    ky: Vec<f64>,
    rho: f64,
}

impl FourthOrderOperator {
    pub fn new(mg: &Arc<MetricGrid>) -> Self {
        let pts = mg.grid.points();
        let (mut k, mut kx, mut ky) = (Vec::new(), Vec::new(), Vec::new());
        for p in pts {
            let (a, b, c) = mg.cf.curvature_gradient(p);
            k.push(a);
            kx.push(b);
            ky.push(c);
        }
        let inv_lambda: Vec<f64> = mg.lambda.iter().map(|l| 1.0 / l).collect();
        let rho = mg.grid.mean(&inv_lambda);
        Self {
            mg: mg.clone(),
            inv_lambda,
            k,
            kx,
            ky,
            rho,
        }
    }

    pub fn curvature(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.k, &self.kx, &self.ky)
    }

    /// Drops the mean and the Nyquist modes.
    fn project(&self, f: &[f64]) -> Vec<f64> {
        let g = &self.mg.grid;
        let mut c = g.fft(f);
        for (i, v) in c.iter_mut().enumerate() {
            if i == 0 || g.is_nyquist(i) {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        g.ifft_real(c)
    }

    fn apply_raw(&self, w: &[f64]) -> Vec<f64> {
        let g = &self.mg.grid;
        let lw: Vec<f64> = g
            .laplacian(w)
            .iter()
            .zip(&self.inv_lambda)
            .map(|(a, b)| a * b)
            .collect();
        let bi = g.laplacian(&lw);
        let (wx, wy) = g.gradient(w);
        let fx: Vec<f64> = wx.iter().zip(&self.k).map(|(a, b)| a * b).collect();
        let fy: Vec<f64> = wy.iter().zip(&self.k).map(|(a, b)| a * b).collect();
        let div = g.dx(&fx);
        let divy = g.dy(&fy);
        (0..w.len()).map(|i| 0.5 * bi[i] + div[i] + divy[i]).collect()
    }

    /// `L w` restricted to mean-free, Nyquist-free fields.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        self.project(&self.apply_raw(&self.project(w)))
    }

    /// `½Δ²u + div(K∇u)` for `u = w + α·x`.
    pub fn physical(&self, w: &[f64], alpha: [f64; 2]) -> Vec<f64> {
        let lw = self.apply_raw(w);
        (0..w.len())
            .map(|i| (lw[i] + alpha[0] * self.kx[i] + alpha[1] * self.ky[i]) * self.inv_lambda[i])
            .collect()
    }

    /// Solves `L w = rhs` for mean-free `w` (the mean and Nyquist modes of
    /// `rhs` are discarded). Returns `w` and the PCG iteration count.
    pub fn solve(&self, rhs: &[f64], opts: FourthOrderOptions) -> Result<(Vec<f64>, usize)> {
        let g = &self.mg.grid;
        let b = self.project(rhs);
        let rho = self.rho;
        let precond = |r: &[f64]| {
            let mut c = g.fft(r);
            for (i, v) in c.iter_mut().enumerate() {
                let w = g.wavevector(i);
                let s = w[0] * w[0] + w[1] * w[1];
                if i == 0 || g.is_nyquist(i) || s == 0.0 {
                    *v = Complex64::new(0.0, 0.0);
                } else {
                    *v /= 0.5 * rho * s * s;
                }
            }
            g.ifft_real(c)
        };
        pcg(|w| self.apply(w), precond, &b, None, opts.tol, opts.max_iter)
    }

    /// `λ^{−1}(−K_y u_x + K_x u_y)` for `u = w + α·x`.
    pub fn rotated_gradient_derivative(&self, w: &[f64], alpha: [f64; 2]) -> Vec<f64> {
        let (wx, wy) = self.mg.grid.gradient(w);
        (0..w.len())
            .map(|i| (-self.ky[i] * (wx[i] + alpha[0]) + self.kx[i] * (wy[i] + alpha[1])) * self.inv_lambda[i])
            .collect()
    }
}

/// `u = w + α₁x + α₂y` with `w` Γ-periodic.
#[derive(Debug, Clone)]
pub struct CohomologySolution {
    pub mg: Arc<MetricGrid>,
    pub w: Vec<f64>,
    pub alpha: [f64; 2],
}

impl CohomologySolution {
    /// `(u_x, u_y)` on the grid.
    pub fn gradient(&self) -> (Vec<f64>, Vec<f64>) {
        let (mut ux, mut uy) = self.mg.grid.gradient(&self.w);
        ux.iter_mut().for_each(|v| *v += self.alpha[0]);
        uy.iter_mut().for_each(|v| *v += self.alpha[1]);
        (ux, uy)
    }

    /// `u` at an arbitrary point of the plane.
    pub fn value_at(&self, p: [f64; 2]) -> f64 {
        let g = &self.mg.grid;
        g.interpolate(&g.fft(&self.w), p) + self.alpha[0] * p[0] + self.alpha[1] * p[1]
    }

    /// `⟨σ, [γ]⟩ = α · (p e1 + q e2)`.
    pub fn sigma_pairing(&self, lift: (i64, i64)) -> f64 {
        let v = self.mg.grid.lattice().vector(lift.0, lift.1);
        self.alpha[0] * v[0] + self.alpha[1] * v[1]
    }
}

#[derive(Debug, Clone)]
pub struct FourthOrderSolution {
    pub c: PseudoVector,
    pub u: CohomologySolution,
    /// `‖L u − λ(−c²Λ₁ + c¹Λ₂)‖ / ‖λ(−c²Λ₁ + c¹Λ₂)‖`.
    pub forward_residual: f64,
    /// `‖(∇^⊥K)u − Φ^c‖_{L²} / ‖Φ^c‖_{L²}` with `α` fitted by least squares.
    pub transport_residual: f64,
    pub iterations: usize,
    /// `K` and `Λ` vanish.
    pub degenerate: bool,
}

fn weighted_dot(mg: &MetricGrid, a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(&mg.lambda)
        .map(|((x, y), l)| x * y * l)
        .sum::<f64>()
        * mg.grid.area()
        / mg.len() as f64
}

/// Coefficients `β` minimizing `‖r + Σ βᵢ sᵢ‖` in `L²(dσ)`.
fn fit_affine(mg: &MetricGrid, r: &[f64], s: &[Vec<f64>; 2]) -> [f64; 2] {
    let g = Matrix2::new(
        weighted_dot(mg, &s[0], &s[0]),
        weighted_dot(mg, &s[0], &s[1]),
        weighted_dot(mg, &s[1], &s[0]),
        weighted_dot(mg, &s[1], &s[1]),
    );
    let b = Vector2::new(-weighted_dot(mg, r, &s[0]), -weighted_dot(mg, r, &s[1]));
    let svd = g.svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return [0.0, 0.0];
    }
    let x = svd.solve(&b, 1e-12 * smax).unwrap_or_else(|_| Vector2::zeros());
    [x[0], x[1]]
}

fn is_degenerate(op: &FourthOrderOperator, lam: &[Vec<f64>; 2]) -> bool {
    max_abs(&op.k) <= 1e-13 && max_abs2(&lam[0], &lam[1]) <= 1e-13
}

struct Basis {
    op: FourthOrderOperator,
    lam: [Vec<f64>; 2],
    /// `w` for `c = e₁, e₂`.
    wc: [Vec<f64>; 2],
    /// `w` for `α = e₁, e₂`.
    wa: [Vec<f64>; 2],
    /// `(∇^⊥K)(w_αᵢ + xᵢ)`.
    s: [Vec<f64>; 2],
    iterations: usize,
}

fn solve_basis(mg: &Arc<MetricGrid>, opts: FourthOrderOptions) -> Result<Basis> {
    let op = FourthOrderOperator::new(mg);
    let lf = lambda_form(mg);
    let lam = [lf.l1, lf.l2];
    let n = mg.len();
    let rhs_c = |c: [f64; 2]| -> Vec<f64> {
        (0..n)
            .map(|i| mg.lambda[i] * (-c[1] * lam[0][i] + c[0] * lam[1][i]))
            .collect()
    };
    let rhs_a = |d: &[f64]| -> Vec<f64> { d.iter().map(|v| -v).collect() };
    let rhs = [rhs_c([1.0, 0.0]), rhs_c([0.0, 1.0]), rhs_a(&op.kx), rhs_a(&op.ky)];
    let mut sols = Vec::with_capacity(4);
    let mut iterations = 0;
    for r in &rhs {
        let (w, it) = op.solve(r, opts)?;
        iterations = iterations.max(it);
        sols.push(w);
    }
    let wa1 = sols.pop().expect("four solves");
    let wa0 = sols.pop().expect("four solves");
    let wc1 = sols.pop().expect("four solves");
    let wc0 = sols.pop().expect("four solves");
    let s = [
        op.rotated_gradient_derivative(&wa0, [1.0, 0.0]),
        op.rotated_gradient_derivative(&wa1, [0.0, 1.0]),
    ];
    Ok(Basis {
        op,
        lam,
        wc: [wc0, wc1],
        wa: [wa0, wa1],
        s,
        iterations,
    })
}

impl Basis {
    fn combine(&self, c: [f64; 2], alpha: [f64; 2]) -> Vec<f64> {
        (0..self.wc[0].len())
            .map(|i| c[0] * self.wc[0][i] + c[1] * self.wc[1][i] + alpha[0] * self.wa[0][i] + alpha[1] * self.wa[1][i])
            .collect()
    }

    /// `(∇^⊥K)(c·w_c) − c·Λ`, before adding the affine part.
    fn transport_core(&self, c: [f64; 2]) -> Vec<f64> {
        let w: Vec<f64> = (0..self.wc[0].len())
            .map(|i| c[0] * self.wc[0][i] + c[1] * self.wc[1][i])
            .collect();
        let d = self.op.rotated_gradient_derivative(&w, [0.0, 0.0]);
        (0..d.len())
            .map(|i| d[i] - c[0] * self.lam[0][i] - c[1] * self.lam[1][i])
            .collect()
    }
}

/// Solves the fourth-order equation for one `c`; the affine part `α`, which
/// the fourth-order equation leaves free, is fitted to the transport
/// equation by least squares.
pub fn solve_fourth_order(
    mg: &Arc<MetricGrid>,
    c: &PseudoVector,
    opts: FourthOrderOptions,
) -> Result<FourthOrderSolution> {
    check_weight3(c)?;
    let b = solve_basis(mg, opts)?;
    let cv = [c.c1, c.c2];
    let degenerate = is_degenerate(&b.op, &b.lam);
    let r = b.transport_core(cv);
    let alpha = fit_affine(mg, &r, &b.s);
    let w = b.combine(cv, alpha);
    let n = mg.len();
    let res: Vec<f64> = (0..n)
        .map(|i| r[i] + alpha[0] * b.s[0][i] + alpha[1] * b.s[1][i])
        .collect();
    let phi: Vec<f64> = (0..n).map(|i| cv[0] * b.lam[0][i] + cv[1] * b.lam[1][i]).collect();
    let phi_norm = weighted_dot(mg, &phi, &phi).sqrt();
    let transport_residual = if phi_norm > 0.0 {
        weighted_dot(mg, &res, &res).sqrt() / phi_norm
    } else {
        0.0
    };
    // forward residual of the fourth-order equation
    let target: Vec<f64> = (0..n)
        .map(|i| mg.lambda[i] * (-cv[1] * b.lam[0][i] + cv[0] * b.lam[1][i]))
        .collect();
    let lu = b.op.physical(&w, alpha);
    let lu: Vec<f64> = lu.iter().zip(&mg.lambda).map(|(a, l)| a * l).collect();
    let diff: Vec<f64> = lu.iter().zip(&target).map(|(a, t)| a - t).collect();
    let tn = crate::linalg::norm(&target);
    let forward_residual = if tn > 0.0 {
        crate::linalg::norm(&diff) / tn
    } else {
        crate::linalg::norm(&diff)
    };
    Ok(FourthOrderSolution {
        c: *c,
        u: CohomologySolution {
            mg: mg.clone(),
            w,
            alpha,
        },
        forward_residual,
        transport_residual,
        iterations: b.iterations,
        degenerate,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TransportTestResult {
    pub grid_n: usize,
    /// `min_{|c|=1, α} ‖(∇^⊥K)u − Φ^c‖ / ‖Φ^c‖` over solutions `u` of the
    /// fourth-order equation.
    pub residual_rel: f64,
    pub best_c: PseudoVector,
    pub alpha: [f64; 2],
    /// Square roots of the two generalized eigenvalues, ascending.
    pub singular_values: [f64; 2],
    pub iterations: usize,
    pub degenerate: bool,
}

/// Minimizes the transport residual jointly over `c` and `α`: both enter
/// linearly, so the affine part is projected out and the `c`-problem is a
/// 2×2 generalized eigenproblem.
pub fn transport_test(mg: &Arc<MetricGrid>, opts: FourthOrderOptions) -> Result<TransportTestResult> {
    let b = solve_basis(mg, opts)?;
    let degenerate = is_degenerate(&b.op, &b.lam);
    let n = mg.len();
    let mut proj = Vec::with_capacity(2);
    let mut alphas = Vec::with_capacity(2);
    for e in [[1.0, 0.0], [0.0, 1.0]] {
        let r = b.transport_core(e);
        let a = fit_affine(mg, &r, &b.s);
        proj.push(
            (0..n)
                .map(|i| r[i] + a[0] * b.s[0][i] + a[1] * b.s[1][i])
                .collect::<Vec<f64>>(),
        );
        alphas.push(a);
    }
    let gram = |u: &[Vec<f64>]| {
        Matrix2::new(
            weighted_dot(mg, &u[0], &u[0]),
            weighted_dot(mg, &u[0], &u[1]),
            weighted_dot(mg, &u[1], &u[0]),
            weighted_dot(mg, &u[1], &u[1]),
        )
    };
    let (rmin, rmax, c) = if degenerate {
        (0.0, 0.0, [1.0, 0.0])
    } else {
        smallest_generalized(gram(&proj), gram(&b.lam))
    };
    let alpha = [
        c[0] * alphas[0][0] + c[1] * alphas[1][0],
        c[0] * alphas[0][1] + c[1] * alphas[1][1],
    ];
    Ok(TransportTestResult {
        grid_n: mg.n(),
        residual_rel: rmin.sqrt(),
        best_c: PseudoVector::new(3, c[0], c[1]),
        alpha,
        singular_values: [rmin.sqrt(), rmax.sqrt()],
        iterations: b.iterations,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TransportVerdict {
    /// Residual below `EPS_POT` on the finer grid.
    Consistent,
    /// Residual above `EPS_POT` on both grids and stable within a factor 2.
    Violated,
    Degenerate,
    Unresolved,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransportStudy {
    pub coarse: TransportTestResult,
    pub fine: TransportTestResult,
    pub verdict: TransportVerdict,
}

/// [`transport_test`] on grids `n` and `2n`.
pub fn transport_study(cf: &ConformalFactor, n: usize, opts: FourthOrderOptions) -> Result<TransportStudy> {
    let coarse = transport_test(&MetricGrid::new(cf, n), opts)?;
    let fine = transport_test(&MetricGrid::new(cf, 2 * n), opts)?;
    let (a, b) = (coarse.residual_rel, fine.residual_rel);
    let verdict = if fine.degenerate {
        TransportVerdict::Degenerate
    } else if b <= EPS_POT {
        TransportVerdict::Consistent
    } else if a > EPS_POT && b <= 2.0 * a && a <= 2.0 * b {
        TransportVerdict::Violated
    } else {
        TransportVerdict::Unresolved
    };
    Ok(TransportStudy { coarse, fine, verdict })
}

#[derive(Debug, Clone, Serialize)]
pub struct ThirdDerivativeReport {
    /// `max |∇ᵢ∇ⱼ∇ₖu − (g_jk(−K∇ᵢu + ∇^pT_ip) + ∇ᵢT_jk)|` per `(i, j, k)`,
    /// index `4i + 2j + k`.
    pub per_component: [f64; 8],
    pub max_abs: f64,
    /// `max_abs / max |∇∇∇u|`.
    pub relative: f64,
}

/// Checks the closed form of all third covariant derivatives of `u`
/// against a trace-free rank-2 field `t` (the right side of
/// `∇∇u − ½(Δu)g = t`).
pub fn third_derivative_residual_with(u: &CohomologySolution, t: &TraceFreeField) -> Result<ThirdDerivativeReport> {
    let mg = &u.mg;
    let n = mg.len();
    let g = &mg.grid;
    let (ux, uy) = u.gradient();
    let h = covariant_hessian(mg, &ux, &uy);
    let dh: Vec<(Vec<f64>, Vec<f64>)> = h.iter().map(|c| g.gradient(c)).collect();
    let tc = [
        t.a().to_vec(),
        t.b().to_vec(),
        t.a().iter().map(|v| -v).collect::<Vec<_>>(),
    ];
    let dt: Vec<(Vec<f64>, Vec<f64>)> = tc.iter().map(|c| g.gradient(c)).collect();
    let div = t.delta()?;
    let k = mg.curvature();
    // symmetric index pair (j, k) → slot in [11, 12, 22]
    let slot = |j: usize, k: usize| j + k;
    let mut per = [0.0f64; 8];
    let mut lhs_max = 0.0f64;
    for p in 0..n {
        let (mx, my) = (mg.mu_x[p], mg.mu_y[p]);
        let gam = |i: usize, j: usize, k: usize| -> f64 {
            // Γ^i_jk
            match (i, j.min(k), j.max(k)) {
                (0, 0, 0) => mx,
                (0, 0, 1) => my,
                (0, 1, 1) => -mx,
                (1, 0, 0) => -my,
                (1, 0, 1) => mx,
                _ => my,
            }
        };
        let hv = |j: usize, k: usize| h[slot(j, k)][p];
        let tv = |j: usize, k: usize| tc[slot(j, k)][p];
        let du = [ux[p], uy[p]];
        let dv = [div.a()[p], div.b()[p]];
        for i in 0..2 {
            for j in 0..2 {
                for kk in 0..2 {
                    let d = |c: &(Vec<f64>, Vec<f64>)| if i == 0 { c.0[p] } else { c.1[p] };
                    let mut lhs = d(&dh[slot(j, kk)]);
                    let mut nt = d(&dt[slot(j, kk)]);
                    for q in 0..2 {
                        lhs -= gam(q, i, j) * hv(q, kk) + gam(q, i, kk) * hv(j, q);
                        nt -= gam(q, i, j) * tv(q, kk) + gam(q, i, kk) * tv(j, q);
                    }
                    let gjk = if j == kk { mg.lambda[p] } else { 0.0 };
                    let rhs = gjk * (-k[p] * du[i] + dv[i]) + nt;
                    let idx = 4 * i + 2 * j + kk;
                    per[idx] = per[idx].max((lhs - rhs).abs());
                    lhs_max = lhs_max.max(lhs.abs());
                }
            }
        }
    }
    let max_abs = per.iter().cloned().fold(0.0, f64::max);
    Ok(ThirdDerivativeReport {
        per_component: per,
        max_abs,
        relative: if lhs_max > 0.0 { max_abs / lhs_max } else { max_abs },
    })
}

/// [`third_derivative_residual_with`] for `t = T^c`.
pub fn third_derivative_residual(u: &CohomologySolution, c: &PseudoVector) -> Result<ThirdDerivativeReport> {
    let t = make_t(&u.mg, c)?;
    third_derivative_residual_with(u, &t)
}
