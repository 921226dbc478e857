//! Decomposition `f = pdv + f^s` with `δf^s = 0`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::pcg;
use crate::spectral::{Grid, MetricGrid};
use crate::tensor::TraceFreeField;

#[derive(Debug, Clone)]
pub struct JSplit {
    /// `f̃ = pdv`.
    pub potential: TraceFreeField,
    /// `f^s = f − f̃`.
    pub solenoidal: TraceFreeField,
    pub v: TraceFreeField,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SplitOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 5000,
        }
    }
}

/// Splits a trace-free field of rank `m >= 1` by solving `δpd v = δf` for
/// the minimum-norm `v` of rank `m − 1`.
pub fn j_split(f: &TraceFreeField) -> Result<JSplit> {
    j_split_with(f, None, SplitOptions::default())
}

/// As [`j_split`], starting the iteration from `v0` (any field of rank
/// `m − 1`). The result does not depend on `v0` up to the solver tolerance.
pub fn j_split_with(f: &TraceFreeField, v0: Option<&TraceFreeField>, opts: SplitOptions) -> Result<JSplit> {
    let m = f.rank();
    if m == 0 {
        return Err(Error::RankTooLow { required: 1, actual: 0 });
    }
    let mg = f.metric_grid().clone();
    let g = &mg.grid;
    let n = mg.len();
    let r = m - 1;
    let df = f.delta()?;
    let (v, iterations) = if r == 0 {
        // Δ₀v = λ δf
        let rhs: Vec<f64> = df.a().iter().zip(&mg.lambda).map(|(x, l)| x * l).collect();
        let v = g.apply_symbol(&rhs, false, |w| {
            let k2 = w[0] * w[0] + w[1] * w[1];
            if k2 == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(-1.0 / k2, 0.0)
            }
        });
        let v = remove_weighted_mean(&mg, v, 1.0);
        (TraceFreeField::new(mg.clone(), 0, v, vec![0.0; n])?, 0)
    } else {
        // v = λ^r w, L w = −2∂_z(λ^r ∂_z̄ w) = −λ(δf₁ + iδf₂)
        let rho = mg.lambda_pow(r as f64);
        let mut rhs: Vec<f64> = Vec::with_capacity(2 * n);
        rhs.extend(df.a().iter().zip(&mg.lambda).map(|(x, l)| -x * l));
        rhs.extend(df.b().iter().zip(&mg.lambda).map(|(x, l)| -x * l));
        let rhs = strip_kernel(g, &rhs);
        let rho_bar = g.mean(&rho);
        let x0 = v0.map(|v| {
            let inv = mg.lambda_pow(-(r as f64));
            let mut x: Vec<f64> = v.a().iter().zip(&inv).map(|(p, q)| p * q).collect();
            x.extend(v.b().iter().zip(&inv).map(|(p, q)| p * q));
            strip_kernel(g, &x)
        });
        let apply = |w: &[f64]| complex_operator(g, &rho, w);
        let precond = |res: &[f64]| {
            let mut out = Vec::with_capacity(2 * n);
            for part in res.chunks(n) {
                out.extend(g.apply_symbol(part, true, |w| {
                    let k2 = w[0] * w[0] + w[1] * w[1];
                    if k2 == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        Complex64::new(2.0 / (rho_bar * k2), 0.0)
                    }
                }));
            }
            out
        };
        let (w, it) = pcg(apply, precond, &rhs, x0, opts.tol, opts.max_iter)?;
        let wgt = r as f64 + 1.0;
        let alpha = remove_weighted_mean(&mg, w[..n].to_vec(), wgt);
        let beta = remove_weighted_mean(&mg, w[n..].to_vec(), wgt);
        let a = alpha.iter().zip(&rho).map(|(x, p)| x * p).collect();
        let b = beta.iter().zip(&rho).map(|(x, p)| x * p).collect();
        (TraceFreeField::new(mg.clone(), r, a, b)?, it)
    };
    let potential = v.pd();
    let solenoidal = f.sub(&potential)?;
    Ok(JSplit {
        potential,
        solenoidal,
        v,
        iterations,
    })
}

/// `u − ∫λ^k u / ∫λ^k`: removes the constant direction that is orthogonal
/// in the weight `λ^k`.
fn remove_weighted_mean(mg: &MetricGrid, u: Vec<f64>, k: f64) -> Vec<f64> {
    let w = mg.lambda_pow(k);
    let s: f64 = u.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>();
    u.into_iter().map(|x| x - s).collect()
}

/// Zeroes the mean and the Nyquist modes of both halves of a stacked vector.
fn strip_kernel(g: &Grid, x: &[f64]) -> Vec<f64> {
    x.chunks(g.len())
        .flat_map(|part| {
            g.apply_symbol(part, true, |w| {
                if w[0] == 0.0 && w[1] == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(1.0, 0.0)
                }
            })
        })
        .collect()
}

/// `w ↦ −2∂_z(ρ ∂_z̄ w)` on `w = α + iβ` stored as `[α, β]`.
fn complex_operator(g: &Grid, rho: &[f64], w: &[f64]) -> Vec<f64> {
    let n = g.len();
    let (ax, ay) = g.gradient(&w[..n]);
    let (bx, by) = g.gradient(&w[n..]);
    let gr: Vec<f64> = (0..n).map(|i| 0.5 * rho[i] * (ax[i] - by[i])).collect();
    let gi: Vec<f64> = (0..n).map(|i| 0.5 * rho[i] * (ay[i] + bx[i])).collect();
    let (grx, gry) = g.gradient(&gr);
    let (gix, giy) = g.gradient(&gi);
    let mut out = Vec::with_capacity(2 * n);
    out.extend((0..n).map(|i| -(grx[i] + giy[i])));
    out.extend((0..n).map(|i| -(gix[i] - gry[i])));
    out
}
