//! The fields `Z^{m,c}` and the least-squares test of `dv = Z^{m−1,c}`.

use std::sync::Arc;

use nalgebra::{Matrix2, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, lsqr};
use crate::metric::ConformalFactor;
use crate::spectral::{max_abs, MetricGrid};
use crate::tensor::poly::binom;
use crate::tensor::{inner_derivative_op, SymTensorField, TraceFreeField};

use super::pseudo::PseudoVector;

/// Relative residual below which `dv = Z` counts as solvable.
pub const EPS_POT: f64 = 1e-6;

/// `Z^{m,c}`: `a = e^{2mμ}(c¹μx + c²μy)`, `b = e^{2mμ}(c²μx − c¹μy)`; for
/// `m = 0` the scalar `c¹μx + c²μy`. `c` must have weight `m + 1`.
pub fn make_z(mg: &Arc<MetricGrid>, m: usize, c: &PseudoVector) -> Result<TraceFreeField> {
    if c.weight != m as i32 + 1 {
        return Err(Error::WeightMismatch {
            expected: m as i32 + 1,
            actual: c.weight,
        });
    }
    let w = mg.lambda_pow(m as f64);
    let n = mg.len();
    let a = (0..n).map(|i| w[i] * (c.c1 * mg.mu_x[i] + c.c2 * mg.mu_y[i])).collect();
    let b = if m == 0 {
        vec![0.0; n]
    } else {
        (0..n).map(|i| w[i] * (c.c2 * mg.mu_x[i] - c.c1 * mg.mu_y[i])).collect()
    };
    TraceFreeField::new(mg.clone(), m, a, b)
}

#[derive(Debug, Clone, Serialize)]
pub struct PotentialTestResult {
    /// Rank of the Killing field the test refers to; `Z` has rank `m − 1`.
    pub rank: usize,
    pub grid_n: usize,
    /// `min_{|c|=1} min_v ‖dv − Z^{m−1,c}‖ / ‖Z^{m−1,c}‖`.
    pub residual_rel: f64,
    pub best_c: Option<PseudoVector>,
    #[serde(skip)]
    pub solution_v: Option<SymTensorField>,
    /// Square roots of the two generalized eigenvalues, ascending.
    pub singular_values: Vec<f64>,
    /// `Z^{m−1,c}` vanishes for every `c` (up to round-off).
    pub degenerate: bool,
    pub iterations: usize,
    pub converged: bool,
    /// For `m = 2`: `‖∂x'∂y' λ‖ / ‖Hess λ‖` in coordinates rotated so that
    /// `best_c` becomes real.
    pub liouville_defect: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct PotentialOptions {
    pub atol: f64,
    pub btol: f64,
    pub max_iter: usize,
}

impl Default for PotentialOptions {
    fn default() -> Self {
        Self {
            atol: 1e-12,
            btol: 1e-12,
            max_iter: 20_000,
        }
    }
}

/// Smallest generalized eigenpair of `G c = ρ H c` for symmetric 2×2
/// `G >= 0`, `H >= 0`. Directions with `Hc = 0` give `ρ = 0`.
pub(crate) fn smallest_generalized(g: Matrix2<f64>, h: Matrix2<f64>) -> (f64, f64, [f64; 2]) {
    let eh = SymmetricEigen::new(h);
    let hmax = eh.eigenvalues.max();
    let (imin, imax) = if eh.eigenvalues[0] <= eh.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    if eh.eigenvalues[imin] <= 1e-24 * hmax {
        let v = eh.eigenvectors.column(imin);
        let vmax = eh.eigenvectors.column(imax);
        let ratio = (vmax.transpose() * g * vmax)[0] / eh.eigenvalues[imax];
        return (0.0, ratio.max(0.0), [v[0], v[1]]);
    }
    // H^{-1/2} G H^{-1/2}
    let mut s = Matrix2::zeros();
    for k in 0..2 {
        let v = eh.eigenvectors.column(k);
        s += v * v.transpose() / eh.eigenvalues[k].sqrt();
    }
    let m = s * g * s;
    let m = (m + m.transpose()) * 0.5;
    let em = SymmetricEigen::new(m);
    let k = if em.eigenvalues[0] <= em.eigenvalues[1] { 0 } else { 1 };
    let c = s * em.eigenvectors.column(k);
    let c = c / c.norm();
    (em.eigenvalues[k].max(0.0), em.eigenvalues[1 - k].max(0.0), [c[0], c[1]])
}

/// Tests for which constant pseudovectors `c` of weight `m` the equation
/// `dv = Z^{m−1,c}` has a solution `v` of rank `m − 2`, on one grid.
///
/// Both basis right-hand sides are solved by preconditioned LSQR in the
/// `L²` norm; the residual over `|c| = 1` is then minimized exactly through
/// a 2×2 generalized eigenproblem. For `m = 1` no `v` exists and the test
/// reduces to `c¹μx + c²μy ≡ 0`.
pub fn potentiality_test(mg: &Arc<MetricGrid>, m: usize, opts: PotentialOptions) -> Result<PotentialTestResult> {
    if m == 0 {
        return Err(Error::RankTooLow { required: 1, actual: 0 });
    }
    let n = mg.len();
    let cell = mg.grid.area() / n as f64;
    let basis = PseudoVector::basis(m as i32);
    let zs: Vec<TraceFreeField> = basis.iter().map(|c| make_z(mg, m - 1, c)).collect::<Result<_>>()?;
    let scale = zs.iter().map(|z| z.max_norm()).fold(0.0, f64::max);
    let degenerate = scale <= 1e-14;
    if m == 1 {
        let l = &mg.lambda;
        let g = Matrix2::new(
            dot_w(&mg.mu_x, &mg.mu_x, l),
            dot_w(&mg.mu_x, &mg.mu_y, l),
            dot_w(&mg.mu_y, &mg.mu_x, l),
            dot_w(&mg.mu_y, &mg.mu_y, l),
        ) * cell;
        let e = SymmetricEigen::new(g);
        let k = if e.eigenvalues[0] <= e.eigenvalues[1] { 0 } else { 1 };
        let lmax = e.eigenvalues[1 - k].max(0.0);
        let lmin = e.eigenvalues[k].max(0.0);
        let residual_rel = if lmax > 0.0 { (lmin / lmax).sqrt() } else { 0.0 };
        let v = e.eigenvectors.column(k);
        return Ok(PotentialTestResult {
            rank: m,
            grid_n: mg.n(),
            residual_rel,
            best_c: Some(PseudoVector::new(1, v[0], v[1])),
            solution_v: None,
            singular_values: vec![lmin.sqrt(), lmax.sqrt()],
            degenerate,
            iterations: 0,
            converged: true,
            liouville_defect: None,
        });
    }
    // unknowns: v of rank q = m − 2; equations: rank m − 1 components
    let q = m - 2;
    let p = m - 1;
    let op = inner_derivative_op(q);
    let lp = mg.lambda_pow(1.0 - p as f64);
    let sw: Vec<Vec<f64>> = (0..=p)
        .map(|k| {
            let c = binom(p, k) * cell;
            lp.iter().map(|l| (c * l).sqrt()).collect()
        })
        .collect();
    let g = &mg.grid;
    let wmin = {
        let (d1, d2) = mg.grid.lattice().dual();
        let k = |w: [f64; 2]| (w[0] * w[0] + w[1] * w[1]).sqrt();
        k(d1)
            .min(k(d2))
            .min(k([d1[0] + d2[0], d1[1] + d2[1]]))
            .min(k([d1[0] - d2[0], d1[1] - d2[1]]))
    };
    let precond = |x: &[f64]| -> Vec<Vec<f64>> {
        x.chunks(n)
            .map(|c| {
                g.apply_symbol(c, false, |w| {
                    Complex64::new(1.0 / (wmin * wmin + w[0] * w[0] + w[1] * w[1]).sqrt(), 0.0)
                })
            })
            .collect()
    };
    let a_op = |x: &[f64]| -> Vec<f64> {
        let v = precond(x);
        let dv = op.apply(mg, &v);
        dv.iter()
            .zip(&sw)
            .flat_map(|(c, s)| c.iter().zip(s).map(|(a, b)| a * b).collect::<Vec<_>>())
            .collect()
    };
    let at_op = |y: &[f64]| -> Vec<f64> {
        let h: Vec<Vec<f64>> = y
            .chunks(n)
            .zip(&sw)
            .map(|(c, s)| c.iter().zip(s).map(|(a, b)| a * b).collect())
            .collect();
        let t = op.apply_transpose(mg, &h);
        let flat: Vec<f64> = t.concat();
        precond(&flat).concat()
    };
    let rhs: Vec<Vec<f64>> = zs
        .iter()
        .map(|z| {
            z.to_sym()
                .comps()
                .iter()
                .zip(&sw)
                .flat_map(|(c, s)| c.iter().zip(s).map(|(a, b)| a * b).collect::<Vec<_>>())
                .collect()
        })
        .collect();
    let nx = (q + 1) * n;
    let (o1, o2) = rayon::join(
        || lsqr(nx, a_op, at_op, &rhs[0], opts.atol, opts.btol, opts.max_iter),
        || lsqr(nx, a_op, at_op, &rhs[1], opts.atol, opts.btol, opts.max_iter),
    );
    let outs = [o1, o2];
    let res: Vec<Vec<f64>> = outs
        .iter()
        .zip(&rhs)
        .map(|(o, b)| {
            let ax = a_op(&o.x);
            b.iter().zip(&ax).map(|(u, v)| u - v).collect()
        })
        .collect();
    let gm = Matrix2::new(
        dot(&res[0], &res[0]),
        dot(&res[0], &res[1]),
        dot(&res[1], &res[0]),
        dot(&res[1], &res[1]),
    );
    let hm = Matrix2::new(
        dot(&rhs[0], &rhs[0]),
        dot(&rhs[0], &rhs[1]),
        dot(&rhs[1], &rhs[0]),
        dot(&rhs[1], &rhs[1]),
    );
    let (rho_min, rho_max, c) = if degenerate {
        (0.0, 0.0, [1.0, 0.0])
    } else {
        smallest_generalized(gm, hm)
    };
    let residual_rel = rho_min.sqrt();
    let best_c = PseudoVector::new(m as i32, c[0], c[1]);
    let x: Vec<f64> = outs[0]
        .x
        .iter()
        .zip(&outs[1].x)
        .map(|(a, b)| c[0] * a + c[1] * b)
        .collect();
    let v = SymTensorField::new(mg.clone(), precond(&x))?;
    let v = remove_metric_power(v)?;
    let liouville_defect = (m == 2).then(|| liouville_defect(mg, &best_c));
    Ok(PotentialTestResult {
        rank: m,
        grid_n: mg.n(),
        residual_rel,
        best_c: Some(best_c),
        solution_v: Some(v),
        singular_values: vec![rho_min.sqrt(), rho_max.sqrt()],
        degenerate,
        iterations: outs[0].iterations.max(outs[1].iterations),
        converged: outs[0].converged && outs[1].converged,
        liouville_defect,
    })
}

fn dot_w(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((x, y), z)| x * y * z).sum()
}

/// Removes the `L²` component along `g^{q/2}` (even `q`), the Killing
/// fields every metric carries, so that `v` is the minimum-norm solution
/// whenever no further Killing fields of rank `q` exist.
fn remove_metric_power(v: SymTensorField) -> Result<SymTensorField> {
    let q = v.rank();
    if q % 2 == 1 {
        return Ok(v);
    }
    let mg = v.metric_grid().clone();
    let mut k = SymTensorField::scalar(mg.clone(), vec![1.0; mg.len()])?;
    let g = SymTensorField::metric(mg);
    for _ in 0..q / 2 {
        k = k.sym_product(&g)?;
    }
    let s = v.l2_inner(&k)? / k.l2_inner(&k)?;
    v.lin_comb(1.0, &k, -s)
}

/// `‖λ_{x'y'}‖_∞ / max(‖λ_{xx}‖, ‖λ_{xy}‖, ‖λ_{yy}‖)` where `z = a z'` with
/// `a = e^{iθ}` and `θ = arg(c)/2`, so that `c' = c/a²` is real.
pub fn liouville_defect(mg: &MetricGrid, c: &PseudoVector) -> f64 {
    let theta = 0.5 * c.c2.atan2(c.c1);
    let (co, si) = (theta.cos(), theta.sin());
    let g = &mg.grid;
    let l = &mg.lambda;
    let (lx, ly) = g.gradient(l);
    let (lxx, lxy) = g.gradient(&lx);
    let lyy = g.dy(&ly);
    // x = co x' − si y', y = si x' + co y'
    let mixed: Vec<f64> = (0..mg.len())
        .map(|i| -co * si * lxx[i] + (co * co - si * si) * lxy[i] + si * co * lyy[i])
        .collect();
    let norm = max_abs(&lxx).max(max_abs(&lxy)).max(max_abs(&lyy));
    if norm == 0.0 {
        0.0
    } else {
        max_abs(&mixed) / norm
    }
}

/// Verdict of a potentiality test repeated on grids `N` and `2N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PotentialVerdict {
    /// Residual below `EPS_POT` on the finer grid.
    Solvable,
    /// Residual above `EPS_POT` on both grids and stable within a factor 2.
    Obstructed,
    /// `Z^{m−1,c}` vanishes identically.
    Degenerate,
    /// Residual above `EPS_POT` but not stable under refinement.
    Unresolved,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolutionStudy {
    pub coarse: PotentialTestResult,
    pub fine: PotentialTestResult,
    pub verdict: PotentialVerdict,
}

/// Runs [`potentiality_test`] on grids `n` and `2n`.
pub fn potentiality_study(cf: &ConformalFactor, m: usize, n: usize, opts: PotentialOptions) -> Result<ResolutionStudy> {
    let coarse = potentiality_test(&MetricGrid::new(cf, n), m, opts)?;
    let fine = potentiality_test(&MetricGrid::new(cf, 2 * n), m, opts)?;
    let verdict = if fine.degenerate {
        PotentialVerdict::Degenerate
    } else if fine.residual_rel <= EPS_POT {
        PotentialVerdict::Solvable
    } else if coarse.residual_rel > EPS_POT
        && fine.residual_rel <= 2.0 * coarse.residual_rel
        && coarse.residual_rel <= 2.0 * fine.residual_rel
    {
        PotentialVerdict::Obstructed
    } else {
        PotentialVerdict::Unresolved
    };
    Ok(ResolutionStudy { coarse, fine, verdict })
}
