//! First-order differential operators on component grids.
//!
//! In isothermal coordinates both `d` and `δ` have the shape
//! `λ^p (A_x ∂x + A_y ∂y + μ_x B_x + μ_y B_y)` with constant matrices acting
//! on the component vector, which makes the exact discrete transpose cheap.

use rayon::prelude::*;

use super::poly::Poly;
use crate::spectral::MetricGrid;

#[derive(Debug, Clone)]
pub(crate) struct FirstOrderOp {
    pub rows: usize,
    pub cols: usize,
    ax: Vec<f64>,
    ay: Vec<f64>,
    bx: Vec<f64>,
    by: Vec<f64>,
    lambda_pow: f64,
}

fn build(m: usize, rows: usize, lambda_pow: f64, map: impl Fn(&Poly) -> [Option<Poly>; 4]) -> FirstOrderOp {
    let cols = m + 1;
    let mut mats = [
        vec![0.0; rows * cols],
        vec![0.0; rows * cols],
        vec![0.0; rows * cols],
        vec![0.0; rows * cols],
    ];
    for j in 0..cols {
        let mut e = vec![0.0; cols];
        e[j] = 1.0;
        let p = Poly::from_components(&e);
        let images = map(&p);
        for (mat, img) in mats.iter_mut().zip(images) {
            if let Some(img) = img {
                let comps = img.to_components();
                assert_eq!(comps.len(), rows);
                for (r, v) in comps.into_iter().enumerate() {
                    mat[r * cols + j] = v;
                }
            }
        }
    }
    let [ax, ay, bx, by] = mats;
    FirstOrderOp {
        rows,
        cols,
        ax,
        ay,
        bx,
        by,
        lambda_pow,
    }
}

/// `d = σ∇` on rank `m`, read off from the geodesic spray
/// `HF = ξ^i ∂_i F − Γ^p_{ij} ξ^i ξ^j ∂F/∂ξ^p`.
pub(crate) fn inner_derivative_op(m: usize) -> FirstOrderOp {
    build(m, m + 2, 0.0, |p| {
        let ax = Some(p.mul_monomial(1.0, 1, 0));
        let ay = Some(p.mul_monomial(1.0, 0, 1));
        let (bx, by) = match (p.d1(), p.d2()) {
            (Some(d1), Some(d2)) => {
                // Q¹ = μx(ξ1² − ξ2²) + 2μy ξ1ξ2,  Q² = 2μx ξ1ξ2 + μy(ξ2² − ξ1²)
                let bx = d1
                    .mul_monomial(-1.0, 2, 0)
                    .add(&d1.mul_monomial(1.0, 0, 2))
                    .add(&d2.mul_monomial(-2.0, 1, 1));
                let by = d1
                    .mul_monomial(-2.0, 1, 1)
                    .add(&d2.mul_monomial(-1.0, 0, 2))
                    .add(&d2.mul_monomial(1.0, 2, 0));
                (Some(bx), Some(by))
            }
            _ => (None, None),
        };
        [ax, ay, bx, by]
    })
}

/// Divergence `δ` on rank `m >= 1`: `δF = (1/(mλ)) Σ_i ∂_{ξi} (∇_i F)`.
pub(crate) fn divergence_op(m: usize) -> FirstOrderOp {
    assert!(m >= 1);
    let s = 1.0 / m as f64;
    build(m, m, -1.0, |p| {
        let d1 = p.d1().unwrap();
        let d2 = p.d2().unwrap();
        let ax = Some(d1.scale(s));
        let ay = Some(d2.scale(s));
        // μx-part of ∇_1 F: −ξ1 D1F − ξ2 D2F;  of ∇_2 F: ξ2 D1F − ξ1 D2F
        let g1x = d1.mul_monomial(-1.0, 1, 0).add(&d2.mul_monomial(-1.0, 0, 1));
        let g2x = d1.mul_monomial(1.0, 0, 1).add(&d2.mul_monomial(-1.0, 1, 0));
        // μy-part of ∇_1 F: −ξ2 D1F + ξ1 D2F;  of ∇_2 F: −ξ1 D1F − ξ2 D2F
        let g1y = d1.mul_monomial(-1.0, 0, 1).add(&d2.mul_monomial(1.0, 1, 0));
        let g2y = d1.mul_monomial(-1.0, 1, 0).add(&d2.mul_monomial(-1.0, 0, 1));
        let bx = g1x.d1().unwrap().add(&g2x.d2().unwrap()).scale(s);
        let by = g1y.d1().unwrap().add(&g2y.d2().unwrap()).scale(s);
        [ax, ay, Some(bx), Some(by)]
    })
}

impl FirstOrderOp {
    pub fn apply(&self, mg: &MetricGrid, f: &[Vec<f64>]) -> Vec<Vec<f64>> {
        assert_eq!(f.len(), self.cols);
        let grads: Vec<(Vec<f64>, Vec<f64>)> = f.iter().map(|c| mg.grid.gradient(c)).collect();
        let lp = self.lambda_factor(mg);
        (0..self.rows)
            .map(|r| {
                (0..mg.len())
                    .into_par_iter()
                    .map(|i| {
                        let (mx, my) = (mg.mu_x[i], mg.mu_y[i]);
                        let mut s = 0.0;
                        for c in 0..self.cols {
                            let k = r * self.cols + c;
                            s += self.ax[k] * grads[c].0[i]
                                + self.ay[k] * grads[c].1[i]
                                + (mx * self.bx[k] + my * self.by[k]) * f[c][i];
                        }
                        match &lp {
                            Some(l) => s * l[i],
                            None => s,
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Exact transpose of [`FirstOrderOp::apply`] for the plain Euclidean
    /// inner product on stacked component grids.
    pub fn apply_transpose(&self, mg: &MetricGrid, h: &[Vec<f64>]) -> Vec<Vec<f64>> {
        assert_eq!(h.len(), self.rows);
        let lp = self.lambda_factor(mg);
        (0..self.cols)
            .map(|c| {
                let n = mg.len();
                let mut x = vec![0.0; n];
                let mut y = vec![0.0; n];
                let mut b = vec![0.0; n];
                x.par_iter_mut()
                    .zip(y.par_iter_mut())
                    .zip(b.par_iter_mut())
                    .enumerate()
                    .for_each(|(i, ((xv, yv), bv))| {
                        let (mx, my) = (mg.mu_x[i], mg.mu_y[i]);
                        let l = lp.as_ref().map_or(1.0, |l| l[i]);
                        for r in 0..self.rows {
                            let k = r * self.cols + c;
                            let hv = h[r][i] * l;
                            *xv += self.ax[k] * hv;
                            *yv += self.ay[k] * hv;
                            *bv += (mx * self.bx[k] + my * self.by[k]) * hv;
                        }
                    });
                let dx = mg.grid.dx(&x);
                let dy = mg.grid.dy(&y);
                b.iter()
                    .zip(dx.iter().zip(&dy))
                    .map(|(bv, (a, d))| bv - a - d)
                    .collect()
            })
            .collect()
    }

    fn lambda_factor(&self, mg: &MetricGrid) -> Option<Vec<f64>> {
        if self.lambda_pow == 0.0 {
            None
        } else {
            Some(mg.lambda_pow(self.lambda_pow))
        }
    }
}
