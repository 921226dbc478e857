//! Matrix-free iterative solvers.

use crate::error::{Error, Result};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(u, v)| *u += a * v);
}

fn scale(y: &mut [f64], a: f64) {
    y.iter_mut().for_each(|u| *u *= a);
}

#[derive(Debug, Clone)]
pub struct LsqrOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖b − A x‖`.
    pub rnorm: f64,
    /// `‖Aᵀ(b − A x)‖`.
    pub arnorm: f64,
    pub converged: bool,
}

/// LSQR (Paige & Saunders) for `min ‖A x − b‖`, started from `x = 0`, which
/// converges to the minimum-norm least-squares solution.
///
/// Stops when `‖r‖ <= btol ‖b‖ + atol ‖A‖ ‖x‖` (consistent systems) or
/// `‖Aᵀr‖ <= atol ‖A‖ ‖r‖` (inconsistent ones).
pub fn lsqr(
    n: usize,
    a: impl Fn(&[f64]) -> Vec<f64>,
    at: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    atol: f64,
    btol: f64,
    max_iter: usize,
) -> LsqrOutcome {
    let mut x = vec![0.0; n];
    let mut u = b.to_vec();
    let mut beta = norm(&u);
    let bnorm = beta;
    if beta == 0.0 {
        return LsqrOutcome {
            x,
            iterations: 0,
            rnorm: 0.0,
            arnorm: 0.0,
            converged: true,
        };
    }
    scale(&mut u, 1.0 / beta);
    let mut v = at(&u);
    let mut alpha = norm(&v);
    if alpha == 0.0 {
        return LsqrOutcome {
            x,
            iterations: 0,
            rnorm: bnorm,
            arnorm: 0.0,
            converged: true,
        };
    }
    scale(&mut v, 1.0 / alpha);
    let mut w = v.clone();
    let mut phibar = beta;
    let mut rhobar = alpha;
    let mut anorm2 = 0.0;
    let mut xnorm;
    let mut rnorm = beta;
    let mut arnorm = alpha * beta;
    for it in 1..=max_iter {
        let mut au = a(&v);
        axpy(&mut au, -alpha, &u);
        u = au;
        beta = norm(&u);
        if beta > 0.0 {
            scale(&mut u, 1.0 / beta);
        }
        anorm2 += alpha * alpha + beta * beta;
        let mut atv = at(&u);
        axpy(&mut atv, -beta, &v);
        v = atv;
        alpha = norm(&v);
        if alpha > 0.0 {
            scale(&mut v, 1.0 / alpha);
        }
        let rho = rhobar.hypot(beta);
        let c = rhobar / rho;
        let s = beta / rho;
        let theta = s * alpha;
        rhobar = -c * alpha;
        let phi = c * phibar;
        phibar *= s;
        axpy(&mut x, phi / rho, &w);
        let mut nw = v.clone();
        axpy(&mut nw, -theta / rho, &w);
        w = nw;
        rnorm = phibar;
        arnorm = phibar * alpha * c.abs();
        xnorm = norm(&x);
        let anorm = anorm2.sqrt();
        let test1 = rnorm <= btol * bnorm + atol * anorm * xnorm;
        let test2 = arnorm <= atol * anorm * rnorm;
        if test1 || test2 || alpha == 0.0 {
            return LsqrOutcome {
                x,
                iterations: it,
                rnorm,
                arnorm,
                converged: true,
            };
        }
    }
    LsqrOutcome {
        x,
        iterations: max_iter,
        rnorm,
        arnorm,
        converged: false,
    }
}

/// Preconditioned conjugate gradients for a symmetric positive
/// (semi-)definite operator. Returns the iterate and the number of
/// iterations; fails if the relative residual does not reach `tol`.
pub fn pcg(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Option<Vec<f64>>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let bnorm = norm(b);
    let mut x = x0.unwrap_or_else(|| vec![0.0; b.len()]);
    if bnorm == 0.0 && norm(&x) == 0.0 {
        return Ok((x, 0));
    }
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let scale_ref = bnorm.max(f64::MIN_POSITIVE);
    if norm(&r) <= tol * scale_ref {
        return Ok((x, 0));
    }
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        if norm(&r) <= tol * scale_ref {
            return Ok((x, it));
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: norm(&r) / scale_ref,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn matvec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
        (m * DVector::from_column_slice(x)).as_slice().to_vec()
    }

    #[test]
    fn lsqr_solves_overdetermined_system() {
        let a = DMatrix::from_fn(6, 3, |i, j| ((i * 3 + j) as f64).sin() + if i == j { 2.0 } else { 0.0 });
        let b: Vec<f64> = (0..6).map(|i| (i as f64).cos()).collect();
        let out = lsqr(
            3,
            |x| matvec(&a, x),
            |y| matvec(&a.transpose(), y),
            &b,
            1e-14,
            1e-14,
            100,
        );
        let svd = a.clone().svd(true, true);
        let want = svd.solve(&DVector::from_vec(b), 1e-14).unwrap();
        for i in 0..3 {
            assert!((out.x[i] - want[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn lsqr_returns_minimum_norm_solution() {
        // rank-deficient: second column duplicates the first
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 1.0, 0.0, 0.0, 3.0]);
        let b = vec![2.0, 5.0, 3.0];
        let out = lsqr(
            3,
            |x| matvec(&a, x),
            |y| matvec(&a.transpose(), y),
            &b,
            1e-15,
            1e-15,
            100,
        );
        assert!((out.x[0] - out.x[1]).abs() < 1e-12);
        assert!((out.x[0] - 1.0).abs() < 1e-12 && (out.x[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pcg_on_spd_matrix() {
        let n = 20;
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                4.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        });
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let (x, _) = pcg(
            |v| matvec(&a, v),
            |r| r.iter().map(|v| v / 4.0).collect(),
            &b,
            None,
            1e-13,
            200,
        )
        .unwrap();
        let r = matvec(&a, &x);
        for i in 0..n {
            assert!((r[i] - b[i]).abs() < 1e-10);
        }
    }
}
