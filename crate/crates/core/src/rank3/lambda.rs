//! The weight-3 pseudoform `Λ` built from third derivatives of the metric.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::metric::{ConformalFactor, Partials4};
use crate::solver::PseudoForm;
use crate::spectral::{max_abs, MetricGrid};

/// `Λ` on a grid, computed from real `μ`-derivatives and again from the
/// complex `λ`-derivatives.
#[derive(Debug, Clone)]
pub struct LambdaForm {
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
    /// `Λ^{(1)}, Λ^{(2)}, Λ^{(3)}`, each of weight 3.
    pub parts: [PseudoForm; 3],
    /// `Λ` from the complex route, `2Λ^{(1)} + 4Λ^{(2)} − 2Λ^{(3)}`.
    pub complex: PseudoForm,
    /// `max |Λ_real − Λ_complex|` over both components.
    pub discrepancy: f64,
    /// Largest imaginary part met while evaluating the complex route.
    pub imag_residue: f64,
}

impl LambdaForm {
    pub fn as_form(&self) -> PseudoForm {
        PseudoForm {
            weight: 3,
            w1: self.l1.clone(),
            w2: self.l2.clone(),
        }
    }

    pub fn max_norm(&self) -> f64 {
        max_abs(&self.l1).max(max_abs(&self.l2))
    }
}

/// `(Λ₁, Λ₂)` from the real formulas in `μ`.
pub fn lambda_real(d: &Partials4) -> [f64; 2] {
    let d = &d.d;
    let (mx, my) = (d[1][0], d[0][1]);
    let (mxx, mxy, myy) = (d[2][0], d[1][1], d[0][2]);
    let (mxxx, mxxy, mxyy, myyy) = (d[3][0], d[2][1], d[1][2], d[0][3]);
    let l1 = mxxx - 3.0 * mxyy + 10.0 * mx * mxx - 20.0 * my * mxy - 10.0 * mx * myy + 8.0 * mx.powi(3)
        - 24.0 * mx * my * my;
    let l2 = 3.0 * mxxy - myyy + 10.0 * my * mxx + 20.0 * mx * mxy - 10.0 * my * myy + 24.0 * mx * mx * my
        - 8.0 * my.powi(3);
    [l1, l2]
}

/// `λ_w/λ, λ_ww/λ, λ_www/λ` for `w = z` (`conj = false`) or `w = z̄`,
/// from `∂_z = ½(∂x − i∂y)` and `λ = e^{2μ}`.
fn lambda_log_derivs(d: &Partials4, conj: bool) -> [Complex64; 3] {
    let d = &d.d;
    let s = if conj { 1.0 } else { -1.0 };
    let i = Complex64::new(0.0, s);
    let m1 = 0.5 * (d[1][0] + i * d[0][1]);
    let m2 = 0.25 * (d[2][0] + 2.0 * i * d[1][1] - d[0][2]);
    let m3 = 0.125 * (d[3][0] + 3.0 * i * d[2][1] - 3.0 * d[1][2] - i * d[0][3]);
    [
        2.0 * m1,
        2.0 * m2 + 4.0 * m1 * m1,
        2.0 * m3 + 12.0 * m1 * m2 + 8.0 * m1 * m1 * m1,
    ]
}

/// `(Λ^{(1)}, Λ^{(2)}, Λ^{(3)})` as complex pairs (real up to round-off).
fn lambda_parts(d: &Partials4) -> [[Complex64; 2]; 3] {
    let [z1, z2, z3] = lambda_log_derivs(d, false);
    let [b1, b2, b3] = lambda_log_derivs(d, true);
    let i = Complex64::new(0.0, 1.0);
    let pair = |p: Complex64, q: Complex64| [p + q, i * (p - q)];
    [pair(z3, b3), pair(z1 * z2, b1 * b2), pair(z1 * z1 * z1, b1 * b1 * b1)]
}

/// `(Λ₁, Λ₂)` at one point through the complex route.
pub fn lambda_complex(d: &Partials4) -> [Complex64; 2] {
    let p = lambda_parts(d);
    [
        2.0 * p[0][0] + 4.0 * p[1][0] - 2.0 * p[2][0],
        2.0 * p[0][1] + 4.0 * p[1][1] - 2.0 * p[2][1],
    ]
}

/// `(Λ₁, Λ₂)` at an arbitrary point.
pub fn lambda_at(cf: &ConformalFactor, p: [f64; 2]) -> [f64; 2] {
    lambda_real(&cf.partials(p, 3))
}

pub fn lambda_form(mg: &MetricGrid) -> LambdaForm {
    struct Point {
        real: [f64; 2],
        parts: [[Complex64; 2]; 3],
        complex: [Complex64; 2],
    }
    let pts: Vec<Point> = (0..mg.len())
        .into_par_iter()
        .map(|k| {
            let d = mg.cf.partials(mg.grid.point(k), 3);
            Point {
                real: lambda_real(&d),
                parts: lambda_parts(&d),
                complex: lambda_complex(&d),
            }
        })
        .collect();
    let form = |f: &dyn Fn(&Point) -> [Complex64; 2]| PseudoForm {
        weight: 3,
        w1: pts.iter().map(|p| f(p)[0].re).collect(),
        w2: pts.iter().map(|p| f(p)[1].re).collect(),
    };
    let parts = [form(&|p| p.parts[0]), form(&|p| p.parts[1]), form(&|p| p.parts[2])];
    let complex = form(&|p| p.complex);
    let mut discrepancy = 0.0f64;
    let mut imag_residue = 0.0f64;
    for p in &pts {
        for c in 0..2 {
            discrepancy = discrepancy.max((p.real[c] - p.complex[c].re).abs());
            imag_residue = imag_residue.max(p.complex[c].im.abs());
            for part in &p.parts {
                imag_residue = imag_residue.max(part[c].im.abs());
            }
        }
    }
    LambdaForm {
        l1: pts.iter().map(|p| p.real[0]).collect(),
        l2: pts.iter().map(|p| p.real[1]).collect(),
        parts,
        complex,
        discrepancy,
        imag_residue,
    }
}
