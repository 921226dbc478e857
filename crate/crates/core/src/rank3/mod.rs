//! Necessary conditions for a rank-3 Killing field: the field `T^c`, the
//! pseudoform `Λ`, the transport and fourth-order equations for the
//! potential `u`, and line and area integrals over isolines of `K`.

mod domain;
mod fourth;
mod isoline;
mod lambda;

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::solver::{make_z, PseudoVector};
use crate::spectral::{max_abs, MetricGrid};
use crate::tensor::TraceFreeField;

pub use domain::{
    annulus_integral, closed_isoline_consistency, critical_points, disk_integral_coarea, disk_integral_polar,
    domain_integral_checks, gauss_legendre, AnnulusCheck, ConsistencyEntry, ConsistencyReport, CriticalKind,
    CriticalPoint, DiskCheck, DomainChecks, DomainReport,
};
pub use fourth::{
    solve_fourth_order, third_derivative_residual, third_derivative_residual_with, transport_study, transport_test,
    CohomologySolution, FourthOrderOperator, FourthOrderOptions, FourthOrderSolution, ThirdDerivativeReport,
    TransportStudy, TransportTestResult, TransportVerdict,
};
pub use isoline::{
    extract_isolines, isoline_integral, isoline_integral_of, trace_closed_isoline, trace_isoline_arc, IsolineCurve,
    IsolineIntegral, IsolineOptions, IsolineSet,
};
pub use lambda::{lambda_at, lambda_complex, lambda_form, lambda_real, LambdaForm};

fn check_weight3(c: &PseudoVector) -> Result<()> {
    if c.weight != 3 {
        return Err(Error::WeightMismatch {
            expected: 3,
            actual: c.weight,
        });
    }
    Ok(())
}

/// `T^c`: `T₁₁ = −T₂₂ = e^{4μ}(−c²μx + c¹μy)`, `T₁₂ = e^{4μ}(c¹μx + c²μy)`.
pub fn make_t(mg: &Arc<MetricGrid>, c: &PseudoVector) -> Result<TraceFreeField> {
    check_weight3(c)?;
    let w = mg.lambda_pow(2.0);
    let n = mg.len();
    let a = (0..n)
        .map(|i| w[i] * (-c.c2 * mg.mu_x[i] + c.c1 * mg.mu_y[i]))
        .collect();
    let b = (0..n).map(|i| w[i] * (c.c1 * mg.mu_x[i] + c.c2 * mg.mu_y[i])).collect();
    TraceFreeField::new(mg.clone(), 2, a, b)
}

/// `max |T^c − Z^{2,c⊥}|`.
pub fn t_z_mismatch(mg: &Arc<MetricGrid>, c: &PseudoVector) -> Result<f64> {
    let t = make_t(mg, c)?;
    let z = make_z(mg, 2, &c.perp())?;
    Ok(t.sub(&z)?.max_norm())
}

/// `δ²T^c` on the grid.
pub fn delta2_t(mg: &Arc<MetricGrid>, c: &PseudoVector) -> Result<Vec<f64>> {
    Ok(make_t(mg, c)?.delta()?.delta()?.a().to_vec())
}

/// `Φ^c` by both routes.
#[derive(Debug, Clone)]
pub struct PhiC {
    /// `λ^{−1}(∂x(δT^c)₂ − ∂y(δT^c)₁)` with `δT^c` differentiated spectrally.
    pub covariant: Vec<f64>,
    /// `c¹Λ₁ + c²Λ₂`.
    pub paired: Vec<f64>,
    pub discrepancy: f64,
}

pub fn phi_c(mg: &Arc<MetricGrid>, c: &PseudoVector) -> Result<PhiC> {
    let dt = make_t(mg, c)?.delta()?;
    let g = &mg.grid;
    let curl: Vec<f64> = g
        .dx(dt.b())
        .iter()
        .zip(g.dy(dt.a()))
        .zip(&mg.lambda)
        .map(|((p, q), l)| (p - q) / l)
        .collect();
    let paired = lambda_form(mg).as_form().pair(c);
    let discrepancy = curl.iter().zip(&paired).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(PhiC {
        covariant: curl,
        paired,
        discrepancy,
    })
}

/// `(∫Λ₁dσ, ∫Λ₂dσ)` together with `‖Λ‖_∞` and the torus area.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeanValues {
    pub integrals: [f64; 2],
    pub lambda_max: f64,
    pub area: f64,
}

impl MeanValues {
    /// Both means below `tol_rel · area · ‖Λ‖_∞`.
    pub fn vanish(&self, tol_rel: f64) -> bool {
        let t = tol_rel * self.area * self.lambda_max;
        self.integrals.iter().all(|v| v.abs() <= t)
    }
}

pub fn mean_value_check(mg: &MetricGrid) -> MeanValues {
    let lf = lambda_form(mg);
    MeanValues {
        integrals: [mg.integrate_area(&lf.l1), mg.integrate_area(&lf.l2)],
        lambda_max: lf.max_norm(),
        area: mg.total_area(),
    }
}

/// Residuals of the component system and of the invariant trace-free
/// Hessian equation for a periodic `u` and a rank-2 trace-free right side.
#[derive(Debug, Clone)]
pub struct HessianResidual {
    /// `(½(∇₁∇₁u − ∇₂∇₂u) − T₁₁, ∇₁∇₂u − T₁₂)`.
    pub components: [Vec<f64>; 2],
    /// `(∇∇u − ½(Δu)g − T)₁₁` and `(…)₁₂`.
    pub invariant: [Vec<f64>; 2],
}

/// Covariant Hessian `[H₁₁, H₁₂, H₂₂]` of `u` with Γ-periodic derivatives
/// `(ux, uy)`.
pub(crate) fn covariant_hessian(mg: &MetricGrid, ux: &[f64], uy: &[f64]) -> [Vec<f64>; 3] {
    let g = &mg.grid;
    let (uxx, uxy) = g.gradient(ux);
    let uyy = g.dy(uy);
    let n = mg.len();
    let (mx, my) = (&mg.mu_x, &mg.mu_y);
    // ∇ᵢ∇ⱼu = u_ij − Γ^p_ij u_p
    [
        (0..n).map(|i| uxx[i] - mx[i] * ux[i] + my[i] * uy[i]).collect(),
        (0..n).map(|i| uxy[i] - my[i] * ux[i] - mx[i] * uy[i]).collect(),
        (0..n).map(|i| uyy[i] + mx[i] * ux[i] - my[i] * uy[i]).collect(),
    ]
}

pub fn hessian_residual(mg: &Arc<MetricGrid>, u: &[f64], t: &TraceFreeField) -> Result<HessianResidual> {
    if t.rank() != 2 {
        return Err(Error::InvalidArgument("right-hand side must have rank 2".into()));
    }
    let (ux, uy) = mg.grid.gradient(u);
    let h = covariant_hessian(mg, &ux, &uy);
    let n = mg.len();
    let components = [
        (0..n).map(|i| 0.5 * (h[0][i] - h[2][i]) - t.a()[i]).collect(),
        (0..n).map(|i| h[1][i] - t.b()[i]).collect(),
    ];
    let invariant = [
        (0..n)
            .map(|i| {
                let lap = (h[0][i] + h[2][i]) / mg.lambda[i];
                h[0][i] - 0.5 * lap * mg.lambda[i] - t.a()[i]
            })
            .collect(),
        (0..n).map(|i| h[1][i] - t.b()[i]).collect(),
    ];
    Ok(HessianResidual { components, invariant })
}

/// `f⁰ = (−u_y, u_x)` and the flat divergence `∂x f⁰₁ + ∂y f⁰₂`.
pub fn f0_from_potential(mg: &MetricGrid, u: &[f64]) -> ([Vec<f64>; 2], Vec<f64>) {
    let g = &mg.grid;
    let (ux, uy) = g.gradient(u);
    let f1: Vec<f64> = uy.iter().map(|v| -v).collect();
    let div: Vec<f64> = g.dx(&f1).iter().zip(g.dy(&ux)).map(|(a, b)| a + b).collect();
    ([f1, ux], div)
}

pub(crate) fn max_abs2(a: &[f64], b: &[f64]) -> f64 {
    max_abs(a).max(max_abs(b))
}

#[cfg(test)]
mod tests;
