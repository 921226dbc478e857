//! Geodesic flow on the unit circle bundle in the chart `(x, y, θ)`, where
//! `θ` is the angle between the velocity and the line `y = const`.

mod closed;
mod ray;

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric::ConformalFactor;
use crate::ode::Dopri5;

pub use closed::{critical_circle_orbits, find_closed_geodesic, ClosedSearchOptions};
pub use ray::{
    projective_distance, ratio_test, ray_integral_z, ray_pair, ray_pair_estimate, OrbitPairEntry, RatioTestReport,
    RatioVerdict, RayEstimate, RayIntegralPair,
};

/// Default tolerance for accepting a closed orbit.
pub const TOL_CLOSE: f64 = 1e-10;

/// Generator of the flow: `ẋ = e^{−μ}cosθ`, `ẏ = e^{−μ}sinθ`,
/// `θ̇ = e^{−μ}(−μx sinθ + μy cosθ)`.
pub fn flow_field(cf: &ConformalFactor, s: &[f64; 3]) -> [f64; 3] {
    let (mu, mx, my) = cf.gradient([s[0], s[1]]);
    let e = (-mu).exp();
    let (sn, cs) = s[2].sin_cos();
    [e * cs, e * sn, e * (-mx * sn + my * cs)]
}

/// Flow together with its linearization; the state is `(x, y, θ, Φ)` with
/// `Φ` the 3×3 fundamental matrix stored row-major.
pub(crate) fn variational_field(cf: &ConformalFactor, s: &[f64; 12]) -> [f64; 12] {
    let d = cf.partials([s[0], s[1]], 2).d;
    let (mx, my) = (d[1][0], d[0][1]);
    let (mxx, mxy, myy) = (d[2][0], d[1][1], d[0][2]);
    let e = (-d[0][0]).exp();
    let (sn, cs) = s[2].sin_cos();
    let f3 = e * (-mx * sn + my * cs);
    let j = [
        [-mx * e * cs, -my * e * cs, -e * sn],
        [-mx * e * sn, -my * e * sn, e * cs],
        [
            -mx * f3 + e * (-mxx * sn + mxy * cs),
            -my * f3 + e * (-mxy * sn + myy * cs),
            e * (-mx * cs - my * sn),
        ],
    ];
    let mut out = [0.0; 12];
    out[0] = e * cs;
    out[1] = e * sn;
    out[2] = f3;
    for r in 0..3 {
        for c in 0..3 {
            out[3 + 3 * r + c] = (0..3).map(|k| j[r][k] * s[3 + 3 * k + c]).sum();
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct GeodesicOrbit {
    /// Uniform samples `(t, x, y, θ)` including both endpoints.
    pub samples: Vec<[f64; 4]>,
    /// Lattice translate `p e1 + q e2` closest to the end-to-start displacement.
    pub homotopy_class: (i64, i64),
    /// Integration time; equal to the length since the speed is 1.
    pub period: f64,
    /// `sqrt(|Δx|² + |Δy|² + (L/2π · Δθ)²)` between the end and the start
    /// translated by the homotopy class, with `Δθ` taken modulo `2π`.
    pub closure_residual: f64,
    pub ode_tol: f64,
}

impl GeodesicOrbit {
    pub fn start(&self) -> [f64; 3] {
        let s = self.samples[0];
        [s[1], s[2], s[3]]
    }

    /// Number of quadrature intervals.
    pub fn intervals(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn is_closed(&self, tol: f64) -> bool {
        self.closure_residual <= tol
    }

    /// `t,x,y,theta` table with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,x,y,theta\n");
        for r in &self.samples {
            s.push_str(&format!("{:.16e},{:.16e},{:.16e},{:.16e}\n", r[0], r[1], r[2], r[3]));
        }
        s
    }

    /// Largest deviation of `f(x, y, θ)` from its initial value.
    pub fn drift(&self, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let f0 = f(self.samples[0][1], self.samples[0][2], self.samples[0][3]);
        self.samples
            .iter()
            .map(|s| (f(s[1], s[2], s[3]) - f0).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Closure measure and nearest class for a trajectory from `a` to `b` of
/// length `len`.
pub(crate) fn closure(cf: &ConformalFactor, a: [f64; 3], b: [f64; 3], len: f64) -> ((i64, i64), f64) {
    let lat = cf.lattice();
    let dc = lat.coords([b[0] - a[0], b[1] - a[1]]);
    let class = (dc[0].round() as i64, dc[1].round() as i64);
    let t = lat.vector(class.0, class.1);
    let dx = b[0] - a[0] - t[0];
    let dy = b[1] - a[1] - t[1];
    let w = len / (2.0 * PI);
    let dth = w * wrap_angle(b[2] - a[2]);
    (class, (dx * dx + dy * dy + dth * dth).sqrt())
}

/// Integrates the flow from `start = (x, y, θ)` for time `t_end`, returning
/// `samples + 1` uniformly spaced samples.
pub fn integrate_flow(
    cf: &ConformalFactor,
    start: [f64; 3],
    t_end: f64,
    tol: f64,
    samples: usize,
) -> Result<GeodesicOrbit> {
    if !(tol > 0.0) || samples == 0 {
        return Err(Error::InvalidArgument(
            "tol must be positive and samples nonzero".into(),
        ));
    }
    let ode = Dopri5::with_tol(tol);
    let stops: Vec<f64> = (1..samples).map(|k| t_end * k as f64 / samples as f64).collect();
    let mut out = Vec::with_capacity(samples + 1);
    let end = ode.integrate(
        |_, s: &[f64; 3]| flow_field(cf, s),
        0.0,
        start,
        t_end,
        &stops,
        |t, s| out.push([t, s[0], s[1], s[2]]),
    )?;
    // the observer sees t_end exactly once
    debug_assert_eq!(out.len(), samples + 1);
    let (class, res) = closure(cf, start, end, t_end.abs());
    Ok(GeodesicOrbit {
        samples: out,
        homotopy_class: class,
        period: t_end,
        closure_residual: res,
        ode_tol: tol,
    })
}

/// `e^{μ} cos θ`, conserved when `μ` depends on `y` only.
pub fn clairaut_integral(cf: &ConformalFactor, x: f64, y: f64, theta: f64) -> f64 {
    cf.value([x, y]).exp() * theta.cos()
}

#[cfg(test)]
mod tests;
