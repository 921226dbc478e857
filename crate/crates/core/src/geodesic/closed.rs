//! Closed geodesics in a prescribed free homotopy class.

use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use nalgebra::{Matrix3, Vector3};

use super::{closure, integrate_flow, variational_field, wrap_angle, GeodesicOrbit, TOL_CLOSE};
use crate::error::{Error, Result};
use crate::metric::ConformalFactor;
use crate::ode::Dopri5;

#[derive(Debug, Clone, Copy)]
pub struct ClosedSearchOptions {
    /// Vertices of the discrete loop.
    pub polygon_points: usize,
    /// Base point of the initial straight loop.
    pub start: [f64; 2],
    pub max_lbfgs_iters: u64,
    pub max_newton_iters: usize,
    pub ode_tol: f64,
    pub tol_close: f64,
    /// Quadrature intervals of the returned orbit.
    pub samples: usize,
}

impl Default for ClosedSearchOptions {
    fn default() -> Self {
        Self {
            polygon_points: 64,
            start: [0.1234, 0.3771],
            max_lbfgs_iters: 3000,
            max_newton_iters: 40,
            ode_tol: 1e-12,
            tol_close: TOL_CLOSE,
            samples: 256,
        }
    }
}

/// Discrete energy `K Σ λ(midpoint) |x_{i+1} − x_i|²` of a loop whose last
/// vertex is followed by the first one translated by `shift`.
struct LoopEnergy<'a> {
    cf: &'a ConformalFactor,
    shift: [f64; 2],
}

impl LoopEnergy<'_> {
    fn segments(&self, v: &[f64]) -> impl Iterator<Item = ([f64; 2], [f64; 2], usize, usize)> + '_ {
        let k = v.len() / 2;
        let shift = self.shift;
        let pts: Vec<[f64; 2]> = (0..k).map(|i| [v[2 * i], v[2 * i + 1]]).collect();
        (0..k).map(move |i| {
            let a = pts[i];
            let (b, j) = if i + 1 == k {
                ([pts[0][0] + shift[0], pts[0][1] + shift[1]], 0)
            } else {
                (pts[i + 1], i + 1)
            };
            (a, b, i, j)
        })
    }

    fn length(&self, v: &[f64]) -> f64 {
        self.segments(v)
            .map(|(a, b, _, _)| {
                let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                self.cf.value(m).exp() * (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .sum()
    }
}

impl CostFunction for LoopEnergy<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, v: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let k = (v.len() / 2) as f64;
        Ok(k * self
            .segments(v)
            .map(|(a, b, _, _)| {
                let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                let l = (2.0 * self.cf.value(m)).exp();
                l * ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2))
            })
            .sum::<f64>())
    }
}

impl Gradient for LoopEnergy<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, v: &Self::Param) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        let k = (v.len() / 2) as f64;
        let mut g = vec![0.0; v.len()];
        for (a, b, i, j) in self.segments(v) {
            let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            let (mu, mx, my) = self.cf.gradient(m);
            let l = (2.0 * mu).exp();
            let d = [b[0] - a[0], b[1] - a[1]];
            let d2 = d[0] * d[0] + d[1] * d[1];
            // ∇λ = 2λ∇μ, and each endpoint moves the midpoint by one half
            let half_grad = [l * mx * d2, l * my * d2];
            for c in 0..2 {
                g[2 * i + c] += k * (half_grad[c] - 2.0 * l * d[c]);
                g[2 * j + c] += k * (half_grad[c] + 2.0 * l * d[c]);
            }
        }
        Ok(g)
    }
}

/// Endpoint and fundamental matrix of the flow after time `t`.
fn shoot(cf: &ConformalFactor, s0: [f64; 3], t: f64, tol: f64) -> Result<([f64; 3], Matrix3<f64>)> {
    let mut y0 = [0.0; 12];
    y0[..3].copy_from_slice(&s0);
    y0[3] = 1.0;
    y0[7] = 1.0;
    y0[11] = 1.0;
    let y = Dopri5::with_tol(tol).integrate(|_, s: &[f64; 12]| variational_field(cf, s), 0.0, y0, t, &[], |_, _| {})?;
    Ok(([y[0], y[1], y[2]], Matrix3::from_row_slice(&y[3..])))
}

/// Finds a closed geodesic freely homotopic to the translate `p e1 + q e2`.
///
/// A discrete loop energy is minimized by L-BFGS starting from the straight
/// loop through `opts.start`; the result seeds Newton iterations (SVD
/// pseudo-inverse) on the start offset along the normal, the initial angle
/// and the period.
pub fn find_closed_geodesic(
    cf: &ConformalFactor,
    class: (i64, i64),
    opts: &ClosedSearchOptions,
) -> Result<GeodesicOrbit> {
    if class == (0, 0) {
        return Err(Error::InvalidArgument("homotopy class must be nonzero".into()));
    }
    let shift = cf.lattice().vector(class.0, class.1);
    let k = opts.polygon_points.max(8);
    let init: Vec<f64> = (0..k)
        .flat_map(|i| {
            let s = i as f64 / k as f64;
            [opts.start[0] + s * shift[0], opts.start[1] + s * shift[1]]
        })
        .collect();
    let problem = LoopEnergy { cf, shift };
    let loop_pts = if cf.is_flat() {
        init
    } else {
        let solver = LBFGS::new(MoreThuenteLineSearch::new(), 8)
            .with_tolerance_grad(1e-9)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .with_tolerance_cost(1e-15)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let res = Executor::new(LoopEnergy { cf, shift }, solver)
            .configure(|s| s.param(init.clone()).max_iters(opts.max_lbfgs_iters))
            .run()
            .map_err(|e| Error::InvalidArgument(format!("loop energy minimization failed: {e}")))?;
        res.state().get_best_param().cloned().unwrap_or(init)
    };
    let len0 = problem.length(&loop_pts);
    let p0 = [loop_pts[0], loop_pts[1]];
    let prev = [loop_pts[2 * (k - 1)] - shift[0], loop_pts[2 * (k - 1) + 1] - shift[1]];
    let next = [loop_pts[2], loop_pts[3]];
    let th0 = (next[1] - prev[1]).atan2(next[0] - prev[0]);
    newton_refine(cf, class, p0, th0, len0, opts)
}

fn newton_refine(
    cf: &ConformalFactor,
    class: (i64, i64),
    p0: [f64; 2],
    th0: f64,
    len0: f64,
    opts: &ClosedSearchOptions,
) -> Result<GeodesicOrbit> {
    let shift = cf.lattice().vector(class.0, class.1);
    let normal = [-th0.sin(), th0.cos()];
    let residual = |u: &Vector3<f64>| -> Result<(Vector3<f64>, Matrix3<f64>, f64)> {
        let s0 = [p0[0] + u[0] * normal[0], p0[1] + u[0] * normal[1], u[1]];
        let t = u[2];
        let (end, phi) = shoot(cf, s0, t, opts.ode_tol)?;
        let w = t.abs() / (2.0 * std::f64::consts::PI);
        let r = Vector3::new(
            end[0] - s0[0] - shift[0],
            end[1] - s0[1] - shift[1],
            w * wrap_angle(end[2] - s0[2]),
        );
        let f = super::flow_field(cf, &end);
        let dn = phi * Vector3::new(normal[0], normal[1], 0.0);
        let dth = phi * Vector3::new(0.0, 0.0, 1.0);
        let mut j = Matrix3::zeros();
        j.set_column(0, &Vector3::new(dn[0] - normal[0], dn[1] - normal[1], w * dn[2]));
        j.set_column(1, &Vector3::new(dth[0], dth[1], w * (dth[2] - 1.0)));
        j.set_column(2, &Vector3::new(f[0], f[1], w * f[2]));
        Ok((r, j, r.norm()))
    };
    let mut u = Vector3::new(0.0, th0, len0);
    let (mut r, mut j, mut rn) = residual(&u)?;
    for _ in 0..opts.max_newton_iters {
        if rn <= 0.1 * opts.tol_close {
            break;
        }
        // families of closed orbits (symmetric metrics) make J singular;
        // their direction is dropped by the pseudo-inverse
        let svd = j.svd(true, true);
        let smax = svd.singular_values.max();
        let step = svd
            .solve(&(-r), 1e-7 * smax)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial = u + step * lam;
            if trial[2] > 0.0 {
                if let Ok((r2, j2, rn2)) = residual(&trial) {
                    if rn2 < rn {
                        u = trial;
                        r = r2;
                        j = j2;
                        rn = rn2;
                        accepted = true;
                        break;
                    }
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let start = [p0[0] + u[0] * normal[0], p0[1] + u[0] * normal[1], wrap_angle(u[1])];
    let orbit = integrate_flow(cf, start, u[2], opts.ode_tol, opts.samples)?;
    let end = orbit.samples.last().expect("nonempty");
    let (got, res) = closure(cf, start, [end[1], end[2], end[3]], u[2]);
    if got != class || res > opts.tol_close {
        return Err(Error::OrbitNotClosed(res.max(rn)));
    }
    Ok(orbit)
}

/// For metrics constant along `e1` (`μ` depends on the second lattice
/// coordinate only), the straight loops along `e1` through the critical
/// levels of `μ` are closed geodesics; returns them.
pub fn critical_circle_orbits(cf: &ConformalFactor, opts: &ClosedSearchOptions) -> Result<Vec<GeodesicOrbit>> {
    if cf.is_flat() || cf.modes().iter().any(|m| m.k.0 != 0) {
        return Ok(Vec::new());
    }
    let lat = cf.lattice();
    let e1 = lat.e1();
    let e2 = lat.e2();
    let th = e1[1].atan2(e1[0]);
    // derivative of μ along t ↦ t e2 projected on the normal of e1
    let nrm = [-th.sin(), th.cos()];
    let dmu = |t: f64| {
        let (_, mx, my) = cf.gradient([t * e2[0], t * e2[1]]);
        mx * nrm[0] + my * nrm[1]
    };
    let n = 512;
    let mut roots = Vec::new();
    for i in 0..n {
        let (mut a, mut b) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
        let (mut fa, fb) = (dmu(a), dmu(b));
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if fa * fb >= 0.0 {
            continue;
        }
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            let fm = dmu(m);
            if fa * fm <= 0.0 {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
        }
        roots.push(0.5 * (a + b));
    }
    let len_e1 = e1[0].hypot(e1[1]);
    roots
        .into_iter()
        .map(|t| {
            let p = [t * e2[0], t * e2[1]];
            let len = cf.value(p).exp() * len_e1;
            integrate_flow(cf, [p[0], p[1], th], len, opts.ode_tol, opts.samples)
        })
        .collect()
}
