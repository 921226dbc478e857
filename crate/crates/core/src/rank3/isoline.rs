//! Isolines of the Gaussian curvature, parameterized by the flow of
//! `∇^⊥K = λ^{−1}(−K_y, K_x)`, so that `‖γ̇‖ = ‖∇K‖`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::fourth::CohomologySolution;
use super::lambda::lambda_at;
use crate::error::{Error, Result};
use crate::metric::ConformalFactor;
use crate::ode::Dopri5;
use crate::solver::PseudoVector;
use crate::spectral::Grid;

#[derive(Debug, Clone, Copy)]
pub struct IsolineOptions {
    /// Marching-squares grid; 0 selects the metric's default.
    pub grid_n: usize,
    /// Uniform samples per curve (rounded up to even).
    pub samples: usize,
    pub ode_tol: f64,
    /// `tol_crit = tol_crit_rel · max ‖∇K‖`.
    pub tol_crit_rel: f64,
    /// Give up tracing after this many multiples of the period estimate.
    pub max_periods: f64,
}

impl Default for IsolineOptions {
    fn default() -> Self {
        Self {
            grid_n: 0,
            samples: 512,
            ode_tol: 1e-12,
            tol_crit_rel: 1e-6,
            max_periods: 8.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IsolineCurve {
    pub level: f64,
    /// `(t, x, y)`, uniform in `t`, both endpoints included.
    pub samples: Vec<[f64; 3]>,
    pub closed: bool,
    /// `(p, q)` with end − start = `p e1 + q e2`, for closed curves.
    pub lift_displacement: Option<(i64, i64)>,
    /// Parameter length; the period for closed curves.
    pub period: f64,
    /// Smallest `‖∇K‖` over the samples.
    pub min_grad: f64,
    pub tol_crit: f64,
    /// `max |K − level|` over the samples.
    pub level_error: f64,
    /// `|end − start − lift|` for closed curves.
    pub closure_residual: f64,
}

impl IsolineCurve {
    pub fn intervals(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn start(&self) -> [f64; 2] {
        [self.samples[0][1], self.samples[0][2]]
    }

    pub fn end(&self) -> [f64; 2] {
        let s = self.samples.last().expect("nonempty");
        [s[1], s[2]]
    }

    /// `t,x,y` table with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,x,y\n");
        for r in &self.samples {
            s.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", r[0], r[1], r[2]));
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IsolineSet {
    pub level: f64,
    pub curves: Vec<IsolineCurve>,
    /// `K` is constant: there are no isolines to speak of.
    pub degenerate: bool,
    /// Components that met the critical zone and were cut into open arcs.
    pub clipped: usize,
    pub tol_crit: f64,
}

/// `(K, K_x, K_y, ‖∇K‖)` with the Riemannian norm `e^{−μ}|∇₀K|`.
fn curvature_data(cf: &ConformalFactor, p: [f64; 2]) -> (f64, f64, f64, f64) {
    let (mu, k, kx, ky) = cf.mu_and_curvature_gradient(p);
    (k, kx, ky, (-mu).exp() * kx.hypot(ky))
}

fn flow(cf: &ConformalFactor, p: [f64; 2]) -> [f64; 2] {
    let (mu, _, kx, ky) = cf.mu_and_curvature_gradient(p);
    let il = (-2.0 * mu).exp();
    [-ky * il, kx * il]
}

/// Newton steps along the coordinate gradient onto `K = level`.
fn project(cf: &ConformalFactor, mut p: [f64; 2], level: f64) -> [f64; 2] {
    for _ in 0..30 {
        let (k, kx, ky) = cf.curvature_gradient(p);
        let g2 = kx * kx + ky * ky;
        if g2 == 0.0 {
            break;
        }
        let s = (k - level) / g2;
        p = [p[0] - s * kx, p[1] - s * ky];
        if (s * g2.sqrt()).abs() < 1e-15 * (1.0 + p[0].abs() + p[1].abs()) {
            break;
        }
    }
    p
}

/// Largest `‖∇K‖` over the grid points.
pub(crate) fn max_grad(cf: &ConformalFactor, grid: &Grid) -> f64 {
    grid.points()
        .par_iter()
        .map(|&p| curvature_data(cf, p).3)
        .reduce(|| 0.0, f64::max)
}

fn sample_curve(
    cf: &ConformalFactor,
    start: [f64; 2],
    duration: f64,
    samples: usize,
    tol: f64,
) -> Result<Vec<[f64; 3]>> {
    let s = samples.max(2).next_multiple_of(2);
    let stops: Vec<f64> = (1..s).map(|k| duration * k as f64 / s as f64).collect();
    let mut out = Vec::with_capacity(s + 1);
    Dopri5::with_tol(tol).integrate(
        |_, y: &[f64; 2]| flow(cf, *y),
        0.0,
        start,
        duration,
        &stops,
        |t, y| out.push([t, y[0], y[1]]),
    )?;
    Ok(out)
}

fn finish(
    cf: &ConformalFactor,
    level: f64,
    samples: Vec<[f64; 3]>,
    closed: bool,
    lift: Option<(i64, i64)>,
    period: f64,
    tol_crit: f64,
) -> IsolineCurve {
    let (mut min_grad, mut level_error) = (f64::INFINITY, 0.0f64);
    for s in &samples {
        let (k, _, _, g) = curvature_data(cf, [s[1], s[2]]);
        min_grad = min_grad.min(g);
        level_error = level_error.max((k - level).abs());
    }
    let closure_residual = match lift {
        Some((p, q)) => {
            let v = cf.lattice().vector(p, q);
            let a = samples[0];
            let b = samples.last().expect("nonempty");
            (b[1] - a[1] - v[0]).hypot(b[2] - a[2] - v[1])
        }
        None => 0.0,
    };
    IsolineCurve {
        level,
        samples,
        closed,
        lift_displacement: lift,
        period,
        min_grad,
        tol_crit,
        level_error,
        closure_residual,
    }
}

/// Traces the isoline through `seed` (projected onto its level first)
/// until it returns to the normal line through the seed, up to a lattice
/// translation. `period_guess` sets the search step.
pub fn trace_closed_isoline(
    cf: &ConformalFactor,
    seed: [f64; 2],
    level: f64,
    period_guess: f64,
    tol_crit: f64,
    opts: &IsolineOptions,
) -> Result<IsolineCurve> {
    if !(period_guess > 0.0) {
        return Err(Error::InvalidArgument("period guess must be positive".into()));
    }
    let seed = project(cf, seed, level);
    let v0 = flow(cf, seed);
    let vn = v0[0].hypot(v0[1]);
    if curvature_data(cf, seed).3 < tol_crit || vn == 0.0 {
        return Err(Error::CriticalRegion);
    }
    let vh = [v0[0] / vn, v0[1] / vn];
    let lat = cf.lattice();
    let ode = Dopri5::with_tol(opts.ode_tol);
    let f = |_: f64, y: &[f64; 2]| flow(cf, *y);
    let offset = |y: [f64; 2]| {
        let c = lat.coords([y[0] - seed[0], y[1] - seed[1]]);
        let n = (c[0].round() as i64, c[1].round() as i64);
        let v = lat.vector(n.0, n.1);
        (n, [y[0] - seed[0] - v[0], y[1] - seed[1] - v[1]])
    };
    let dt = period_guess / 128.0;
    let t_max = opts.max_periods * period_guess;
    let (mut t, mut y) = (0.0, seed);
    let mut g_prev = 0.0;
    let found = loop {
        if t > t_max {
            return Err(Error::NoConvergence {
                iterations: (t / dt) as usize,
                residual: f64::NAN,
            });
        }
        let y1 = ode.integrate(f, t, y, t + dt, &[], |_, _| {})?;
        if curvature_data(cf, y1).3 < tol_crit {
            return Err(Error::CriticalRegion);
        }
        let (n, d) = offset(y1);
        let g = d[0] * vh[0] + d[1] * vh[1];
        let step = (y1[0] - y[0]).hypot(y1[1] - y[1]);
        if g_prev < 0.0 && g >= 0.0 && d[0].hypot(d[1]) < 4.0 * step {
            break (t, y, n);
        }
        g_prev = g;
        t += dt;
        y = y1;
    };
    // Newton on the crossing time from the last state before it
    let (t0, y0, n) = found;
    let shift = lat.vector(n.0, n.1);
    let cross = |y: [f64; 2]| (y[0] - seed[0] - shift[0]) * vh[0] + (y[1] - seed[1] - shift[1]) * vh[1];
    let mut tau = t0 + dt;
    for _ in 0..20 {
        let y1 = ode.integrate(f, t0, y0, tau, &[], |_, _| {})?;
        let v = flow(cf, y1);
        let step = cross(y1) / (v[0] * vh[0] + v[1] * vh[1]);
        tau -= step;
        if step.abs() <= 1e-15 * tau {
            break;
        }
    }
    let samples = sample_curve(cf, seed, tau, opts.samples, opts.ode_tol)?;
    Ok(finish(cf, level, samples, true, Some(n), tau, tol_crit))
}

/// The isoline arc of parameter length `duration` starting at the
/// projection of `start` onto `level`.
pub fn trace_isoline_arc(
    cf: &ConformalFactor,
    start: [f64; 2],
    level: f64,
    duration: f64,
    tol_crit: f64,
    opts: &IsolineOptions,
) -> Result<IsolineCurve> {
    let p = project(cf, start, level);
    let samples = sample_curve(cf, p, duration, opts.samples, opts.ode_tol)?;
    let curve = finish(cf, level, samples, false, None, duration, tol_crit);
    if curve.min_grad < tol_crit {
        return Err(Error::CriticalRegion);
    }
    Ok(curve)
}

/// A marching-squares polyline in unwrapped lattice coordinates.
struct Polyline {
    pts: Vec<[f64; 2]>,
    lift: (i64, i64),
}

fn marching_squares(v: &[f64], n: usize, level: f64) -> Vec<Polyline> {
    let at = |i: usize, j: usize| v[(i % n) * n + (j % n)];
    let above = |i: usize, j: usize| at(i, j) >= level;
    // edge keys: s-edge (i,j)-(i+1,j) → i n + j; t-edge (i,j)-(i,j+1) → n² + i n + j
    let s_edge = |i: usize, j: usize| (i % n) * n + (j % n);
    let t_edge = |i: usize, j: usize| n * n + (i % n) * n + (j % n);
    let point = |e: usize| -> [f64; 2] {
        let (dir, r) = (e / (n * n), e % (n * n));
        let (i, j) = (r / n, r % n);
        let (v0, v1) = if dir == 0 {
            (at(i, j), at(i + 1, j))
        } else {
            (at(i, j), at(i, j + 1))
        };
        let tau = (level - v0) / (v1 - v0);
        if dir == 0 {
            [(i as f64 + tau) / n as f64, j as f64 / n as f64]
        } else {
            [i as f64 / n as f64, (j as f64 + tau) / n as f64]
        }
    };
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut link = |a: usize, b: usize| {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    };
    for i in 0..n {
        for j in 0..n {
            let (a00, a10, a11, a01) = (above(i, j), above(i + 1, j), above(i + 1, j + 1), above(i, j + 1));
            let bottom = s_edge(i, j);
            let top = s_edge(i, j + 1);
            let left = t_edge(i, j);
            let right = t_edge(i + 1, j);
            let mut crossed = Vec::with_capacity(4);
            if a00 != a10 {
                crossed.push(bottom);
            }
            if a10 != a11 {
                crossed.push(right);
            }
            if a01 != a11 {
                crossed.push(top);
            }
            if a00 != a01 {
                crossed.push(left);
            }
            match crossed.len() {
                2 => link(crossed[0], crossed[1]),
                4 => {
                    let centre = 0.25 * (at(i, j) + at(i + 1, j) + at(i + 1, j + 1) + at(i, j + 1)) >= level;
                    // cut off the corners whose state differs from the centre
                    if centre == a00 {
                        link(bottom, right);
                        link(top, left);
                    } else {
                        link(left, bottom);
                        link(right, top);
                    }
                }
                _ => {}
            }
        }
    }
    let mut keys: Vec<usize> = adj.keys().copied().collect();
    keys.sort_unstable();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for &start in &keys {
        if seen.contains(&start) {
            continue;
        }
        let mut pts = vec![point(start)];
        seen.insert(start);
        let (mut prev, mut cur) = (start, adj[&start][0]);
        loop {
            let raw = point(cur);
            let last = *pts.last().expect("nonempty");
            let un = [raw[0] + (last[0] - raw[0]).round(), raw[1] + (last[1] - raw[1]).round()];
            if cur == start {
                let lift = ((un[0] - pts[0][0]).round() as i64, (un[1] - pts[0][1]).round() as i64);
                out.push(Polyline { pts, lift });
                break;
            }
            seen.insert(cur);
            pts.push(un);
            let nb = &adj[&cur];
            let next = if nb[0] == prev && nb.len() > 1 { nb[1] } else { nb[0] };
            prev = cur;
            cur = next;
        }
    }
    out
}

/// Isolines `{K = level}`: marching squares on the sampled curvature finds
/// the components, each of which is then traced by the flow of `∇^⊥K`.
/// Components meeting the critical zone `‖∇K‖ < tol_crit` are cut there
/// and the remaining pieces are returned as open arcs.
pub fn extract_isolines(cf: &ConformalFactor, level: f64, opts: &IsolineOptions) -> Result<IsolineSet> {
    let n = if opts.grid_n == 0 {
        cf.default_grid_n()
    } else {
        opts.grid_n
    };
    let grid = Grid::new(*cf.lattice(), n);
    let kv = grid.sample(|p| cf.gaussian_curvature(p));
    let (lo, hi) = kv
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo <= 1e-13 {
        return Ok(IsolineSet {
            level,
            curves: Vec::new(),
            degenerate: true,
            clipped: 0,
            tol_crit: 0.0,
        });
    }
    let tol_crit = opts.tol_crit_rel * max_grad(cf, &grid);
    let lat = cf.lattice();
    let polys = marching_squares(&kv, n, level);
    let results: Vec<Result<(Vec<IsolineCurve>, bool)>> = polys
        .par_iter()
        .map(|pl| {
            let pts: Vec<[f64; 2]> = pl
                .pts
                .iter()
                .map(|c| project(cf, lat.point(c[0], c[1]), level))
                .collect();
            let grads: Vec<f64> = pts.iter().map(|&p| curvature_data(cf, p).3).collect();
            if grads.iter().all(|&g| g >= tol_crit) {
                let closed_pts: Vec<[f64; 2]> = {
                    let v = lat.vector(pl.lift.0, pl.lift.1);
                    let mut c = pts.clone();
                    c.push([pts[0][0] + v[0], pts[0][1] + v[1]]);
                    c
                };
                let guess = polyline_time(cf, &closed_pts);
                let curve = trace_closed_isoline(cf, pts[0], level, guess, tol_crit, opts)?;
                Ok((vec![curve], false))
            } else {
                Ok((clip(cf, level, &pts, &grads, tol_crit), true))
            }
        })
        .collect();
    let mut curves = Vec::new();
    let mut clipped = 0;
    for r in results {
        let (c, cut) = r?;
        clipped += cut as usize;
        curves.extend(c);
    }
    Ok(IsolineSet {
        level,
        curves,
        degenerate: false,
        clipped,
        tol_crit,
    })
}

/// `∫ λ ds / |∇₀K|` along a polyline (midpoint rule).
pub(crate) fn polyline_time(cf: &ConformalFactor, pts: &[[f64; 2]]) -> f64 {
    pts.windows(2)
        .map(|w| {
            let m = [0.5 * (w[0][0] + w[1][0]), 0.5 * (w[0][1] + w[1][1])];
            let (_, kx, ky) = cf.curvature_gradient(m);
            let ds = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
            cf.lambda(m) * ds / kx.hypot(ky)
        })
        .sum()
}

/// Open arcs of a polyline outside the critical zone, with the parameter
/// accumulated by the trapezoid rule.
fn clip(cf: &ConformalFactor, level: f64, pts: &[[f64; 2]], grads: &[f64], tol_crit: f64) -> Vec<IsolineCurve> {
    let mut out = Vec::new();
    let mut run: Vec<[f64; 2]> = Vec::new();
    let flush = |run: &mut Vec<[f64; 2]>, out: &mut Vec<IsolineCurve>| {
        if run.len() >= 2 {
            let mut t = 0.0;
            let mut samples = vec![[0.0, run[0][0], run[0][1]]];
            for w in run.windows(2) {
                t += polyline_time(cf, w);
                samples.push([t, w[1][0], w[1][1]]);
            }
            out.push(finish(cf, level, samples, false, None, t, tol_crit));
        }
        run.clear();
    };
    for (p, &g) in pts.iter().zip(grads) {
        if g >= tol_crit {
            run.push(*p);
        } else {
            flush(&mut run, &mut out);
        }
    }
    flush(&mut run, &mut out);
    out
}

/// `∫ f dt` along the curve: periodic trapezoid rule for closed curves,
/// composite Simpson (trapezoid for nonuniform clipped arcs) otherwise.
pub fn isoline_integral_of(curve: &IsolineCurve, f: impl Fn([f64; 2]) -> f64 + Sync) -> Result<f64> {
    if curve.min_grad < curve.tol_crit {
        return Err(Error::CriticalRegion);
    }
    let s = &curve.samples;
    let n = s.len() - 1;
    let vals: Vec<f64> = s.par_iter().map(|r| f([r[1], r[2]])).collect();
    if curve.closed {
        return Ok(vals[..n].iter().sum::<f64>() * curve.period / n as f64);
    }
    let h = curve.period / n as f64;
    let uniform = s
        .iter()
        .enumerate()
        .all(|(k, r)| (r[0] - k as f64 * h).abs() <= 1e-9 * curve.period);
    if uniform && n % 2 == 0 {
        let mut acc = vals[0] + vals[n];
        for (k, v) in vals.iter().enumerate().take(n).skip(1) {
            acc += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        Ok(acc * h / 3.0)
    } else {
        Ok(s.windows(2)
            .zip(vals.windows(2))
            .map(|(w, v)| 0.5 * (w[1][0] - w[0][0]) * (v[0] + v[1]))
            .sum())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IsolineIntegral {
    /// `∫(c¹Λ₁ + c²Λ₂) dt`.
    pub value: f64,
    /// `u(end) − u(start)` for arcs, `⟨σ, [γ]⟩` for closed curves.
    pub reference: Option<f64>,
    pub mismatch: Option<f64>,
}

pub fn isoline_integral(
    curve: &IsolineCurve,
    c: &PseudoVector,
    cf: &ConformalFactor,
    u: Option<&CohomologySolution>,
) -> Result<IsolineIntegral> {
    super::check_weight3(c)?;
    let value = isoline_integral_of(curve, |p| {
        let l = lambda_at(cf, p);
        c.c1 * l[0] + c.c2 * l[1]
    })?;
    let reference = u.map(|u| match curve.lift_displacement {
        Some(l) if curve.closed => u.sigma_pairing(l),
        _ => u.value_at(curve.end()) - u.value_at(curve.start()),
    });
    Ok(IsolineIntegral {
        value,
        reference,
        mismatch: reference.map(|r| (value - r).abs()),
    })
}
