//! Area integrals of `Λ` over disks around extrema of `K` and over annuli
//! between noncontractible isolines, and the closed-isoline condition with
//! a single cohomology class for all curves.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use super::isoline::{extract_isolines, isoline_integral_of, max_grad, polyline_time, trace_closed_isoline};
use super::lambda::lambda_at;
use super::{IsolineCurve, IsolineOptions};
use crate::error::{Error, Result};
use crate::metric::ConformalFactor;
use crate::ode::Dopri5;
use crate::solver::{smallest_generalized, PseudoVector};
use crate::spectral::Grid;

/// Gauss–Legendre nodes and weights on `[−1, 1]` (Golub–Welsch).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let e = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (e.eigenvalues[k], 2.0 * e.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// `∫_a^b f` by `n`-point Gauss–Legendre.
fn gl_integrate<const D: usize>(
    a: f64,
    b: f64,
    n: usize,
    f: impl Fn(f64) -> Result<[f64; D]> + Sync,
) -> Result<[f64; D]> {
    let (x, w) = gauss_legendre(n);
    let (h, m) = (0.5 * (b - a), 0.5 * (b + a));
    let vals: Vec<Result<[f64; D]>> = x.par_iter().map(|&t| f(m + h * t)).collect();
    let mut acc = [0.0; D];
    for (v, wk) in vals.into_iter().zip(&w) {
        let v = v?;
        for d in 0..D {
            acc[d] += wk * h * v[d];
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CriticalKind {
    Max,
    Min,
    Saddle,
    Degenerate,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CriticalPoint {
    /// Reduced into the fundamental parallelogram.
    pub p: [f64; 2],
    pub value: f64,
    pub kind: CriticalKind,
    /// `[K_xx, K_xy, K_yy]`.
    pub hessian: [f64; 3],
}

fn pinv_step(h: [f64; 3], g: [f64; 2]) -> [f64; 2] {
    let e = SymmetricEigen::new(Matrix2::new(h[0], h[1], h[1], h[2]));
    let smax = e.eigenvalues.abs().max();
    let mut s = [0.0; 2];
    for k in 0..2 {
        let l = e.eigenvalues[k];
        if l.abs() > 1e-10 * smax {
            let v = e.eigenvectors.column(k);
            let c = (v[0] * g[0] + v[1] * g[1]) / l;
            s[0] += c * v[0];
            s[1] += c * v[1];
        }
    }
    s
}

/// Critical points of `K`: Newton on `∇K` from grid-local minima of
/// `|∇K|²`, deduplicated modulo the lattice. Degenerate points sharing a
/// value are reported once. A constant `K` gives an empty list.
pub fn critical_points(cf: &ConformalFactor, grid_n: usize) -> Vec<CriticalPoint> {
    let n = if grid_n == 0 { cf.default_grid_n() } else { grid_n };
    let grid = Grid::new(*cf.lattice(), n);
    let data: Vec<(f64, f64)> = grid
        .points()
        .par_iter()
        .map(|&p| {
            let (k, kx, ky) = cf.curvature_gradient(p);
            (k, kx * kx + ky * ky)
        })
        .collect();
    let (lo, hi) = data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), d| (a.min(d.0), b.max(d.0)));
    if hi - lo <= 1e-13 {
        return Vec::new();
    }
    let gmax = data.iter().map(|d| d.1).fold(0.0, f64::max).sqrt();
    let at = |i: usize, j: usize| data[(i % n) * n + (j % n)].1;
    let cands: Vec<usize> = (0..n * n)
        .filter(|&idx| {
            let (i, j) = (idx / n + n, idx % n + n);
            let v = at(i, j);
            (0..3).all(|a| (0..3).all(|b| (a == 1 && b == 1) || v <= at(i + a - 1, j + b - 1)))
        })
        .collect();
    let lat = cf.lattice();
    let cell = lat.min_period() / n as f64;
    let found: Vec<CriticalPoint> = cands
        .par_iter()
        .filter_map(|&idx| {
            let mut p = grid.point(idx);
            for _ in 0..60 {
                let ((_, kx, ky), h) = cf.curvature_hessian(p);
                let mut s = pinv_step(h, [kx, ky]);
                let sn = s[0].hypot(s[1]);
                if sn > 2.0 * cell {
                    s = [s[0] * 2.0 * cell / sn, s[1] * 2.0 * cell / sn];
                }
                p = [p[0] - s[0], p[1] - s[1]];
                if sn <= 1e-14 * lat.min_period() {
                    break;
                }
            }
            let ((k, kx, ky), h) = cf.curvature_hessian(p);
            if kx.hypot(ky) > 1e-9 * gmax {
                return None;
            }
            let det = h[0] * h[2] - h[1] * h[1];
            let nrm2 = h[0] * h[0] + 2.0 * h[1] * h[1] + h[2] * h[2];
            let kind = if det.abs() <= 1e-8 * nrm2 {
                CriticalKind::Degenerate
            } else if det < 0.0 {
                CriticalKind::Saddle
            } else if h[0] + h[2] < 0.0 {
                CriticalKind::Max
            } else {
                CriticalKind::Min
            };
            Some(CriticalPoint {
                p: lat.reduce(p),
                value: k,
                kind,
                hessian: h,
            })
        })
        .collect();
    let scale = hi - lo;
    let mut out: Vec<CriticalPoint> = Vec::new();
    for c in found {
        let dup = out.iter().any(|o| {
            if c.kind == CriticalKind::Degenerate && o.kind == CriticalKind::Degenerate {
                return (c.value - o.value).abs() <= 1e-9 * scale;
            }
            let d = lat.coords([c.p[0] - o.p[0], c.p[1] - o.p[1]]);
            let r = lat.point(d[0] - d[0].round(), d[1] - d[1].round());
            r[0].hypot(r[1]) <= 1e-6 * lat.min_period()
        });
        if !dup {
            out.push(c);
        }
    }
    out.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.p[0].total_cmp(&b.p[0])));
    out
}

/// Distance from `p` along `e` to the first crossing of `K = level`.
fn ray_radius(cf: &ConformalFactor, p: [f64; 2], e: [f64; 2], level: f64) -> Result<f64> {
    let f = |r: f64| cf.gaussian_curvature([p[0] + r * e[0], p[1] + r * e[1]]) - level;
    let s = f(0.0).signum();
    let h = cf.lattice().min_period() / 512.0;
    let (mut a, mut b) = (0.0, h);
    while s * f(b) > 0.0 {
        a = b;
        b += h;
        if b > cf.lattice().min_period() {
            return Err(Error::Degenerate("isoline around the extremum not found".into()));
        }
    }
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if s * f(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

fn unit(phi: f64) -> [f64; 2] {
    [phi.cos(), phi.sin()]
}

fn check_extremum(cp: &CriticalPoint, level: f64) -> Result<()> {
    let ok = match cp.kind {
        CriticalKind::Max => level < cp.value,
        CriticalKind::Min => level > cp.value,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "level must lie on the inner side of a nondegenerate extremum".into(),
        ))
    }
}

/// `(∫_D Λ₁dσ, ∫_D Λ₂dσ)` over the component of `{K ≷ level}` around the
/// extremum, in polar coordinates about it: Gauss–Legendre in `r` up to the
/// boundary radius, periodic trapezoid in the angle. Assumes the disk is
/// star-shaped about the extremum.
pub fn disk_integral_polar(
    cf: &ConformalFactor,
    cp: &CriticalPoint,
    level: f64,
    n_r: usize,
    n_phi: usize,
) -> Result<[f64; 2]> {
    check_extremum(cp, level)?;
    let p = cp.p;
    let rows: Vec<Result<[f64; 2]>> = (0..n_phi)
        .into_par_iter()
        .map(|j| {
            let e = unit(2.0 * std::f64::consts::PI * j as f64 / n_phi as f64);
            let big_r = ray_radius(cf, p, e, level)?;
            gl_integrate(0.0, big_r, n_r, |r| {
                let q = [p[0] + r * e[0], p[1] + r * e[1]];
                let l = lambda_at(cf, q);
                let w = cf.lambda(q) * r;
                Ok([l[0] * w, l[1] * w])
            })
        })
        .collect();
    let mut acc = [0.0; 2];
    for r in rows {
        let r = r?;
        acc[0] += r[0];
        acc[1] += r[1];
    }
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    Ok([acc[0] * dphi, acc[1] * dphi])
}

/// The isoline `K = level` around an extremum, seeded on the ray at angle
/// 0 with the period estimated from a polar polygon.
fn trace_around(
    cf: &ConformalFactor,
    cp: &CriticalPoint,
    level: f64,
    tol_crit: f64,
    opts: &IsolineOptions,
) -> Result<IsolineCurve> {
    let p = cp.p;
    let poly: Vec<[f64; 2]> = (0..=64)
        .map(|j| {
            let e = unit(2.0 * std::f64::consts::PI * j as f64 / 64.0);
            ray_radius(cf, p, e, level).map(|r| [p[0] + r * e[0], p[1] + r * e[1]])
        })
        .collect::<Result<_>>()?;
    let guess = polyline_time(cf, &poly);
    let curve = trace_closed_isoline(cf, poly[0], level, guess, tol_crit, opts)?;
    if curve.lift_displacement != Some((0, 0)) {
        return Err(Error::Degenerate(
            "isoline around the extremum is not contractible".into(),
        ));
    }
    Ok(curve)
}

fn lambda_loop(curve: &IsolineCurve, cf: &ConformalFactor) -> Result<[f64; 2]> {
    Ok([
        isoline_integral_of(curve, |q| lambda_at(cf, q)[0])?,
        isoline_integral_of(curve, |q| lambda_at(cf, q)[1])?,
    ])
}

/// The same disk integral through the coarea formula `dt ∧ dK = ±dσ`:
/// Gauss–Legendre in the level, a closed isoline integral per level.
pub fn disk_integral_coarea(
    cf: &ConformalFactor,
    cp: &CriticalPoint,
    level: f64,
    n_levels: usize,
    opts: &IsolineOptions,
) -> Result<[f64; 2]> {
    check_extremum(cp, level)?;
    let tol_crit = 0.0;
    let (a, b) = if level < cp.value {
        (level, cp.value)
    } else {
        (cp.value, level)
    };
    gl_integrate(a, b, n_levels, |k| {
        lambda_loop(&trace_around(cf, cp, k, tol_crit, opts)?, cf)
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DiskCheck {
    pub center: CriticalPoint,
    pub level: f64,
    pub polar: [f64; 2],
    /// The coarea cross-check, when requested.
    pub coarea: Option<[f64; 2]>,
    /// `∫_D ‖Λ‖ dσ` from the polar rule, the scale for the entries above.
    pub magnitude: f64,
    /// `∫_D(c¹Λ₁ + c²Λ₂)dσ` when a `c` was supplied.
    pub paired: Option<f64>,
}

/// Annulus between two noncontractible isolines.
#[derive(Debug, Clone, Serialize)]
pub struct AnnulusCheck {
    pub levels: [f64; 2],
    pub lift: (i64, i64),
    /// `(∫_A Λ₁dσ, ∫_A Λ₂dσ)`.
    pub integral: [f64; 2],
    /// `∮Λ dt` on the two boundary curves.
    pub boundary: [[f64; 2]; 2],
    /// Largest deviation of `∮Λ dt` across the quadrature levels from its
    /// value at the first level.
    pub level_spread: f64,
}

impl AnnulusCheck {
    /// `|∫_A c·Λ dσ| − |⟨σ,[γ]⟩(K₁ − K₀)|` in absolute value, with
    /// `⟨σ,[γ]⟩ = α·(p e1 + q e2)`.
    pub fn mismatch(&self, cf: &ConformalFactor, c: [f64; 2], alpha: [f64; 2]) -> f64 {
        let v = cf.lattice().vector(self.lift.0, self.lift.1);
        let lhs = c[0] * self.integral[0] + c[1] * self.integral[1];
        let rhs = (alpha[0] * v[0] + alpha[1] * v[1]) * (self.levels[1] - self.levels[0]);
        (lhs.abs() - rhs.abs()).abs()
    }
}

/// `∫_A Λ dσ` over the annulus swept by the isolines between `k0` and `k1`,
/// starting from the closed isoline through `seed`. Seeds for other levels
/// follow `ṗ = ∇K/|∇K|²` (so `dK/dτ = 1`); the region must be free of
/// critical points.
pub fn annulus_integral(
    cf: &ConformalFactor,
    seed: [f64; 2],
    k0: f64,
    k1: f64,
    n_levels: usize,
    tol_crit: f64,
    opts: &IsolineOptions,
) -> Result<AnnulusCheck> {
    let first = {
        let (_, kx, ky) = cf.curvature_gradient(seed);
        let guess = cf.lambda(seed) * cf.lattice().min_period() / kx.hypot(ky);
        trace_closed_isoline(cf, seed, k0, guess, tol_crit, opts)?
    };
    let lift = first.lift_displacement.expect("closed");
    if lift == (0, 0) {
        return Err(Error::InvalidArgument(
            "isoline through the seed is contractible".into(),
        ));
    }
    let start = first.start();
    let grad_flow = |_: f64, p: &[f64; 2]| {
        let (_, kx, ky) = cf.curvature_gradient(*p);
        let g2 = kx * kx + ky * ky;
        [kx / g2, ky / g2]
    };
    let at_level = |k: f64| -> Result<IsolineCurve> {
        let mut min_g = f64::INFINITY;
        let p = Dopri5::with_tol(opts.ode_tol).integrate(grad_flow, k0, start, k, &[], |_, y| {
            let (mu, _, kx, ky) = cf.mu_and_curvature_gradient(*y);
            min_g = min_g.min((-mu).exp() * kx.hypot(ky));
        })?;
        if min_g < tol_crit {
            return Err(Error::CriticalRegion);
        }
        let c = trace_closed_isoline(cf, p, k, first.period, tol_crit, opts)?;
        if c.lift_displacement != Some(lift) {
            return Err(Error::Degenerate("annulus levels are not homologous".into()));
        }
        Ok(c)
    };
    let b0 = lambda_loop(&first, cf)?;
    let b1 = lambda_loop(&at_level(k1)?, cf)?;
    let spread = std::sync::Mutex::new(0.0f64);
    let (a, b) = (k0.min(k1), k0.max(k1));
    let integral = gl_integrate(a, b, n_levels, |k| {
        let v = lambda_loop(&at_level(k)?, cf)?;
        let d = (v[0] - b0[0]).hypot(v[1] - b0[1]);
        let mut s = spread.lock().expect("poisoned");
        *s = s.max(d);
        Ok(v)
    })?;
    Ok(AnnulusCheck {
        levels: [k0, k1],
        lift,
        integral,
        boundary: [b0, b1],
        level_spread: spread.into_inner().expect("poisoned"),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyEntry {
    pub level: f64,
    pub lift: (i64, i64),
    /// `(∮Λ₁dt, ∮Λ₂dt)`.
    pub integrals: [f64; 2],
}

/// Fit of `∮(c¹Λ₁ + c²Λ₂)dt = ⟨σ,[γ]⟩` over all closed isolines at once:
/// `min_{|c|=1, α} Σ(c·I_γ − α·L_γ)² / Σ(c·I_γ)²`.
#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub curves: Vec<ConsistencyEntry>,
    pub residual_rel: f64,
    /// The same ratio for the worst unit `c`.
    pub residual_rel_max: f64,
    pub best_c: [f64; 2],
    pub alpha: [f64; 2],
    /// Linearly independent homology classes among the curves.
    pub homology_rank: usize,
    pub degenerate: bool,
    /// Open arcs dropped because the level met the critical zone.
    pub clipped: usize,
}

pub fn closed_isoline_consistency(
    cf: &ConformalFactor,
    levels: &[f64],
    opts: &IsolineOptions,
) -> Result<ConsistencyReport> {
    let mut curves = Vec::new();
    let mut clipped = 0;
    let mut degenerate = false;
    for &k in levels {
        let set = extract_isolines(cf, k, opts)?;
        degenerate |= set.degenerate;
        clipped += set.clipped;
        for c in set.curves.iter().filter(|c| c.closed) {
            curves.push(ConsistencyEntry {
                level: k,
                lift: c.lift_displacement.expect("closed"),
                integrals: lambda_loop(c, cf)?,
            });
        }
    }
    if curves.is_empty() {
        return Ok(ConsistencyReport {
            curves,
            residual_rel: f64::NAN,
            residual_rel_max: f64::NAN,
            best_c: [0.0; 2],
            alpha: [0.0; 2],
            homology_rank: 0,
            degenerate: true,
            clipped,
        });
    }
    let lat = cf.lattice();
    let m = curves.len();
    let imat = DMatrix::from_fn(m, 2, |r, k| curves[r].integrals[k]);
    let lmat = DMatrix::from_fn(m, 2, |r, k| {
        let (p, q) = curves[r].lift;
        lat.vector(p, q)[k]
    });
    // orthonormal basis of span(L) from its SVD
    let svd = lmat.clone().svd(true, false);
    let smax = svd.singular_values.max();
    let u = svd.u.expect("requested");
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > 1e-12 * smax.max(1e-300))
        .collect();
    let q = DMatrix::from_fn(m, keep.len(), |r, k| u[(r, keep[k])]);
    let proj = &imat - &q * (q.transpose() * &imat);
    let h = imat.transpose() * &imat;
    let g = proj.transpose() * &proj;
    let (rho, rho_max, c) = smallest_generalized(
        Matrix2::new(g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]),
        Matrix2::new(h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]),
    );
    let alpha = if keep.is_empty() {
        [0.0; 2]
    } else {
        let rhs = &imat * nalgebra::Vector2::new(c[0], c[1]);
        let sol = lmat
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::Degenerate(e.into()))?;
        [sol[0], sol[1]]
    };
    Ok(ConsistencyReport {
        curves,
        residual_rel: rho.sqrt(),
        residual_rel_max: rho_max.sqrt(),
        best_c: c,
        alpha,
        homology_rank: keep.len(),
        degenerate,
        clipped,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DomainReport {
    pub critical_points: Vec<CriticalPoint>,
    pub disks: Vec<DiskCheck>,
    pub annuli: Vec<AnnulusCheck>,
    /// `σ_min/σ_max` of the stacked disk vectors; near 0 when one `c` can
    /// annihilate all of them.
    pub disk_singular_ratio: Option<f64>,
    pub degenerate: bool,
    /// Domains that could not be evaluated, with the reason.
    pub skipped: Vec<String>,
}

/// Disks around every nondegenerate extremum (bounded halfway to the
/// nearest critical value on the inner side) and annuli across the gaps
/// between consecutive critical values. `with_coarea` adds the coarea
/// evaluation of every disk integral.
/// Optional parts of [`domain_integral_checks`].
#[derive(Debug, Clone, Copy)]
pub struct DomainChecks {
    /// Cross-check every disk with the coarea rule.
    pub coarea: bool,
    /// Integrate over annuli between noncontractible isolines.
    pub annuli: bool,
}

impl Default for DomainChecks {
    fn default() -> Self {
        Self {
            coarea: false,
            annuli: true,
        }
    }
}

pub fn domain_integral_checks(
    cf: &ConformalFactor,
    c: Option<&PseudoVector>,
    opts: &IsolineOptions,
    checks: DomainChecks,
) -> Result<DomainReport> {
    if let Some(c) = c {
        super::check_weight3(c)?;
    }
    let n = if opts.grid_n == 0 {
        cf.default_grid_n()
    } else {
        opts.grid_n
    };
    let cps = critical_points(cf, n);
    let mut report = DomainReport {
        critical_points: cps.clone(),
        disks: Vec::new(),
        annuli: Vec::new(),
        disk_singular_ratio: None,
        degenerate: cps.is_empty(),
        skipped: Vec::new(),
    };
    if cps.is_empty() {
        return Ok(report);
    }
    let tol_crit = opts.tol_crit_rel * max_grad(cf, &Grid::new(*cf.lattice(), n));
    for cp in &cps {
        let other = match cp.kind {
            CriticalKind::Max => cps
                .iter()
                .filter(|o| o.value < cp.value)
                .map(|o| o.value)
                .fold(f64::NEG_INFINITY, f64::max),
            CriticalKind::Min => cps
                .iter()
                .filter(|o| o.value > cp.value)
                .map(|o| o.value)
                .fold(f64::INFINITY, f64::min),
            _ => continue,
        };
        if !other.is_finite() {
            report
                .skipped
                .push(format!("extremum at {:?}: no other critical level", cp.p));
            continue;
        }
        let level = cp.value + 0.5 * (other - cp.value);
        let run = || -> Result<DiskCheck> {
            let polar = disk_integral_polar(cf, cp, level, 48, 128)?;
            let magnitude = disk_integral_polar_norm(cf, cp, level)?;
            let coarea = if checks.coarea {
                Some(disk_integral_coarea(cf, cp, level, 24, opts)?)
            } else {
                None
            };
            Ok(DiskCheck {
                center: *cp,
                level,
                polar,
                coarea,
                magnitude,
                paired: c.map(|c| c.c1 * polar[0] + c.c2 * polar[1]),
            })
        };
        match run() {
            Ok(d) => report.disks.push(d),
            Err(e) => report.skipped.push(format!("disk at {:?}: {e}", cp.p)),
        }
    }
    if report.disks.len() >= 2 {
        let d = DMatrix::from_fn(report.disks.len(), 2, |r, k| report.disks[r].polar[k]);
        let s = d.singular_values();
        let (lo, hi) = (s.min(), s.max());
        report.disk_singular_ratio = Some(if hi > 0.0 { lo / hi } else { 0.0 });
    }
    if !checks.annuli {
        return Ok(report);
    }
    let mut values: Vec<f64> = cps.iter().map(|c| c.value).collect();
    values.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    for w in values.windows(2) {
        let (k0, k1) = (w[0] + 0.25 * (w[1] - w[0]), w[0] + 0.75 * (w[1] - w[0]));
        let set = match extract_isolines(cf, k0, opts) {
            Ok(s) => s,
            Err(e) => {
                report.skipped.push(format!("level {k0}: {e}"));
                continue;
            }
        };
        for curve in set
            .curves
            .iter()
            .filter(|c| c.closed && c.lift_displacement != Some((0, 0)))
        {
            match annulus_integral(cf, curve.start(), k0, k1, 16, tol_crit, opts) {
                Ok(a) => report.annuli.push(a),
                Err(e) => report.skipped.push(format!("annulus from level {k0}: {e}")),
            }
        }
    }
    Ok(report)
}

fn disk_integral_polar_norm(cf: &ConformalFactor, cp: &CriticalPoint, level: f64) -> Result<f64> {
    let p = cp.p;
    let n_phi = 64;
    let rows: Vec<Result<[f64; 1]>> = (0..n_phi)
        .into_par_iter()
        .map(|j| {
            let e = unit(2.0 * std::f64::consts::PI * j as f64 / n_phi as f64);
            let big_r = ray_radius(cf, p, e, level)?;
            gl_integrate(0.0, big_r, 24, |r| {
                let q = [p[0] + r * e[0], p[1] + r * e[1]];
                let l = lambda_at(cf, q);
                Ok([l[0].hypot(l[1]) * cf.lambda(q) * r])
            })
        })
        .collect();
    let mut acc = 0.0;
    for r in rows {
        acc += r?[0];
    }
    Ok(acc * 2.0 * std::f64::consts::PI / n_phi as f64)
}
