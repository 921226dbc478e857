use std::path::Path;

use anyhow::{bail, Context, Result};
use ktorus::geodesic::{find_closed_geodesic, ray_pair_estimate};
use ktorus::pipeline::run_full;
use ktorus::rank3::{
    extract_isolines, isoline_integral, lambda_form, mean_value_check, solve_fourth_order, IsolineOptions,
};
use ktorus::solver::{kernel_fields, kernel_svd, PseudoVector};
use ktorus::spectral::{Grid, MetricGrid};
use serde::Serialize;

use crate::config::Metric;
use crate::output::{num, write_csv, write_json};

/// Trial space degree of the kernel SVD.
const KERNEL_TRIAL_DEGREE: i32 = 4;

/// Largest ray-pair index reported by `geodesics`.
const RAY_PAIRS_MAX_M: usize = 4;

fn out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

pub fn analyze(metric: &Metric, metric_id: &str, ranks: &[usize], out: Option<&Path>) -> Result<()> {
    if ranks.is_empty() || ranks.contains(&0) {
        bail!("--ranks: ranks must be positive integers");
    }
    let mut ranks = ranks.to_vec();
    ranks.sort_unstable();
    ranks.dedup();
    let report = run_full(&metric.cf, metric_id, &ranks, &metric.pipeline_options());
    match out {
        Some(p) => write_json(p, &report),
        None => {
            print!("{}", crate::output::to_json(&report)?);
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct GeodesicSummary {
    class: [i64; 2],
    length: f64,
    closure_residual: f64,
    ode_tol: f64,
    intervals: usize,
}

pub fn geodesics(metric: &Metric, class: (i64, i64), out: &Path) -> Result<()> {
    if class == (0, 0) {
        bail!("--class: the trivial class 0,0 has no closed geodesic to search for");
    }
    out_dir(out)?;
    let opts = metric.pipeline_options();
    let orbit = find_closed_geodesic(&metric.cf, class, &opts.closed)?;
    std::fs::write(out.join("orbit.csv"), orbit.to_csv())?;
    let mut rows = Vec::new();
    for m in 0..=RAY_PAIRS_MAX_M {
        let e = ray_pair_estimate(&metric.cf, &orbit, m)?;
        rows.push(vec![
            m.to_string(),
            num(e.pair.num),
            num(e.pair.den),
            num(e.pair.norm()),
            num(e.quadrature_error),
            num(e.orbit_error),
        ]);
    }
    write_csv(
        &out.join("ray_integrals.csv"),
        &["m", "num", "den", "norm", "quadrature_error", "orbit_error"],
        rows,
    )?;
    write_json(
        &out.join("geodesic.json"),
        &GeodesicSummary {
            class: [orbit.homotopy_class.0, orbit.homotopy_class.1],
            length: orbit.period,
            closure_residual: orbit.closure_residual,
            ode_tol: orbit.ode_tol,
            intervals: orbit.intervals(),
        },
    )
}

fn grid_rows(grid: &Grid, cols: &[&[f64]]) -> Vec<Vec<String>> {
    let n = grid.n();
    (0..grid.len())
        .map(|k| {
            let p = grid.point(k);
            let mut r = vec![(k / n).to_string(), (k % n).to_string(), num(p[0]), num(p[1])];
            r.extend(cols.iter().map(|c| num(c[k])));
            r
        })
        .collect()
}

pub fn kernel(metric: &Metric, rank: usize, out: &Path) -> Result<()> {
    if rank == 0 {
        bail!("--rank: the kernel is defined for rank >= 1");
    }
    out_dir(out)?;
    let mg = MetricGrid::new(&metric.cf, metric.grid_n);
    let [f1, f2] = kernel_fields(&mg, rank);
    write_csv(
        &out.join("kernel_fields.csv"),
        &["i", "j", "x", "y", "f1_a", "f1_b", "f2_a", "f2_b"],
        grid_rows(&mg.grid, &[f1.a(), f1.b(), f2.a(), f2.b()]),
    )?;
    let report = kernel_svd(
        &metric.cf,
        rank,
        metric.grid_n,
        KERNEL_TRIAL_DEGREE,
        metric.kernel_threshold(),
    )?;
    write_json(&out.join("kernel_svd.json"), &report)
}

#[derive(Serialize)]
struct IsolineSummary {
    c: [f64; 2],
    levels: Vec<f64>,
    curves: Vec<usize>,
    degenerate: bool,
    clipped: usize,
    /// Residuals of the candidate `u` for this `c`; absent when the
    /// fourth-order solve does not apply.
    forward_residual: Option<f64>,
    transport_residual: Option<f64>,
    alpha: Option<[f64; 2]>,
}

/// `count` levels evenly spaced strictly inside the range of `K`.
fn default_levels(metric: &Metric, count: usize) -> Vec<f64> {
    let g = Grid::new(*metric.cf.lattice(), metric.grid_n);
    let k = g.sample(|p| metric.cf.gaussian_curvature(p));
    let lo = k.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (1..=count)
        .map(|i| lo + (hi - lo) * i as f64 / (count + 1) as f64)
        .collect()
}

pub fn isolines(metric: &Metric, levels: &[f64], c: [f64; 2], out: &Path) -> Result<()> {
    if c[0] == 0.0 && c[1] == 0.0 {
        bail!("--c: c must be nonzero");
    }
    out_dir(out)?;
    let levels = if levels.is_empty() {
        default_levels(metric, 7)
    } else {
        levels.to_vec()
    };
    let opts = metric.pipeline_options();
    let iso = IsolineOptions {
        grid_n: metric.grid_n,
        ..opts.isoline
    };
    let c3 = PseudoVector::new(3, c[0], c[1]);
    let sol = if metric.cf.is_flat() {
        None
    } else {
        Some(solve_fourth_order(
            &MetricGrid::new(&metric.cf, metric.grid_n),
            &c3,
            opts.fourth,
        )?)
    };
    let u = sol.as_ref().filter(|s| !s.degenerate).map(|s| &s.u);
    let mut points = Vec::new();
    let mut table = Vec::new();
    let mut summary = IsolineSummary {
        c,
        levels: levels.clone(),
        curves: Vec::new(),
        degenerate: false,
        clipped: 0,
        forward_residual: sol.as_ref().map(|s| s.forward_residual),
        transport_residual: sol.as_ref().map(|s| s.transport_residual),
        alpha: u.map(|u| u.alpha),
    };
    for (li, &level) in levels.iter().enumerate() {
        let set = extract_isolines(&metric.cf, level, &iso)?;
        summary.degenerate |= set.degenerate;
        summary.clipped += set.clipped;
        summary.curves.push(set.curves.len());
        for (ci, curve) in set.curves.iter().enumerate() {
            for s in &curve.samples {
                points.push(vec![
                    li.to_string(),
                    ci.to_string(),
                    (curve.closed as u8).to_string(),
                    num(s[0]),
                    num(s[1]),
                    num(s[2]),
                ]);
            }
            let r = isoline_integral(curve, &c3, &metric.cf, u)?;
            let (p, q) = curve.lift_displacement.unwrap_or((0, 0));
            let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
            table.push(vec![
                li.to_string(),
                num(level),
                ci.to_string(),
                (curve.closed as u8).to_string(),
                p.to_string(),
                q.to_string(),
                num(curve.period),
                num(curve.min_grad),
                num(r.value),
                opt(r.reference),
                opt(r.mismatch),
            ]);
        }
    }
    write_csv(
        &out.join("isolines.csv"),
        &["level_index", "curve", "closed", "t", "x", "y"],
        points,
    )?;
    write_csv(
        &out.join("isoline_integrals.csv"),
        &[
            "level_index",
            "level",
            "curve",
            "closed",
            "lift_p",
            "lift_q",
            "period",
            "min_grad",
            "integral",
            "reference",
            "mismatch",
        ],
        table,
    )?;
    write_json(&out.join("isolines.json"), &summary)
}

#[derive(Serialize)]
struct LambdaSummary {
    grid_n: usize,
    /// `max |Λ_real − Λ_complex|`.
    discrepancy: f64,
    imag_residue: f64,
    lambda_max: f64,
    area: f64,
    mean_values: [f64; 2],
    mean_values_vanish: bool,
}

pub fn lambda(metric: &Metric, out: &Path) -> Result<()> {
    out_dir(out)?;
    let mg = MetricGrid::new(&metric.cf, metric.grid_n);
    let lf = lambda_form(&mg);
    write_csv(
        &out.join("lambda.csv"),
        &["i", "j", "x", "y", "l1", "l2", "l1_complex", "l2_complex"],
        grid_rows(&mg.grid, &[&lf.l1, &lf.l2, &lf.complex.w1, &lf.complex.w2]),
    )?;
    let mv = mean_value_check(&mg);
    write_json(
        &out.join("lambda.json"),
        &LambdaSummary {
            grid_n: metric.grid_n,
            discrepancy: lf.discrepancy,
            imag_residue: lf.imag_residue,
            lambda_max: mv.lambda_max,
            area: mv.area,
            mean_values: mv.integrals,
            mean_values_vanish: mv.vanish(1e-9),
        },
    )
}
