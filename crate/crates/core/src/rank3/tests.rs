use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fixtures;
use crate::lattice::Lattice;
use crate::metric::{ConformalFactor, FourierMode};
use crate::spectral::MetricGrid;
use crate::tensor::TraceFreeField;

fn random_metric(seed: u64) -> ConformalFactor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lat = Lattice::new([1.0, 0.0], [0.2, 1.1]).unwrap();
    let modes: Vec<FourierMode> = [(1, 0), (0, 1), (1, 1), (2, -1)]
        .into_iter()
        .map(|k| FourierMode {
            k,
            amp: Complex64::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05)),
        })
        .collect();
    ConformalFactor::with_hermitian_closure(lat, modes).unwrap()
}

fn cosine(k: (i32, i32), amp: f64) -> FourierMode {
    FourierMode {
        k,
        amp: Complex64::new(0.5 * amp, 0.0),
    }
}

/// `μ = 0.1cos(2πx)cos(2πy)`.
fn egg_crate() -> ConformalFactor {
    ConformalFactor::with_hermitian_closure(Lattice::unit_square(), [cosine((1, 1), 0.05), cosine((1, -1), 0.05)])
        .unwrap()
}

fn c3(c1: f64, c2: f64) -> PseudoVector {
    PseudoVector::new(3, c1, c2)
}

fn scale(v: &[f64]) -> f64 {
    1.0 + max_abs(v)
}

#[test]
fn t_equals_z_of_rotated_c_and_is_trace_free() {
    let mg = MetricGrid::new(&random_metric(1), 32);
    for c in [c3(1.0, 0.0), c3(0.3, -0.8)] {
        assert!(t_z_mismatch(&mg, &c).unwrap() <= 1e-13);
        let sym = make_t(&mg, &c).unwrap().to_sym();
        let tr: Vec<f64> = (0..mg.len()).map(|i| sym.comp(0)[i] + sym.comp(2)[i]).collect();
        assert!(max_abs(&tr) <= 1e-14);
    }
    assert!(make_t(&mg, &PseudoVector::new(2, 1.0, 0.0)).is_err());
    let flat = MetricGrid::new(&fixtures::flat(), 16);
    assert_eq!(make_t(&flat, &c3(1.0, 1.0)).unwrap().max_norm(), 0.0);
}

#[test]
fn lambda_routes_agree() {
    for seed in 0..4 {
        let mg = MetricGrid::new(&random_metric(seed), 32);
        let lf = lambda_form(&mg);
        assert!(lf.discrepancy <= 1e-10 * (1.0 + lf.max_norm()), "{}", lf.discrepancy);
        assert!(lf.imag_residue <= 1e-13 * (1.0 + lf.max_norm()));
        let c = &lf.complex;
        let recombined: f64 = (0..mg.len())
            .map(|i| {
                let p = &lf.parts;
                let v1 = 2.0 * p[0].w1[i] + 4.0 * p[1].w1[i] - 2.0 * p[2].w1[i];
                (v1 - c.w1[i]).abs()
            })
            .fold(0.0, f64::max);
        assert!(recombined <= 1e-12 * (1.0 + lf.max_norm()));
    }
    let flat = lambda_form(&MetricGrid::new(&fixtures::flat(), 16));
    assert_eq!(flat.max_norm(), 0.0);
}

#[test]
fn lambda_of_a_single_cosine() {
    let (a, k) = (0.1, TAU);
    let cf = ConformalFactor::with_hermitian_closure(Lattice::unit_square(), [cosine((1, 0), a)]).unwrap();
    let mg = MetricGrid::new(&cf, 32);
    let lf = lambda_form(&mg);
    assert!(max_abs(&lf.l2) <= 1e-13);
    // μx = −ak s, μxx = −ak²c, μxxx = ak³s
    for (idx, p) in mg.grid.points().into_iter().enumerate() {
        let (s, c) = (k * p[0]).sin_cos();
        let expect = a * k.powi(3) * s + 10.0 * a * a * k.powi(3) * s * c - 8.0 * a.powi(3) * k.powi(3) * s.powi(3);
        assert!((lf.l1[idx] - expect).abs() <= 1e-11, "{} vs {expect}", lf.l1[idx]);
    }
}

#[test]
fn phi_routes_and_second_divergence_of_t() {
    for seed in 0..3 {
        let mg = MetricGrid::new(&random_metric(seed), 48);
        let lf = lambda_form(&mg);
        let sc = 1.0 + lf.max_norm();
        for c in [c3(1.0, 0.0), c3(0.0, 1.0), c3(-0.4, 0.7)] {
            let phi = phi_c(&mg, &c).unwrap();
            assert!(phi.discrepancy <= 1e-9 * sc, "phi {}", phi.discrepancy);
            let d2 = delta2_t(&mg, &c).unwrap();
            let err = (0..mg.len())
                .map(|i| (d2[i] - (-c.c2 * lf.l1[i] + c.c1 * lf.l2[i])).abs())
                .fold(0.0, f64::max);
            assert!(err <= 1e-9 * sc, "delta2 {err}");
        }
        let phi = phi_c(&mg, &c3(1.0, 0.0)).unwrap();
        assert_eq!(phi.paired, lf.l1);
    }
}

#[test]
fn lambda_means_vanish() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for cf in [fixtures::generic(), random_metric(2), random_metric(3), egg_crate()] {
        let mg = MetricGrid::new(&cf, 64);
        let mv = mean_value_check(&mg);
        assert!(mv.vanish(1e-9), "{:?}", mv);
        for _ in 0..10 {
            let c: [f64; 2] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let s = c[0] * mv.integrals[0] + c[1] * mv.integrals[1];
            assert!(s.abs() <= 1e-9 * mv.area * mv.lambda_max);
        }
    }
}

#[test]
fn pairing_is_invariant_under_conformal_change() {
    let cf = random_metric(4);
    let a = Complex64::new(0.8, 0.6) * 1.3;
    let cf2 = cf.transformed(a).unwrap();
    let c = c3(0.6, -0.2);
    let c2 = c.in_coordinates(a);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let q = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let pz = Complex64::new(q[0], q[1]) * a;
        let l = lambda_at(&cf, [pz.re, pz.im]);
        let l2 = lambda_at(&cf2, q);
        let lhs = c.c1 * l[0] + c.c2 * l[1];
        let rhs = c2.c1 * l2[0] + c2.c2 * l2[1];
        assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
        // Λ itself is a weight-3 pseudoform
        let w = Complex64::new(l[0], l[1]) * a.conj().powi(3);
        assert!((w.re - l2[0]).abs() <= 1e-10 * (1.0 + w.norm()));
        assert!((w.im - l2[1]).abs() <= 1e-10 * (1.0 + w.norm()));
    }
}

fn smooth_periodic(mg: &MetricGrid, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<([f64; 2], f64, f64)> = (0..5)
        .map(|_| {
            let w = mg
                .grid
                .lattice()
                .wavevector(rng.gen_range(-3..=3), rng.gen_range(-3..=3));
            (w, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..TAU))
        })
        .collect();
    mg.grid.sample(|p| {
        terms
            .iter()
            .map(|(w, a, ph)| a * (w[0] * p[0] + w[1] * p[1] + ph).cos())
            .sum()
    })
}

#[test]
fn hessian_routes_agree() {
    let mg = MetricGrid::new(&random_metric(5), 64);
    let u = smooth_periodic(&mg, 1);
    let f = TraceFreeField::new(mg.clone(), 0, u.clone(), vec![0.0; mg.len()]).unwrap();
    let pd2 = f.pd().pd();
    let (ux, uy) = mg.grid.gradient(&u);
    let h = covariant_hessian(&mg, &ux, &uy);
    let direct = TraceFreeField::new(
        mg.clone(),
        2,
        (0..mg.len()).map(|i| 0.5 * (h[0][i] - h[2][i])).collect(),
        h[1].clone(),
    )
    .unwrap();
    let d = pd2.sub(&direct).unwrap().max_norm();
    assert!(d <= 1e-10 * (1.0 + direct.max_norm()), "{d} {}", direct.max_norm());
    // both forms of the Hessian system
    let t = make_t(&mg, &c3(0.5, 0.5)).unwrap();
    let r = hessian_residual(&mg, &u, &t).unwrap();
    for k in 0..2 {
        let d = (0..mg.len())
            .map(|i| (r.components[k][i] - r.invariant[k][i]).abs())
            .fold(0.0, f64::max);
        assert!(d <= 1e-12 * scale(&r.components[k]));
    }
    // u with T = pd²u solves it
    let r = hessian_residual(&mg, &u, &pd2).unwrap();
    assert!(max_abs2(&r.components[0], &r.components[1]) <= 1e-10 * (1.0 + pd2.max_norm()));
}

#[test]
fn f0_is_divergence_free() {
    let mg = MetricGrid::new(&random_metric(6), 32);
    let u = smooth_periodic(&mg, 2);
    let (f, div) = f0_from_potential(&mg, &u);
    assert!(max_abs(&div) <= 1e-10 * scale(&f[0]));
}

#[test]
fn fourth_order_operator_is_symmetric_and_recovers_synthetic_solution() {
    let mg = MetricGrid::new(&random_metric(7), 32);
    let op = FourthOrderOperator::new(&mg);
    let a = smooth_periodic(&mg, 3);
    let b = smooth_periodic(&mg, 4);
    let (la, lb) = (op.apply(&a), op.apply(&b));
    let ab: f64 = a.iter().zip(&lb).map(|(x, y)| x * y).sum();
    let ba: f64 = b.iter().zip(&la).map(|(x, y)| x * y).sum();
    assert!((ab - ba).abs() <= 1e-10 * ab.abs().max(1.0));
    let aa: f64 = a.iter().zip(&la).map(|(x, y)| x * y).sum();
    assert!(aa > 0.0);

    let mean = mg.grid.mean(&a);
    let w0: Vec<f64> = a.iter().map(|v| v - mean).collect();
    let rhs: Vec<f64> = op
        .physical(&w0, [0.0, 0.0])
        .iter()
        .zip(&mg.lambda)
        .map(|(x, l)| x * l)
        .collect();
    let (w, _) = op.solve(&rhs, FourthOrderOptions::default()).unwrap();
    let err = w.iter().zip(&w0).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-8 * max_abs(&w0), "{err}");
    let back = op.apply(&w);
    let fwd = back.iter().zip(&rhs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(fwd <= 1e-8 * max_abs(&rhs));
}

#[test]
fn fourth_order_solution_reports() {
    let mg = MetricGrid::new(&fixtures::generic(), 64);
    let s = solve_fourth_order(&mg, &c3(1.0, 0.0), FourthOrderOptions::default()).unwrap();
    assert!(s.forward_residual <= 1e-8, "{}", s.forward_residual);
    assert!(!s.degenerate);
    assert!(s.transport_residual.is_finite());
    let flat = MetricGrid::new(&fixtures::flat(), 16);
    let s = solve_fourth_order(&flat, &c3(1.0, 0.0), FourthOrderOptions::default()).unwrap();
    assert!(s.degenerate);
    assert!(solve_fourth_order(&mg, &PseudoVector::new(2, 1.0, 0.0), FourthOrderOptions::default()).is_err());
}

#[test]
fn transport_study_verdicts() {
    let opts = FourthOrderOptions::default();
    let flat = transport_study(&fixtures::flat(), 16, opts).unwrap();
    assert_eq!(flat.verdict, TransportVerdict::Degenerate);
    // the cube of the Killing field ∂x is a (reducible) rank-3 Killing field
    let rot = transport_study(&fixtures::rotation(), 32, opts).unwrap();
    assert_eq!(rot.verdict, TransportVerdict::Consistent, "{:?}", rot);
    let gen = transport_study(&fixtures::generic(), 32, opts).unwrap();
    assert!(gen.fine.residual_rel.is_finite());
    assert!(gen.fine.singular_values[0] <= gen.fine.singular_values[1]);
}

#[test]
fn third_derivatives_of_a_potential() {
    let mg = MetricGrid::new(&random_metric(8), 48);
    let w = smooth_periodic(&mg, 5);
    let u = CohomologySolution {
        mg: mg.clone(),
        w: w.clone(),
        alpha: [0.3, -0.2],
    };
    let (ux, uy) = u.gradient();
    let h = covariant_hessian(&mg, &ux, &uy);
    let t = TraceFreeField::new(
        mg.clone(),
        2,
        (0..mg.len()).map(|i| 0.5 * (h[0][i] - h[2][i])).collect(),
        h[1].clone(),
    )
    .unwrap();
    let r = third_derivative_residual_with(&u, &t).unwrap();
    assert!(r.relative <= 1e-9, "{:?}", r);
}

#[test]
fn third_derivative_perturbation_on_flat_torus() {
    let mg = MetricGrid::new(&fixtures::flat(), 32);
    let zero = TraceFreeField::zeros(mg.clone(), 2);
    let u0 = CohomologySolution {
        mg: mg.clone(),
        w: vec![0.0; mg.len()],
        alpha: [0.0; 2],
    };
    assert_eq!(third_derivative_residual_with(&u0, &zero).unwrap().max_abs, 0.0);
    let u1 = CohomologySolution {
        w: mg.grid.sample(|p| 0.01 * (TAU * p[0]).sin()),
        ..u0
    };
    let r = third_derivative_residual_with(&u1, &zero).unwrap();
    let expect = 0.01 * (2.0 * PI).powi(3);
    assert!((r.per_component[0] - expect).abs() <= 1e-9 * expect);
    assert!(
        r.per_component[1..].iter().all(|v| *v <= 1e-9 * expect),
        "{:?}",
        r.per_component
    );
}

#[test]
fn rotation_isolines_are_horizontal_circles() {
    let cf = fixtures::rotation();
    let y0: f64 = 0.3;
    let level = cf.gaussian_curvature([0.0, y0]);
    let set = extract_isolines(&cf, level, &IsolineOptions::default()).unwrap();
    assert!(!set.degenerate);
    // K is even in y about 0 and 1/2, so the level has two circles
    assert_eq!(set.curves.len(), 2);
    for c in &set.curves {
        assert!(c.closed);
        let lift = c.lift_displacement.unwrap();
        assert!(lift == (1, 0) || lift == (-1, 0), "{lift:?}");
        let y = c.samples[0][2];
        let spread = c.samples.iter().map(|s| (s[2] - y).abs()).fold(0.0, f64::max);
        assert!(spread <= 1e-10);
        let (_, _, ky) = cf.curvature_gradient([0.0, y]);
        assert!((c.period - cf.lambda([0.0, y]) / ky.abs()).abs() <= 1e-9 * c.period);
        assert!(c.closure_residual <= 1e-9);
    }
}

#[test]
fn isoline_samples_lie_on_the_level() {
    let cf = fixtures::generic();
    let grid = crate::spectral::Grid::new(*cf.lattice(), 64);
    let kv = grid.sample(|p| cf.gaussian_curvature(p));
    let (lo, hi) = kv
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    for f in [0.2, 0.45, 0.7] {
        let level = lo + f * (hi - lo);
        let set = extract_isolines(&cf, level, &IsolineOptions::default()).unwrap();
        assert!(!set.curves.is_empty());
        for c in &set.curves {
            assert!(c.level_error <= 1e-6 * (hi - lo), "{}", c.level_error);
            assert!(c.min_grad >= set.tol_crit);
        }
    }
}

#[test]
fn isoline_integrals_are_grid_independent() {
    let cf = fixtures::generic();
    let level = cf.gaussian_curvature([0.1, 0.2]);
    let run = |n: usize| {
        let opts = IsolineOptions {
            grid_n: n,
            ..Default::default()
        };
        let set = extract_isolines(&cf, level, &opts).unwrap();
        let mut v: Vec<(f64, f64)> = set
            .curves
            .iter()
            .filter(|c| c.closed)
            .map(|c| {
                let i = isoline_integral(c, &c3(1.0, 0.0), &cf, None).unwrap().value;
                (c.period, i)
            })
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let (a, b) = (run(64), run(128));
    assert!(!a.is_empty());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x.1 - y.1).abs() <= 1e-6 * (1.0 + x.1.abs()), "{x:?} {y:?}");
    }
}

#[test]
fn synthetic_potential_is_reproduced_along_isolines() {
    let cf = fixtures::generic();
    let alpha = [0.2, -0.1];
    let u = |p: [f64; 2]| 0.3 * (TAU * p[0]).sin() * (TAU * p[1]).cos() + alpha[0] * p[0] + alpha[1] * p[1];
    let du = |p: [f64; 2]| {
        let (sx, cx) = (TAU * p[0]).sin_cos();
        let (sy, cy) = (TAU * p[1]).sin_cos();
        [0.3 * TAU * cx * cy + alpha[0], -0.3 * TAU * sx * sy + alpha[1]]
    };
    let phi = |p: [f64; 2]| {
        let (_, kx, ky) = cf.curvature_gradient(p);
        let g = du(p);
        (-ky * g[0] + kx * g[1]) / cf.lambda(p)
    };
    let opts = IsolineOptions::default();
    let mut checked = 0;
    for (k, start) in [[0.1, 0.2], [0.35, 0.6], [0.7, 0.15], [0.55, 0.85], [0.9, 0.45]]
        .into_iter()
        .enumerate()
    {
        let level = cf.gaussian_curvature(start);
        // arc length about 0.1(k + 1)
        let (_, kx, ky) = cf.curvature_gradient(start);
        let speed = kx.hypot(ky) / cf.lambda(start);
        let arc = trace_isoline_arc(&cf, start, level, 0.1 * (k + 1) as f64 / speed, 0.0, &opts).unwrap();
        let got = isoline_integral_of(&arc, phi).unwrap();
        let a = arc.start();
        let b = arc.end();
        let want = u(b) - u(a);
        assert!((got - want).abs() <= 1e-6, "{got} vs {want}");
        checked += 1;
    }
    assert_eq!(checked, 5);
    // closed curves: the integral is α·lift
    let level = cf.gaussian_curvature([0.1, 0.2]);
    let set = extract_isolines(&cf, level, &opts).unwrap();
    for c in set.curves.iter().filter(|c| c.closed) {
        let got = isoline_integral_of(c, phi).unwrap();
        let (p, q) = c.lift_displacement.unwrap();
        let v = cf.lattice().vector(p, q);
        assert!((got - alpha[0] * v[0] - alpha[1] * v[1]).abs() <= 1e-6);
    }
}

#[test]
fn flat_isolines_are_degenerate() {
    let set = extract_isolines(&fixtures::flat(), 0.0, &IsolineOptions::default()).unwrap();
    assert!(set.degenerate && set.curves.is_empty());
    assert!(critical_points(&fixtures::flat(), 32).is_empty());
    let r = domain_integral_checks(
        &fixtures::flat(),
        None,
        &IsolineOptions::default(),
        DomainChecks {
            coarea: true,
            annuli: true,
        },
    )
    .unwrap();
    assert!(r.degenerate && r.disks.is_empty() && r.annuli.is_empty());
}

#[test]
fn gauss_legendre_integrates_polynomials() {
    let (x, w) = gauss_legendre(8);
    for d in 0..16 {
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d)).sum();
        let want = if d % 2 == 0 { 2.0 / (d as f64 + 1.0) } else { 0.0 };
        assert!((got - want).abs() <= 1e-14, "degree {d}");
    }
}

#[test]
fn egg_crate_extrema_and_disk_integrals() {
    let cf = egg_crate();
    let cps = critical_points(&cf, 64);
    let maxima: Vec<&CriticalPoint> = cps.iter().filter(|c| c.kind == CriticalKind::Max).collect();
    let minima: Vec<&CriticalPoint> = cps.iter().filter(|c| c.kind == CriticalKind::Min).collect();
    assert!(!maxima.is_empty() && !minima.is_empty());
    assert!(cps.iter().any(|c| c.kind == CriticalKind::Saddle));
    for c in &cps {
        let (_, kx, ky) = cf.curvature_gradient(c.p);
        assert!(kx.hypot(ky) <= 1e-8);
    }
    // μ is even, so Λ is odd about each extremum and the disk integrals vanish
    let cp = maxima[0];
    let below = cps
        .iter()
        .filter(|o| o.value < cp.value)
        .map(|o| o.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let level = 0.5 * (cp.value + below);
    let polar = disk_integral_polar(&cf, cp, level, 48, 128).unwrap();
    assert!(polar[0].hypot(polar[1]) <= 1e-12, "{polar:?}");
    assert!(disk_integral_polar(&cf, cp, cp.value + 1.0, 8, 8).is_err());
}

/// No central symmetry, so disk integrals of `Λ` do not vanish.
fn skewed_metric() -> ConformalFactor {
    let lat = Lattice::new([1.0, 0.0], [0.2, 1.1]).unwrap();
    let m = |k, re, im| FourierMode {
        k,
        amp: Complex64::new(re, im),
    };
    ConformalFactor::with_hermitian_closure(
        lat,
        [m((1, 0), 0.04, 0.03), m((0, 1), -0.02, 0.05), m((1, 1), 0.03, -0.01)],
    )
    .unwrap()
}

#[test]
fn disk_integral_polar_matches_coarea() {
    let cf = skewed_metric();
    let cps = critical_points(&cf, 64);
    let opts = IsolineOptions::default();
    let mut checked = 0;
    for cp in cps
        .iter()
        .filter(|c| matches!(c.kind, CriticalKind::Max | CriticalKind::Min))
    {
        let other = cps
            .iter()
            .filter(|o| o.p != cp.p)
            .map(|o| o.value)
            .min_by(|a, b| (a - cp.value).abs().total_cmp(&(b - cp.value).abs()))
            .unwrap();
        let level = cp.value + 0.4 * (other - cp.value);
        if (level - cp.value) * (other - cp.value) <= 0.0 {
            continue;
        }
        let polar = disk_integral_polar(&cf, cp, level, 48, 128);
        let Ok(polar) = polar else { continue };
        let coarea = disk_integral_coarea(&cf, cp, level, 24, &opts).unwrap();
        let mag = polar[0].hypot(polar[1]);
        assert!(mag > 1e-3);
        for k in 0..2 {
            assert!((polar[k] - coarea[k]).abs() <= 1e-8 * mag, "{polar:?} {coarea:?}");
        }
        checked += 1;
    }
    assert!(checked >= 2);
}

#[test]
fn rotation_closed_isolines_fit_one_class() {
    let cf = fixtures::rotation();
    let levels: Vec<f64> = [0.1, 0.2, 0.3, 0.4]
        .iter()
        .map(|&y| cf.gaussian_curvature([0.0, y]))
        .collect();
    let r = closed_isoline_consistency(&cf, &levels, &IsolineOptions::default()).unwrap();
    assert_eq!(r.curves.len(), 8);
    assert_eq!(r.homology_rank, 1);
    // Λ₁ ≡ 0 for μ = μ(y), so c = (±1, 0) satisfies every curve
    assert!(r.residual_rel <= 1e-9, "{:?}", r);
    assert!((r.best_c[0].abs() - 1.0).abs() <= 1e-9);
    assert!(r.residual_rel_max > 1e-3);
}

#[test]
fn domain_checks_on_the_egg_crate() {
    let cf = egg_crate();
    let r = domain_integral_checks(
        &cf,
        Some(&c3(1.0, 0.0)),
        &IsolineOptions::default(),
        DomainChecks::default(),
    )
    .unwrap();
    assert!(!r.degenerate);
    assert!(!r.disks.is_empty(), "{:?}", r.skipped);
    for d in &r.disks {
        assert!(d.polar[0].hypot(d.polar[1]) <= 1e-12 * d.magnitude);
        assert_eq!(d.paired, Some(d.polar[0]));
    }
    let r = domain_integral_checks(
        &skewed_metric(),
        None,
        &IsolineOptions::default(),
        DomainChecks {
            coarea: true,
            annuli: true,
        },
    )
    .unwrap();
    assert!(r.disks.len() >= 2);
    for d in &r.disks {
        for k in 0..2 {
            assert!((d.polar[k] - d.coarea.unwrap()[k]).abs() <= 1e-8 * d.magnitude);
        }
    }
    assert!(r.disk_singular_ratio.unwrap() > 1e-6);
}

#[test]
fn annulus_integral_matches_coarea_of_boundaries() {
    let cf = fixtures::rotation();
    let (y0, y1) = (0.1, 0.2);
    let (k0, k1) = (cf.gaussian_curvature([0.0, y0]), cf.gaussian_curvature([0.0, y1]));
    let a = annulus_integral(&cf, [0.0, y0], k0, k1, 16, 0.0, &IsolineOptions::default()).unwrap();
    assert!(a.lift == (1, 0) || a.lift == (-1, 0));
    assert!(a.integral[0].abs() <= 1e-10);
    // direct: ∫_{y0}^{y1} Λ₂ λ dy over a unit strip
    let (x, w) = gauss_legendre(24);
    let direct: f64 = x
        .iter()
        .zip(&w)
        .map(|(t, w)| {
            let y = 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * t;
            0.5 * (y1 - y0) * w * lambda_at(&cf, [0.0, y])[1] * cf.lambda([0.0, y])
        })
        .sum();
    assert!(
        (a.integral[1] - direct).abs() <= 1e-8 * direct.abs(),
        "{} vs {direct}",
        a.integral[1]
    );
}
