//! Per-rank verdict tables: classical checks for ranks 1 and 2, the
//! potentiality and ratio tests for every rank, and the rank-3 battery.
//! Every status is numerical evidence, not a proof.

use std::collections::BTreeMap;

use nalgebra::{Matrix2, SymmetricEigen};
use serde::Serialize;

use crate::error::Result;
use crate::geodesic::{
    critical_circle_orbits, find_closed_geodesic, ratio_test, ClosedSearchOptions, GeodesicOrbit, RatioVerdict,
};
use crate::metric::ConformalFactor;
use crate::rank3::{
    closed_isoline_consistency, domain_integral_checks, mean_value_check, transport_study, DomainChecks,
    FourthOrderOptions, IsolineOptions, TransportVerdict,
};
use crate::solver::{potentiality_study, PotentialOptions, PotentialVerdict, EPS_POT};
use crate::spectral::{Grid, MetricGrid};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Residuals below this are treated as exact zeros by the classical checks.
pub const EPS_CLASSICAL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TestStatus {
    Pass,
    Violated,
    Degenerate,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestEntry {
    pub name: String,
    pub status: TestStatus,
    pub residuals: BTreeMap<String, f64>,
    /// The residual changed by at most a factor 2 under resolution doubling.
    pub resolution_stability: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TestEntry {
    fn new(name: &str, status: TestStatus, stable: bool) -> Self {
        Self {
            name: name.into(),
            status,
            residuals: BTreeMap::new(),
            resolution_stability: stable,
            note: None,
        }
    }

    fn with(mut self, key: &str, v: f64) -> Self {
        self.residuals.insert(key.into(), v);
        self
    }

    fn noted(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    fn failed(name: &str, err: impl std::fmt::Display) -> Self {
        Self::new(name, TestStatus::Inconclusive, false).noted(format!("not evaluated: {err}"))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RankReport {
    pub tests: Vec<TestEntry>,
    pub verdict: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObstructionReport {
    pub schema_version: u32,
    pub metric_id: String,
    pub grid_n: usize,
    pub per_rank: BTreeMap<usize, RankReport>,
    pub summary: String,
}

/// Result of one classical check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClassicalCheck {
    pub status: TestStatus,
    pub residual: f64,
    /// `a = e^{iθ}` as `[re, im]`: in the coordinates `z = a z'` the
    /// structure is aligned with the axes.
    pub rotation: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClassicalReport {
    /// Some rotation makes `μ` independent of `x'`.
    pub m1: ClassicalCheck,
    /// Some rotation makes `∂²λ/∂x'∂y' ≡ 0`.
    pub m2: ClassicalCheck,
}

/// Smallest eigenpair of a symmetric 2×2 matrix.
fn smallest_eig(m: Matrix2<f64>) -> (f64, f64, [f64; 2]) {
    let e = SymmetricEigen::new(m);
    let k = if e.eigenvalues[0] <= e.eigenvalues[1] { 0 } else { 1 };
    let v = e.eigenvectors.column(k);
    (e.eigenvalues[k].max(0.0), e.eigenvalues[1 - k].max(0.0), [v[0], v[1]])
}

/// `m = 1`: `∂_vμ ≡ 0` for a unit `v` iff every wavevector of `μ` is
/// orthogonal to `v`; the residual is `min_v ‖∂_vμ‖ / ‖∇μ‖` from the
/// Fourier coefficients. `m = 2`: the mixed derivative of `λ` in rotated
/// coordinates is `½ sin2θ (λ_yy − λ_xx) + cos2θ λ_xy`, minimized over `θ`
/// on a grid of size `n`.
pub fn classify_classical(cf: &ConformalFactor, n: usize) -> ClassicalReport {
    if cf.is_flat() {
        let d = ClassicalCheck {
            status: TestStatus::Degenerate,
            residual: 0.0,
            rotation: None,
        };
        return ClassicalReport { m1: d, m2: d };
    }
    let mut g = Matrix2::zeros();
    for m in cf.modes() {
        let w = cf.lattice().wavevector(m.k.0, m.k.1);
        let a2 = m.amp.norm_sqr();
        g += Matrix2::new(w[0] * w[0], w[0] * w[1], w[0] * w[1], w[1] * w[1]) * a2;
    }
    let (lo, _, mut v) = smallest_eig(g);
    // ±v describe the same axis; prefer the right half-plane
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        v = [-v[0], -v[1]];
    }
    let r1 = (lo / g.trace()).sqrt();
    let m1 = if r1 <= EPS_CLASSICAL {
        ClassicalCheck {
            status: TestStatus::Pass,
            residual: r1,
            rotation: Some(v),
        }
    } else {
        ClassicalCheck {
            status: TestStatus::Violated,
            residual: r1,
            rotation: None,
        }
    };

    let grid = Grid::new(*cf.lattice(), n);
    let lam = grid.sample(|p| cf.lambda(p));
    let (lx, ly) = grid.gradient(&lam);
    let (lxx, lxy) = grid.gradient(&lx);
    let lyy = grid.dy(&ly);
    let d: Vec<f64> = lyy.iter().zip(&lxx).map(|(a, b)| 0.5 * (a - b)).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    // quadratic form in (sin2θ, cos2θ)
    let q = Matrix2::new(dot(&d, &d), dot(&d, &lxy), dot(&d, &lxy), dot(&lxy, &lxy));
    let hess = dot(&lxx, &lxx) + 2.0 * dot(&lxy, &lxy) + dot(&lyy, &lyy);
    let (lo, _, s) = smallest_eig(q);
    let r2 = if hess > 0.0 { (lo / hess).sqrt() } else { 0.0 };
    // quarter turns only swap or flip the axes: reduce to (−π/4, π/4]
    let q = std::f64::consts::FRAC_PI_2;
    let mut theta = 0.5 * s[0].atan2(s[1]);
    theta -= q * (theta / q).round();
    if theta <= -0.5 * q {
        theta += q;
    }
    let m2 = ClassicalCheck {
        status: if r2 <= EPS_CLASSICAL {
            TestStatus::Pass
        } else {
            TestStatus::Violated
        },
        residual: r2,
        rotation: (r2 <= EPS_CLASSICAL).then(|| [theta.cos(), theta.sin()]),
    };
    ClassicalReport { m1, m2 }
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    /// Base grid; every resolution study also runs on `2·grid_n`.
    pub grid_n: usize,
    pub potential: PotentialOptions,
    pub fourth: FourthOrderOptions,
    pub isoline: IsolineOptions,
    pub closed: ClosedSearchOptions,
    /// Homotopy classes of the closed-geodesic menu.
    pub orbit_classes: Vec<(i64, i64)>,
    /// Interior levels of `K` used by the closed-isoline test.
    pub isoline_levels: usize,
}

impl PipelineOptions {
    pub fn for_metric(cf: &ConformalFactor) -> Self {
        Self {
            grid_n: cf.min_grid_n().max(32),
            potential: PotentialOptions::default(),
            fourth: FourthOrderOptions::default(),
            isoline: IsolineOptions::default(),
            closed: ClosedSearchOptions::default(),
            orbit_classes: vec![(1, 0), (0, 1), (1, 1), (1, -1)],
            isoline_levels: 7,
        }
    }
}

/// Stable within a factor 2, or both negligible.
fn stable(a: f64, b: f64, floor: f64) -> bool {
    (a <= floor && b <= floor) || (a <= 2.0 * b && b <= 2.0 * a)
}

/// VIOLATED only when the residual exceeds 10× its error estimate (the
/// change under doubling, at least `floor`) on both resolutions.
fn gate(coarse: f64, fine: f64, floor: f64) -> bool {
    let err = (coarse - fine).abs().max(floor);
    coarse > 10.0 * err && fine > 10.0 * err
}

fn potentiality_entry(cf: &ConformalFactor, m: usize, opts: &PipelineOptions) -> TestEntry {
    let name = "potentiality";
    match potentiality_study(cf, m, opts.grid_n, opts.potential) {
        Ok(st) => {
            let (a, b) = (st.coarse.residual_rel, st.fine.residual_rel);
            let status = match st.verdict {
                PotentialVerdict::Solvable => TestStatus::Pass,
                PotentialVerdict::Degenerate => TestStatus::Degenerate,
                PotentialVerdict::Obstructed if gate(a, b, 1e-10) => TestStatus::Violated,
                _ => TestStatus::Inconclusive,
            };
            let mut e = TestEntry::new(name, status, stable(a, b, EPS_POT))
                .with("residual_coarse", a)
                .with("residual_fine", b);
            if let Some(c) = st.fine.best_c {
                e = e.with("best_c1", c.c1).with("best_c2", c.c2);
            }
            if let Some(d) = st.fine.liouville_defect {
                e = e.with("liouville_defect", d);
            }
            e
        }
        Err(err) => TestEntry::failed(name, err),
    }
}

fn orbit_menu(cf: &ConformalFactor, opts: &PipelineOptions) -> (Vec<GeodesicOrbit>, Vec<String>) {
    let mut orbits = Vec::new();
    let mut notes = Vec::new();
    for &class in &opts.orbit_classes {
        match find_closed_geodesic(cf, class, &opts.closed) {
            Ok(o) => orbits.push(o),
            Err(e) => notes.push(format!("class {class:?}: {e}")),
        }
    }
    match critical_circle_orbits(cf, &opts.closed) {
        Ok(c) => orbits.extend(c),
        Err(e) => notes.push(format!("critical circles: {e}")),
    }
    (orbits, notes)
}

/// The ray pairs carry their own doubling estimates (quadrature `S/2`
/// against `S`, orbit re-integrated with `2S` samples).
fn ratio_entry(cf: &ConformalFactor, m: usize, orbits: &[GeodesicOrbit]) -> TestEntry {
    let name = "ratio_test";
    match ratio_test(cf, orbits, m - 1) {
        Ok(r) => {
            let st = r
                .entries
                .iter()
                .filter(|e| e.informative)
                .all(|e| e.estimate.error() <= 0.5 * e.estimate.pair.norm());
            let status = if r.verdict == RatioVerdict::Obstructed && st {
                TestStatus::Violated
            } else {
                TestStatus::Inconclusive
            };
            let informative = r.entries.iter().filter(|e| e.informative).count();
            let largest = r.entries.iter().map(|e| e.estimate.pair.norm()).fold(0.0, f64::max);
            TestEntry::new(name, status, st)
                .with("separation", r.max_separation)
                .with("separation_error", r.separation_error)
                .with("informative_orbits", informative as f64)
                .with("orbits", r.entries.len() as f64)
                .with("largest_pair_norm", largest)
        }
        Err(err) => TestEntry::failed(name, err),
    }
}

fn transport_entry(cf: &ConformalFactor, opts: &PipelineOptions) -> TestEntry {
    let name = "transport_equation";
    match transport_study(cf, opts.grid_n, opts.fourth) {
        Ok(st) => {
            let (a, b) = (st.coarse.residual_rel, st.fine.residual_rel);
            let status = match st.verdict {
                TransportVerdict::Consistent => TestStatus::Pass,
                TransportVerdict::Degenerate => TestStatus::Degenerate,
                TransportVerdict::Violated if gate(a, b, 1e-10) => TestStatus::Violated,
                _ => TestStatus::Inconclusive,
            };
            TestEntry::new(name, status, stable(a, b, EPS_POT))
                .with("residual_coarse", a)
                .with("residual_fine", b)
                .with("best_c1", st.fine.best_c.c1)
                .with("best_c2", st.fine.best_c.c2)
                .with("alpha1", st.fine.alpha[0])
                .with("alpha2", st.fine.alpha[1])
        }
        Err(err) => TestEntry::failed(name, err),
    }
}

/// Interior levels of `K`, evenly spaced strictly between its extremes.
fn k_levels(cf: &ConformalFactor, n: usize, count: usize) -> Vec<f64> {
    let g = Grid::new(*cf.lattice(), n);
    let k = g.sample(|p| cf.gaussian_curvature(p));
    let lo = k.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (1..=count)
        .map(|i| lo + (hi - lo) * i as f64 / (count + 1) as f64)
        .collect()
}

fn isoline_entry(cf: &ConformalFactor, opts: &PipelineOptions) -> TestEntry {
    let name = "closed_isoline_consistency";
    let levels = k_levels(cf, 2 * opts.grid_n, opts.isoline_levels);
    let coarse = IsolineOptions {
        grid_n: opts.grid_n,
        ..opts.isoline
    };
    let fine = IsolineOptions {
        grid_n: 2 * opts.grid_n,
        samples: 2 * opts.isoline.samples,
        ..opts.isoline
    };
    let run = || -> Result<_> {
        Ok((
            closed_isoline_consistency(cf, &levels, &coarse)?,
            closed_isoline_consistency(cf, &levels, &fine)?,
        ))
    };
    match run() {
        Ok((a, b)) => {
            if b.degenerate && b.curves.is_empty() {
                return TestEntry::new(name, TestStatus::Degenerate, true);
            }
            let (ra, rb) = (a.residual_rel, b.residual_rel);
            let st = ra.is_finite() && rb.is_finite() && stable(ra, rb, EPS_POT);
            let status = if !(ra.is_finite() && rb.is_finite()) {
                TestStatus::Inconclusive
            } else if rb <= EPS_POT {
                TestStatus::Pass
            } else if a.curves.len() == b.curves.len() && st && gate(ra, rb, 1e-10) {
                TestStatus::Violated
            } else {
                TestStatus::Inconclusive
            };
            TestEntry::new(name, status, st)
                .with("residual_coarse", ra)
                .with("residual_fine", rb)
                .with("curves", b.curves.len() as f64)
                .with("homology_rank", b.homology_rank as f64)
                .with("best_c1", b.best_c[0])
                .with("best_c2", b.best_c[1])
                .with("clipped", b.clipped as f64)
        }
        Err(err) => TestEntry::failed(name, err),
    }
}

fn disk_entry(cf: &ConformalFactor, opts: &PipelineOptions) -> TestEntry {
    let name = "disk_integrals";
    let coarse = IsolineOptions {
        grid_n: opts.grid_n,
        ..opts.isoline
    };
    let fine = IsolineOptions {
        grid_n: 2 * opts.grid_n,
        ..opts.isoline
    };
    // annuli do not enter the verdict
    let checks = DomainChecks {
        coarea: false,
        annuli: false,
    };
    let run = || -> Result<_> {
        Ok((
            domain_integral_checks(cf, None, &coarse, checks)?,
            domain_integral_checks(cf, None, &fine, checks)?,
        ))
    };
    match run() {
        Ok((a, b)) => {
            if b.degenerate {
                return TestEntry::new(name, TestStatus::Degenerate, true);
            }
            let mut e = TestEntry::new(name, TestStatus::Inconclusive, false).with("disks", b.disks.len() as f64);
            if a.disks.len() != b.disks.len() {
                return e.noted("critical points differ between resolutions");
            }
            // a disk counts when its integral clears round-off and agrees
            // across the two resolutions
            let informative: Vec<([f64; 2], [f64; 2])> = a
                .disks
                .iter()
                .zip(&b.disks)
                .filter_map(|(x, y)| {
                    let (p, q) = (x.polar, y.polar);
                    let nq = q[0].hypot(q[1]);
                    let diff = (p[0] - q[0]).hypot(p[1] - q[1]);
                    (nq > 1e-8 * y.magnitude && diff <= 0.1 * nq).then_some((p, q))
                })
                .collect();
            e = e.with("informative_disks", informative.len() as f64);
            if informative.len() < 2 {
                e.resolution_stability = true;
                return e.noted("fewer than two informative disks: no constraint on c");
            }
            let ratio = |pick: fn(&([f64; 2], [f64; 2])) -> [f64; 2]| {
                let mut g = Matrix2::zeros();
                for d in informative.iter().map(pick) {
                    g += Matrix2::new(d[0] * d[0], d[0] * d[1], d[0] * d[1], d[1] * d[1]);
                }
                let (lo, hi, _) = smallest_eig(g);
                (lo / hi).sqrt()
            };
            let (ra, rb) = (ratio(|d| d.0), ratio(|d| d.1));
            let st = stable(ra, rb, 1e-9);
            e.resolution_stability = st;
            e = e.with("ratio_coarse", ra).with("ratio_fine", rb);
            // a single c must annihilate every disk vector
            e.status = if rb <= 1e-9 {
                TestStatus::Pass
            } else if st && gate(ra, rb, 1e-12) {
                TestStatus::Violated
            } else {
                TestStatus::Inconclusive
            };
            e
        }
        Err(err) => TestEntry::failed(name, err),
    }
}

fn mean_value_entry(cf: &ConformalFactor, opts: &PipelineOptions) -> TestEntry {
    let mv = mean_value_check(&MetricGrid::new(cf, 2 * opts.grid_n));
    let status = if mv.lambda_max == 0.0 {
        TestStatus::Degenerate
    } else if mv.vanish(1e-9) {
        TestStatus::Pass
    } else {
        TestStatus::Inconclusive
    };
    TestEntry::new("mean_values", status, true)
        .with("integral1", mv.integrals[0])
        .with("integral2", mv.integrals[1])
        .with("scale", mv.area * mv.lambda_max)
        .noted("identity for every metric; carries no evidence either way")
}

fn classical_entry(name: &str, c: &ClassicalCheck) -> TestEntry {
    let mut e = TestEntry::new(name, c.status, true).with("residual", c.residual);
    if let Some(r) = c.rotation {
        e = e.with("rotation_re", r[0]).with("rotation_im", r[1]);
    }
    e
}

fn rank_verdict(m: usize, tests: &[TestEntry], classical: Option<TestStatus>) -> String {
    if tests.iter().all(|t| t.status == TestStatus::Degenerate) {
        return "trivially integrable; Killing fields of all ranks exist (reducible)".into();
    }
    if classical == Some(TestStatus::Pass) {
        return format!("rank {m} Killing field exists (classical structure found)");
    }
    if tests.iter().any(|t| t.status == TestStatus::Violated) {
        return format!("no irreducible rank {m} Killing field (evidence: stable violated necessary condition)");
    }
    format!("inconclusive: no necessary condition for rank {m} violated")
}

/// Runs every applicable test for each requested rank.
pub fn run_full(cf: &ConformalFactor, metric_id: &str, ranks: &[usize], opts: &PipelineOptions) -> ObstructionReport {
    let classical = classify_classical(cf, 2 * opts.grid_n);
    let (orbits, orbit_notes) = if cf.is_flat() {
        (Vec::new(), Vec::new())
    } else {
        orbit_menu(cf, opts)
    };
    let mut per_rank = BTreeMap::new();
    for &m in ranks {
        if m == 0 {
            continue;
        }
        let mut tests = Vec::new();
        let cls = match m {
            1 => Some(classical.m1),
            2 => Some(classical.m2),
            _ => None,
        };
        if let Some(c) = &cls {
            tests.push(classical_entry("classical", c));
        }
        tests.push(potentiality_entry(cf, m, opts));
        let mut ratio = if cf.is_flat() {
            TestEntry::new("ratio_test", TestStatus::Degenerate, true)
        } else {
            ratio_entry(cf, m, &orbits)
        };
        if !orbit_notes.is_empty() {
            ratio = ratio.noted(orbit_notes.join("; "));
        }
        tests.push(ratio);
        if m == 3 {
            tests.push(transport_entry(cf, opts));
            tests.push(isoline_entry(cf, opts));
            tests.push(disk_entry(cf, opts));
            tests.push(mean_value_entry(cf, opts));
        }
        let verdict = rank_verdict(m, &tests, cls.map(|c| c.status));
        per_rank.insert(m, RankReport { tests, verdict });
    }
    let summary = per_rank
        .iter()
        .map(|(m, r)| format!("rank {m}: {}", r.verdict))
        .collect::<Vec<_>>()
        .join("; ");
    ObstructionReport {
        schema_version: REPORT_SCHEMA_VERSION,
        metric_id: metric_id.into(),
        grid_n: opts.grid_n,
        per_rank,
        summary,
    }
}
