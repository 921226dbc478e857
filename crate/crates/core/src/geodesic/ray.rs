//! Integrals of `Z^{m,c}` over closed geodesics and the ratio test.

use serde::Serialize;

use super::{integrate_flow, GeodesicOrbit};
use crate::error::{Error, Result};
use crate::metric::ConformalFactor;
use crate::solver::PseudoVector;

/// Orbits with a larger closure residual are rejected by the integrals.
const CLOSED_ENOUGH: f64 = 1e-8;

/// The two integrals whose quotient must not depend on the orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayIntegralPair {
    /// `∮ e^{mμ}(μx cos mφ − μy sin mφ) dt`.
    pub num: f64,
    /// `∮ e^{mμ}(μy cos mφ + μx sin mφ) dt`.
    pub den: f64,
}

impl RayIntegralPair {
    pub fn norm(&self) -> f64 {
        self.num.hypot(self.den)
    }
}

fn check_closed(orbit: &GeodesicOrbit) -> Result<()> {
    if orbit.closure_residual > CLOSED_ENOUGH {
        return Err(Error::OrbitNotClosed(orbit.closure_residual));
    }
    Ok(())
}

/// Periodic trapezoid rule over the samples, taking every `stride`-th one.
fn trapezoid(orbit: &GeodesicOrbit, stride: usize, g: impl Fn(&[f64; 4]) -> [f64; 2]) -> [f64; 2] {
    let s = orbit.intervals();
    let mut acc = [0.0; 2];
    for k in (0..s).step_by(stride) {
        let v = g(&orbit.samples[k]);
        acc[0] += v[0];
        acc[1] += v[1];
    }
    let h = orbit.period * stride as f64 / s as f64;
    [acc[0] * h, acc[1] * h]
}

fn pair_with_stride(cf: &ConformalFactor, orbit: &GeodesicOrbit, m: usize, stride: usize) -> RayIntegralPair {
    let mf = m as f64;
    let [num, den] = trapezoid(orbit, stride, |s| {
        let (mu, mx, my) = cf.gradient([s[1], s[2]]);
        let e = (mf * mu).exp();
        let (sn, cs) = (mf * s[3]).sin_cos();
        [e * (mx * cs - my * sn), e * (my * cs + mx * sn)]
    });
    RayIntegralPair { num, den }
}

/// `∮ e^{mμ}((c¹μx + c²μy)cos mφ + (c²μx − c¹μy)sin mφ) dt` with `c` of
/// weight `m + 1`.
pub fn ray_integral_z(cf: &ConformalFactor, orbit: &GeodesicOrbit, m: usize, c: &PseudoVector) -> Result<f64> {
    check_closed(orbit)?;
    if c.weight != m as i32 + 1 {
        return Err(Error::WeightMismatch {
            expected: m as i32 + 1,
            actual: c.weight,
        });
    }
    let p = pair_with_stride(cf, orbit, m, 1);
    Ok(c.c1 * p.num + c.c2 * p.den)
}

pub fn ray_pair(cf: &ConformalFactor, orbit: &GeodesicOrbit, m: usize) -> Result<RayIntegralPair> {
    check_closed(orbit)?;
    Ok(pair_with_stride(cf, orbit, m, 1))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RayEstimate {
    pub pair: RayIntegralPair,
    /// Quadrature error: `S/2` against `S` samples.
    pub quadrature_error: f64,
    /// Orbit error: re-integration with `2S` samples at a tenth of the
    /// tolerance against the original pair.
    pub orbit_error: f64,
}

impl RayEstimate {
    pub fn error(&self) -> f64 {
        self.quadrature_error + self.orbit_error
    }
}

pub fn ray_pair_estimate(cf: &ConformalFactor, orbit: &GeodesicOrbit, m: usize) -> Result<RayEstimate> {
    check_closed(orbit)?;
    let pair = pair_with_stride(cf, orbit, m, 1);
    let half = if orbit.intervals() % 2 == 0 {
        pair_with_stride(cf, orbit, m, 2)
    } else {
        pair
    };
    let fine = integrate_flow(
        cf,
        orbit.start(),
        orbit.period,
        orbit.ode_tol * 0.1,
        2 * orbit.intervals(),
    )?;
    let tight = pair_with_stride(cf, &fine, m, 1);
    let d = |a: RayIntegralPair, b: RayIntegralPair| (a.num - b.num).hypot(a.den - b.den);
    Ok(RayEstimate {
        pair,
        quadrature_error: d(pair, half),
        orbit_error: d(pair, tight),
    })
}

/// `|sin∠(u, v)|` for two nonzero pairs.
pub fn projective_distance(u: &RayIntegralPair, v: &RayIntegralPair) -> f64 {
    (u.num * v.den - u.den * v.num).abs() / (u.norm() * v.norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RatioVerdict {
    /// Two orbits give different ratios: no irreducible Killing field of
    /// rank `m + 1`.
    Obstructed,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitPairEntry {
    pub homotopy_class: (i64, i64),
    pub length: f64,
    pub estimate: RayEstimate,
    /// Excluded when the pair is within 10 error estimates of zero.
    pub informative: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioTestReport {
    pub m: usize,
    pub entries: Vec<OrbitPairEntry>,
    /// Projective distance of the two informative pairs with the largest
    /// distance-to-error ratio.
    pub max_separation: f64,
    /// Combined relative error of those two pairs.
    pub separation_error: f64,
    pub verdict: RatioVerdict,
    /// `m + 1` when obstructed.
    pub obstructed_rank: Option<usize>,
}

/// Compares the projective points of the ray integral pairs over closed
/// orbits. Obstructed when two informative pairs are separated by more
/// than 10 times their combined error estimate.
pub fn ratio_test(cf: &ConformalFactor, orbits: &[GeodesicOrbit], m: usize) -> Result<RatioTestReport> {
    if orbits.len() < 2 {
        return Err(Error::NotEnoughOrbits(orbits.len()));
    }
    let entries: Vec<OrbitPairEntry> = orbits
        .iter()
        .map(|o| {
            let est = ray_pair_estimate(cf, o, m)?;
            let informative = est.pair.norm() > 10.0 * est.error() && est.pair.norm() > 1e-13;
            Ok(OrbitPairEntry {
                homotopy_class: o.homotopy_class,
                length: o.period,
                estimate: est,
                informative,
            })
        })
        .collect::<Result<_>>()?;
    let info: Vec<&OrbitPairEntry> = entries.iter().filter(|e| e.informative).collect();
    let mut best: Option<(f64, f64, f64)> = None;
    for i in 0..info.len() {
        for j in i + 1..info.len() {
            let (u, v) = (&info[i].estimate, &info[j].estimate);
            let dist = projective_distance(&u.pair, &v.pair);
            let err = u.error() / u.pair.norm() + v.error() / v.pair.norm();
            let margin = dist / err.max(f64::MIN_POSITIVE);
            if best.map_or(true, |b| margin > b.2) {
                best = Some((dist, err, margin));
            }
        }
    }
    let (max_separation, separation_error, margin) = best.unwrap_or((0.0, 0.0, 0.0));
    let verdict = if margin > 10.0 {
        RatioVerdict::Obstructed
    } else {
        RatioVerdict::Inconclusive
    };
    Ok(RatioTestReport {
        m,
        entries,
        max_separation,
        separation_error,
        obstructed_rank: (verdict == RatioVerdict::Obstructed).then_some(m + 1),
        verdict,
    })
}
