//! Dormand–Prince 5(4) integrator with step-size control.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-11,
            max_steps: 2_000_000,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn lin<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..D {
            out[i] += h * c * k[i];
        }
    }
    out
}

impl Dopri5 {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }

    /// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction). Steps
    /// are truncated so that every time in `stops` (monotone, inside the
    /// interval) is hit exactly; `observe` is called at `t0`, at every stop
    /// and at `t1`.
    pub fn integrate<const D: usize>(
        &self,
        f: impl Fn(f64, &[f64; D]) -> [f64; D],
        t0: f64,
        y0: [f64; D],
        t1: f64,
        stops: &[f64],
        mut observe: impl FnMut(f64, &[f64; D]),
    ) -> Result<[f64; D]> {
        let dir = if t1 >= t0 { 1.0 } else { -1.0 };
        let span = (t1 - t0).abs();
        observe(t0, &y0);
        if span == 0.0 {
            return Ok(y0);
        }
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y);
        let scale0: f64 = (0..D)
            .map(|i| {
                let s = self.atol + self.rtol * y[i].abs();
                (k1[i] / s).powi(2)
            })
            .sum::<f64>()
            .sqrt()
            / (D as f64).sqrt();
        let mut h = if scale0 > 0.0 {
            (0.01 / scale0).min(span)
        } else {
            span * 1e-2
        };
        h = h.max(span * 1e-12);
        let mut next_stop = 0usize;
        let tiny = 1e-14 * span.max(1.0);
        for _ in 0..self.max_steps {
            let remaining = (t1 - t) * dir;
            if remaining <= tiny {
                break;
            }
            let mut target = t1;
            while next_stop < stops.len() && (stops[next_stop] - t) * dir <= tiny {
                next_stop += 1;
            }
            if next_stop < stops.len() {
                target = stops[next_stop];
            }
            let to_target = (target - t) * dir;
            let hit = h >= to_target;
            let hs = if hit { to_target } else { h };
            let s = hs * dir;
            let k2 = f(t + C2 * s, &lin(&y, s, &[(A21, &k1)]));
            let k3 = f(t + C3 * s, &lin(&y, s, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(t + C4 * s, &lin(&y, s, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(
                t + C5 * s,
                &lin(&y, s, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = f(
                t + s,
                &lin(&y, s, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let yn = lin(&y, s, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = f(t + s, &yn);
            let mut err = 0.0;
            for i in 0..D {
                let e = s * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.atol + self.rtol * y[i].abs().max(yn[i].abs());
                err += (e / sc).powi(2);
            }
            let err = (err / D as f64).sqrt();
            if !err.is_finite() {
                h *= 0.1;
                if h < 1e-14 * span {
                    return Err(Error::StepUnderflow { t });
                }
                continue;
            }
            if err <= 1.0 {
                t = if hit { target } else { t + s };
                y = yn;
                k1 = k7;
                if hit {
                    observe(t, &y);
                    if next_stop < stops.len() && target == stops[next_stop] {
                        next_stop += 1;
                    }
                }
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                // keep the controller's step when a stop truncated it
                h = if hit { h.max(hs * fac).min(h * 5.0) } else { hs * fac };
            } else {
                h = hs * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                if h < 1e-14 * span.max(t.abs()) {
                    return Err(Error::StepUnderflow { t });
                }
            }
        }
        if ((t1 - t) * dir).abs() > tiny {
            return Err(Error::StepUnderflow { t });
        }
        if t != t1 {
            // final stop coincides with t1 within round-off
            observe(t1, &y);
        }
        Ok(y)
    }
}
