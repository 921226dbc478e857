//! Kernel of `δpd` on trace-free fields and a numerical check of its dimension.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric::ConformalFactor;
use crate::spectral::MetricGrid;
use crate::tensor::TraceFreeField;

/// The two fields `a = e^{2mμ}c¹, b = e^{2mμ}c²` for `c = (1,0)` and `(0,1)`.
pub fn kernel_fields(mg: &Arc<MetricGrid>, m: usize) -> [TraceFreeField; 2] {
    let w = mg.lambda_pow(m as f64);
    let z = vec![0.0; mg.len()];
    [
        TraceFreeField::new(mg.clone(), m, w.clone(), z.clone()).expect("grid sizes agree"),
        TraceFreeField::new(mg.clone(), m, z, w).expect("grid sizes agree"),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    pub rank: usize,
    pub grid_n: usize,
    pub trial_degree: i32,
    /// Smallest singular values of the discretized `δpd`, ascending.
    pub singular_values: Vec<f64>,
    /// Number of singular values below `threshold`.
    pub nullspace_dim: usize,
    pub threshold: f64,
    /// Largest relative distance of a closed-form kernel field from the
    /// numerical nullspace (after orthonormalization).
    pub subspace_error: f64,
}

/// Discretizes `pd` on the trial space `e^{2mμ} · (real Fourier modes with
/// |k|∞ <= trial_degree) · {A, B}` (orthonormalized in `L²`), and reports the
/// singular values of the Galerkin matrix of `δpd` (the squares of those of
/// `pd`) together with the distance of the closed-form kernel from the
/// numerical nullspace.
pub fn kernel_svd(
    cf: &ConformalFactor,
    m: usize,
    grid_n: usize,
    trial_degree: i32,
    threshold: f64,
) -> Result<KernelReport> {
    if m == 0 {
        return Err(Error::RankTooLow { required: 1, actual: 0 });
    }
    let mg = MetricGrid::new(cf, grid_n);
    let n = mg.len();
    let lat = *cf.lattice();
    let mut modes: Vec<([f64; 2], bool)> = vec![([0.0, 0.0], false)];
    for k1 in 0..=trial_degree {
        for k2 in -trial_degree..=trial_degree {
            if k1 > 0 || k2 > 0 {
                let w = lat.wavevector(k1, k2);
                modes.push((w, false));
                modes.push((w, true));
            }
        }
    }
    let weight_in = mg.lambda_pow(m as f64);
    let trials: Vec<TraceFreeField> = modes
        .iter()
        .flat_map(|&(w, sine)| [(w, sine, false), (w, sine, true)])
        .map(|(w, sine, is_b)| {
            let s = mg.grid.sample(|p| {
                let ph = w[0] * p[0] + w[1] * p[1];
                if sine {
                    ph.sin()
                } else {
                    ph.cos()
                }
            });
            let v: Vec<f64> = s.iter().zip(&weight_in).map(|(a, b)| a * b).collect();
            let z = vec![0.0; n];
            if is_b {
                TraceFreeField::new(mg.clone(), m, z, v).unwrap()
            } else {
                TraceFreeField::new(mg.clone(), m, v, z).unwrap()
            }
        })
        .collect();
    let ncols = trials.len();
    // L² weights: |f|² = 2^{m−1} λ^{1−m}(a² + b²) on rank m
    let area_w = cf.lattice().area() / n as f64;
    let sw_in: Vec<f64> = mg
        .lambda_pow(1.0 - m as f64)
        .iter()
        .map(|l| (2f64.powi(m as i32 - 1) * l * area_w).sqrt())
        .collect();
    let sw_out: Vec<f64> = mg
        .lambda_pow(-(m as f64))
        .iter()
        .map(|l| (2f64.powi(m as i32) * l * area_w).sqrt())
        .collect();
    let embed = |f: &TraceFreeField, sw: &[f64]| -> Vec<f64> {
        f.a()
            .iter()
            .zip(sw)
            .map(|(x, s)| x * s)
            .chain(f.b().iter().zip(sw).map(|(x, s)| x * s))
            .collect()
    };
    let phi = DMatrix::from_columns(
        &trials
            .iter()
            .map(|t| nalgebra::DVector::from_vec(embed(t, &sw_in)))
            .collect::<Vec<_>>(),
    );
    let images: Vec<Vec<f64>> = trials.par_iter().map(|t| embed(&t.pd_general(), &sw_out)).collect();
    let b = DMatrix::from_fn(2 * n, ncols, |i, j| images[j][i]);
    let qr = phi.qr();
    let r = qr.r();
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("trial basis is rank deficient".into()))?;
    let bo = &b * &r_inv;
    let svd = bo.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V");
    let mut order: Vec<usize> = (0..ncols).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let sv_delta: Vec<f64> = order.iter().map(|&i| svd.singular_values[i].powi(2)).collect();
    let nullspace_dim = sv_delta.iter().filter(|&&s| s <= threshold).count();
    // orthonormal coordinates of the closed-form kernel in the trial basis
    let q = qr.q();
    let kf = kernel_fields(&mg, m);
    let null_rows: Vec<usize> = order.iter().take(2).copied().collect();
    let mut subspace_error: f64 = 0.0;
    for f in &kf {
        let e = nalgebra::DVector::from_vec(embed(f, &sw_in));
        let coords = q.transpose() * &e;
        // residuals are formed explicitly; sqrt(|e|² − |proj|²) loses half the digits
        let outside = (&e - &q * &coords).norm();
        let mut inside = coords.clone();
        for &row in &null_rows {
            let vrow = v_t.row(row).transpose();
            let d = vrow.dot(&coords);
            inside -= vrow * d;
        }
        let dist = outside.hypot(inside.norm()) / e.norm();
        subspace_error = subspace_error.max(dist);
    }
    Ok(KernelReport {
        rank: m,
        grid_n,
        trial_degree,
        singular_values: sv_delta.into_iter().take(6).collect(),
        nullspace_dim,
        threshold,
        subspace_error,
    })
}
