//! Harmonic decomposition `f = Σ i^{m−k} f^k` and the chain equations.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::poly::Poly;
use super::{SymTensorField, TraceFreeField};

/// Trace-free harmonics of a rank-`m` field; `parts[k]` has rank
/// `2k + (m mod 2)`.
#[derive(Debug, Clone)]
pub struct HarmonicDecomposition {
    pub rank: usize,
    pub parts: Vec<TraceFreeField>,
}

impl HarmonicDecomposition {
    /// `Σ_k i^{(m − rank_k)/2} f^k`.
    pub fn reconstruct(&self) -> SymTensorField {
        let mut out: Option<SymTensorField> = None;
        for part in &self.parts {
            let mut t = part.to_sym();
            for _ in 0..(self.rank - part.rank()) / 2 {
                t = t.op_i();
            }
            out = Some(match out {
                None => t,
                Some(o) => o.add(&t).expect("same grid"),
            });
        }
        out.expect("at least one harmonic")
    }

    /// The highest harmonic `p f`.
    pub fn top(&self) -> &TraceFreeField {
        self.parts.last().expect("at least one harmonic")
    }
}

/// Coefficient of `δ f^{k+1}` in the chain equations for dimension `n`:
/// `(2k+2)/(n+4k+2)` for even rank and `(2k+3)/(n+4k+4)` for odd rank.
pub fn chain_coefficient(n: usize, k: usize, odd: bool) -> f64 {
    let (n, k) = (n as f64, k as f64);
    if odd {
        (2.0 * k + 3.0) / (n + 4.0 * k + 4.0)
    } else {
        (2.0 * k + 2.0) / (n + 4.0 * k + 2.0)
    }
}

const DIM: usize = 2;

/// Inverse of the matrix whose columns are the components of
/// `(ξ1² + ξ2²)^r Re/Im (ξ1 + iξ2)^{m−2r}`. Column order: for `r = 0, 1, …`
/// the `Re` column, then the `Im` column when `m − 2r > 0`.
fn basis_inverse(m: usize) -> (DMatrix<f64>, Vec<(usize, bool)>) {
    let mut cols = Vec::new();
    let mut labels = Vec::new();
    for r in 0..=m / 2 {
        let q = m - 2 * r;
        let (re, im) = Poly::harmonic(q);
        let rad = Poly::radial(r);
        cols.push(rad.mul(&re).to_components());
        labels.push((r, false));
        if q > 0 {
            cols.push(rad.mul(&im).to_components());
            labels.push((r, true));
        }
    }
    let mat = DMatrix::from_fn(m + 1, m + 1, |i, j| cols[j][i]);
    let inv = mat.try_inverse().expect("harmonic basis is invertible");
    (inv, labels)
}

pub(super) fn decompose(f: &SymTensorField) -> HarmonicDecomposition {
    let m = f.rank();
    let mg = f.mg.clone();
    let n = mg.len();
    let (inv, labels) = basis_inverse(m);
    let coeffs: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..=m)
                .map(|row| (0..=m).map(|c| inv[(row, c)] * f.comps[c][i]).sum())
                .collect()
        })
        .collect();
    let nparts = m / 2 + 1;
    let mut parts = Vec::with_capacity(nparts);
    // part k has rank q = 2k + parity, i.e. r = (m − q)/2 = nparts − 1 − k
    for k in 0..nparts {
        let r = nparts - 1 - k;
        let q = m - 2 * r;
        let lam = mg.lambda_pow(-(r as f64));
        let col_re = labels.iter().position(|&l| l == (r, false)).unwrap();
        let a: Vec<f64> = (0..n).map(|i| coeffs[i][col_re] * lam[i]).collect();
        let b: Vec<f64> = match labels.iter().position(|&l| l == (r, true)) {
            Some(c) => (0..n).map(|i| coeffs[i][c] * lam[i]).collect(),
            None => vec![0.0; n],
        };
        parts.push(TraceFreeField {
            mg: mg.clone(),
            rank: q,
            a,
            b,
        });
    }
    HarmonicDecomposition { rank: m, parts }
}

/// One chain equation evaluated on the harmonics of a field.
#[derive(Debug, Clone)]
pub struct ChainResidual {
    /// Index `k` of the equation; `None` for the leading `δ f⁰` equation of
    /// odd rank.
    pub k: Option<usize>,
    pub residual: TraceFreeField,
    pub norm: f64,
}

pub(super) fn chain_residuals(f: &SymTensorField) -> Vec<ChainResidual> {
    let m = f.rank();
    let h = decompose(f);
    let odd = m % 2 == 1;
    let mut out = Vec::new();
    if odd {
        let r = h.parts[0].delta().expect("odd harmonics have rank >= 1");
        out.push(ChainResidual {
            k: None,
            norm: r.max_norm(),
            residual: r,
        });
    }
    for k in 0..h.parts.len() {
        let mut r = h.parts[k].pd();
        if let Some(next) = h.parts.get(k + 1) {
            let c = chain_coefficient(DIM, k, odd);
            r = r.add(&next.delta().expect("rank >= 1").scale(c)).expect("same grid");
        }
        out.push(ChainResidual {
            k: Some(k),
            norm: r.max_norm(),
            residual: r,
        });
    }
    out
}
