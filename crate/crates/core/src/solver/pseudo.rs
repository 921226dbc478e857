//! Pseudovectors and 1-pseudoforms of a given weight, i.e. pairs that
//! transform by powers of `a` under `z = a z'`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Constant pseudovector `c = (c¹, c²)` of weight `m`:
/// `c¹ + i c² = a^m (c'¹ + i c'²)` under `z = a z'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoVector {
    pub weight: i32,
    pub c1: f64,
    pub c2: f64,
}

impl PseudoVector {
    pub fn new(weight: i32, c1: f64, c2: f64) -> Self {
        Self { weight, c1, c2 }
    }

    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.c1, self.c2)
    }

    /// Components in the coordinates `z'` with `z = a z'`.
    pub fn in_coordinates(&self, a: Complex64) -> Self {
        let z = self.as_complex() / a.powi(self.weight);
        Self::new(self.weight, z.re, z.im)
    }

    /// `(−c², c¹)`.
    pub fn perp(&self) -> Self {
        Self::new(self.weight, -self.c2, self.c1)
    }

    pub fn norm(&self) -> f64 {
        self.c1.hypot(self.c2)
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self::new(self.weight, self.c1 / n, self.c2 / n)
    }

    pub fn basis(weight: i32) -> [Self; 2] {
        [Self::new(weight, 1.0, 0.0), Self::new(weight, 0.0, 1.0)]
    }
}

/// 1-pseudoform `ω = (ω₁, ω₂)` of weight `m` sampled on a grid:
/// `ω₁ + iω₂ = ā^{−m}(ω'₁ + iω'₂)` under `z = a z'`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoForm {
    pub weight: i32,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

impl PseudoForm {
    /// Components in the coordinates `z'` (sample by sample).
    pub fn in_coordinates(&self, a: Complex64) -> Self {
        let f = a.conj().powi(self.weight);
        let (w1, w2) = self
            .w1
            .iter()
            .zip(&self.w2)
            .map(|(&x, &y)| {
                let z = f * Complex64::new(x, y);
                (z.re, z.im)
            })
            .unzip();
        Self {
            weight: self.weight,
            w1,
            w2,
        }
    }

    /// The invariant function `c¹ω₁ + c²ω₂`.
    pub fn pair(&self, c: &PseudoVector) -> Vec<f64> {
        assert_eq!(c.weight, self.weight, "weights must agree");
        self.w1.iter().zip(&self.w2).map(|(x, y)| c.c1 * x + c.c2 * y).collect()
    }
}
