//! Period lattices of the torus `R^2 / Γ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A positively oriented lattice `Γ = Z e1 + Z e2` in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    e1: [f64; 2],
    e2: [f64; 2],
}

impl Lattice {
    pub fn new(e1: [f64; 2], e2: [f64; 2]) -> Result<Self> {
        let cross = e1[0] * e2[1] - e1[1] * e2[0];
        if !(cross > 0.0) || !cross.is_finite() {
            return Err(Error::DegenerateLattice(cross));
        }
        Ok(Self { e1, e2 })
    }

    pub fn square(side: f64) -> Self {
        Self::new([side, 0.0], [0.0, side]).expect("square lattice")
    }

    pub fn unit_square() -> Self {
        Self::square(1.0)
    }

    pub fn e1(&self) -> [f64; 2] {
        self.e1
    }

    pub fn e2(&self) -> [f64; 2] {
        self.e2
    }

    /// Euclidean area of the fundamental domain (in `dx dy`).
    pub fn area(&self) -> f64 {
        self.e1[0] * self.e2[1] - self.e1[1] * self.e2[0]
    }

    /// Dual basis `f1, f2` with `fi · ej = δij`.
    pub fn dual(&self) -> ([f64; 2], [f64; 2]) {
        let a = self.area();
        ([self.e2[1] / a, -self.e2[0] / a], [-self.e1[1] / a, self.e1[0] / a])
    }

    /// Wave vector `2π (k1 f1 + k2 f2)` of the dual-lattice frequency `(k1, k2)`.
    pub fn wavevector(&self, k1: i32, k2: i32) -> [f64; 2] {
        let (f1, f2) = self.dual();
        let (k1, k2) = (k1 as f64, k2 as f64);
        [
            2.0 * PI * (k1 * f1[0] + k2 * f2[0]),
            2.0 * PI * (k1 * f1[1] + k2 * f2[1]),
        ]
    }

    /// Point with lattice coordinates `(s, t)`.
    pub fn point(&self, s: f64, t: f64) -> [f64; 2] {
        [s * self.e1[0] + t * self.e2[0], s * self.e1[1] + t * self.e2[1]]
    }

    /// Lattice coordinates of a point.
    pub fn coords(&self, p: [f64; 2]) -> [f64; 2] {
        let (f1, f2) = self.dual();
        [f1[0] * p[0] + f1[1] * p[1], f2[0] * p[0] + f2[1] * p[1]]
    }

    /// Lattice vector `n1 e1 + n2 e2`.
    pub fn vector(&self, n1: i64, n2: i64) -> [f64; 2] {
        self.point(n1 as f64, n2 as f64)
    }

    /// Reduce a point into the fundamental parallelogram `[0,1)^2` (lattice coords).
    pub fn reduce(&self, p: [f64; 2]) -> [f64; 2] {
        let [s, t] = self.coords(p);
        self.point(s - s.floor(), t - t.floor())
    }

    /// The lattice seen from the coordinates `z'` with `z = a z'`.
    pub fn transformed(&self, a: Complex64) -> Result<Self> {
        let map = |e: [f64; 2]| {
            let z = Complex64::new(e[0], e[1]) / a;
            [z.re, z.im]
        };
        Self::new(map(self.e1), map(self.e2))
    }

    /// Length of the shortest of `e1`, `e2`.
    pub fn min_period(&self) -> f64 {
        let n = |e: [f64; 2]| (e[0] * e[0] + e[1] * e[1]).sqrt();
        n(self.e1).min(n(self.e2))
    }
}
