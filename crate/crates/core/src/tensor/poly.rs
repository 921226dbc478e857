//! Homogeneous polynomials in `(ξ1, ξ2)`, stored by the power of `ξ2`.
//!
//! A symmetric rank-`m` tensor with components `f_k` (k twos) corresponds to
//! the polynomial with coefficients `C(m, k) f_k`.

pub(crate) fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut r = 1.0;
    for i in 0..k.min(n - k) {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r.round()
}

/// Polynomial of degree `deg` (coefficient `k` belongs to `ξ1^{deg-k} ξ2^k`).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Poly {
    pub deg: usize,
    pub c: Vec<f64>,
}

impl Poly {
    pub fn zero(deg: usize) -> Self {
        Self {
            deg,
            c: vec![0.0; deg + 1],
        }
    }

    pub fn from_components(f: &[f64]) -> Self {
        let m = f.len() - 1;
        Self {
            deg: m,
            c: f.iter().enumerate().map(|(k, v)| binom(m, k) * v).collect(),
        }
    }

    pub fn to_components(&self) -> Vec<f64> {
        self.c.iter().enumerate().map(|(k, v)| v / binom(self.deg, k)).collect()
    }

    /// Product with `s · ξ1^a ξ2^b`.
    pub fn mul_monomial(&self, s: f64, a: usize, b: usize) -> Self {
        let mut r = Self::zero(self.deg + a + b);
        for (k, v) in self.c.iter().enumerate() {
            r.c[k + b] += s * v;
        }
        r
    }

    pub fn mul(&self, other: &Poly) -> Self {
        let mut r = Self::zero(self.deg + other.deg);
        for (i, a) in self.c.iter().enumerate() {
            for (j, b) in other.c.iter().enumerate() {
                r.c[i + j] += a * b;
            }
        }
        r
    }

    /// `∂/∂ξ1`; `None` for a constant (the derivative has no degree).
    pub fn d1(&self) -> Option<Self> {
        if self.deg == 0 {
            return None;
        }
        let mut r = Self::zero(self.deg - 1);
        for k in 0..self.deg {
            r.c[k] = (self.deg - k) as f64 * self.c[k];
        }
        Some(r)
    }

    pub fn d2(&self) -> Option<Self> {
        if self.deg == 0 {
            return None;
        }
        let mut r = Self::zero(self.deg - 1);
        for k in 1..=self.deg {
            r.c[k - 1] = k as f64 * self.c[k];
        }
        Some(r)
    }

    pub fn add(&self, o: &Poly) -> Self {
        assert_eq!(self.deg, o.deg);
        Self {
            deg: self.deg,
            c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            deg: self.deg,
            c: self.c.iter().map(|a| a * s).collect(),
        }
    }

    pub fn eval(&self, xi: [f64; 2]) -> f64 {
        self.c
            .iter()
            .enumerate()
            .map(|(k, v)| v * xi[0].powi((self.deg - k) as i32) * xi[1].powi(k as i32))
            .sum()
    }

    /// `Re (ξ1 + iξ2)^q` and `Im (ξ1 + iξ2)^q`.
    pub fn harmonic(q: usize) -> (Self, Self) {
        let mut re = Self::zero(q);
        let mut im = Self::zero(q);
        for k in 0..=q {
            let b = binom(q, k);
            match k % 4 {
                0 => re.c[k] = b,
                1 => im.c[k] = b,
                2 => re.c[k] = -b,
                _ => im.c[k] = -b,
            }
        }
        (re, im)
    }

    /// `(ξ1² + ξ2²)^r`.
    pub fn radial(r: usize) -> Self {
        let mut p = Self { deg: 0, c: vec![1.0] };
        let q = Self {
            deg: 2,
            c: vec![1.0, 0.0, 1.0],
        };
        for _ in 0..r {
            p = p.mul(&q);
        }
        p
    }
}
