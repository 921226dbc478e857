//! Bundled metrics on the unit square torus.

use num_complex::Complex64;

use crate::lattice::Lattice;
use crate::metric::{ConformalFactor, FourierMode};

fn cosine(k: (i32, i32), amp: f64) -> FourierMode {
    // amp·cos(ω·x) = amp/2 (e^{iω·x} + e^{−iω·x})
    FourierMode {
        k,
        amp: Complex64::new(0.5 * amp, 0.0),
    }
}

pub fn flat() -> ConformalFactor {
    ConformalFactor::flat(Lattice::unit_square())
}

/// `μ = 0.1 cos(2πy)`.
pub fn rotation() -> ConformalFactor {
    ConformalFactor::with_hermitian_closure(Lattice::unit_square(), [cosine((0, 1), 0.1)])
        .expect("hermitian by construction")
}

/// `λ(x, y) = a(x) + b(y)` with `a = 1.2 + 0.2cos(2πx)`, `b = 0.3cos(2πy)`.
pub fn liouville_lambda(p: [f64; 2]) -> f64 {
    use std::f64::consts::TAU;
    1.2 + 0.2 * (TAU * p[0]).cos() + 0.3 * (TAU * p[1]).cos()
}

/// Liouville metric `e^{2μ} = a(x) + b(y)`, with `μ` fitted spectrally.
pub fn liouville() -> ConformalFactor {
    ConformalFactor::fit_from_lambda(Lattice::unit_square(), 64, 1e-17, liouville_lambda).expect("positive lambda")
}

/// `μ = 0.2cos(2πx) + 0.15cos(2π(x + 2y))`.
pub fn generic() -> ConformalFactor {
    ConformalFactor::with_hermitian_closure(Lattice::unit_square(), [cosine((1, 0), 0.2), cosine((1, 2), 0.15)])
        .expect("hermitian by construction")
}

/// Looks a fixture up by name.
pub fn by_name(name: &str) -> Option<ConformalFactor> {
    match name {
        "flat" => Some(flat()),
        "rotation" => Some(rotation()),
        "liouville" => Some(liouville()),
        "generic" => Some(generic()),
        _ => None,
    }
}

pub const NAMES: [&str; 4] = ["flat", "rotation", "liouville", "generic"];
