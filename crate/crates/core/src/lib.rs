//! Killing tensor fields and geodesic-flow obstructions on 2-tori with a
//! conformally flat metric `g = e^{2μ}(dx² + dy²)`.

pub mod error;
pub mod fixtures;
pub mod geodesic;
pub mod lattice;
pub mod linalg;
pub mod metric;
pub mod ode;
pub mod pipeline;
pub mod rank3;
pub mod solver;
pub mod spectral;
pub mod tensor;

pub use error::{Error, Result};
pub use lattice::Lattice;
pub use metric::{ConformalFactor, FourierMode, MetricJet};
pub use spectral::{Grid, MetricGrid};
pub use tensor::{HarmonicDecomposition, SymTensorField, TraceFreeField};
