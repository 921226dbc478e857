//! Kernel and range of `δpd`, the potential/solenoidal split and the
//! solvability test for `dv = Z^{m−1,c}`.

mod kernel;
mod potential;
mod pseudo;
mod split;

pub use kernel::{kernel_fields, kernel_svd, KernelReport};
pub(crate) use potential::smallest_generalized;
pub use potential::{
    liouville_defect, make_z, potentiality_study, potentiality_test, PotentialOptions, PotentialTestResult,
    PotentialVerdict, ResolutionStudy, EPS_POT,
};
pub use pseudo::{PseudoForm, PseudoVector};
pub use split::{j_split, j_split_with, JSplit, SplitOptions};
