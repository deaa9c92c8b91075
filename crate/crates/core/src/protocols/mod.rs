//! Protocols that go beyond single-dataset shadow prediction.

pub mod dfe;
pub mod hamming;
pub mod otoc;

pub use dfe::{dfe_estimate, dfe_plan, pauli_weights, DfeEstimate, DfePlan, DfeTerm};
pub use hamming::{
    check_shared_settings, cross_overlap, cross_overlap_shadow, fmax, purity_hamming, FmaxEstimate,
};
pub use otoc::{
    otoc_estimate, otoc_run, OtocEstimator, OtocMode, OtocPair, OtocPoint, OtocRun, OtocTime,
};
