//! Classical-shadow postprocessing of randomized-measurement datasets.

pub mod multicopy;
pub mod predict;
pub mod reflection;
pub mod snapshot;
pub mod stats;

pub use multicopy::{
    multicopy_expect, p3_ppt_test, pt_moments, purity_shadow, renyi2, renyi2_from, CopyPermutation,
    PptVerdict,
};
pub use predict::{
    estimate_subsystem_state, predict_observable, predict_pauli, predict_pauli_with, Aggregation,
};
pub use reflection::{
    reflection_invariant, reflection_operator, topological_entropy, ReflectionEstimate,
};
pub use snapshot::{build_snapshot, build_snapshots, ShadowSnapshot, MAX_SHADOW_QUBITS};
pub use stats::{
    batches_for_delta, jackknife_mean, mean_estimate, median_of_means, EstimateWithError,
    Jackknife, Method, DEFAULT_GROUPS,
};
