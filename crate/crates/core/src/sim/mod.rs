//! Dense exact simulator and oracle.

pub mod hamiltonian;
pub mod noise;
pub mod oracle;
pub mod prep;
pub mod state;

pub use hamiltonian::{
    build_ising_chain, build_xy_hamiltonian, evolve, heisenberg, HamiltonianSpec, HamiltonianTerm,
    Propagator, MAX_HAMILTONIAN_QUBITS, MAX_HEISENBERG_QUBITS,
};
pub use noise::{apply_noise, global_depolarize, NoiseChannel};
pub use oracle::{
    apply_local_unitaries, born_sample, oracle_expectation, oracle_observable, oracle_otoc,
    oracle_otoc_with, oracle_overlap, oracle_pt_moments, oracle_purity, oracle_reduced,
    oracle_reflection, oracle_renyi2,
};
pub use prep::{prepare, StatePrepSpec};
pub use state::{
    BornSampler, DensityState, PureState, QuantumState, MAX_DENSITY_QUBITS, MAX_PURE_QUBITS,
};
