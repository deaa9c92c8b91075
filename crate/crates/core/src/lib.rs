//! Randomized-measurement toolkit: exact simulation, dataset acquisition and
//! the classical postprocessing estimators built on it.

pub mod dataset;
pub mod ensembles;
pub mod error;
pub mod hamlearn;
pub mod linalg;
pub mod pauli;
pub mod protocols;
pub mod seed;
pub mod shadows;
pub mod sim;

pub use dataset::{acquire, acquire_on_device, MeasurementDataset, MeasurementRecord};
pub use ensembles::{EnsembleKind, EnsembleSpec, LocalUnitarySetting};
pub use error::{Error, Result};
pub use pauli::{Basis, BasisString, PauliLetter, PauliString};
