//! Linear prediction `ô = (1/M) Σ_m tr(O ρ̂^(m))`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::snapshot::{build_snapshot, check_shadow_subsystem};
use super::stats::{mean_estimate, median_of_means, EstimateWithError};
use crate::dataset::MeasurementDataset;
use crate::ensembles::EnsembleKind;
use crate::error::{Error, Result};
use crate::linalg::trace_prod;
use crate::pauli::PauliString;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    MedianOfMeans {
        batches: usize,
    },
}

pub fn aggregate(values: &[f64], how: Aggregation) -> Result<EstimateWithError> {
    match how {
        Aggregation::Mean => Ok(mean_estimate(values)),
        Aggregation::MedianOfMeans { batches } => median_of_means(values, batches),
    }
}

fn check_pauli(ds: &MeasurementDataset, p: &PauliString) -> Result<i8> {
    if p.n_qubits() != ds.n_qubits() {
        return Err(Error::QubitMismatch {
            expected: ds.n_qubits(),
            found: p.n_qubits(),
        });
    }
    p.sign()
        .ok_or_else(|| Error::invalid(format!("{p} is not Hermitian")))
}

/// Number of settings whose measured bases are compatible with `p`
/// (Clifford datasets only).
pub fn compatible_count(ds: &MeasurementDataset, p: &PauliString) -> usize {
    ds.records
        .iter()
        .filter_map(|r| r.setting.clifford_masks())
        .filter(|&(x, z, _)| p.is_compatible_masks(x, z))
        .count()
}

/// Per-setting terms of the Pauli estimator using only basis compatibility:
/// `3^w · [compatible] · mean_k(eigenvalue)`.
pub fn pauli_terms_compatible(ds: &MeasurementDataset, p: &PauliString) -> Result<Vec<f64>> {
    let sign = check_pauli(ds, p)? as f64;
    if ds.header.ensemble != EnsembleKind::SingleQubitClifford {
        return Err(Error::invalid(
            "compatibility path needs a Clifford dataset",
        ));
    }
    let supp = p.support_mask();
    let scale = 3f64.powi(p.weight() as i32) * sign;
    let mut compatible = 0;
    let terms: Vec<f64> = ds
        .records
        .iter()
        .map(|r| {
            let (x, z, neg) = r.setting.clifford_masks().expect("clifford dataset");
            if !p.is_compatible_masks(x, z) {
                return 0.0;
            }
            compatible += 1;
            let sum: f64 = r
                .shots
                .iter()
                .map(|&s| {
                    if ((s ^ neg) & supp).count_ones().is_multiple_of(2) {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .sum();
            scale * sum / r.shots.len() as f64
        })
        .collect();
    if compatible == 0 && !p.is_identity() {
        return Err(Error::NoData {
            observable: p.to_string(),
            settings: ds.n_settings(),
            compatible: 0,
        });
    }
    Ok(terms)
}

/// Per-setting terms `tr(P ρ̂^(m))` from the snapshots; works for any ensemble.
pub fn pauli_terms_snapshot(ds: &MeasurementDataset, p: &PauliString) -> Result<Vec<f64>> {
    check_pauli(ds, p)?;
    Ok(ds
        .records
        .par_iter()
        .map(|r| build_snapshot(r).pauli_trace(p).re)
        .collect())
}

/// Per-setting terms, choosing the compatibility path for Clifford data.
pub fn pauli_terms(ds: &MeasurementDataset, p: &PauliString) -> Result<Vec<f64>> {
    match ds.header.ensemble {
        EnsembleKind::SingleQubitClifford => pauli_terms_compatible(ds, p),
        EnsembleKind::SingleQubitHaar => pauli_terms_snapshot(ds, p),
    }
}

pub fn predict_pauli(ds: &MeasurementDataset, p: &PauliString) -> Result<EstimateWithError> {
    predict_pauli_with(ds, p, Aggregation::Mean)
}

pub fn predict_pauli_with(
    ds: &MeasurementDataset,
    p: &PauliString,
    how: Aggregation,
) -> Result<EstimateWithError> {
    aggregate(&pauli_terms(ds, p)?, how)
}

fn check_operator(qubits: &[usize], op: &DMatrix<Complex64>) -> Result<()> {
    let d = 1usize << qubits.len();
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::invalid(format!(
            "operator is {}x{}, subsystem needs {d}x{d}",
            op.nrows(),
            op.ncols()
        )));
    }
    if crate::linalg::max_abs_diff(op, &op.adjoint()) > 1e-10 {
        return Err(Error::invalid("observable is not Hermitian"));
    }
    Ok(())
}

/// Per-setting terms `tr(O ρ̂_A^(m))`.
pub fn observable_terms(
    ds: &MeasurementDataset,
    qubits: &[usize],
    op: &DMatrix<Complex64>,
) -> Result<Vec<f64>> {
    check_shadow_subsystem(ds.n_qubits(), qubits)?;
    check_operator(qubits, op)?;
    Ok(ds
        .records
        .par_iter()
        .map(|r| trace_prod(op, &build_snapshot(r).dense(qubits, 0)).re)
        .collect())
}

/// `tr(O ρ_A)` for a dense Hermitian `O` on `qubits` (entry `i` is index bit `i`).
pub fn predict_observable(
    ds: &MeasurementDataset,
    qubits: &[usize],
    op: &DMatrix<Complex64>,
) -> Result<EstimateWithError> {
    Ok(mean_estimate(&observable_terms(ds, qubits, op)?))
}

/// Mean restricted snapshot: Hermitian with unit trace, not necessarily positive.
pub fn estimate_subsystem_state(
    ds: &MeasurementDataset,
    qubits: &[usize],
) -> Result<DMatrix<Complex64>> {
    check_shadow_subsystem(ds.n_qubits(), qubits)?;
    let d = 1usize << qubits.len();
    let chunks: Vec<DMatrix<Complex64>> = ds
        .records
        .par_chunks(64)
        .map(|c| {
            let mut acc = DMatrix::zeros(d, d);
            for r in c {
                acc += build_snapshot(r).dense(qubits, 0);
            }
            acc
        })
        .collect();
    let mut total = DMatrix::zeros(d, d);
    for c in chunks {
        total += c;
    }
    Ok(total / Complex64::new(ds.n_settings() as f64, 0.0))
}
