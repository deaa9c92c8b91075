//! Direct fidelity estimation against a pure target, reusing a randomized
//! measurement dataset for the sampled Pauli expectations.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::MeasurementDataset;
use crate::error::{Error, Result};
use crate::pauli::{all_paulis, PauliString};
use crate::seed;
use crate::shadows::predict::pauli_terms;
use crate::shadows::stats::{jackknife_mean, EstimateWithError, Method, DEFAULT_GROUPS};
use crate::sim::PureState;

pub const MAX_DFE_QUBITS: usize = 8;

/// Weights below this cannot be drawn in practice and are left out of the table.
const UNSAMPLEABLE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DfeTerm {
    pub pauli: PauliString,
    /// `b_j = tr(W_j ψ) / 2^{N/2}`.
    pub weight: f64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DfePlan {
    pub target: String,
    pub n_qubits: usize,
    pub samples: usize,
    pub seed: u64,
    /// Distinct sampled Paulis in first-draw order.
    pub terms: Vec<DfeTerm>,
}

impl DfePlan {
    /// `tr(W_j ψ)` of a sampled term.
    pub fn target_expectation(&self, t: &DfeTerm) -> f64 {
        t.weight * (self.n_qubits as f64 / 2.0).exp2()
    }
}

/// All nonzero `b_j` of a pure state; `Σ b_j² = 1`.
pub fn pauli_weights(target: &PureState) -> Result<Vec<(PauliString, f64)>> {
    let n = target.n_qubits();
    if n > MAX_DFE_QUBITS {
        return Err(Error::SizeCap {
            what: "fidelity target",
            n,
            cap: MAX_DFE_QUBITS,
        });
    }
    if (target.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "target norm {} is not 1",
            target.norm()
        )));
    }
    let norm = (n as f64 / 2.0).exp2();
    let amps = target.amplitudes();
    let weights: Vec<(PauliString, f64)> = all_paulis(n)
        .into_par_iter()
        .map(|p| {
            let b = p.expectation_pure(amps).re / norm;
            (p, b)
        })
        .filter(|(_, b)| b.abs() > UNSAMPLEABLE)
        .collect();
    Ok(weights)
}

/// Draws `l` Paulis i.i.d. from `b_j²`.
pub fn dfe_plan(target: &PureState, label: &str, l: usize, seed_value: u64) -> Result<DfePlan> {
    if l == 0 {
        return Err(Error::invalid(
            "fidelity estimation needs at least one sample",
        ));
    }
    let weights = pauli_weights(target)?;
    let dist = WeightedIndex::new(weights.iter().map(|(_, b)| b * b))
        .map_err(|e| Error::invalid(format!("pauli weights: {e}")))?;
    let mut rng = seed::rng(seed_value);
    let mut slot = vec![usize::MAX; weights.len()];
    let mut terms: Vec<DfeTerm> = Vec::new();
    for _ in 0..l {
        let j = dist.sample(&mut rng);
        if slot[j] == usize::MAX {
            slot[j] = terms.len();
            terms.push(DfeTerm {
                pauli: weights[j].0,
                weight: weights[j].1,
                multiplicity: 0,
            });
        }
        terms[slot[j]].multiplicity += 1;
    }
    Ok(DfePlan {
        target: label.to_string(),
        n_qubits: target.n_qubits(),
        samples: l,
        seed: seed_value,
        terms,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DfeEstimate {
    pub fidelity: EstimateWithError,
    /// Draws whose Pauli could be estimated from the dataset.
    pub effective_samples: usize,
    /// Sampled Paulis without a single compatible setting; left out of the mean.
    pub unmeasured: Vec<PauliString>,
}

/// `F̂ = mean_j â_j / tr(W_j ψ)` with `â_j` predicted from `ds`. The error adds
/// the Pauli-sampling variance to the jackknife error of the shadow average.
pub fn dfe_estimate(plan: &DfePlan, ds: &MeasurementDataset) -> Result<DfeEstimate> {
    if plan.n_qubits != ds.n_qubits() {
        return Err(Error::QubitMismatch {
            expected: plan.n_qubits,
            found: ds.n_qubits(),
        });
    }
    let results: Vec<Result<Vec<f64>>> = plan
        .terms
        .par_iter()
        .map(|t| pauli_terms(ds, &t.pauli))
        .collect();
    let m = ds.n_settings();
    let mut per_setting = vec![0.0; m];
    let mut ratios = Vec::new();
    let mut unmeasured = Vec::new();
    for (t, r) in plan.terms.iter().zip(results) {
        match r {
            Ok(terms) => {
                let scale = t.multiplicity as f64 / plan.target_expectation(t);
                for (acc, x) in per_setting.iter_mut().zip(&terms) {
                    *acc += scale * x;
                }
                let ratio = terms.iter().sum::<f64>() / m as f64 / plan.target_expectation(t);
                ratios.extend(std::iter::repeat_n(ratio, t.multiplicity));
            }
            Err(Error::NoData { .. }) => unmeasured.push(t.pauli),
            Err(e) => return Err(e),
        }
    }
    let l = ratios.len();
    if l == 0 {
        return Err(Error::NoData {
            observable: "every sampled pauli".into(),
            settings: m,
            compatible: 0,
        });
    }
    for x in per_setting.iter_mut() {
        *x /= l as f64;
    }
    let jk = jackknife_mean(&per_setting, DEFAULT_GROUPS);
    let mean = ratios.iter().sum::<f64>() / l as f64;
    let sampling_var = if l > 1 {
        ratios.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / ((l - 1) * l) as f64
    } else {
        0.0
    };
    let shadow_se = jk.std_error();
    Ok(DfeEstimate {
        fidelity: EstimateWithError {
            value: jk.value,
            std_error: (sampling_var + shadow_se * shadow_se).sqrt(),
            n_samples: m,
            method: Method::Jackknife {
                groups: jk.replicates.len(),
            },
        },
        effective_samples: l,
        unmeasured,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::acquire;
    use crate::ensembles::EnsembleSpec;
    use crate::sim::prep::ghz;
    use crate::sim::{global_depolarize, QuantumState};

    #[test]
    fn ghz_weights_are_its_stabilizer_group() {
        let w = pauli_weights(&ghz(3).unwrap()).unwrap();
        assert_eq!(w.len(), 8);
        for (p, b) in &w {
            assert!((b.abs() - 1.0 / 8f64.sqrt()).abs() < 1e-12, "{p}");
        }
        let total: f64 = w.iter().map(|(_, b)| b * b).sum();
        assert!((total - 1.0).abs() < 1e-12);

        let zero = pauli_weights(&PureState::basis(1, 0).unwrap()).unwrap();
        let labels: Vec<String> = zero.iter().map(|(p, _)| p.to_string()).collect();
        assert_eq!(labels, ["I", "Z"]);
        assert!((zero[0].1 - zero[1].1).abs() < 1e-15);
    }

    #[test]
    fn plan_is_seeded() {
        let t = ghz(3).unwrap();
        let a = dfe_plan(&t, "ghz3", 50, 4).unwrap();
        assert_eq!(a, dfe_plan(&t, "ghz3", 50, 4).unwrap());
        assert_ne!(a, dfe_plan(&t, "ghz3", 50, 5).unwrap());
        assert_eq!(a.terms.iter().map(|t| t.multiplicity).sum::<usize>(), 50);
        // targets are normalized on construction; a zero vector never becomes one
        assert!(PureState::new(1, vec![Default::default(); 2]).is_err());
        assert!(dfe_plan(&t, "ghz3", 0, 4).is_err());
    }

    #[test]
    fn fidelity_of_target_and_noisy_copy() {
        let t = ghz(3).unwrap();
        let plan = dfe_plan(&t, "ghz3", 100, 7).unwrap();
        let pure = QuantumState::Pure(t.clone());
        for e in [EnsembleSpec::clifford(3), EnsembleSpec::haar(3)] {
            let ds = acquire(&pure, &e, 4000, 1, 3).unwrap();
            let f = dfe_estimate(&plan, &ds).unwrap();
            assert!(f.fidelity.contains(1.0, 4.0), "{f:?}");
        }
        let noisy = QuantumState::Mixed(global_depolarize(&pure, 0.2).unwrap());
        let ds = acquire(&noisy, &EnsembleSpec::clifford(3), 4000, 1, 3).unwrap();
        let f = dfe_estimate(&plan, &ds).unwrap();
        let want = 0.8 + 0.2 / 8.0;
        assert!(f.fidelity.contains(want, 4.0), "{f:?}");

        let orth = QuantumState::Pure(PureState::basis(3, 1).unwrap());
        let ds = acquire(&orth, &EnsembleSpec::clifford(3), 4000, 1, 3).unwrap();
        let f = dfe_estimate(&plan, &ds).unwrap();
        assert!(f.fidelity.contains(0.0, 4.0), "{f:?}");
    }

    #[test]
    fn unmeasured_paulis_are_reported() {
        let t = ghz(3).unwrap();
        let plan = dfe_plan(&t, "ghz3", 40, 7).unwrap();
        let ds = acquire(&QuantumState::Pure(t), &EnsembleSpec::clifford(3), 3, 1, 3).unwrap();
        match dfe_estimate(&plan, &ds) {
            Ok(f) => assert!(f.effective_samples < 40 && !f.unmeasured.is_empty()),
            Err(e) => assert!(matches!(e, Error::NoData { .. })),
        }
    }
}
