//! Hamiltonian recovery from a steady state.
//!
//! A state commuting with `H = Σ_m c_m W_m` satisfies `tr(ρ[O, H]) = 0` for
//! every `O`, so the matrix `K_lm = i tr(ρ[O_l, W_m])` annihilates `c`. The rows
//! `O_l` are the ansatz terms themselves plus optional probe operators.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::MeasurementDataset;
use crate::error::{Error, Result};
use crate::pauli::{paulis_up_to_weight, PauliString};
use crate::shadows::predict::predict_pauli;
use crate::sim::{oracle_expectation, HamiltonianSpec, QuantumState};

pub const DEFAULT_GAP_THRESHOLD: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// Open chain; every term lives in a window of `range + 1` consecutive sites.
    Chain { range: usize },
    /// Explicit term list.
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzBasis {
    pub n_qubits: usize,
    pub terms: Vec<PauliString>,
    pub locality: usize,
    pub geometry: Geometry,
    /// Extra constraint operators `O_l` beyond the terms.
    #[serde(default)]
    pub probes: Vec<PauliString>,
}

fn chain_strings(n: usize, k: usize, range: usize) -> Vec<PauliString> {
    paulis_up_to_weight(n, k)
        .into_iter()
        .filter(|p| {
            let s = p.support();
            s.last().unwrap_or(&0) - s.first().unwrap_or(&0) <= range
        })
        .collect()
}

impl AnsatzBasis {
    pub fn new(n_qubits: usize, terms: Vec<PauliString>, locality: usize) -> Result<Self> {
        let b = AnsatzBasis {
            n_qubits,
            terms,
            locality,
            geometry: Geometry::Custom,
            probes: Vec::new(),
        };
        b.validate()?;
        Ok(b)
    }

    /// All strings of weight `≤ k` supported within `range + 1` consecutive sites.
    pub fn chain(n_qubits: usize, k: usize, range: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("locality must be at least 1"));
        }
        let b = AnsatzBasis {
            n_qubits,
            terms: chain_strings(n_qubits, k, range),
            locality: k,
            geometry: Geometry::Chain { range },
            probes: Vec::new(),
        };
        b.validate()?;
        Ok(b)
    }

    /// Ising-family chain: `Z_i Z_{i+1}`, `X_i` and `Z_i` with independent couplings.
    pub fn ising(n_qubits: usize) -> Result<Self> {
        use crate::pauli::PauliLetter::{X, Z};
        let mut terms: Vec<PauliString> = (0..n_qubits.saturating_sub(1))
            .map(|i| PauliString::from_sites(n_qubits, &[(i, Z), (i + 1, Z)]))
            .collect();
        for letter in [X, Z] {
            terms.extend((0..n_qubits).map(|i| PauliString::single(n_qubits, i, letter)));
        }
        let b = AnsatzBasis {
            n_qubits,
            terms,
            locality: 2,
            geometry: Geometry::Chain { range: 1 },
            probes: Vec::new(),
        };
        b.validate()?;
        Ok(b)
    }

    /// Adds chain strings of weight `≤ k` within `range + 1` sites as probes.
    pub fn with_chain_probes(mut self, k: usize, range: usize) -> Self {
        self.probes = chain_strings(self.n_qubits, k, range)
            .into_iter()
            .filter(|p| !self.terms.contains(p))
            .collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for p in self.terms.iter().chain(&self.probes) {
            if p.n_qubits() != self.n_qubits {
                return Err(Error::QubitMismatch {
                    expected: self.n_qubits,
                    found: p.n_qubits(),
                });
            }
            if p.is_identity() || p.phase() != 0 {
                return Err(Error::invalid(format!(
                    "{p} must be a non-identity unsigned string"
                )));
            }
            if !seen.insert(*p) {
                return Err(Error::invalid(format!("{p} listed twice")));
            }
        }
        if let Some(p) = self.terms.iter().find(|p| p.weight() > self.locality) {
            return Err(Error::invalid(format!(
                "{p} exceeds locality {}",
                self.locality
            )));
        }
        if self.terms.is_empty() {
            return Err(Error::invalid("ansatz has no terms"));
        }
        Ok(())
    }

    /// Couplings of `h` in this basis, normalized.
    pub fn couplings(&self, h: &HamiltonianSpec) -> Vec<f64> {
        let c: Vec<f64> = self.terms.iter().map(|p| h.coefficient(p)).collect();
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        c.into_iter()
            .map(|x| if norm > 0.0 { x / norm } else { x })
            .collect()
    }
}

/// Source of Pauli expectation values `tr(ρ P)` for unsigned strings.
pub trait ExpectationProvider: Sync {
    fn expectation(&self, p: &PauliString) -> Result<f64>;
}

pub struct ExactProvider<'a>(pub &'a QuantumState);

impl ExpectationProvider for ExactProvider<'_> {
    fn expectation(&self, p: &PauliString) -> Result<f64> {
        oracle_expectation(self.0, p)
    }
}

pub struct ShadowProvider<'a>(pub &'a MeasurementDataset);

impl ExpectationProvider for ShadowProvider<'_> {
    fn expectation(&self, p: &PauliString) -> Result<f64> {
        Ok(predict_pauli(self.0, p)?.value)
    }
}

struct Assembled {
    matrix: DMatrix<f64>,
    missing: Vec<PauliString>,
}

/// `i tr(ρ[O_l, W_m])` for rows `O` and columns `W`. Strings the provider has no
/// data for are listed and contribute zero when `tolerate_missing`.
fn assemble(
    rows: &[PauliString],
    cols: &[PauliString],
    provider: &dyn ExpectationProvider,
    tolerate_missing: bool,
) -> Result<Assembled> {
    let mut needed: Vec<PauliString> = Vec::new();
    let mut index: HashMap<PauliString, usize> = HashMap::new();
    let mut entries = Vec::new();
    for (l, o) in rows.iter().enumerate() {
        for (m, w) in cols.iter().enumerate() {
            if let Some(c) = o.commutator(w)? {
                let sign = c.sign().expect("commutator of hermitian strings") as f64;
                let key = c.unsigned();
                let slot = *index.entry(key).or_insert_with(|| {
                    needed.push(key);
                    needed.len() - 1
                });
                entries.push((l, m, slot, sign));
            }
        }
    }
    let values: Vec<Result<f64>> = needed.par_iter().map(|p| provider.expectation(p)).collect();
    let mut resolved = Vec::with_capacity(values.len());
    let mut missing = Vec::new();
    for (p, v) in needed.iter().zip(values) {
        match v {
            Ok(x) => resolved.push(x),
            Err(Error::NoData { .. }) if tolerate_missing => {
                missing.push(*p);
                resolved.push(0.0);
            }
            Err(e) => return Err(e),
        }
    }
    let mut matrix = DMatrix::zeros(rows.len(), cols.len());
    // i[O, W] = 2 C with C = i[O, W]/2 a signed Pauli
    for (l, m, slot, sign) in entries {
        matrix[(l, m)] = 2.0 * sign * resolved[slot];
    }
    Ok(Assembled { matrix, missing })
}

/// Upper triangle mirrored, so antisymmetry and the zero diagonal are exact.
fn antisymmetrize(full: &DMatrix<f64>) -> DMatrix<f64> {
    let d = full.nrows();
    DMatrix::from_fn(d, d, |l, m| match l.cmp(&m) {
        std::cmp::Ordering::Less => full[(l, m)],
        std::cmp::Ordering::Greater => -full[(m, l)],
        std::cmp::Ordering::Equal => 0.0,
    })
}

/// Square antisymmetric `K_lm = i tr(ρ[W_l, W_m])` over the ansatz terms.
#[allow(non_snake_case)]
pub fn build_K(basis: &AnsatzBasis, provider: &dyn ExpectationProvider) -> Result<DMatrix<f64>> {
    basis.validate()?;
    Ok(antisymmetrize(
        &assemble(&basis.terms, &basis.terms, provider, false)?.matrix,
    ))
}

/// `K` stacked with the probe rows `i tr(ρ[O_l, W_m])`.
pub fn constraint_matrix(
    basis: &AnsatzBasis,
    provider: &dyn ExpectationProvider,
) -> Result<DMatrix<f64>> {
    Ok(constraints(basis, provider, false)?.matrix)
}

fn constraints(
    basis: &AnsatzBasis,
    provider: &dyn ExpectationProvider,
    tolerate: bool,
) -> Result<Assembled> {
    basis.validate()?;
    let square = assemble(&basis.terms, &basis.terms, provider, tolerate)?;
    let probes = assemble(&basis.probes, &basis.terms, provider, tolerate)?;
    let (d, r) = (basis.terms.len(), basis.probes.len());
    let mut matrix = DMatrix::zeros(d + r, d);
    matrix
        .view_mut((0, 0), (d, d))
        .copy_from(&antisymmetrize(&square.matrix));
    matrix.view_mut((d, 0), (r, d)).copy_from(&probes.matrix);
    let mut missing = square.missing;
    missing.extend(probes.missing);
    missing.sort_by_key(|p| (p.x_mask(), p.z_mask()));
    missing.dedup();
    Ok(Assembled { matrix, missing })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelResult {
    pub terms: Vec<PauliString>,
    /// Unit-norm coupling estimate; the overall scale is not identifiable.
    pub coefficients: Vec<f64>,
    /// Ascending singular values of the constraint matrix.
    pub singular_values: Vec<f64>,
    /// Second-smallest over smallest singular value.
    pub gap: f64,
    pub ill_conditioned: bool,
    /// Strings without data, entered as zero.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing: Vec<PauliString>,
}

impl KernelResult {
    pub fn cosine_similarity(&self, truth: &[f64]) -> f64 {
        cosine_similarity(&self.coefficients, truth)
    }
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).abs()
}

/// Right singular vector of the smallest singular value of `k`, sign-fixed so
/// that its largest-magnitude entry is positive.
pub fn recover(k: &DMatrix<f64>, gap_threshold: f64) -> KernelResult {
    let (rows, cols) = k.shape();
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(k);
        p
    } else {
        k.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut c: DVector<f64> = v_t.row(order[0]).transpose();
    let lead = c
        .iter()
        .copied()
        .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if lead < 0.0 {
        c = -c;
    }
    let c = &c / c.norm();
    // singular values at rounding level count as exact zeros
    let tol = sv.last().copied().unwrap_or(0.0) * rows.max(cols) as f64 * f64::EPSILON;
    let gap = match (sv[0], sv.get(1).copied().unwrap_or(f64::INFINITY)) {
        (_, s1) if s1 <= tol => 1.0,
        (s0, _) if s0 <= tol => f64::INFINITY,
        (s0, s1) => s1 / s0,
    };
    KernelResult {
        terms: Vec::new(),
        coefficients: c.iter().copied().collect(),
        singular_values: sv,
        gap,
        ill_conditioned: gap < gap_threshold,
        missing: Vec::new(),
    }
}

/// Recovers couplings from exact or estimated expectations.
pub fn learn(
    basis: &AnsatzBasis,
    provider: &dyn ExpectationProvider,
    gap_threshold: f64,
) -> Result<KernelResult> {
    let a = constraints(basis, provider, true)?;
    let mut r = recover(&a.matrix, gap_threshold);
    r.terms = basis.terms.clone();
    r.missing = a.missing;
    if !r.missing.is_empty() {
        r.ill_conditioned = true;
    }
    Ok(r)
}

/// Shadow-backed recovery; strings without compatible settings are listed in
/// `missing` and force the condition flag.
pub fn learn_from_dataset(
    ds: &MeasurementDataset,
    basis: &AnsatzBasis,
    gap_threshold: f64,
) -> Result<KernelResult> {
    if basis.n_qubits != ds.n_qubits() {
        return Err(Error::QubitMismatch {
            expected: basis.n_qubits,
            found: ds.n_qubits(),
        });
    }
    learn(basis, &ShadowProvider(ds), gap_threshold)
}
