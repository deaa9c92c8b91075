use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::dataset::{MeasurementDataset, MeasurementRecord};
use crate::error::{Error, Result};
use crate::linalg::{
    add2, dagger2, gather_bits, identity2, mul2, scale2, to_dmatrix, trace_prod2, Mat2, C0, C1,
};
use crate::pauli::PauliString;

/// Largest subsystem for which dense snapshot matrices are formed.
pub const MAX_SHADOW_QUBITS: usize = 8;

/// Classical shadow of one setting: `(1/K) Σ_k ⊗_q F_q(s_q^{(k)})` with
/// `F_q(b) = 3 U_q† |b⟩⟨b| U_q − I`. Stored factorized as the two possible
/// factors per qubit plus the shots, never as a `2^N` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowSnapshot {
    pub m: u64,
    factors: Vec<[Mat2; 2]>,
    shots: Vec<u64>,
}

fn inverted_projector(u: &Mat2, b: usize) -> Mat2 {
    let mut proj = [[C0; 2]; 2];
    proj[b][b] = C1;
    let back = mul2(&mul2(&dagger2(u), &proj), u);
    add2(&scale2(&back, C1 * 3.0), &scale2(&identity2(), -C1))
}

pub fn build_snapshot(r: &MeasurementRecord) -> ShadowSnapshot {
    ShadowSnapshot {
        m: r.setting.m,
        factors: r
            .setting
            .unitaries()
            .iter()
            .map(|u| [inverted_projector(u, 0), inverted_projector(u, 1)])
            .collect(),
        shots: r.shots.clone(),
    }
}

pub fn build_snapshots(ds: &MeasurementDataset) -> Vec<ShadowSnapshot> {
    ds.records.par_iter().map(build_snapshot).collect()
}

pub(crate) fn check_shadow_subsystem(n: usize, qubits: &[usize]) -> Result<()> {
    if qubits.len() > MAX_SHADOW_QUBITS {
        return Err(Error::SizeCap {
            what: "shadow subsystem",
            n: qubits.len(),
            cap: MAX_SHADOW_QUBITS,
        });
    }
    crate::sim::oracle::check_subsystem(n, qubits)
}

impl ShadowSnapshot {
    pub fn n_qubits(&self) -> usize {
        self.factors.len()
    }

    pub fn n_shots(&self) -> usize {
        self.shots.len()
    }

    pub fn shots(&self) -> &[u64] {
        &self.shots
    }

    /// `F_q(bit)`.
    pub fn factor(&self, q: usize, bit: usize) -> &Mat2 {
        &self.factors[q][bit]
    }

    /// Factor of qubit `q` for shot `k`.
    pub fn shot_factor(&self, k: usize, q: usize) -> &Mat2 {
        &self.factors[q][(self.shots[k] >> q & 1) as usize]
    }

    /// Shot-averaged single-qubit factor, i.e. the snapshot reduced to qubit `q`.
    pub fn mean_factor(&self, q: usize) -> Mat2 {
        let ones = self.shots.iter().filter(|&&s| s >> q & 1 == 1).count() as f64;
        let p1 = ones / self.shots.len() as f64;
        add2(
            &scale2(&self.factors[q][0], C1 * (1.0 - p1)),
            &scale2(&self.factors[q][1], C1 * p1),
        )
    }

    /// `tr(P ρ̂)`, evaluated per qubit.
    pub fn pauli_trace(&self, p: &PauliString) -> Complex64 {
        let support = p.support();
        let table: Vec<[Complex64; 2]> = support
            .iter()
            .map(|&q| {
                let pm = p.letter(q).matrix();
                [
                    trace_prod2(&pm, &self.factors[q][0]),
                    trace_prod2(&pm, &self.factors[q][1]),
                ]
            })
            .collect();
        let mut acc = C0;
        for &s in &self.shots {
            let mut v = C1;
            for (t, &q) in table.iter().zip(&support) {
                v *= t[(s >> q & 1) as usize];
            }
            acc += v;
        }
        p.coeff() * acc / self.shots.len() as f64
    }

    /// Restricted shots on `qubits`, counted; keys are compact bitstrings.
    pub(crate) fn shot_histogram(&self, qubits: &[usize]) -> BTreeMap<u64, usize> {
        let mut h = BTreeMap::new();
        for &s in &self.shots {
            *h.entry(gather_bits(s as usize, qubits) as u64).or_insert(0) += 1;
        }
        h
    }

    /// Dense snapshot on `qubits` (entry `i` is bit `i` of the index), with the
    /// factors of positions in `transpose` transposed.
    pub fn dense(&self, qubits: &[usize], transpose: u64) -> DMatrix<Complex64> {
        let d = 1usize << qubits.len();
        let mut out = DMatrix::<Complex64>::zeros(d, d);
        let k = self.shots.len() as f64;
        for (b, count) in self.shot_histogram(qubits) {
            let mut prod = DMatrix::from_element(1, 1, C1 * (count as f64 / k));
            for (i, &q) in qubits.iter().enumerate() {
                let mut f = self.factors[q][(b >> i & 1) as usize];
                if transpose >> i & 1 == 1 {
                    f = [[f[0][0], f[1][0]], [f[0][1], f[1][1]]];
                }
                prod = to_dmatrix(&f).kronecker(&prod);
            }
            out += prod;
        }
        out
    }

    /// `tr(R ρ̂)` for the operator swapping each listed pair of qubits.
    pub fn swap_pairs_trace(&self, pairs: &[(usize, usize)]) -> f64 {
        let mut acc = 0.0;
        for &s in &self.shots {
            let mut v = 1.0;
            for &(a, b) in pairs {
                let fa = &self.factors[a][(s >> a & 1) as usize];
                let fb = &self.factors[b][(s >> b & 1) as usize];
                v *= trace_prod2(fa, fb).re;
            }
            acc += v;
        }
        acc / self.shots.len() as f64
    }
}

/// Single-shot factor `3U†|b⟩⟨b|U − I` for a Pauli-letter check in tests and tools.
pub fn shot_factor(u: &Mat2, bit: usize) -> Mat2 {
    inverted_projector(u, bit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::acquire;
    use crate::ensembles::EnsembleSpec;
    use crate::linalg::{max_abs_diff, max_abs_diff2, trace2};
    use crate::sim::prep::product;
    use crate::sim::QuantumState;

    #[test]
    fn identity_setting_zero_outcome() {
        let f = shot_factor(&identity2(), 0);
        let want = [[C1 * 2.0, C0], [C0, -C1]];
        assert!(max_abs_diff2(&f, &want) < 1e-15);
    }

    #[test]
    fn factor_invariants() {
        let st = QuantumState::Pure(product(&[(0.4, 0.1), (1.3, 2.0), (2.2, -1.0)]).unwrap());
        for e in [EnsembleSpec::clifford(3), EnsembleSpec::haar(3)] {
            let ds = acquire(&st, &e, 40, 3, 8).unwrap();
            for s in build_snapshots(&ds) {
                for q in 0..3 {
                    for b in 0..2 {
                        let f = s.factor(q, b);
                        assert!((trace2(f) - C1).norm() < 1e-12);
                        assert!(max_abs_diff2(f, &dagger2(f)) < 1e-12);
                        // eigenvalues {2, -1}: tr F² = 5
                        assert!((trace_prod2(f, f).re - 5.0).abs() < 1e-12);
                    }
                    let mf = s.mean_factor(q);
                    assert!(max_abs_diff2(&mf, &dagger2(&mf)) < 1e-12);
                }
                let d = s.dense(&[0, 1, 2], 0);
                let tr: Complex64 = d.diagonal().iter().sum();
                assert!((tr - C1).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dense_matches_pauli_traces() {
        let st = QuantumState::Pure(product(&[(0.4, 0.1), (1.3, 2.0)]).unwrap());
        let ds = acquire(&st, &EnsembleSpec::haar(2), 5, 4, 2).unwrap();
        for s in build_snapshots(&ds) {
            let d = s.dense(&[0, 1], 0);
            for p in crate::pauli::all_paulis(2) {
                let dense = crate::linalg::trace_prod(&p.to_matrix().unwrap(), &d);
                assert!((dense - s.pauli_trace(&p)).norm() < 1e-12);
            }
            // transposing a factor equals the partial transpose of the dense matrix
            let pt = crate::linalg::partial_transpose(&d, 0b10);
            assert!(max_abs_diff(&pt, &s.dense(&[0, 1], 0b10)) < 1e-12);
            // reordering qubits relabels index bits
            let swapped = s.dense(&[1, 0], 0);
            let swap = crate::pauli::all_paulis(2)
                .iter()
                .map(|p| (*p, s.pauli_trace(p)))
                .collect::<Vec<_>>();
            for (p, v) in swap {
                let r = p.restrict(&[1, 0]);
                let dense = crate::linalg::trace_prod(&r.to_matrix().unwrap(), &swapped);
                assert!((dense - v).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn snapshots_average_to_plus_state() {
        let plus = QuantumState::Pure(product(&[(std::f64::consts::FRAC_PI_2, 0.0)]).unwrap());
        let ds = acquire(&plus, &EnsembleSpec::clifford(1), 10_000, 1, 4).unwrap();
        let mut avg = DMatrix::<Complex64>::zeros(2, 2);
        for s in build_snapshots(&ds) {
            avg += s.dense(&[0], 0);
        }
        avg /= Complex64::new(10_000.0, 0.0);
        let want = DMatrix::from_element(2, 2, C1 * 0.5);
        assert!(max_abs_diff(&avg, &want) < 0.05);
    }
}
