//! Exact values of every quantity the estimators target.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::hamiltonian::{HamiltonianSpec, Propagator};
use super::state::{check_cap, BornSampler, QuantumState, MAX_DENSITY_QUBITS};
use crate::error::{Error, Result};
use crate::linalg::{partial_transpose_low, trace, trace_prod, Mat2};
use crate::pauli::PauliString;
use crate::seed::Rng;

fn check_n(state: &QuantumState, n: usize) -> Result<()> {
    if state.n_qubits() != n {
        return Err(Error::QubitMismatch {
            expected: state.n_qubits(),
            found: n,
        });
    }
    Ok(())
}

pub(crate) fn check_subsystem(n: usize, qubits: &[usize]) -> Result<()> {
    let mut seen = 0u64;
    for &q in qubits {
        if q >= n {
            return Err(Error::invalid(format!(
                "qubit {q} out of range for {n} qubits"
            )));
        }
        if seen >> q & 1 == 1 {
            return Err(Error::invalid(format!("qubit {q} listed twice")));
        }
        seen |= 1 << q;
    }
    check_cap("reduced density matrix", qubits.len(), MAX_DENSITY_QUBITS)
}

/// `U ρ U†` with `U = ⊗_q U_q`.
pub fn apply_local_unitaries(state: &QuantumState, unitaries: &[Mat2]) -> Result<QuantumState> {
    let mut out = state.clone();
    out.apply_local(unitaries)?;
    Ok(out)
}

/// `k` i.i.d. bitstrings from the rotated state (bit `q` is qubit `q`).
pub fn born_sample(
    state: &QuantumState,
    unitaries: &[Mat2],
    k: usize,
    rng: &mut Rng,
) -> Result<Vec<u64>> {
    let rotated = apply_local_unitaries(state, unitaries)?;
    let sampler = BornSampler::new(&rotated.probabilities());
    Ok((0..k).map(|_| sampler.sample(rng) as u64).collect())
}

pub fn oracle_expectation(state: &QuantumState, p: &PauliString) -> Result<f64> {
    check_n(state, p.n_qubits())?;
    let v = match state {
        QuantumState::Pure(s) => p.expectation_pure(s.amplitudes()),
        QuantumState::Mixed(m) => {
            let rho = m.matrix();
            let mut acc = Complex64::new(0.0, 0.0);
            // tr(Pρ) = Σ_c ⟨c|Pρ|c⟩ = Σ_c f(c) ρ[c, c^x] with P|c'⟩ = f|c⟩
            for c in 0..rho.ncols() {
                let (r, f) = p.apply_to_basis(c);
                acc += f * rho[(c, r)];
            }
            acc
        }
    };
    Ok(v.re)
}

/// Reduced state on `qubits`, entry `i` of the list becoming qubit `i`.
pub fn oracle_reduced(state: &QuantumState, qubits: &[usize]) -> Result<DMatrix<Complex64>> {
    check_subsystem(state.n_qubits(), qubits)?;
    Ok(state.reduced(qubits))
}

pub fn oracle_purity(state: &QuantumState, subsystem: &[usize]) -> Result<f64> {
    let r = oracle_reduced(state, subsystem)?;
    Ok(trace_prod(&r, &r).re)
}

/// Second Rényi entropy `-log2 tr ρ_A²`.
pub fn oracle_renyi2(state: &QuantumState, subsystem: &[usize]) -> Result<f64> {
    Ok(-oracle_purity(state, subsystem)?.log2())
}

/// `tr(ρ σ)` for two states on the same qubits.
pub fn oracle_overlap(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    check_n(a, b.n_qubits())?;
    Ok(match (a, b) {
        (QuantumState::Pure(x), QuantumState::Pure(y)) => x.inner(y).norm_sqr(),
        _ => trace_prod(a.to_density()?.matrix(), b.to_density()?.matrix()).re,
    })
}

/// `tr O ρ` for a dense operator on `qubits`.
pub fn oracle_observable(
    state: &QuantumState,
    qubits: &[usize],
    op: &DMatrix<Complex64>,
) -> Result<Complex64> {
    let r = oracle_reduced(state, qubits)?;
    if op.nrows() != r.nrows() || op.ncols() != r.ncols() {
        return Err(Error::invalid(
            "operator dimension does not match subsystem",
        ));
    }
    Ok(trace_prod(op, &r))
}

/// `tr[(ρ_AB^{T_A})^n]`.
pub fn oracle_pt_moments(state: &QuantumState, a: &[usize], b: &[usize], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("moment order must be positive"));
    }
    let ab: Vec<usize> = a.iter().chain(b).copied().collect();
    let r = oracle_reduced(state, &ab)?;
    let pt = partial_transpose_low(&r, a.len());
    let mut acc = pt.clone();
    for _ in 1..n {
        acc = &acc * &pt;
    }
    Ok(trace(&acc).re)
}

/// `tr(R_I ρ_I)` with `R_I` reversing the order of the listed qubits.
pub fn oracle_reflection(state: &QuantumState, window: &[usize]) -> Result<f64> {
    if window.is_empty() || window.len() % 2 == 1 {
        return Err(Error::invalid(format!(
            "reflection window needs an even, nonzero number of qubits, got {}",
            window.len()
        )));
    }
    let r = oracle_reduced(state, window)?;
    let w = window.len();
    let rev = |a: usize| (0..w).fold(0usize, |acc, i| acc | (a >> i & 1) << (w - 1 - i));
    Ok((0..r.nrows()).map(|a| r[(rev(a), a)].re).sum())
}

/// `tr(W(t) V W(t) V) / 2^N`.
pub fn oracle_otoc(h: &HamiltonianSpec, w: &PauliString, v: &PauliString, t: f64) -> Result<f64> {
    oracle_otoc_with(&h.propagator()?, w, v, t)
}

pub fn oracle_otoc_with(
    prop: &Propagator,
    w: &PauliString,
    v: &PauliString,
    t: f64,
) -> Result<f64> {
    let wt = prop.heisenberg(w, t)?;
    let vm = v.to_matrix()?;
    let lhs = &wt * &vm;
    Ok(trace_prod(&lhs, &lhs).re / wt.nrows() as f64)
}
