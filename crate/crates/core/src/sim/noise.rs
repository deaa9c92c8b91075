use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::state::{DensityState, QuantumState};
use crate::error::{Error, Result};
use crate::pauli::{PauliLetter, PauliString};

/// Independent single-qubit channel applied to every qubit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseChannel {
    /// `ρ → (1-p) ρ + p I/2 ⊗ tr_q ρ`.
    Depolarizing { p: f64 },
    /// `ρ → (1-p) ρ + p XρX`.
    BitFlip { p: f64 },
}

impl NoiseChannel {
    fn probability(&self) -> f64 {
        match *self {
            NoiseChannel::Depolarizing { p } | NoiseChannel::BitFlip { p } => p,
        }
    }
}

fn conj_by_pauli(m: &DMatrix<Complex64>, p: &PauliString) -> DMatrix<Complex64> {
    let d = m.nrows();
    let mut out = DMatrix::zeros(d, d);
    for c in 0..d {
        let (c2, fc) = p.apply_to_basis(c);
        for r in 0..d {
            let (r2, fr) = p.apply_to_basis(r);
            out[(r2, c2)] = fr * m[(r, c)] * fc.conj();
        }
    }
    out
}

pub fn apply_noise(state: &QuantumState, channel: &NoiseChannel) -> Result<DensityState> {
    let p = channel.probability();
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!(
            "noise probability {p} outside [0, 1]"
        )));
    }
    let rho = state.to_density()?;
    let n = rho.n_qubits();
    let mut m = rho.matrix().clone();
    for q in 0..n {
        m = match channel {
            NoiseChannel::Depolarizing { p } => {
                let mut acc = &m * Complex64::new(1.0 - 0.75 * p, 0.0);
                for l in [PauliLetter::X, PauliLetter::Y, PauliLetter::Z] {
                    acc += conj_by_pauli(&m, &PauliString::single(n, q, l))
                        * Complex64::new(p / 4.0, 0.0);
                }
                acc
            }
            NoiseChannel::BitFlip { p } => {
                &m * Complex64::new(1.0 - p, 0.0)
                    + conj_by_pauli(&m, &PauliString::single(n, q, PauliLetter::X))
                        * Complex64::new(*p, 0.0)
            }
        };
    }
    Ok(DensityState::from_raw(n, m))
}

/// Global white noise `(1-p) ρ + p I/2^N`.
pub fn global_depolarize(state: &QuantumState, p: f64) -> Result<DensityState> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!(
            "noise probability {p} outside [0, 1]"
        )));
    }
    let rho = state.to_density()?;
    let d = rho.matrix().nrows();
    let m = rho.matrix() * Complex64::new(1.0 - p, 0.0)
        + DMatrix::<Complex64>::identity(d, d) * Complex64::new(p / d as f64, 0.0);
    Ok(DensityState::from_raw(rho.n_qubits(), m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::state::PureState;

    fn purity(m: &DensityState) -> f64 {
        crate::linalg::trace_prod(m.matrix(), m.matrix()).re
    }

    #[test]
    fn zero_noise_is_identity() {
        let s = QuantumState::Pure(PureState::basis(2, 1).unwrap());
        let out = apply_noise(&s, &NoiseChannel::Depolarizing { p: 0.0 }).unwrap();
        assert_eq!(out, s.to_density().unwrap());
    }

    #[test]
    fn full_depolarizing_gives_maximally_mixed() {
        let s = QuantumState::Pure(PureState::basis(1, 0).unwrap());
        let out = apply_noise(&s, &NoiseChannel::Depolarizing { p: 1.0 }).unwrap();
        let mm = DensityState::maximally_mixed(1).unwrap();
        assert!(crate::linalg::max_abs_diff(out.matrix(), mm.matrix()) < 1e-15);
    }

    /// Single qubit |0⟩: Bloch vector shrinks by (1-p), purity (1 + (1-p)²)/2.
    #[test]
    fn depolarizing_purity_closed_form() {
        let s = QuantumState::Pure(PureState::basis(1, 0).unwrap());
        for &p in &[0.1, 0.35, 0.8] {
            let out = apply_noise(&s, &NoiseChannel::Depolarizing { p }).unwrap();
            let want = (1.0 + (1.0 - p) * (1.0 - p)) / 2.0;
            assert!((purity(&out) - want).abs() < 1e-14);
        }
        // bit flip on |0⟩: diag(1-p, p)
        let out = apply_noise(&s, &NoiseChannel::BitFlip { p: 0.3 }).unwrap();
        assert!((out.matrix()[(1, 1)].re - 0.3).abs() < 1e-15);
    }

    #[test]
    fn white_noise_mixes_with_identity() {
        let s = QuantumState::Pure(PureState::basis(2, 0).unwrap());
        let out = global_depolarize(&s, 0.2).unwrap();
        assert!((out.matrix()[(0, 0)].re - (0.8 + 0.05)).abs() < 1e-15);
        assert!(global_depolarize(&s, -0.1).is_err());
    }
}
