use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::hamiltonian::HamiltonianSpec;
use super::noise::{apply_noise, global_depolarize, NoiseChannel};
use super::state::{
    check_cap, DensityState, PureState, QuantumState, MAX_DENSITY_QUBITS, MAX_PURE_QUBITS,
};
use crate::error::{Error, Result};
use crate::linalg::C0;
use crate::seed;

/// Named state preparations. Serialized inside run configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatePrepSpec {
    /// Computational basis state; `bits[0]` is qubit 0, e.g. `"0101"`.
    Basis {
        bits: String,
    },
    /// `|01⟩^{⊗ n/2}` (qubit 0 in `|0⟩`).
    Neel {
        n: usize,
    },
    Ghz {
        n: usize,
    },
    /// Product of single-qubit pure states given by Bloch angles `(θ, φ)`.
    Product {
        angles: Vec<(f64, f64)>,
    },
    HaarPure {
        n: usize,
        seed: u64,
    },
    /// Full-rank Ginibre state `G G† / tr`.
    RandomMixed {
        n: usize,
        seed: u64,
    },
    MaximallyMixed {
        n: usize,
    },
    Gibbs {
        hamiltonian: HamiltonianSpec,
        beta: f64,
    },
    /// Eigenstate `index` (ascending energy) of a Hamiltonian.
    Eigenstate {
        hamiltonian: HamiltonianSpec,
        index: usize,
    },
    /// `p |Φ⁺⟩⟨Φ⁺| + (1-p) I/4` on two qubits.
    Werner {
        p: f64,
    },
    /// Singlets `(|01⟩-|10⟩)/√2` on the listed pairs, `|0⟩` elsewhere.
    Singlets {
        n: usize,
        pairs: Vec<(usize, usize)>,
    },
    Evolved {
        initial: Box<StatePrepSpec>,
        hamiltonian: HamiltonianSpec,
        time: f64,
    },
    Noisy {
        initial: Box<StatePrepSpec>,
        channel: NoiseChannel,
    },
    /// `(1-p) ρ + p I/2^N`.
    WhiteNoise {
        initial: Box<StatePrepSpec>,
        p: f64,
    },
}

impl StatePrepSpec {
    pub fn prepare(&self) -> Result<QuantumState> {
        prepare(self)
    }
}

pub fn prepare(spec: &StatePrepSpec) -> Result<QuantumState> {
    use StatePrepSpec::*;
    Ok(match spec {
        Basis { bits } => {
            check_cap("pure state", bits.len(), MAX_PURE_QUBITS)?;
            let mut idx = 0usize;
            for (q, c) in bits.chars().enumerate() {
                match c {
                    '0' => {}
                    '1' => idx |= 1 << q,
                    _ => return Err(Error::Parse(format!("bad bit {c:?} in {bits:?}"))),
                }
            }
            QuantumState::Pure(PureState::basis(bits.len(), idx)?)
        }
        Neel { n } => {
            check_cap("pure state", *n, MAX_PURE_QUBITS)?;
            let idx = (0..*n)
                .filter(|q| q % 2 == 1)
                .fold(0usize, |a, q| a | 1 << q);
            QuantumState::Pure(PureState::basis(*n, idx)?)
        }
        Ghz { n } => QuantumState::Pure(ghz(*n)?),
        Product { angles } => QuantumState::Pure(product(angles)?),
        HaarPure { n, seed } => QuantumState::Pure(haar_pure(*n, *seed)?),
        RandomMixed { n, seed } => QuantumState::Mixed(random_mixed(*n, *seed)?),
        MaximallyMixed { n } => QuantumState::Mixed(DensityState::maximally_mixed(*n)?),
        Gibbs { hamiltonian, beta } => QuantumState::Mixed(hamiltonian.propagator()?.gibbs(*beta)?),
        Eigenstate { hamiltonian, index } => {
            QuantumState::Pure(hamiltonian.propagator()?.eigenstate(*index)?)
        }
        Werner { p } => QuantumState::Mixed(werner(*p)?),
        Singlets { n, pairs } => QuantumState::Pure(singlets(*n, pairs)?),
        Evolved {
            initial,
            hamiltonian,
            time,
        } => hamiltonian
            .propagator()?
            .evolve(&prepare(initial)?, *time)?,
        Noisy { initial, channel } => {
            QuantumState::Mixed(apply_noise(&prepare(initial)?, channel)?)
        }
        WhiteNoise { initial, p } => {
            QuantumState::Mixed(global_depolarize(&prepare(initial)?, *p)?)
        }
    })
}

pub fn ghz(n: usize) -> Result<PureState> {
    if n == 0 {
        return Err(Error::invalid("GHZ state needs at least one qubit"));
    }
    check_cap("pure state", n, MAX_PURE_QUBITS)?;
    let mut amps = vec![C0; 1 << n];
    amps[0] = Complex64::new(1.0, 0.0);
    amps[(1 << n) - 1] = Complex64::new(1.0, 0.0);
    PureState::new(n, amps)
}

pub fn product(angles: &[(f64, f64)]) -> Result<PureState> {
    let n = angles.len();
    let mut s = PureState::basis(n, 0)?;
    let mut amps = s.amplitudes().to_vec();
    for (i, a) in amps.iter_mut().enumerate() {
        let mut v = Complex64::new(1.0, 0.0);
        for (q, &(theta, phi)) in angles.iter().enumerate() {
            v *= if i >> q & 1 == 0 {
                Complex64::new((theta / 2.0).cos(), 0.0)
            } else {
                Complex64::from_polar((theta / 2.0).sin(), phi)
            };
        }
        *a = v;
    }
    s = PureState::new(n, amps)?;
    Ok(s)
}

pub fn haar_pure(n: usize, seed_value: u64) -> Result<PureState> {
    let mut rng = seed::rng(seed_value);
    check_cap("pure state", n, MAX_PURE_QUBITS)?;
    let amps = (0..1usize << n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    PureState::new(n, amps)
}

pub fn random_mixed(n: usize, seed_value: u64) -> Result<DensityState> {
    check_cap("density matrix", n, MAX_DENSITY_QUBITS)?;
    let mut rng = seed::rng(seed_value);
    let d = 1usize << n;
    let g = DMatrix::from_fn(d, d, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im)
    });
    let mut m = &g * g.adjoint();
    let tr: Complex64 = m.diagonal().iter().sum();
    m /= tr;
    super::hamiltonian::hermitize(&mut m);
    Ok(DensityState::from_raw(n, m))
}

pub fn werner(p: f64) -> Result<DensityState> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("werner weight {p} outside [0, 1]")));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let bell = [h, 0.0, 0.0, h];
    let m = DMatrix::from_fn(4, 4, |r, c| {
        let mixed = if r == c { 0.25 } else { 0.0 };
        Complex64::new(p * bell[r] * bell[c] + (1.0 - p) * mixed, 0.0)
    });
    Ok(DensityState::from_raw(2, m))
}

pub fn singlets(n: usize, pairs: &[(usize, usize)]) -> Result<PureState> {
    check_cap("pure state", n, MAX_PURE_QUBITS)?;
    let mut seen = vec![false; n];
    for &(a, b) in pairs {
        if a >= n || b >= n || a == b || seen[a] || seen[b] {
            return Err(Error::invalid(format!("bad singlet pair ({a}, {b})")));
        }
        seen[a] = true;
        seen[b] = true;
    }
    let mut amps = vec![C0; 1 << n];
    for (i, amp) in amps.iter_mut().enumerate() {
        let mut v = 1.0;
        for q in 0..n {
            if !seen[q] && i >> q & 1 == 1 {
                v = 0.0;
            }
        }
        for &(a, b) in pairs {
            v *= match (i >> a & 1, i >> b & 1) {
                (0, 1) => 1.0,
                (1, 0) => -1.0,
                _ => 0.0,
            };
        }
        *amp = Complex64::new(v, 0.0);
    }
    PureState::new(n, amps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neel_four() {
        let QuantumState::Pure(s) = prepare(&StatePrepSpec::Neel { n: 4 }).unwrap() else {
            panic!()
        };
        // "0101" with qubit 0 leftmost
        let idx = 0b1010;
        for (i, a) in s.amplitudes().iter().enumerate() {
            assert_eq!(a.norm(), if i == idx { 1.0 } else { 0.0 });
        }
        let basis = prepare(&StatePrepSpec::Basis {
            bits: "0101".into(),
        })
        .unwrap();
        assert_eq!(basis, QuantumState::Pure(s));
    }

    #[test]
    fn maximally_mixed_two() {
        let QuantumState::Mixed(m) = prepare(&StatePrepSpec::MaximallyMixed { n: 2 }).unwrap()
        else {
            panic!()
        };
        for r in 0..4 {
            for c in 0..4 {
                let want = if r == c { 0.25 } else { 0.0 };
                assert!((m.matrix()[(r, c)].re - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn ghz_three() {
        let s = ghz(3).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitudes()[0].re - h).abs() < 1e-15);
        assert!((s.amplitudes()[7].re - h).abs() < 1e-15);
        assert_eq!(s.amplitudes().iter().filter(|a| a.norm() > 0.0).count(), 2);
    }

    #[test]
    fn seeded_random_states_are_valid_and_reproducible() {
        let a = random_mixed(3, 5).unwrap();
        assert_eq!(a, random_mixed(3, 5).unwrap());
        assert!(DensityState::new(3, a.matrix().clone()).is_ok());
        assert_ne!(haar_pure(4, 1).unwrap(), haar_pure(4, 2).unwrap());
        let w = werner(0.4).unwrap();
        assert!(DensityState::new(2, w.matrix().clone()).is_ok());
        assert!(werner(1.5).is_err());
    }

    #[test]
    fn singlet_pairs_are_antisymmetric() {
        let s = singlets(2, &[(0, 1)]).unwrap();
        let a = s.amplitudes();
        assert!((a[0b10].re + a[0b01].re).abs() < 1e-15);
        assert!(singlets(3, &[(0, 1), (1, 2)]).is_err());
    }

    #[test]
    fn config_round_trip() {
        let spec = StatePrepSpec::Evolved {
            initial: Box::new(StatePrepSpec::Neel { n: 4 }),
            hamiltonian: super::super::hamiltonian::build_xy_hamiltonian(4, 1.0, 1.2).unwrap(),
            time: 0.5,
        };
        let text = serde_json::to_string(&spec).unwrap();
        let back: StatePrepSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn oversized_registers_fail_before_allocating() {
        let specs = [
            StatePrepSpec::Ghz { n: 40 },
            StatePrepSpec::Neel { n: 70 },
            StatePrepSpec::Basis {
                bits: "0".repeat(64),
            },
            StatePrepSpec::Singlets {
                n: 40,
                pairs: vec![(0, 1)],
            },
            StatePrepSpec::HaarPure { n: 40, seed: 1 },
            StatePrepSpec::MaximallyMixed { n: 30 },
        ];
        for s in specs {
            assert!(matches!(s.prepare(), Err(Error::SizeCap { .. })), "{s:?}");
        }
    }
}
