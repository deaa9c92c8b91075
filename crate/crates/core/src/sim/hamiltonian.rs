use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::state::{check_cap, DensityState, PureState, QuantumState, MAX_DENSITY_QUBITS};
use crate::error::{Error, Result};
use crate::pauli::{PauliLetter, PauliString};

/// Largest register for dense Hamiltonian diagonalization.
pub const MAX_HAMILTONIAN_QUBITS: usize = 12;
/// Largest register for dense Heisenberg-picture operators.
pub const MAX_HEISENBERG_QUBITS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianTerm {
    pub coeff: f64,
    pub pauli: PauliString,
}

/// `H = Σ_j c_j P_j` with real coefficients and Hermitian strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub n_qubits: usize,
    pub terms: Vec<HamiltonianTerm>,
}

impl HamiltonianSpec {
    pub fn new(n_qubits: usize, terms: Vec<(f64, PauliString)>) -> Result<Self> {
        let h = HamiltonianSpec {
            n_qubits,
            terms: terms
                .into_iter()
                .map(|(coeff, pauli)| HamiltonianTerm { coeff, pauli })
                .collect(),
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.terms {
            if t.pauli.n_qubits() != self.n_qubits {
                return Err(Error::QubitMismatch {
                    expected: self.n_qubits,
                    found: t.pauli.n_qubits(),
                });
            }
            if !t.coeff.is_finite() {
                return Err(Error::invalid(format!(
                    "non-finite coefficient on {}",
                    t.pauli
                )));
            }
            if !t.pauli.is_hermitian() {
                return Err(Error::invalid(format!("non-Hermitian term {}", t.pauli)));
            }
        }
        Ok(())
    }

    /// True when the materialized matrix is real symmetric.
    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|t| t.pauli.is_real())
    }

    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        check_cap("hamiltonian", self.n_qubits, MAX_HAMILTONIAN_QUBITS)?;
        let d = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(d, d);
        for t in &self.terms {
            for c in 0..d {
                let (r, f) = t.pauli.apply_to_basis(c);
                m[(r, c)] += f * t.coeff;
            }
        }
        Ok(m)
    }

    /// Combines duplicate strings (coefficient signs folded in) and drops zeros.
    pub fn simplified(&self) -> HamiltonianSpec {
        let mut out: Vec<HamiltonianTerm> = Vec::new();
        for t in &self.terms {
            let sign = t.pauli.sign().unwrap_or(1) as f64;
            let key = t.pauli.unsigned();
            match out.iter_mut().find(|o| o.pauli == key) {
                Some(o) => o.coeff += sign * t.coeff,
                None => out.push(HamiltonianTerm {
                    coeff: sign * t.coeff,
                    pauli: key,
                }),
            }
        }
        out.retain(|t| t.coeff != 0.0);
        HamiltonianSpec {
            n_qubits: self.n_qubits,
            terms: out,
        }
    }

    /// Coefficient of `pauli` after simplification (0 when absent).
    pub fn coefficient(&self, pauli: &PauliString) -> f64 {
        self.simplified()
            .terms
            .iter()
            .find(|t| t.pauli == pauli.unsigned())
            .map(|t| t.coeff * pauli.sign().unwrap_or(1) as f64)
            .unwrap_or(0.0)
    }

    pub fn propagator(&self) -> Result<Propagator> {
        Propagator::new(self)
    }
}

/// Long-range XY model `Σ_{i<j} J/|i-j|^α (σ⁺_i σ⁻_j + h.c.)`, expanded as
/// `J_ij (X_i X_j + Y_i Y_j)/2`.
pub fn build_xy_hamiltonian(n: usize, j: f64, alpha: f64) -> Result<HamiltonianSpec> {
    if n < 2 {
        return Err(Error::invalid("XY model needs at least 2 sites"));
    }
    if !(alpha > 0.0) {
        return Err(Error::invalid("XY decay exponent must be positive"));
    }
    let mut terms = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let jab = j / ((b - a) as f64).powf(alpha);
            for l in [PauliLetter::X, PauliLetter::Y] {
                terms.push((jab / 2.0, PauliString::from_sites(n, &[(a, l), (b, l)])));
            }
        }
    }
    HamiltonianSpec::new(n, terms)
}

/// Open Ising chain `J Σ Z_i Z_{i+1} + h_x Σ X_i + h_z Σ Z_i`.
pub fn build_ising_chain(n: usize, j: f64, hx: f64, hz: f64) -> Result<HamiltonianSpec> {
    if n < 2 {
        return Err(Error::invalid("Ising chain needs at least 2 sites"));
    }
    let mut terms = Vec::new();
    for i in 0..n - 1 {
        terms.push((
            j,
            PauliString::from_sites(n, &[(i, PauliLetter::Z), (i + 1, PauliLetter::Z)]),
        ));
    }
    for i in 0..n {
        if hx != 0.0 {
            terms.push((hx, PauliString::single(n, i, PauliLetter::X)));
        }
        if hz != 0.0 {
            terms.push((hz, PauliString::single(n, i, PauliLetter::Z)));
        }
    }
    HamiltonianSpec::new(n, terms)
}

/// Cached eigendecomposition `H = V diag(E) V†`, reused across times.
#[derive(Clone, Debug)]
pub struct Propagator {
    n: usize,
    energies: DVector<f64>,
    vectors: DMatrix<Complex64>,
}

impl Propagator {
    pub fn new(h: &HamiltonianSpec) -> Result<Self> {
        h.validate()?;
        let m = h.to_matrix()?;
        let (energies, vectors) = if h.is_real() {
            let re = m.map(|z| z.re);
            let eig = re.symmetric_eigen();
            (
                eig.eigenvalues,
                eig.eigenvectors.map(|x| Complex64::new(x, 0.0)),
            )
        } else {
            let eig = m.symmetric_eigen();
            (eig.eigenvalues, eig.eigenvectors)
        };
        Ok(Propagator {
            n: h.n_qubits,
            energies,
            vectors,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    /// Eigenvector `k` in ascending energy order.
    pub fn eigenstate(&self, k: usize) -> Result<PureState> {
        let mut order: Vec<usize> = (0..self.energies.len()).collect();
        order.sort_by(|&a, &b| self.energies[a].total_cmp(&self.energies[b]));
        let col = *order
            .get(k)
            .ok_or_else(|| Error::invalid(format!("eigenstate index {k} out of range")))?;
        PureState::new(self.n, self.vectors.column(col).iter().cloned().collect())
    }

    fn phases(&self, t: f64) -> DVector<Complex64> {
        self.energies.map(|e| Complex64::from_polar(1.0, -e * t))
    }

    /// `e^{-iHt}` as a dense matrix.
    pub fn unitary(&self, t: f64) -> DMatrix<Complex64> {
        let ph = self.phases(t);
        let mut vd = self.vectors.clone();
        for (j, mut col) in vd.column_iter_mut().enumerate() {
            col *= ph[j];
        }
        vd * self.vectors.adjoint()
    }

    /// `e^{-βH}/Z`.
    pub fn gibbs(&self, beta: f64) -> Result<DensityState> {
        check_cap("gibbs state", self.n, MAX_DENSITY_QUBITS)?;
        let emin = self.energies.min();
        let w = self.energies.map(|e| (-beta * (e - emin)).exp());
        let z: f64 = w.sum();
        let mut vd = self.vectors.clone();
        for (j, mut col) in vd.column_iter_mut().enumerate() {
            col *= Complex64::new(w[j] / z, 0.0);
        }
        let mut m = vd * self.vectors.adjoint();
        hermitize(&mut m);
        Ok(DensityState::from_raw(self.n, m))
    }

    /// `e^{-iHt}|ψ⟩` or `e^{-iHt} ρ e^{iHt}`.
    pub fn evolve(&self, state: &QuantumState, t: f64) -> Result<QuantumState> {
        if state.n_qubits() != self.n {
            return Err(Error::QubitMismatch {
                expected: self.n,
                found: state.n_qubits(),
            });
        }
        let ph = self.phases(t);
        match state {
            QuantumState::Pure(p) => {
                let psi = DVector::from_column_slice(p.amplitudes());
                let mut c = self.vectors.adjoint() * psi;
                c.component_mul_assign(&ph);
                let out = &self.vectors * c;
                Ok(QuantumState::Pure(PureState::new(
                    self.n,
                    out.iter().cloned().collect(),
                )?))
            }
            QuantumState::Mixed(m) => {
                let u = self.unitary(t);
                let mut r = &u * m.matrix() * u.adjoint();
                hermitize(&mut r);
                Ok(QuantumState::Mixed(DensityState::from_raw(self.n, r)))
            }
        }
    }

    /// Heisenberg-picture operator `W(t) = e^{-iHt} W e^{iHt}`.
    pub fn heisenberg(&self, w: &PauliString, t: f64) -> Result<DMatrix<Complex64>> {
        check_cap("heisenberg operator", self.n, MAX_HEISENBERG_QUBITS)?;
        if w.n_qubits() != self.n {
            return Err(Error::QubitMismatch {
                expected: self.n,
                found: w.n_qubits(),
            });
        }
        let u = self.unitary(t);
        let wm = w.to_matrix()?;
        Ok(&u * wm * u.adjoint())
    }
}

/// Convenience wrapper building a fresh propagator; reuse [`Propagator`] for sweeps.
pub fn evolve(state: &QuantumState, h: &HamiltonianSpec, t: f64) -> Result<QuantumState> {
    h.propagator()?.evolve(state, t)
}

pub fn heisenberg(op: &PauliString, h: &HamiltonianSpec, t: f64) -> Result<DMatrix<Complex64>> {
    check_cap("heisenberg operator", h.n_qubits, MAX_HEISENBERG_QUBITS)?;
    h.propagator()?.heisenberg(op, t)
}

pub(crate) fn hermitize(m: &mut DMatrix<Complex64>) {
    let d = m.nrows();
    for r in 0..d {
        for c in r..d {
            let v = (m[(r, c)] + m[(c, r)].conj()) * 0.5;
            m[(r, c)] = v;
            m[(c, r)] = v.conj();
        }
        m[(r, r)].im = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    #[test]
    fn xy_two_sites() {
        let h = build_xy_hamiltonian(2, 1.3, 1.0).unwrap();
        assert_eq!(h.terms.len(), 2);
        for t in &h.terms {
            assert!((t.coeff - 0.65).abs() < 1e-15);
        }
        // σ⁺σ⁻ + σ⁻σ⁺ couples |01⟩ and |10⟩ with amplitude J
        let m = h.to_matrix().unwrap();
        assert!((m[(1, 2)].re - 1.3).abs() < 1e-12);
        assert!(m[(0, 0)].norm() < 1e-12 && m[(3, 3)].norm() < 1e-12);
    }

    #[test]
    fn xy_long_range_coefficient() {
        let h = build_xy_hamiltonian(3, 1.0, 3.0).unwrap();
        let x02 = PauliString::from_sites(3, &[(0, PauliLetter::X), (2, PauliLetter::X)]);
        // J_02 = 1/2^3, split evenly over XX and YY
        assert!((h.coefficient(&x02) - 1.0 / 16.0).abs() < 1e-15);
        let m = h.to_matrix().unwrap();
        assert!(max_abs_diff(&m, &m.adjoint()) < 1e-14);
        assert!(h.is_real());
    }

    #[test]
    fn evolution_identity_and_reversibility() {
        let h = build_xy_hamiltonian(4, 1.0, 1.2).unwrap();
        let prop = h.propagator().unwrap();
        let psi = QuantumState::Pure(PureState::basis(4, 0b1010).unwrap());
        let same = prop.evolve(&psi, 0.0).unwrap();
        let QuantumState::Pure(s) = &same else {
            unreachable!()
        };
        assert!((s.amplitudes()[0b1010].norm() - 1.0).abs() < 1e-12);
        let fwd = prop.evolve(&psi, 1.7).unwrap();
        let back = prop.evolve(&fwd, -1.7).unwrap();
        let (QuantumState::Pure(a), QuantumState::Pure(b)) = (&psi, &back) else {
            unreachable!()
        };
        assert!((a.inner(b).norm() - 1.0).abs() < 1e-10);
    }

    /// Two sites: |01⟩ under (XX+YY)J/2 oscillates as cos(Jt)|01⟩ - i sin(Jt)|10⟩.
    #[test]
    fn two_site_quench_closed_form() {
        let j = 0.8;
        let h = build_xy_hamiltonian(2, j, 1.0).unwrap();
        let prop = h.propagator().unwrap();
        // qubit 0 = 0, qubit 1 = 1 → index 0b10
        let psi = QuantumState::Pure(PureState::basis(2, 0b10).unwrap());
        for &t in &[0.3, 1.0, 2.5] {
            let QuantumState::Pure(out) = prop.evolve(&psi, t).unwrap() else {
                unreachable!()
            };
            let a = out.amplitudes();
            assert!((a[0b10] - Complex64::new((j * t).cos(), 0.0)).norm() < 1e-10);
            assert!((a[0b01] - Complex64::new(0.0, -(j * t).sin())).norm() < 1e-10);
        }
    }

    #[test]
    fn heisenberg_examples() {
        // [H, W] = 0 ⇒ W(t) = W
        let h = build_ising_chain(3, 1.0, 0.0, 0.4).unwrap();
        let w = PauliString::single(3, 1, PauliLetter::Z);
        let wt = heisenberg(&w, &h, 2.3).unwrap();
        assert!(max_abs_diff(&wt, &w.to_matrix().unwrap()) < 1e-10);
        // X precessing under a Z field h: W(t) = e^{-iht Z} X e^{iht Z}
        //                                       = cos(2ht) X + sin(2ht) Y
        let hf = 0.6;
        let h1 = HamiltonianSpec::new(1, vec![(hf, "Z".parse().unwrap())]).unwrap();
        let x: PauliString = "X".parse().unwrap();
        for &t in &[0.0, 0.4, 1.9] {
            let wt = heisenberg(&x, &h1, t).unwrap();
            let expect = x.to_matrix().unwrap() * Complex64::new((2.0 * hf * t).cos(), 0.0)
                + "Y".parse::<PauliString>().unwrap().to_matrix().unwrap()
                    * Complex64::new((2.0 * hf * t).sin(), 0.0);
            assert!(max_abs_diff(&wt, &expect) < 1e-10);
        }
    }

    #[test]
    fn complex_hamiltonian_uses_hermitian_path() {
        let h = HamiltonianSpec::new(
            2,
            vec![(0.7, "XY".parse().unwrap()), (0.2, "ZI".parse().unwrap())],
        )
        .unwrap();
        assert!(!h.is_real());
        let prop = h.propagator().unwrap();
        let u = prop.unitary(0.9);
        let id = DMatrix::<Complex64>::identity(4, 4);
        assert!(max_abs_diff(&(&u * u.adjoint()), &id) < 1e-10);
    }

    #[test]
    fn rejects_bad_terms() {
        assert!(HamiltonianSpec::new(2, vec![(f64::NAN, "XX".parse().unwrap())]).is_err());
        assert!(HamiltonianSpec::new(2, vec![(1.0, "iXX".parse().unwrap())]).is_err());
        assert!(HamiltonianSpec::new(3, vec![(1.0, "XX".parse().unwrap())]).is_err());
        assert!(build_xy_hamiltonian(1, 1.0, 1.0).is_err());
        assert!(build_xy_hamiltonian(3, 1.0, 0.0).is_err());
    }
}
