use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::{gather_bits, Mat2, C0};
use crate::seed::Rng;

/// Largest register simulated as a state vector.
pub const MAX_PURE_QUBITS: usize = 20;
/// Largest register simulated as a density matrix.
pub const MAX_DENSITY_QUBITS: usize = 12;

pub(crate) fn check_cap(what: &'static str, n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::SizeCap { what, n, cap })
    } else {
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    n: usize,
    amps: Vec<Complex64>,
}

impl PureState {
    /// Normalizes `amps`; rejects a zero vector or a length that is not `2^n`.
    pub fn new(n: usize, mut amps: Vec<Complex64>) -> Result<Self> {
        check_cap("pure state", n, MAX_PURE_QUBITS)?;
        if amps.len() != 1 << n {
            return Err(Error::invalid(format!(
                "{} amplitudes for {n} qubits",
                amps.len()
            )));
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::invalid("state vector has zero or non-finite norm"));
        }
        for a in &mut amps {
            *a /= norm;
        }
        Ok(PureState { n, amps })
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        check_cap("pure state", n, MAX_PURE_QUBITS)?;
        let mut amps = vec![C0; 1 << n];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(PureState { n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Applies a 2×2 unitary to qubit `q` in place.
    pub fn apply_1q(&mut self, u: &Mat2, q: usize) {
        let bit = 1usize << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let a0 = self.amps[i];
                let a1 = self.amps[i | bit];
                self.amps[i] = u[0][0] * a0 + u[0][1] * a1;
                self.amps[i | bit] = u[1][0] * a0 + u[1][1] * a1;
            }
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn to_density(&self) -> Result<DensityState> {
        check_cap("density matrix", self.n, MAX_DENSITY_QUBITS)?;
        let d = self.amps.len();
        let m = DMatrix::from_fn(d, d, |r, c| self.amps[r] * self.amps[c].conj());
        Ok(DensityState { n: self.n, mat: m })
    }

    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Reduced density matrix on `keep` (position `i` of `keep` becomes qubit `i`).
    pub fn reduced(&self, keep: &[usize]) -> DMatrix<Complex64> {
        let rest: Vec<usize> = (0..self.n).filter(|q| !keep.contains(q)).collect();
        let da = 1usize << keep.len();
        let de = 1usize << rest.len();
        let mut psi = DMatrix::<Complex64>::zeros(da, de);
        for (i, a) in self.amps.iter().enumerate() {
            psi[(gather_bits(i, keep), gather_bits(i, &rest))] = *a;
        }
        &psi * psi.adjoint()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityState {
    n: usize,
    mat: DMatrix<Complex64>,
}

impl DensityState {
    /// Validates Hermiticity, unit trace and (approximate) positivity.
    pub fn new(n: usize, mat: DMatrix<Complex64>) -> Result<Self> {
        check_cap("density matrix", n, MAX_DENSITY_QUBITS)?;
        let d = 1usize << n;
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::invalid(format!(
                "{}x{} matrix for {n} qubits",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let herm = mat
            .iter()
            .zip(mat.adjoint().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if herm > 1e-10 {
            return Err(Error::invalid(format!(
                "density matrix not Hermitian ({herm:e})"
            )));
        }
        let tr: Complex64 = mat.diagonal().iter().sum();
        if (tr - Complex64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::invalid(format!("density matrix trace {tr}")));
        }
        let min_eig = mat
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-8 {
            return Err(Error::invalid(format!(
                "density matrix has eigenvalue {min_eig:e}"
            )));
        }
        Ok(DensityState { n, mat })
    }

    pub(crate) fn from_raw(n: usize, mat: DMatrix<Complex64>) -> Self {
        DensityState { n, mat }
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_cap("density matrix", n, MAX_DENSITY_QUBITS)?;
        let d = 1usize << n;
        Ok(DensityState {
            n,
            mat: DMatrix::identity(d, d) * Complex64::new(1.0 / d as f64, 0.0),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.diagonal().iter().sum()
    }

    /// `ρ → U_q ρ U_q†` in place.
    pub fn apply_1q(&mut self, u: &Mat2, q: usize) {
        let bit = 1usize << q;
        let d = self.mat.nrows();
        // rows
        for c in 0..d {
            for r in 0..d {
                if r & bit == 0 {
                    let a0 = self.mat[(r, c)];
                    let a1 = self.mat[(r | bit, c)];
                    self.mat[(r, c)] = u[0][0] * a0 + u[0][1] * a1;
                    self.mat[(r | bit, c)] = u[1][0] * a0 + u[1][1] * a1;
                }
            }
        }
        // columns, with U† on the right
        for c in 0..d {
            if c & bit != 0 {
                continue;
            }
            for r in 0..d {
                let a0 = self.mat[(r, c)];
                let a1 = self.mat[(r, c | bit)];
                self.mat[(r, c)] = a0 * u[0][0].conj() + a1 * u[0][1].conj();
                self.mat[(r, c | bit)] = a0 * u[1][0].conj() + a1 * u[1][1].conj();
            }
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.mat.diagonal().iter().map(|z| z.re.max(0.0)).collect()
    }

    pub fn reduced(&self, keep: &[usize]) -> DMatrix<Complex64> {
        let rest: Vec<usize> = (0..self.n).filter(|q| !keep.contains(q)).collect();
        let da = 1usize << keep.len();
        let de = 1usize << rest.len();
        // full index for (a, e)
        let full = |a: usize, e: usize| -> usize {
            let mut i = 0usize;
            for (k, &q) in keep.iter().enumerate() {
                i |= (a >> k & 1) << q;
            }
            for (k, &q) in rest.iter().enumerate() {
                i |= (e >> k & 1) << q;
            }
            i
        };
        let mut out = DMatrix::zeros(da, da);
        for a in 0..da {
            for b in 0..da {
                let mut acc = C0;
                for e in 0..de {
                    acc += self.mat[(full(a, e), full(b, e))];
                }
                out[(a, b)] = acc;
            }
        }
        out
    }
}

/// Either representation; pure states are kept pure until mixing is required.
#[derive(Clone, Debug, PartialEq)]
pub enum QuantumState {
    Pure(PureState),
    Mixed(DensityState),
}

impl QuantumState {
    pub fn n_qubits(&self) -> usize {
        match self {
            QuantumState::Pure(p) => p.n_qubits(),
            QuantumState::Mixed(m) => m.n_qubits(),
        }
    }

    pub fn is_pure_repr(&self) -> bool {
        matches!(self, QuantumState::Pure(_))
    }

    pub fn to_density(&self) -> Result<DensityState> {
        match self {
            QuantumState::Pure(p) => p.to_density(),
            QuantumState::Mixed(m) => Ok(m.clone()),
        }
    }

    pub fn apply_1q(&mut self, u: &Mat2, q: usize) {
        match self {
            QuantumState::Pure(p) => p.apply_1q(u, q),
            QuantumState::Mixed(m) => m.apply_1q(u, q),
        }
    }

    /// Applies `⊗_q U_q` (one 2×2 unitary per qubit).
    pub fn apply_local(&mut self, unitaries: &[Mat2]) -> Result<()> {
        if unitaries.len() != self.n_qubits() {
            return Err(Error::QubitMismatch {
                expected: self.n_qubits(),
                found: unitaries.len(),
            });
        }
        for (q, u) in unitaries.iter().enumerate() {
            self.apply_1q(u, q);
        }
        Ok(())
    }

    /// Computational-basis Born probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        match self {
            QuantumState::Pure(p) => p.probabilities(),
            QuantumState::Mixed(m) => m.probabilities(),
        }
    }

    pub fn reduced(&self, keep: &[usize]) -> DMatrix<Complex64> {
        match self {
            QuantumState::Pure(p) => p.reduced(keep),
            QuantumState::Mixed(m) => m.reduced(keep),
        }
    }
}

impl From<PureState> for QuantumState {
    fn from(p: PureState) -> Self {
        QuantumState::Pure(p)
    }
}

impl From<DensityState> for QuantumState {
    fn from(m: DensityState) -> Self {
        QuantumState::Mixed(m)
    }
}

/// Inverse-CDF sampler over a fixed discrete distribution.
pub struct BornSampler {
    cdf: Vec<f64>,
}

impl BornSampler {
    pub fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p.max(0.0);
                acc
            })
            .collect();
        BornSampler { cdf }
    }

    pub fn sample(&self, rng: &mut Rng) -> usize {
        let total = *self.cdf.last().unwrap_or(&1.0);
        let u: f64 = rng.random::<f64>() * total;
        let i = self.cdf.partition_point(|&c| c <= u);
        // skip trailing zero-probability outcomes reached through rounding
        let mut i = i.min(self.cdf.len() - 1);
        while i > 0 && self.cdf[i] == self.cdf[i - 1] {
            i -= 1;
        }
        i
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rotation;

    #[test]
    fn pure_state_normalizes_and_rejects_zero() {
        let s =
            PureState::new(1, vec![Complex64::new(3.0, 0.0), Complex64::new(4.0, 0.0)]).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-12);
        assert!(PureState::new(1, vec![C0, C0]).is_err());
        assert!(PureState::new(2, vec![C0; 3]).is_err());
        assert!(matches!(
            PureState::basis(21, 0),
            Err(Error::SizeCap { .. })
        ));
    }

    #[test]
    fn density_validation() {
        assert!(DensityState::maximally_mixed(2).is_ok());
        let bad = DMatrix::from_element(2, 2, Complex64::new(0.5, 0.0));
        // rank-one |+><+| is fine
        assert!(DensityState::new(1, bad.clone()).is_ok());
        let mut nonherm = bad;
        nonherm[(0, 1)] = Complex64::new(0.5, 0.1);
        assert!(DensityState::new(1, nonherm).is_err());
        assert!(matches!(
            DensityState::maximally_mixed(13),
            Err(Error::SizeCap { .. })
        ));
    }

    #[test]
    fn pure_and_density_rotations_agree() {
        let mut p = PureState::new(
            3,
            (0..8)
                .map(|i| Complex64::new(i as f64 + 1.0, 0.3 * i as f64))
                .collect(),
        )
        .unwrap();
        let mut m = p.to_density().unwrap();
        let us = [rotation('X', 0.3), rotation('Y', 1.1), rotation('Z', -0.7)];
        for (q, u) in us.iter().enumerate() {
            p.apply_1q(u, q);
            m.apply_1q(u, q);
        }
        let pm = p.to_density().unwrap();
        assert!(crate::linalg::max_abs_diff(pm.matrix(), m.matrix()) < 1e-12);
    }

    #[test]
    fn reduced_states_agree_between_representations() {
        let p = PureState::new(
            4,
            (0..16)
                .map(|i| Complex64::new((i * 7 % 5) as f64, (i % 3) as f64))
                .collect(),
        )
        .unwrap();
        let m = p.to_density().unwrap();
        for keep in [vec![0], vec![2, 1], vec![0, 3, 2]] {
            let a = p.reduced(&keep);
            let b = m.reduced(&keep);
            assert!(crate::linalg::max_abs_diff(&a, &b) < 1e-12);
        }
    }

    #[test]
    fn sampler_never_returns_zero_probability_outcome() {
        let s = BornSampler::new(&[0.0, 0.5, 0.0, 0.5, 0.0]);
        let mut rng = crate::seed::rng(1);
        for _ in 0..1000 {
            let k = s.sample(&mut rng);
            assert!(k == 1 || k == 3);
        }
    }
}
