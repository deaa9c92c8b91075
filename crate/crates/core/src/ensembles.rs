//! Random local unitary settings.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    dagger2, det2, identity2, is_unitary2, mul2, rotation, scale2, trace_prod2, Mat2, C0, C1,
};
use crate::pauli::{Basis, BasisString};
use crate::seed::{self, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    SingleQubitHaar,
    SingleQubitClifford,
}

impl EnsembleKind {
    pub fn name(self) -> &'static str {
        match self {
            EnsembleKind::SingleQubitHaar => "single_qubit_haar",
            EnsembleKind::SingleQubitClifford => "single_qubit_clifford",
        }
    }
}

impl std::str::FromStr for EnsembleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single_qubit_haar" | "haar" => Ok(EnsembleKind::SingleQubitHaar),
            "single_qubit_clifford" | "clifford" => Ok(EnsembleKind::SingleQubitClifford),
            _ => Err(Error::Parse(format!("unknown ensemble {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub n_qubits: usize,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, n_qubits: usize) -> Self {
        EnsembleSpec { kind, n_qubits }
    }

    pub fn clifford(n_qubits: usize) -> Self {
        Self::new(EnsembleKind::SingleQubitClifford, n_qubits)
    }

    pub fn haar(n_qubits: usize) -> Self {
        Self::new(EnsembleKind::SingleQubitHaar, n_qubits)
    }
}

/// One element of the single-qubit Clifford group. Measuring `Z` after
/// applying `matrix` measures `sign · basis` on the input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CliffordElement {
    pub matrix: Mat2,
    pub basis: Basis,
    pub sign: i8,
}

/// Signed Pauli equal to `U† Z U`, if it is one.
pub fn measured_pauli(u: &Mat2) -> Option<(Basis, i8)> {
    let z = [[C1, C0], [C0, -C1]];
    let w = mul2(&mul2(&dagger2(u), &z), u);
    for b in Basis::ALL {
        let c = trace_prod2(&b.letter().matrix(), &w) / 2.0;
        if (c.re.abs() - 1.0).abs() < 1e-9 && c.im.abs() < 1e-9 {
            return Some((b, if c.re > 0.0 { 1 } else { -1 }));
        }
    }
    None
}

fn normalize_phase(u: &Mat2) -> Mat2 {
    let pivot = [u[0][0], u[0][1], u[1][0], u[1][1]]
        .into_iter()
        .find(|z| z.norm() > 1e-6)
        .expect("unitary has a nonzero entry");
    let mut out = scale2(u, pivot.conj() / pivot.norm());
    for row in out.iter_mut() {
        for z in row.iter_mut() {
            // entries are 0, ±1/2, ±1/√2 or ±1 in each component; snap exactly
            z.re = snap(z.re);
            z.im = snap(z.im);
        }
    }
    out
}

fn snap(v: f64) -> f64 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for c in [0.0, 0.5, -0.5, h, -h, 1.0, -1.0] {
        if (v - c).abs() < 1e-9 {
            return c;
        }
    }
    v
}

/// The 24 single-qubit Cliffords, generated from `H` and `S` by breadth-first
/// closure starting at the identity (index 0).
pub fn clifford_table() -> &'static [CliffordElement] {
    static TABLE: OnceLock<Vec<CliffordElement>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let hm: Mat2 = [[C1 * h, C1 * h], [C1 * h, -C1 * h]];
        let sm: Mat2 = [[C1, C0], [C0, Complex64::new(0.0, 1.0)]];
        let mut found = vec![identity2()];
        let mut i = 0;
        while i < found.len() {
            for g in [&hm, &sm] {
                let next = normalize_phase(&mul2(g, &found[i]));
                if !found.contains(&next) {
                    found.push(next);
                }
            }
            i += 1;
        }
        assert_eq!(found.len(), 24, "single-qubit Clifford closure");
        found
            .into_iter()
            .map(|matrix| {
                let (basis, sign) = measured_pauli(&matrix).expect("Clifford maps Z to a Pauli");
                CliffordElement {
                    matrix,
                    basis,
                    sign,
                }
            })
            .collect()
    })
}

/// Per-qubit record of a Clifford draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliffordQubit {
    pub basis: Basis,
    pub sign: i8,
    pub index: u8,
}

impl CliffordQubit {
    pub fn from_index(index: u8) -> Result<Self> {
        let e = clifford_table()
            .get(index as usize)
            .ok_or_else(|| Error::invalid(format!("Clifford index {index} out of range")))?;
        Ok(CliffordQubit {
            basis: e.basis,
            sign: e.sign,
            index,
        })
    }
}

/// `U = ⊗_q U_q` for one setting `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalUnitarySetting {
    pub m: u64,
    pub seed: u64,
    unitaries: Vec<Mat2>,
    clifford: Option<Vec<CliffordQubit>>,
}

impl LocalUnitarySetting {
    pub fn from_clifford(m: u64, seed: u64, qubits: Vec<CliffordQubit>) -> Self {
        let table = clifford_table();
        let unitaries = qubits
            .iter()
            .map(|c| table[c.index as usize].matrix)
            .collect();
        LocalUnitarySetting {
            m,
            seed,
            unitaries,
            clifford: Some(qubits),
        }
    }

    pub fn from_unitaries(m: u64, seed: u64, unitaries: Vec<Mat2>) -> Result<Self> {
        for (q, u) in unitaries.iter().enumerate() {
            if !is_unitary2(u, 1e-10) {
                return Err(Error::invalid(format!(
                    "matrix on qubit {q} is not unitary"
                )));
            }
        }
        Ok(LocalUnitarySetting {
            m,
            seed,
            unitaries,
            clifford: None,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.unitaries.len()
    }

    pub fn kind(&self) -> EnsembleKind {
        if self.clifford.is_some() {
            EnsembleKind::SingleQubitClifford
        } else {
            EnsembleKind::SingleQubitHaar
        }
    }

    pub fn unitaries(&self) -> &[Mat2] {
        &self.unitaries
    }

    pub fn clifford(&self) -> Option<&[CliffordQubit]> {
        self.clifford.as_deref()
    }

    pub fn basis_string(&self) -> Option<BasisString> {
        self.clifford
            .as_ref()
            .map(|c| BasisString::new(c.iter().map(|q| q.basis).collect()))
    }

    /// `(x, z, negative)` bit masks of the measured signed Paulis.
    pub fn clifford_masks(&self) -> Option<(u64, u64, u64)> {
        let c = self.clifford.as_ref()?;
        let (mut x, mut z, mut neg) = (0u64, 0u64, 0u64);
        for (q, e) in c.iter().enumerate() {
            match e.basis {
                Basis::X => x |= 1 << q,
                Basis::Y => {
                    x |= 1 << q;
                    z |= 1 << q
                }
                Basis::Z => z |= 1 << q,
            }
            if e.sign < 0 {
                neg |= 1 << q;
            }
        }
        Some((x, z, neg))
    }

    /// Projection onto `qubits` (entry `i` becomes qubit `i`).
    pub fn restrict(&self, qubits: &[usize]) -> LocalUnitarySetting {
        LocalUnitarySetting {
            m: self.m,
            seed: self.seed,
            unitaries: qubits.iter().map(|&q| self.unitaries[q]).collect(),
            clifford: self
                .clifford
                .as_ref()
                .map(|c| qubits.iter().map(|&q| c[q]).collect()),
        }
    }
}

/// Haar-random `U(2)` element: Gram-Schmidt on a complex Gaussian matrix,
/// which fixes the phases of `R`'s diagonal to be positive.
pub fn sample_haar_2x2(rng: &mut Rng) -> Mat2 {
    let mut g = [[C0; 2]; 2];
    for row in g.iter_mut() {
        for z in row.iter_mut() {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *z = Complex64::new(re, im);
        }
    }
    let (a0, a1) = (g[0][0], g[1][0]);
    let n0 = (a0.norm_sqr() + a1.norm_sqr()).sqrt();
    let (q00, q10) = (a0 / n0, a1 / n0);
    let (b0, b1) = (g[0][1], g[1][1]);
    let proj = q00.conj() * b0 + q10.conj() * b1;
    let (c0, c1) = (b0 - proj * q00, b1 - proj * q10);
    let n1 = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
    [[q00, c0 / n1], [q10, c1 / n1]]
}

fn sample_clifford_qubit(rng: &mut Rng) -> CliffordQubit {
    use rand::Rng as _;
    let index = rng.random_range(0..24u8);
    CliffordQubit::from_index(index).expect("index below 24")
}

fn unitary_rng(setting_seed: u64) -> Rng {
    seed::rng(seed::derive_seed(setting_seed, 0))
}

/// Seed of the shot stream for a setting.
pub fn shot_seed(setting_seed: u64) -> u64 {
    seed::derive_seed(setting_seed, 1)
}

/// Setting `m` of the sequence determined by `master_seed`.
pub fn sample_setting(e: &EnsembleSpec, master_seed: u64, m: u64) -> LocalUnitarySetting {
    let s = seed::derive_seed(master_seed, m);
    let mut rng = unitary_rng(s);
    match e.kind {
        EnsembleKind::SingleQubitClifford => LocalUnitarySetting::from_clifford(
            m,
            s,
            (0..e.n_qubits)
                .map(|_| sample_clifford_qubit(&mut rng))
                .collect(),
        ),
        EnsembleKind::SingleQubitHaar => LocalUnitarySetting {
            m,
            seed: s,
            unitaries: (0..e.n_qubits).map(|_| sample_haar_2x2(&mut rng)).collect(),
            clifford: None,
        },
    }
}

/// Setting with one shared draw per mirrored pair of `window`
/// (`window[i]` and `window[len-1-i]`) and the identity elsewhere.
pub fn symmetric_setting(
    e: &EnsembleSpec,
    window: &[usize],
    master_seed: u64,
    m: u64,
) -> Result<LocalUnitarySetting> {
    if window.is_empty() || window.len() % 2 == 1 {
        return Err(Error::invalid(format!(
            "symmetric window needs an even, nonzero size, got {}",
            window.len()
        )));
    }
    let mut seen = vec![false; e.n_qubits];
    for &q in window {
        if q >= e.n_qubits || std::mem::replace(&mut seen[q], true) {
            return Err(Error::invalid(format!("bad window qubit {q}")));
        }
    }
    let s = seed::derive_seed(master_seed, m);
    let mut rng = unitary_rng(s);
    let w = window.len();
    let mut out = match e.kind {
        EnsembleKind::SingleQubitClifford => LocalUnitarySetting::from_clifford(
            m,
            s,
            vec![CliffordQubit::from_index(0)?; e.n_qubits],
        ),
        EnsembleKind::SingleQubitHaar => LocalUnitarySetting {
            m,
            seed: s,
            unitaries: vec![identity2(); e.n_qubits],
            clifford: None,
        },
    };
    for i in 0..w / 2 {
        let (a, b) = (window[i], window[w - 1 - i]);
        match e.kind {
            EnsembleKind::SingleQubitClifford => {
                let c = sample_clifford_qubit(&mut rng);
                let u = clifford_table()[c.index as usize].matrix;
                let cl = out.clifford.as_mut().expect("clifford setting");
                cl[a] = c;
                cl[b] = c;
                out.unitaries[a] = u;
                out.unitaries[b] = u;
            }
            EnsembleKind::SingleQubitHaar => {
                let u = sample_haar_2x2(&mut rng);
                out.unitaries[a] = u;
                out.unitaries[b] = u;
            }
        }
    }
    Ok(out)
}

/// Angles of `R^Z(residual_z) · R^X(-π/2) R^Z(alpha) R^X(π/2) · R^Z(beta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VignetteAngles {
    pub alpha: f64,
    pub beta: f64,
    /// Leftmost Z rotation; it commutes with a final Z measurement, so it
    /// does not affect outcome statistics.
    pub residual_z: f64,
}

fn wrap(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI + 1e-15 {
        PI
    } else {
        r
    }
}

/// Decomposition into the two-angle vignette gate sequence. Uses
/// `R^X(-π/2) R^Z(α) R^X(π/2) = R^Y(α)` and a Z-Y-Z Euler decomposition.
pub fn decompose_vignette(u: &Mat2) -> VignetteAngles {
    let v = scale2(u, C1 / det2(u).sqrt());
    let alpha = 2.0 * v[1][0].norm().atan2(v[0][0].norm());
    let (c, s) = ((alpha / 2.0).cos(), (alpha / 2.0).sin());
    // v11 = e^{i(γ+β)/2} cos(α/2), v10 = e^{i(γ-β)/2} sin(α/2)
    let (p, q) = (v[1][1].arg(), v[1][0].arg());
    let (gamma, beta) = if s < 1e-9 {
        (0.0, 2.0 * p)
    } else if c < 1e-9 {
        (0.0, -2.0 * q)
    } else {
        (p + q, p - q)
    };
    VignetteAngles {
        alpha: wrap(alpha),
        beta: wrap(beta),
        residual_z: wrap(gamma),
    }
}

pub fn recompose_vignette(a: &VignetteAngles) -> Mat2 {
    let core = mul2(
        &mul2(&rotation('X', -FRAC_PI_2), &rotation('Z', a.alpha)),
        &rotation('X', FRAC_PI_2),
    );
    mul2(
        &mul2(&rotation('Z', a.residual_z), &core),
        &rotation('Z', a.beta),
    )
}

/// `max |u - e^{iφ} v|` minimized over the global phase.
pub fn distance_up_to_phase(u: &Mat2, v: &Mat2) -> f64 {
    let overlap = trace_prod2(&dagger2(v), u);
    let phase = if overlap.norm() > 1e-12 {
        overlap / overlap.norm()
    } else {
        C1
    };
    crate::linalg::max_abs_diff2(u, &scale2(v, phase))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{add2, conjugate2};

    #[test]
    fn table_has_24_distinct_unitaries() {
        let t = clifford_table();
        assert_eq!(t.len(), 24);
        assert_eq!(t[0].matrix, identity2());
        assert_eq!((t[0].basis, t[0].sign), (Basis::Z, 1));
        for (i, a) in t.iter().enumerate() {
            assert!(is_unitary2(&a.matrix, 1e-10));
            for b in &t[i + 1..] {
                assert!(distance_up_to_phase(&a.matrix, &b.matrix) > 1e-6);
            }
        }
        // each signed basis appears four times
        for b in Basis::ALL {
            for s in [1, -1] {
                assert_eq!(t.iter().filter(|e| e.basis == b && e.sign == s).count(), 4);
            }
        }
    }

    #[test]
    fn measured_pauli_convention() {
        // measuring Z after H measures X; after S†-then-H measures Y
        let t = clifford_table();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let hm: Mat2 = [[C1 * h, C1 * h], [C1 * h, -C1 * h]];
        assert_eq!(measured_pauli(&hm), Some((Basis::X, 1)));
        let sdg: Mat2 = [[C1, C0], [C0, Complex64::new(0.0, -1.0)]];
        assert_eq!(measured_pauli(&mul2(&hm, &sdg)), Some((Basis::Y, 1)));
        assert!(t
            .iter()
            .all(|e| measured_pauli(&e.matrix) == Some((e.basis, e.sign))));
    }

    #[test]
    fn settings_are_deterministic() {
        for e in [EnsembleSpec::clifford(5), EnsembleSpec::haar(5)] {
            let a = sample_setting(&e, 42, 7);
            assert_eq!(a, sample_setting(&e, 42, 7));
            assert_ne!(a, sample_setting(&e, 42, 8));
            assert_eq!(a.n_qubits(), 5);
            assert!(a.unitaries().iter().all(|u| is_unitary2(u, 1e-10)));
        }
    }

    #[test]
    fn clifford_bases_are_uniform() {
        let e = EnsembleSpec::clifford(1);
        let draws = 100_000u64;
        let mut counts = [0f64; 3];
        for m in 0..draws {
            counts[sample_setting(&e, 3, m).clifford().unwrap()[0]
                .basis
                .index()] += 1.0;
        }
        let expect = draws as f64 / 3.0;
        let chi2: f64 = counts.iter().map(|c| (c - expect).powi(2) / expect).sum();
        // 2 degrees of freedom, p = 0.001
        assert!(chi2 < 13.82, "chi2 = {chi2}");
    }

    #[test]
    fn haar_first_moment() {
        let e = EnsembleSpec::haar(1);
        let draws = 100_000;
        let xs: Vec<f64> = (0..draws)
            .map(|m| sample_setting(&e, 9, m).unitaries()[0][0][0].norm_sqr())
            .collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        // |u00|² is uniform on [0, 1] under Haar measure
        let sigma = (1.0 / 12.0 / draws as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sigma, "mean = {mean}");
    }

    fn channel_average(us: impl Iterator<Item = Mat2>, rho: &Mat2) -> Mat2 {
        let mut acc = [[C0; 2]; 2];
        let mut count = 0.0;
        for u in us {
            let rot = conjugate2(&u, rho);
            for s in 0..2 {
                let mut proj = [[C0; 2]; 2];
                proj[s][s] = C1;
                let back = conjugate2(&dagger2(&u), &proj);
                let est = add2(&scale2(&back, C1 * 3.0), &scale2(&identity2(), -C1));
                acc = add2(&acc, &scale2(&est, rot[s][s]));
            }
            count += 1.0;
        }
        scale2(&acc, C1 / count)
    }

    #[test]
    fn inverted_channel_reproduces_state() {
        let rho: Mat2 = [
            [Complex64::new(0.7, 0.0), Complex64::new(0.2, -0.3)],
            [Complex64::new(0.2, 0.3), Complex64::new(0.3, 0.0)],
        ];
        let exact = channel_average(clifford_table().iter().map(|e| e.matrix), &rho);
        assert!(crate::linalg::max_abs_diff2(&exact, &rho) < 1e-12);
        for e in [EnsembleSpec::clifford(1), EnsembleSpec::haar(1)] {
            let avg = channel_average(
                (0..10_000).map(|m| sample_setting(&e, 17, m).unitaries()[0]),
                &rho,
            );
            assert!(crate::linalg::max_abs_diff2(&avg, &rho) < 0.02);
        }
    }

    #[test]
    fn symmetric_settings_mirror() {
        let e = EnsembleSpec::haar(6);
        let s = symmetric_setting(&e, &[1, 2, 3, 4], 5, 0).unwrap();
        let u = s.unitaries();
        assert_eq!(u[1], u[4]);
        assert_eq!(u[2], u[3]);
        assert_ne!(u[1], u[2]);
        assert_eq!(u[0], identity2());
        assert_eq!(u[5], identity2());
        assert_eq!(s, symmetric_setting(&e, &[1, 2, 3, 4], 5, 0).unwrap());
        let c = symmetric_setting(&EnsembleSpec::clifford(2), &[0, 1], 5, 3).unwrap();
        assert_eq!(c.clifford().unwrap()[0], c.clifford().unwrap()[1]);
        assert!(symmetric_setting(&e, &[1, 2, 3], 5, 0).is_err());
    }

    #[test]
    fn vignette_special_cases() {
        let a = decompose_vignette(&identity2());
        assert!(a.alpha.abs() < 1e-12 && a.beta.abs() < 1e-12 && a.residual_z.abs() < 1e-12);
        let a = decompose_vignette(&rotation('Z', 0.7));
        assert!(
            (a.beta - 0.7).abs() < 1e-12 && a.alpha.abs() < 1e-12,
            "{a:?}"
        );
        let a = decompose_vignette(&rotation('Y', 1.1));
        assert!(
            (a.alpha - 1.1).abs() < 1e-12 && a.beta.abs() < 1e-12 && a.residual_z.abs() < 1e-12
        );
    }

    #[test]
    fn vignette_round_trip() {
        let mut rng = seed::rng(77);
        for _ in 0..1000 {
            let u = sample_haar_2x2(&mut rng);
            let back = recompose_vignette(&decompose_vignette(&u));
            assert!(distance_up_to_phase(&u, &back) < 1e-8);
        }
        for e in clifford_table() {
            let back = recompose_vignette(&decompose_vignette(&e.matrix));
            assert!(distance_up_to_phase(&e.matrix, &back) < 1e-8);
        }
    }

    #[test]
    fn restriction_keeps_selected_qubits() {
        let s = sample_setting(&EnsembleSpec::clifford(4), 1, 2);
        let r = s.restrict(&[3, 1]);
        assert_eq!(r.unitaries()[0], s.unitaries()[3]);
        assert_eq!(r.clifford().unwrap()[1], s.clifford().unwrap()[1]);
        let (x, z, _) = s.clifford_masks().unwrap();
        let (bx, bz) = s.basis_string().unwrap().masks();
        assert_eq!((x, z), (bx, bz));
    }
}
