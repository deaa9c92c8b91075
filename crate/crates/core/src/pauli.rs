//! Exact algebra on N-qubit Pauli strings.
//!
//! A [`PauliString`] is stored in the symplectic bit-pair encoding: bit `q` of
//! `x` is set where X or Y acts on qubit `q`, bit `q` of `z` where Z or Y acts.
//! The overall coefficient is `i^phase` multiplying the tensor product of the
//! letters, so every product and commutator stays exact.
//!
//! Basis-state convention used throughout the crate: qubit `q` is bit `q` of a
//! computational-basis index, and in text form qubit 0 is the leftmost letter.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest register a [`PauliString`] can address.
pub const MAX_PAULI_QUBITS: usize = 64;

/// Largest register [`PauliString::to_matrix`] will materialize.
pub const MAX_MATRIX_QUBITS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PauliLetter {
    I,
    X,
    Y,
    Z,
}

impl PauliLetter {
    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => PauliLetter::I,
            (true, false) => PauliLetter::X,
            (true, true) => PauliLetter::Y,
            (false, true) => PauliLetter::Z,
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            PauliLetter::I => (false, false),
            PauliLetter::X => (true, false),
            PauliLetter::Y => (true, true),
            PauliLetter::Z => (false, true),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            PauliLetter::I => 'I',
            PauliLetter::X => 'X',
            PauliLetter::Y => 'Y',
            PauliLetter::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' | '_' | '.' => Some(PauliLetter::I),
            'X' => Some(PauliLetter::X),
            'Y' => Some(PauliLetter::Y),
            'Z' => Some(PauliLetter::Z),
            _ => None,
        }
    }

    /// 2×2 matrix of the letter, row-major.
    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            PauliLetter::I => [[l, o], [o, l]],
            PauliLetter::X => [[o, l], [l, o]],
            PauliLetter::Y => [[o, -i], [i, o]],
            PauliLetter::Z => [[l, o], [o, -l]],
        }
    }
}

/// Single-qubit measurement basis; ordered X < Y < Z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    pub fn letter(self) -> PauliLetter {
        match self {
            Basis::X => PauliLetter::X,
            Basis::Y => PauliLetter::Y,
            Basis::Z => PauliLetter::Z,
        }
    }

    pub fn from_letter(l: PauliLetter) -> Option<Self> {
        match l {
            PauliLetter::I => None,
            PauliLetter::X => Some(Basis::X),
            PauliLetter::Y => Some(Basis::Y),
            PauliLetter::Z => Some(Basis::Z),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Per-qubit measurement bases of one setting (the measured Pauli string).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BasisString {
    bases: Vec<Basis>,
}

impl BasisString {
    pub fn new(bases: Vec<Basis>) -> Self {
        BasisString { bases }
    }

    pub fn uniform(n: usize, basis: Basis) -> Self {
        BasisString {
            bases: vec![basis; n],
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.bases.len()
    }

    pub fn bases(&self) -> &[Basis] {
        &self.bases
    }

    pub fn get(&self, q: usize) -> Basis {
        self.bases[q]
    }

    /// Symplectic masks `(x, z)` of the full basis string.
    pub fn masks(&self) -> (u64, u64) {
        let mut x = 0u64;
        let mut z = 0u64;
        for (q, b) in self.bases.iter().enumerate() {
            let (bx, bz) = b.letter().bits();
            x |= (bx as u64) << q;
            z |= (bz as u64) << q;
        }
        (x, z)
    }
}

impl fmt::Display for BasisString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bases {
            write!(f, "{}", b.letter().as_char())?;
        }
        Ok(())
    }
}

impl FromStr for BasisString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| {
                PauliLetter::from_char(c)
                    .and_then(Basis::from_letter)
                    .ok_or_else(|| Error::Parse(format!("bad basis letter {c:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(BasisString::new)
    }
}

/// N-qubit Pauli operator `i^phase · P_0 ⊗ … ⊗ P_{N-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
    phase: u8,
}

fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn i_pow(k: u8) -> Complex64 {
    match k & 3 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        assert!(
            n <= MAX_PAULI_QUBITS,
            "pauli strings address at most 64 qubits"
        );
        PauliString {
            n,
            x: 0,
            z: 0,
            phase: 0,
        }
    }

    /// Builds from raw masks; bits at or above `n` are rejected.
    pub fn from_masks(n: usize, x: u64, z: u64, phase: u8) -> Result<Self> {
        if n > MAX_PAULI_QUBITS {
            return Err(Error::SizeCap {
                what: "pauli string",
                n,
                cap: MAX_PAULI_QUBITS,
            });
        }
        if (x | z) & !low_mask(n) != 0 {
            return Err(Error::invalid(format!(
                "pauli masks have bits beyond qubit {}",
                n.saturating_sub(1)
            )));
        }
        Ok(PauliString {
            n,
            x,
            z,
            phase: phase & 3,
        })
    }

    pub fn from_letters(letters: &[PauliLetter]) -> Self {
        let mut p = PauliString::identity(letters.len());
        for (q, &l) in letters.iter().enumerate() {
            p.set(q, l);
        }
        p
    }

    /// `letter` on qubit `q`, identity elsewhere.
    pub fn single(n: usize, q: usize, letter: PauliLetter) -> Self {
        let mut p = PauliString::identity(n);
        p.set(q, letter);
        p
    }

    /// Letters on the given `(qubit, letter)` sites, identity elsewhere.
    pub fn from_sites(n: usize, sites: &[(usize, PauliLetter)]) -> Self {
        let mut p = PauliString::identity(n);
        for &(q, l) in sites {
            p.set(q, l);
        }
        p
    }

    fn set(&mut self, q: usize, l: PauliLetter) {
        assert!(q < self.n, "qubit {q} out of range for {} qubits", self.n);
        let (bx, bz) = l.bits();
        let bit = 1u64 << q;
        self.x = (self.x & !bit) | if bx { bit } else { 0 };
        self.z = (self.z & !bit) | if bz { bit } else { 0 };
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    /// Exponent `k` of the coefficient `i^k`.
    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn coeff(&self) -> Complex64 {
        i_pow(self.phase)
    }

    pub fn with_phase(mut self, phase: u8) -> Self {
        self.phase = phase & 3;
        self
    }

    /// Same letters with coefficient +1.
    pub fn unsigned(self) -> Self {
        self.with_phase(0)
    }

    pub fn negate(self) -> Self {
        let p = self.phase;
        self.with_phase(p + 2)
    }

    /// `true` when the coefficient is ±1.
    pub fn is_hermitian(&self) -> bool {
        self.phase & 1 == 0
    }

    /// `+1` or `-1` for a Hermitian string.
    pub fn sign(&self) -> Option<i8> {
        match self.phase {
            0 => Some(1),
            2 => Some(-1),
            _ => None,
        }
    }

    pub fn letter(&self, q: usize) -> PauliLetter {
        PauliLetter::from_bits(self.x >> q & 1 == 1, self.z >> q & 1 == 1)
    }

    pub fn letters(&self) -> Vec<PauliLetter> {
        (0..self.n).map(|q| self.letter(q)).collect()
    }

    pub fn support_mask(&self) -> u64 {
        self.x | self.z
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|&q| self.support_mask() >> q & 1 == 1)
            .collect()
    }

    pub fn weight(&self) -> usize {
        self.support_mask().count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.support_mask() == 0
    }

    fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Number of Y letters is even and the coefficient is real, so the
    /// materialized matrix is real.
    pub fn is_real(&self) -> bool {
        (self.phase as u32 + self.y_count()).is_multiple_of(2)
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z) ^ (self.z & other.x))
            .count_ones()
            .is_multiple_of(2)
    }

    fn check_n(&self, other: &PauliString) -> Result<()> {
        if self.n != other.n {
            return Err(Error::QubitMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }

    /// Exact operator product `self · other`.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        self.check_n(other)?;
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let y3 = (x & z).count_ones();
        let k = self.phase as u32
            + self.y_count()
            + other.phase as u32
            + other.y_count()
            + 2 * (self.z & other.x).count_ones()
            + 4 * 64
            - y3;
        Ok(PauliString {
            n: self.n,
            x,
            z,
            phase: (k % 4) as u8,
        })
    }

    /// `i[a, b]/2` when the strings anticommute (a Hermitian string when both
    /// inputs are Hermitian), `None` when they commute.
    pub fn commutator(&self, other: &PauliString) -> Result<Option<PauliString>> {
        self.check_n(other)?;
        if self.commutes_with(other) {
            return Ok(None);
        }
        // anticommuting: [a, b] = 2ab, so i[a, b]/2 = i·ab
        let ab = self.multiply(other)?;
        Ok(Some(ab.with_phase(ab.phase + 1)))
    }

    pub fn is_compatible(&self, basis: &BasisString) -> bool {
        debug_assert_eq!(self.n, basis.n_qubits());
        let (bx, bz) = basis.masks();
        self.is_compatible_masks(bx, bz)
    }

    /// Compatibility against precomputed basis masks.
    #[inline]
    pub fn is_compatible_masks(&self, bx: u64, bz: u64) -> bool {
        let s = self.support_mask();
        ((self.x ^ bx) | (self.z ^ bz)) & s == 0
    }

    /// Eigenvalue of a Hermitian string on outcome `bits` measured in a
    /// compatible `basis`: the coefficient sign times `(-1)^{s_n}` over the support.
    pub fn eigenvalue_on_bitstring(&self, basis: &BasisString, bits: u64) -> Result<i8> {
        if basis.n_qubits() != self.n {
            return Err(Error::QubitMismatch {
                expected: self.n,
                found: basis.n_qubits(),
            });
        }
        if !self.is_compatible(basis) {
            return Err(Error::Incompatible {
                pauli: self.to_string(),
                basis: basis.to_string(),
            });
        }
        let sign = self
            .sign()
            .ok_or_else(|| Error::invalid(format!("{self} has an imaginary coefficient")))?;
        let parity = (bits & self.support_mask()).count_ones() % 2;
        Ok(if parity == 0 { sign } else { -sign })
    }

    /// Action on a basis state: `P|c⟩ = amp · |c'⟩`.
    #[inline]
    pub fn apply_to_basis(&self, c: usize) -> (usize, Complex64) {
        let k = self.phase as u32 + self.y_count() + 2 * (self.z & c as u64).count_ones();
        (c ^ self.x as usize, i_pow((k % 4) as u8))
    }

    /// `P|ψ⟩` for a dense amplitude vector of length `2^n`.
    pub fn apply(&self, amps: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
        for (c, a) in amps.iter().enumerate() {
            let (r, f) = self.apply_to_basis(c);
            out[r] = f * a;
        }
        out
    }

    /// `⟨ψ|P|ψ⟩` without materializing anything.
    pub fn expectation_pure(&self, amps: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, a) in amps.iter().enumerate() {
            let (r, f) = self.apply_to_basis(c);
            acc += amps[r].conj() * f * a;
        }
        acc
    }

    /// Dense `2^n × 2^n` matrix; capped at [`MAX_MATRIX_QUBITS`].
    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        if self.n > MAX_MATRIX_QUBITS {
            return Err(Error::SizeCap {
                what: "dense pauli matrix",
                n: self.n,
                cap: MAX_MATRIX_QUBITS,
            });
        }
        let dim = 1usize << self.n;
        let mut m = DMatrix::zeros(dim, dim);
        for c in 0..dim {
            let (r, f) = self.apply_to_basis(c);
            m[(r, c)] = f;
        }
        Ok(m)
    }

    /// Restriction to the listed qubits, relabelled `0..qubits.len()`.
    /// The coefficient is kept.
    pub fn restrict(&self, qubits: &[usize]) -> PauliString {
        let mut p = PauliString::identity(qubits.len()).with_phase(self.phase);
        for (i, &q) in qubits.iter().enumerate() {
            p.set(i, self.letter(q));
        }
        p
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.phase {
            0 => {}
            1 => write!(f, "i")?,
            2 => write!(f, "-")?,
            _ => write!(f, "-i")?,
        }
        for q in 0..self.n {
            write!(f, "{}", self.letter(q).as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Accepts `[+|-][i]LETTERS`, e.g. `XIZY`, `-ZZ`, `+iXY`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let (neg, rest) = match t.as_bytes().first() {
            Some(b'+') => (false, &t[1..]),
            Some(b'-') => (true, &t[1..]),
            _ => (false, t),
        };
        let (imag, body) = match rest.strip_prefix('i') {
            Some(b) => (true, b),
            None => (false, rest),
        };
        if body.is_empty() {
            return Err(Error::Parse(format!("empty pauli string {s:?}")));
        }
        let letters = body
            .chars()
            .map(|c| {
                PauliLetter::from_char(c)
                    .ok_or_else(|| Error::Parse(format!("bad pauli letter {c:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if letters.len() > MAX_PAULI_QUBITS {
            return Err(Error::SizeCap {
                what: "pauli string",
                n: letters.len(),
                cap: MAX_PAULI_QUBITS,
            });
        }
        let phase = (if neg { 2 } else { 0 }) + (if imag { 1 } else { 0 });
        Ok(PauliString::from_letters(&letters).with_phase(phase))
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All unsigned strings on `n` qubits with `1 ≤ weight ≤ max_weight`,
/// ordered by weight, then support, then letters.
pub fn paulis_up_to_weight(n: usize, max_weight: usize) -> Vec<PauliString> {
    let mut out = Vec::new();
    for w in 1..=max_weight.min(n) {
        let mut support = Vec::with_capacity(w);
        combos(n, w, 0, &mut support, &mut |sup| {
            let total = 3usize.pow(w as u32);
            for code in 0..total {
                let mut p = PauliString::identity(n);
                let mut c = code;
                for &q in sup.iter().rev() {
                    p.set(q, Basis::ALL[c % 3].letter());
                    c /= 3;
                }
                out.push(p);
            }
        });
    }
    out
}

fn combos(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if cur.len() == k {
        f(cur);
        return;
    }
    for q in start..n {
        cur.push(q);
        combos(n, k, q + 1, cur, f);
        cur.pop();
    }
}

/// All `4^n` unsigned strings in lexicographic letter order (qubit 0 slowest).
pub fn all_paulis(n: usize) -> Vec<PauliString> {
    let total = 1usize << (2 * n);
    (0..total)
        .map(|code| {
            let mut p = PauliString::identity(n);
            for q in 0..n {
                let l = [
                    PauliLetter::I,
                    PauliLetter::X,
                    PauliLetter::Y,
                    PauliLetter::Z,
                ][(code >> (2 * (n - 1 - q))) & 3];
                p.set(q, l);
            }
            p
        })
        .collect()
}
