//! Small dense helpers: 2×2 single-qubit blocks and a few `DMatrix` utilities.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Row-major 2×2 complex matrix.
pub type Mat2 = [[Complex64; 2]; 2];

pub const C0: Complex64 = Complex64::new(0.0, 0.0);
pub const C1: Complex64 = Complex64::new(1.0, 0.0);
pub const CI: Complex64 = Complex64::new(0.0, 1.0);

pub fn identity2() -> Mat2 {
    [[C1, C0], [C0, C1]]
}

pub fn mul2(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[C0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn dagger2(a: &Mat2) -> Mat2 {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

pub fn scale2(a: &Mat2, s: Complex64) -> Mat2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

pub fn add2(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

pub fn trace2(a: &Mat2) -> Complex64 {
    a[0][0] + a[1][1]
}

/// `tr(a·b)` without forming the product.
#[inline]
pub fn trace_prod2(a: &Mat2, b: &Mat2) -> Complex64 {
    a[0][0] * b[0][0] + a[0][1] * b[1][0] + a[1][0] * b[0][1] + a[1][1] * b[1][1]
}

pub fn det2(a: &Mat2) -> Complex64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn max_abs_diff2(a: &Mat2, b: &Mat2) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            m = m.max((a[i][j] - b[i][j]).norm());
        }
    }
    m
}

pub fn is_unitary2(a: &Mat2, tol: f64) -> bool {
    max_abs_diff2(&mul2(&dagger2(a), a), &identity2()) < tol
}

pub fn to_dmatrix(a: &Mat2) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]])
}

/// Rotation `exp(-i θ σ/2)` about the given axis letter.
pub fn rotation(axis: char, theta: f64) -> Mat2 {
    let c = Complex64::new((theta / 2.0).cos(), 0.0);
    let s = (theta / 2.0).sin();
    match axis {
        'X' => [[c, Complex64::new(0.0, -s)], [Complex64::new(0.0, -s), c]],
        'Y' => [[c, Complex64::new(-s, 0.0)], [Complex64::new(s, 0.0), c]],
        'Z' => [
            [Complex64::from_polar(1.0, -theta / 2.0), C0],
            [C0, Complex64::from_polar(1.0, theta / 2.0)],
        ],
        _ => panic!("rotation axis must be X, Y or Z"),
    }
}

/// `ρ → U ρ U†` on one qubit of a single-qubit density (utility for tests).
pub fn conjugate2(u: &Mat2, rho: &Mat2) -> Mat2 {
    mul2(&mul2(u, rho), &dagger2(u))
}

pub fn dagger(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    m.adjoint()
}

pub fn trace(m: &DMatrix<Complex64>) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `tr(a·b)` in O(d²).
pub fn trace_prod(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    let d = a.nrows();
    let mut acc = C0;
    for i in 0..d {
        for j in 0..d {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Gathers the bits of `index` at `positions` into a compact integer
/// (position `i` of the list becomes bit `i`).
#[inline]
pub fn gather_bits(index: usize, positions: &[usize]) -> usize {
    let mut out = 0usize;
    for (i, &q) in positions.iter().enumerate() {
        out |= (index >> q & 1) << i;
    }
    out
}

/// Partial transpose of a `2^n` operator on the low `k` qubits.
pub fn partial_transpose_low(m: &DMatrix<Complex64>, k: usize) -> DMatrix<Complex64> {
    let d = m.nrows();
    let mask = (1usize << k) - 1;
    let mut out = DMatrix::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            let r2 = (r & !mask) | (c & mask);
            let c2 = (c & !mask) | (r & mask);
            out[(r2, c2)] = m[(r, c)];
        }
    }
    out
}

/// Partial transpose on the qubits set in `qubit_mask`.
pub fn partial_transpose(m: &DMatrix<Complex64>, qubit_mask: usize) -> DMatrix<Complex64> {
    let d = m.nrows();
    let mut out = DMatrix::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            let r2 = (r & !qubit_mask) | (c & qubit_mask);
            let c2 = (c & !qubit_mask) | (r & qubit_mask);
            out[(r2, c2)] = m[(r, c)];
        }
    }
    out
}
