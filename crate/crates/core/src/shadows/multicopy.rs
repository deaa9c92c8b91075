//! U-statistics over distinct snapshots: purities, multi-copy permutation
//! observables and partial-transpose moments.
//!
//! For per-qubit cyclic or anti-cyclic copy permutations,
//! `tr(Π ρ̂_1 ⊗ … ⊗ ρ̂_n) = tr(Y_1 ⋯ Y_n)` with `Y_i` the snapshot partially
//! transposed on the anti-cyclic qubits. Sums over distinct ordered tuples
//! are expanded into power sums of `S = Σ_i Y_i` by inclusion-exclusion over
//! coinciding indices, which costs `O(M)` dense products instead of `O(M^n)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::snapshot::{build_snapshot, check_shadow_subsystem};
use super::stats::{group_ranges, EstimateWithError, Jackknife, DEFAULT_GROUPS};
use crate::dataset::MeasurementDataset;
use crate::error::{Error, Result};
use crate::linalg::{trace, trace_prod, C0};

/// Copy permutation applied on one qubit of an `n`-copy observable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopyPermutation {
    /// `|a_1,…,a_n⟩ → |a_n,a_1,…,a_{n-1}⟩`.
    Cycle,
    /// The inverse cycle.
    AntiCycle,
}

pub const MAX_ORDER: usize = 4;

fn max_qubits(order: usize) -> usize {
    match order {
        0..=2 => super::snapshot::MAX_SHADOW_QUBITS,
        3 => 6,
        _ => 4,
    }
}

/// Additive sums over a set of snapshots.
#[derive(Clone)]
struct MomentSums {
    count: usize,
    s: DMatrix<Complex64>,
    q: Option<DMatrix<Complex64>>,
    c: Option<DMatrix<Complex64>>,
    /// `T[a,b,c,e] = Σ_i Y_i[a,b] Y_i[c,e]`, row-major.
    t: Option<Vec<Complex64>>,
    r: [Complex64; 4],
}

impl MomentSums {
    fn zeros(d: usize, order: usize) -> Self {
        MomentSums {
            count: 0,
            s: DMatrix::zeros(d, d),
            q: (order >= 3).then(|| DMatrix::zeros(d, d)),
            c: (order >= 4).then(|| DMatrix::zeros(d, d)),
            t: (order >= 4).then(|| vec![C0; d * d * d * d]),
            r: [C0; 4],
        }
    }

    fn add(&mut self, y: &DMatrix<Complex64>, order: usize) {
        let d = y.nrows();
        self.count += 1;
        self.s += y;
        self.r[0] += trace(y);
        if order < 2 {
            return;
        }
        let y2 = y * y;
        self.r[1] += trace(&y2);
        if order >= 3 {
            self.r[2] += trace_prod(&y2, y);
            *self.q.as_mut().expect("order 3 sums") += &y2;
        }
        if order >= 4 {
            let y3 = &y2 * y;
            self.r[3] += trace_prod(&y2, &y2);
            *self.c.as_mut().expect("order 4 sums") += &y3;
            let t = self.t.as_mut().expect("order 4 sums");
            for a in 0..d {
                for b in 0..d {
                    let yab = y[(a, b)];
                    if yab == C0 {
                        continue;
                    }
                    let base = (a * d + b) * d * d;
                    for c in 0..d {
                        for e in 0..d {
                            t[base + c * d + e] += yab * y[(c, e)];
                        }
                    }
                }
            }
        }
    }

    fn accumulate(&mut self, other: &MomentSums, sign: f64) {
        let k = Complex64::new(sign, 0.0);
        self.count = if sign > 0.0 {
            self.count + other.count
        } else {
            self.count - other.count
        };
        self.s += &other.s * k;
        if let (Some(a), Some(b)) = (self.q.as_mut(), other.q.as_ref()) {
            *a += b * k;
        }
        if let (Some(a), Some(b)) = (self.c.as_mut(), other.c.as_ref()) {
            *a += b * k;
        }
        if let (Some(a), Some(b)) = (self.t.as_mut(), other.t.as_ref()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y * k;
            }
        }
        for (x, y) in self.r.iter_mut().zip(&other.r) {
            *x += y * k;
        }
    }

    /// Mean over distinct ordered `n`-tuples of `tr(Y_{i1} ⋯ Y_{in})`.
    fn u_statistic(&self, n: usize) -> f64 {
        let m = self.count as f64;
        let falling: f64 = (0..n).map(|j| m - j as f64).product();
        if falling <= 0.0 {
            return f64::NAN;
        }
        let s = &self.s;
        let total = match n {
            1 => trace(s),
            2 => trace_prod(s, s) - self.r[1],
            3 => {
                let q = self.q.as_ref().expect("order 3 sums");
                trace_prod(&(s * s), s) - trace_prod(q, s) * 3.0 + self.r[2] * 2.0
            }
            4 => {
                let q = self.q.as_ref().expect("order 4 sums");
                let c = self.c.as_ref().expect("order 4 sums");
                let t = self.t.as_ref().expect("order 4 sums");
                let d = s.nrows();
                let s2 = s * s;
                // W = Σ_i tr(Y_i S Y_i S), X = Σ_{i,j} tr(Y_i Y_j Y_i Y_j)
                let mut w = C0;
                let mut x = C0;
                for a in 0..d {
                    for b in 0..d {
                        for cc in 0..d {
                            for e in 0..d {
                                let tv = t[((a * d + b) * d + cc) * d + e];
                                if tv == C0 {
                                    continue;
                                }
                                w += tv * s[(b, cc)] * s[(e, a)];
                                x += tv * t[((b * d + cc) * d + e) * d + a];
                            }
                        }
                    }
                }
                trace_prod(&s2, &s2) - trace_prod(q, &s2) * 4.0 - w * 2.0
                    + trace_prod(q, q) * 2.0
                    + x
                    + trace_prod(c, s) * 8.0
                    - self.r[3] * 6.0
            }
            _ => unreachable!("order checked by caller"),
        };
        total.re / falling
    }
}

fn groups_within_budget(m: usize, d: usize, order: usize, requested: usize) -> usize {
    let mats = 1 + (order >= 3) as usize + (order >= 4) as usize;
    let bytes = 16 * (mats * d * d + if order >= 4 { d * d * d * d } else { 0 });
    let budget = (1usize << 26) / bytes.max(1);
    requested.min(m).min(budget.max(2)).max(1)
}

/// Jackknifed U-statistics of orders `1..=max_order` for the snapshots on
/// `qubits`, transposed on positions set in `transpose`.
pub(crate) fn moment_statistics(
    ds: &MeasurementDataset,
    qubits: &[usize],
    transpose: u64,
    max_order: usize,
    groups: usize,
) -> Result<Vec<Jackknife>> {
    if !(1..=MAX_ORDER).contains(&max_order) {
        return Err(Error::invalid(format!(
            "copy number {max_order} outside 1..={MAX_ORDER}"
        )));
    }
    if qubits.len() > max_qubits(max_order) {
        return Err(Error::SizeCap {
            what: "multi-copy subsystem",
            n: qubits.len(),
            cap: max_qubits(max_order),
        });
    }
    check_shadow_subsystem(ds.n_qubits(), qubits)?;
    let m = ds.n_settings();
    if m < max_order {
        return Err(Error::invalid(format!(
            "{max_order}-copy estimate needs at least {max_order} settings, got {m}"
        )));
    }
    let d = 1usize << qubits.len();
    let g = groups_within_budget(m, d, max_order, groups);
    let ranges = group_ranges(m, g);
    let parts: Vec<MomentSums> = ranges
        .par_iter()
        .map(|r| {
            let mut acc = MomentSums::zeros(d, max_order);
            for rec in &ds.records[r.clone()] {
                acc.add(&build_snapshot(rec).dense(qubits, transpose), max_order);
            }
            acc
        })
        .collect();
    let mut total = MomentSums::zeros(d, max_order);
    for p in &parts {
        total.accumulate(p, 1.0);
    }
    let replicate_sums: Vec<MomentSums> = parts
        .par_iter()
        .map(|p| {
            let mut rest = total.clone();
            rest.accumulate(p, -1.0);
            rest
        })
        .collect();
    Ok((1..=max_order)
        .map(|n| Jackknife {
            value: total.u_statistic(n),
            replicates: replicate_sums.iter().map(|r| r.u_statistic(n)).collect(),
            n_samples: m,
        })
        .collect())
}

fn transpose_mask(perms: &[CopyPermutation]) -> u64 {
    perms
        .iter()
        .enumerate()
        .filter(|(_, p)| **p == CopyPermutation::AntiCycle)
        .fold(0u64, |acc, (i, _)| acc | 1 << i)
}

/// `tr(Π ρ^{⊗n})` for the copy permutation `perms[i]` acting on `qubits[i]`.
pub fn multicopy_expect(
    ds: &MeasurementDataset,
    qubits: &[usize],
    perms: &[CopyPermutation],
    n: usize,
) -> Result<EstimateWithError> {
    if perms.len() != qubits.len() {
        return Err(Error::invalid("one copy permutation per qubit required"));
    }
    let stats = moment_statistics(ds, qubits, transpose_mask(perms), n, DEFAULT_GROUPS)?;
    Ok(stats[n - 1].estimate())
}

pub(crate) fn purity_jackknife(
    ds: &MeasurementDataset,
    qubits: &[usize],
    groups: usize,
) -> Result<Jackknife> {
    Ok(moment_statistics(ds, qubits, 0, 2, groups)?.swap_remove(1))
}

/// `tr(ρ_A²)` from pairs of distinct snapshots.
pub fn purity_shadow(ds: &MeasurementDataset, qubits: &[usize]) -> Result<EstimateWithError> {
    if ds.n_settings() < 2 {
        return Err(Error::invalid("purity needs at least two settings"));
    }
    Ok(purity_jackknife(ds, qubits, DEFAULT_GROUPS)?.estimate())
}

/// Second Rényi entropy from a purity estimate, error by the delta method.
pub fn renyi2_from(purity: &EstimateWithError) -> Result<EstimateWithError> {
    if !(purity.value > 0.0) {
        return Err(Error::NonPositive {
            quantity: "purity".into(),
            value: purity.value,
        });
    }
    Ok(EstimateWithError {
        value: -purity.value.log2(),
        std_error: purity.std_error / (purity.value * std::f64::consts::LN_2),
        n_samples: purity.n_samples,
        method: purity.method,
    })
}

pub fn renyi2(ds: &MeasurementDataset, qubits: &[usize]) -> Result<EstimateWithError> {
    renyi2_from(&purity_shadow(ds, qubits)?)
}

/// `tr[(ρ_AB^{T_A})^n]`, all orders `1..=max_order` on shared groups.
pub(crate) fn pt_moment_statistics(
    ds: &MeasurementDataset,
    a: &[usize],
    b: &[usize],
    max_order: usize,
) -> Result<Vec<Jackknife>> {
    let qubits: Vec<usize> = a.iter().chain(b).copied().collect();
    // transposing B instead of A leaves all moments unchanged
    let mask = ((1u64 << b.len()) - 1) << a.len();
    moment_statistics(ds, &qubits, mask, max_order, DEFAULT_GROUPS)
}

pub fn pt_moments(
    ds: &MeasurementDataset,
    a: &[usize],
    b: &[usize],
    n: usize,
) -> Result<EstimateWithError> {
    Ok(pt_moment_statistics(ds, a, b, n)?[n - 1].estimate())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PptVerdict {
    pub entangled: bool,
    pub p2: EstimateWithError,
    pub p3: EstimateWithError,
    /// `p₂² − p₃`, positive values indicate entanglement.
    pub violation: EstimateWithError,
    /// `violation / std_error` from the joint jackknife.
    pub margin_sigmas: f64,
    pub z: f64,
}

/// Flags entanglement when `p₃ + zσ₃ < p₂² − zσ(p₂²)`, since PPT states obey `p₃ ≥ p₂²`.
pub fn p3_ppt_test(
    ds: &MeasurementDataset,
    a: &[usize],
    b: &[usize],
    z: f64,
) -> Result<PptVerdict> {
    let stats = pt_moment_statistics(ds, a, b, 3)?;
    let (p2, p3) = (&stats[1], &stats[2]);
    let violation = Jackknife::combine(&[p2, p3], |v| v[0] * v[0] - v[1])?;
    let (e2, e3, ev) = (p2.estimate(), p3.estimate(), violation.estimate());
    let sigma_sq = 2.0 * e2.value.abs() * e2.std_error;
    Ok(PptVerdict {
        entangled: e3.value + z * e3.std_error < e2.value * e2.value - z * sigma_sq,
        p2: e2,
        p3: e3,
        violation: ev,
        margin_sigmas: ev.value / ev.std_error,
        z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::acquire;
    use crate::ensembles::EnsembleSpec;
    use crate::shadows::snapshot::build_snapshots;
    use crate::sim::prep::{ghz, product, random_mixed, werner};
    use crate::sim::{oracle_pt_moments, oracle_purity, DensityState, QuantumState};

    /// Direct sum over distinct ordered tuples.
    fn brute(ys: &[DMatrix<Complex64>], n: usize) -> f64 {
        let m = ys.len();
        let mut acc = C0;
        let mut count = 0.0;
        let mut idx = vec![0usize; n];
        loop {
            let distinct = (0..n).all(|i| (i + 1..n).all(|j| idx[i] != idx[j]));
            if distinct {
                let mut p = ys[idx[0]].clone();
                for &i in &idx[1..] {
                    p = &p * &ys[i];
                }
                acc += trace(&p);
                count += 1.0;
            }
            let mut pos = 0;
            loop {
                if pos == n {
                    return acc.re / count;
                }
                idx[pos] += 1;
                if idx[pos] < m {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }

    #[test]
    fn power_sums_match_direct_loops() {
        let st = QuantumState::Mixed(random_mixed(3, 12).unwrap());
        let ds = acquire(&st, &EnsembleSpec::haar(3), 9, 2, 1).unwrap();
        let snaps = build_snapshots(&ds);
        for (qubits, mask) in [
            (vec![0usize, 2], 0u64),
            (vec![1, 0, 2], 0b100),
            (vec![2, 1], 0b01),
        ] {
            let ys: Vec<_> = snaps.iter().map(|s| s.dense(&qubits, mask)).collect();
            let stats = moment_statistics(&ds, &qubits, mask, 4, 3).unwrap();
            for n in 1..=4 {
                let want = brute(&ys, n);
                assert!(
                    (stats[n - 1].value - want).abs() < 1e-9 * want.abs().max(1.0),
                    "n={n}"
                );
            }
            // a replicate equals the statistic on the remaining settings
            let r = group_ranges(9, 3)[1].clone();
            let rest: Vec<_> = ys
                .iter()
                .enumerate()
                .filter(|(i, _)| !r.contains(i))
                .map(|(_, y)| y.clone())
                .collect();
            for n in 2..=4 {
                let want = brute(&rest, n);
                assert!((stats[n - 1].replicates[1] - want).abs() < 1e-9 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn identity_observable_is_exactly_one() {
        let st = QuantumState::Mixed(random_mixed(2, 1).unwrap());
        let ds = acquire(&st, &EnsembleSpec::clifford(2), 30, 2, 1).unwrap();
        for n in 1..=4 {
            let e = multicopy_expect(&ds, &[], &[], n).unwrap();
            assert!((e.value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn swap_reproduces_purity_and_pt2() {
        let st = QuantumState::Mixed(random_mixed(3, 5).unwrap());
        let ds = acquire(&st, &EnsembleSpec::clifford(3), 200, 4, 2).unwrap();
        let p = purity_shadow(&ds, &[0, 1]).unwrap();
        let m = multicopy_expect(&ds, &[0, 1], &[CopyPermutation::Cycle; 2], 2).unwrap();
        let pt = pt_moments(&ds, &[0], &[1], 2).unwrap();
        assert!((p.value - m.value).abs() < 1e-10);
        assert!((p.value - pt.value).abs() < 1e-10);
    }

    #[test]
    fn purities_against_oracle() {
        let g = QuantumState::Pure(ghz(4).unwrap());
        let ds = acquire(&g, &EnsembleSpec::clifford(4), 3000, 4, 3).unwrap();
        let full = purity_shadow(&ds, &[0, 1, 2, 3]).unwrap();
        assert!(full.contains(1.0, 4.0), "{full:?}");
        let half = purity_shadow(&ds, &[0, 1]).unwrap();
        assert!(half.contains(0.5, 4.0), "{half:?}");
        let s = renyi2(&ds, &[0, 1]).unwrap();
        assert!(s.contains(1.0, 4.0), "{s:?}");

        let mm = QuantumState::Mixed(DensityState::maximally_mixed(3).unwrap());
        let ds = acquire(&mm, &EnsembleSpec::haar(3), 3000, 4, 3).unwrap();
        let p = purity_shadow(&ds, &[0, 2]).unwrap();
        assert!(p.contains(0.25, 4.0), "{p:?}");
    }

    #[test]
    fn cyclic_third_moment() {
        let st = QuantumState::Mixed(random_mixed(2, 3).unwrap());
        let ds = acquire(&st, &EnsembleSpec::clifford(2), 3000, 4, 5).unwrap();
        let e = multicopy_expect(&ds, &[0, 1], &[CopyPermutation::Cycle; 2], 3).unwrap();
        let want = oracle_pt_moments(&st, &[0, 1], &[], 3).unwrap();
        assert!(e.contains(want, 4.0), "{e:?} vs {want}");
    }

    #[test]
    fn bell_and_product_pt_moments() {
        let bell = QuantumState::Mixed(werner(1.0).unwrap());
        let ds = acquire(&bell, &EnsembleSpec::clifford(2), 3000, 1, 6).unwrap();
        let p3 = pt_moments(&ds, &[0], &[1], 3).unwrap();
        assert!(p3.contains(0.25, 4.0), "{p3:?}");
        let v = p3_ppt_test(&ds, &[0], &[1], 3.0).unwrap();
        assert!(v.entangled, "{v:?}");

        let prod = QuantumState::Pure(product(&[(0.5, 0.2), (1.9, -0.3)]).unwrap());
        let ds = acquire(&prod, &EnsembleSpec::clifford(2), 3000, 1, 6).unwrap();
        let v = p3_ppt_test(&ds, &[0], &[1], 3.0).unwrap();
        assert!(!v.entangled, "{v:?}");
        for n in 2..=3 {
            let e = pt_moments(&ds, &[0], &[1], n).unwrap();
            let want = oracle_pt_moments(&prod, &[0], &[1], n).unwrap();
            assert!(e.contains(want, 4.0), "n={n}: {e:?} vs {want}");
        }
        assert!((oracle_purity(&prod, &[0, 1]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn argument_checks() {
        let st = QuantumState::Mixed(random_mixed(2, 3).unwrap());
        let ds = acquire(&st, &EnsembleSpec::clifford(2), 2, 1, 5).unwrap();
        assert!(multicopy_expect(&ds, &[0], &[CopyPermutation::Cycle], 3).is_err());
        assert!(multicopy_expect(&ds, &[0], &[CopyPermutation::Cycle], 5).is_err());
        assert!(multicopy_expect(&ds, &[0], &[], 2).is_err());
        let one = acquire(&st, &EnsembleSpec::clifford(2), 1, 1, 5).unwrap();
        assert!(purity_shadow(&one, &[0]).is_err());
    }
}
