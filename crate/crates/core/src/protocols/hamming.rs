//! Bitstring-only estimators built on Hamming distances between outcomes.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::MeasurementDataset;
use crate::error::{Error, Result};
use crate::linalg::{trace_prod, C0};
use crate::shadows::snapshot::{build_snapshot, check_shadow_subsystem};
use crate::shadows::stats::{
    group_ranges, jackknife_mean, EstimateWithError, Jackknife, DEFAULT_GROUPS,
};

pub const MAX_HAMMING_QUBITS: usize = 14;

fn subsystem_mask(n: usize, qubits: &[usize]) -> Result<u64> {
    if qubits.is_empty() {
        return Err(Error::invalid("subsystem must be nonempty"));
    }
    if qubits.len() > MAX_HAMMING_QUBITS {
        return Err(Error::SizeCap {
            what: "hamming subsystem",
            n: qubits.len(),
            cap: MAX_HAMMING_QUBITS,
        });
    }
    let mut mask = 0u64;
    for &q in qubits {
        if q >= n || mask >> q & 1 == 1 {
            return Err(Error::invalid(format!(
                "qubit {q} out of range or repeated"
            )));
        }
        mask |= 1 << q;
    }
    Ok(mask)
}

/// `(-2)^{-d}` for `d = 0..=64`.
fn weights() -> [f64; 65] {
    let mut w = [0.0; 65];
    let mut v = 1.0;
    for x in w.iter_mut() {
        *x = v;
        v /= -2.0;
    }
    w
}

fn same_record_term(shots: &[u64], mask: u64, w: &[f64; 65]) -> f64 {
    let k = shots.len();
    let mut acc = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            acc += w[((shots[i] ^ shots[j]) & mask).count_ones() as usize];
        }
    }
    2.0 * acc / (k * (k - 1)) as f64
}

fn cross_record_term(a: &[u64], b: &[u64], mask: u64, w: &[f64; 65]) -> f64 {
    let mut acc = 0.0;
    for &s in a {
        for &t in b {
            acc += w[((s ^ t) & mask).count_ones() as usize];
        }
    }
    acc / (a.len() * b.len()) as f64
}

pub(crate) fn purity_hamming_jackknife(
    ds: &MeasurementDataset,
    qubits: &[usize],
    groups: usize,
) -> Result<Jackknife> {
    let mask = subsystem_mask(ds.n_qubits(), qubits)?;
    let k = ds.shots_per_setting();
    if k < 2 {
        return Err(Error::invalid(format!(
            "hamming purity needs K >= 2 shots per setting, got {k}"
        )));
    }
    let w = weights();
    let scale = (qubits.len() as f64).exp2();
    let terms: Vec<f64> = ds
        .records
        .par_iter()
        .map(|r| scale * same_record_term(&r.shots, mask, &w))
        .collect();
    Ok(jackknife_mean(&terms, groups))
}

/// `tr(ρ_A²)` from pairs of distinct shots within each setting.
pub fn purity_hamming(ds: &MeasurementDataset, qubits: &[usize]) -> Result<EstimateWithError> {
    Ok(purity_hamming_jackknife(ds, qubits, DEFAULT_GROUPS)?.estimate())
}

/// Both datasets must replay the same settings on the same register, with
/// independent shot streams.
pub fn check_shared_settings(a: &MeasurementDataset, b: &MeasurementDataset) -> Result<()> {
    let (ha, hb) = (&a.header, &b.header);
    let mismatch = |what: &str, x: String, y: String| {
        Err(Error::ProtocolViolation(format!(
            "datasets differ in {what}: {x} vs {y}"
        )))
    };
    if ha.seed != hb.seed {
        return mismatch("master seed", ha.seed.to_string(), hb.seed.to_string());
    }
    if ha.ensemble != hb.ensemble {
        return mismatch(
            "ensemble",
            ha.ensemble.name().into(),
            hb.ensemble.name().into(),
        );
    }
    if ha.n != hb.n {
        return mismatch("qubit count", ha.n.to_string(), hb.n.to_string());
    }
    if ha.qubits != hb.qubits {
        return mismatch(
            "qubit labels",
            format!("{:?}", ha.qubits),
            format!("{:?}", hb.qubits),
        );
    }
    if ha.m != hb.m || ha.first_m != hb.first_m {
        return mismatch(
            "settings",
            format!("{}+{}", ha.first_m, ha.m),
            format!("{}+{}", hb.first_m, hb.m),
        );
    }
    if ha.device == hb.device {
        return Err(Error::ProtocolViolation(format!(
            "both datasets carry device tag {}, so their shots are not independent",
            ha.device
        )));
    }
    for (ra, rb) in a.records.iter().zip(&b.records) {
        if ra.setting != rb.setting {
            return Err(Error::ProtocolViolation(format!(
                "setting {} differs between datasets",
                ra.m()
            )));
        }
    }
    Ok(())
}

pub(crate) fn cross_overlap_jackknife(
    a: &MeasurementDataset,
    b: &MeasurementDataset,
    qubits: &[usize],
    groups: usize,
) -> Result<Jackknife> {
    check_shared_settings(a, b)?;
    let mask = subsystem_mask(a.n_qubits(), qubits)?;
    let w = weights();
    let scale = (qubits.len() as f64).exp2();
    let terms: Vec<f64> = a
        .records
        .par_iter()
        .zip(&b.records)
        .map(|(ra, rb)| scale * cross_record_term(&ra.shots, &rb.shots, mask, &w))
        .collect();
    Ok(jackknife_mean(&terms, groups))
}

/// `tr(ρ₁ρ₂)` on `qubits` from two devices measured with the same settings.
/// All shot pairs across the devices enter, since they are independent.
pub fn cross_overlap(
    a: &MeasurementDataset,
    b: &MeasurementDataset,
    qubits: &[usize],
) -> Result<EstimateWithError> {
    Ok(cross_overlap_jackknife(a, b, qubits, DEFAULT_GROUPS)?.estimate())
}

/// `tr(ρ₁ρ₂)` from cross-device snapshot pairs, `tr(S₁S₂)/M²` with `S_i` the
/// summed snapshots. Settings need not be shared.
pub fn cross_overlap_shadow(
    a: &MeasurementDataset,
    b: &MeasurementDataset,
    qubits: &[usize],
) -> Result<EstimateWithError> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::QubitMismatch {
            expected: a.n_qubits(),
            found: b.n_qubits(),
        });
    }
    if a.n_settings() != b.n_settings() {
        return Err(Error::invalid(
            "cross-shadow overlap needs equal setting counts",
        ));
    }
    check_shadow_subsystem(a.n_qubits(), qubits)?;
    let d = 1usize << qubits.len();
    let ranges = group_ranges(a.n_settings(), DEFAULT_GROUPS);
    let sum = |ds: &MeasurementDataset| -> Vec<DMatrix<Complex64>> {
        ranges
            .par_iter()
            .map(|r| {
                let mut s = DMatrix::from_element(d, d, C0);
                for rec in &ds.records[r.clone()] {
                    s += build_snapshot(rec).dense(qubits, 0);
                }
                s
            })
            .collect()
    };
    let (ga, gb) = (sum(a), sum(b));
    let total = |g: &[DMatrix<Complex64>]| {
        g.iter()
            .fold(DMatrix::from_element(d, d, C0), |acc, x| acc + x)
    };
    let (ta, tb) = (total(&ga), total(&gb));
    let m = a.n_settings() as f64;
    let jk = Jackknife {
        value: trace_prod(&ta, &tb).re / (m * m),
        replicates: ranges
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let rest = m - r.len() as f64;
                trace_prod(&(&ta - &ga[i]), &(&tb - &gb[i])).re / (rest * rest)
            })
            .collect(),
        n_samples: a.n_settings(),
    };
    Ok(jk.estimate())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FmaxEstimate {
    pub fmax: EstimateWithError,
    pub overlap: EstimateWithError,
    pub purity_1: EstimateWithError,
    pub purity_2: EstimateWithError,
    /// Set when `fmax` falls outside `[-0.1, 1.1]`.
    pub out_of_range: bool,
}

/// `tr(ρ₁ρ₂) / max(tr ρ₁², tr ρ₂²)` with a joint jackknife error.
pub fn fmax(
    a: &MeasurementDataset,
    b: &MeasurementDataset,
    qubits: &[usize],
) -> Result<FmaxEstimate> {
    let overlap = cross_overlap_jackknife(a, b, qubits, DEFAULT_GROUPS)?;
    let p1 = purity_hamming_jackknife(a, qubits, DEFAULT_GROUPS)?;
    let p2 = purity_hamming_jackknife(b, qubits, DEFAULT_GROUPS)?;
    let denom = p1.value.max(p2.value);
    if !(denom > 0.0) {
        return Err(Error::NonPositive {
            quantity: "larger purity".into(),
            value: denom,
        });
    }
    let f = Jackknife::combine(&[&overlap, &p1, &p2], |v| v[0] / v[1].max(v[2]))?.estimate();
    Ok(FmaxEstimate {
        fmax: f,
        overlap: overlap.estimate(),
        purity_1: p1.estimate(),
        purity_2: p2.estimate(),
        out_of_range: !(-0.1..=1.1).contains(&f.value),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{acquire, acquire_on_device};
    use crate::ensembles::{clifford_table, EnsembleSpec};
    use crate::sim::prep::{ghz, random_mixed};
    use crate::sim::{
        global_depolarize, oracle_overlap, oracle_purity, DensityState, PureState, QuantumState,
    };

    #[test]
    fn pure_qubit_has_unit_expected_purity() {
        // exact expectation: average the per-setting term over the Clifford table
        let w = weights();
        let mut exact = 0.0;
        for el in clifford_table() {
            let col = [el.matrix[0][0], el.matrix[1][0]];
            let p = [col[0].norm_sqr(), col[1].norm_sqr()];
            let mut t = 0.0;
            for s in 0..2 {
                for r in 0..2 {
                    t += 2.0 * w[s ^ r] * p[s] * p[r];
                }
            }
            exact += t / clifford_table().len() as f64;
        }
        assert!((exact - 1.0).abs() < 1e-12);

        let st = QuantumState::Pure(PureState::basis(1, 0).unwrap());
        let ds = acquire(&st, &EnsembleSpec::clifford(1), 20_000, 4, 1).unwrap();
        let p = purity_hamming(&ds, &[0]).unwrap();
        assert!(p.contains(1.0, 4.0), "{p:?}");
    }

    #[test]
    fn mixed_and_ghz_purities() {
        let mm = QuantumState::Mixed(DensityState::maximally_mixed(3).unwrap());
        let ds = acquire(&mm, &EnsembleSpec::haar(3), 2000, 10, 2).unwrap();
        let p = purity_hamming(&ds, &[0, 2]).unwrap();
        assert!(p.contains(0.25, 4.0), "{p:?}");

        let g = QuantumState::Pure(ghz(4).unwrap());
        let ds = acquire(&g, &EnsembleSpec::clifford(4), 1000, 20, 2).unwrap();
        let p = purity_hamming(&ds, &[0, 1]).unwrap();
        assert!(p.contains(0.5, 4.0), "{p:?}");
        let one = acquire(&g, &EnsembleSpec::clifford(4), 10, 1, 2).unwrap();
        assert!(purity_hamming(&one, &[0]).is_err());
        assert!(purity_hamming(&ds, &[]).is_err());
    }

    #[test]
    fn overlap_is_symmetric_and_checks_settings() {
        let st = QuantumState::Mixed(random_mixed(3, 4).unwrap());
        let a = acquire(&st, &EnsembleSpec::clifford(3), 200, 5, 9).unwrap();
        let b = acquire_on_device(&st, &EnsembleSpec::clifford(3), 200, 5, 9, 1).unwrap();
        assert!(matches!(
            cross_overlap(&a, &a, &[0]),
            Err(Error::ProtocolViolation(_))
        ));
        let ab = cross_overlap(&a, &b, &[0, 1, 2]).unwrap();
        let ba = cross_overlap(&b, &a, &[0, 1, 2]).unwrap();
        assert_eq!(ab.value, ba.value);
        assert_eq!(ab.std_error, ba.std_error);

        let other = acquire(&st, &EnsembleSpec::clifford(3), 200, 5, 10).unwrap();
        assert!(matches!(
            cross_overlap(&a, &other, &[0]),
            Err(Error::ProtocolViolation(_))
        ));
        let haar = acquire_on_device(&st, &EnsembleSpec::haar(3), 200, 5, 9, 1).unwrap();
        assert!(matches!(
            cross_overlap(&a, &haar, &[0]),
            Err(Error::ProtocolViolation(_))
        ));
    }

    #[test]
    fn overlap_routes_agree_with_oracle() {
        let pure = QuantumState::Pure(ghz(3).unwrap());
        let noisy = QuantumState::Mixed(global_depolarize(&pure, 0.3).unwrap());
        let want = oracle_overlap(&pure, &noisy).unwrap();
        let a = acquire(&pure, &EnsembleSpec::clifford(3), 4000, 4, 21).unwrap();
        let b = acquire_on_device(&noisy, &EnsembleSpec::clifford(3), 4000, 4, 21, 1).unwrap();
        let h = cross_overlap(&a, &b, &[0, 1, 2]).unwrap();
        let s = cross_overlap_shadow(&a, &b, &[0, 1, 2]).unwrap();
        assert!(h.contains(want, 4.0), "{h:?} vs {want}");
        assert!(s.contains(want, 4.0), "{s:?} vs {want}");

        let f = fmax(&a, &b, &[0, 1, 2]).unwrap();
        let p2 = oracle_purity(&noisy, &[0, 1, 2]).unwrap();
        assert!(f.fmax.contains(want / p2.max(1.0), 4.0), "{f:?}");
        assert!(!f.out_of_range);
    }

    #[test]
    fn orthogonal_states_do_not_overlap() {
        let a_st = QuantumState::Pure(PureState::basis(2, 0).unwrap());
        let b_st = QuantumState::Pure(PureState::basis(2, 3).unwrap());
        let a = acquire(&a_st, &EnsembleSpec::haar(2), 3000, 4, 5).unwrap();
        let b = acquire_on_device(&b_st, &EnsembleSpec::haar(2), 3000, 4, 5, 2).unwrap();
        let o = cross_overlap(&a, &b, &[0, 1]).unwrap();
        assert!(o.contains(0.0, 4.0), "{o:?}");
    }
}
