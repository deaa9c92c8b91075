//! Reflection invariant and Rényi-entropy combinations.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::multicopy::purity_jackknife;
use super::snapshot::{build_snapshot, check_shadow_subsystem};
use super::stats::{jackknife_mean, EstimateWithError, Jackknife, DEFAULT_GROUPS};
use crate::dataset::MeasurementDataset;
use crate::error::{Error, Result};
use crate::linalg::C1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflectionEstimate {
    /// `tr(R_I ρ_I)`.
    pub z: EstimateWithError,
    /// `Z / √((P₂(ρ_{I₁}) + P₂(ρ_{I₂}))/2)` for the two window halves.
    pub z_normalized: EstimateWithError,
    pub purity_left: EstimateWithError,
    pub purity_right: EstimateWithError,
}

fn check_window(n: usize, window: &[usize]) -> Result<()> {
    if window.is_empty() || window.len() % 2 == 1 {
        return Err(Error::invalid(format!(
            "reflection window needs an even, nonzero number of qubits, got {}",
            window.len()
        )));
    }
    check_shadow_subsystem(n, window)
}

/// Operator `R|a_1,…,a_w⟩ = |a_w,…,a_1⟩` on a window of `w` qubits.
pub fn reflection_operator(w: usize) -> DMatrix<Complex64> {
    let d = 1usize << w;
    let rev = |a: usize| (0..w).fold(0usize, |acc, i| acc | (a >> i & 1) << (w - 1 - i));
    let mut r = DMatrix::zeros(d, d);
    for a in 0..d {
        r[(rev(a), a)] = C1;
    }
    r
}

fn mirrored_pairs(window: &[usize]) -> Vec<(usize, usize)> {
    let w = window.len();
    (0..w / 2).map(|i| (window[i], window[w - 1 - i])).collect()
}

pub(crate) fn reflection_jackknife(
    ds: &MeasurementDataset,
    window: &[usize],
    groups: usize,
) -> Result<Jackknife> {
    check_window(ds.n_qubits(), window)?;
    let pairs = mirrored_pairs(window);
    let terms: Vec<f64> = ds
        .records
        .par_iter()
        .map(|r| build_snapshot(r).swap_pairs_trace(&pairs))
        .collect();
    Ok(jackknife_mean(&terms, groups))
}

/// Estimates `Z_R` and its purity-normalized form on `window`, whose entry
/// `i` is mirrored onto entry `len-1-i`.
pub fn reflection_invariant(
    ds: &MeasurementDataset,
    window: &[usize],
) -> Result<ReflectionEstimate> {
    if ds.n_settings() < 3 {
        return Err(Error::invalid(
            "reflection invariant needs at least three settings",
        ));
    }
    let groups = DEFAULT_GROUPS.min(ds.n_settings());
    let z = reflection_jackknife(ds, window, groups)?;
    let half = window.len() / 2;
    let p1 = purity_jackknife(ds, &window[..half], groups)?;
    let p2 = purity_jackknife(ds, &window[half..], groups)?;
    let mean_purity = (p1.value + p2.value) / 2.0;
    if !(mean_purity > 0.0) {
        return Err(Error::NonPositive {
            quantity: "half-window purity".into(),
            value: mean_purity,
        });
    }
    let zn = Jackknife::combine(&[&z, &p1, &p2], |v| v[0] / ((v[1] + v[2]) / 2.0).sqrt())?;
    Ok(ReflectionEstimate {
        z: z.estimate(),
        z_normalized: zn.estimate(),
        purity_left: p1.estimate(),
        purity_right: p2.estimate(),
    })
}

/// `S_A + S_B + S_C − S_AB − S_BC − S_AC + S_ABC` from second Rényi entropies.
pub fn topological_entropy(
    ds: &MeasurementDataset,
    a: &[usize],
    b: &[usize],
    c: &[usize],
) -> Result<EstimateWithError> {
    let mut seen = vec![false; ds.n_qubits()];
    for &q in a.iter().chain(b).chain(c) {
        if q >= ds.n_qubits() || std::mem::replace(&mut seen[q], true) {
            return Err(Error::invalid(format!(
                "partitions overlap or exceed the register at qubit {q}"
            )));
        }
    }
    if a.is_empty() || b.is_empty() || c.is_empty() {
        return Err(Error::invalid("partitions must be nonempty"));
    }
    let join = |parts: &[&[usize]]| {
        parts
            .iter()
            .flat_map(|p| p.iter().copied())
            .collect::<Vec<_>>()
    };
    let regions: Vec<(Vec<usize>, f64)> = vec![
        (join(&[a]), 1.0),
        (join(&[b]), 1.0),
        (join(&[c]), 1.0),
        (join(&[a, b]), -1.0),
        (join(&[b, c]), -1.0),
        (join(&[a, c]), -1.0),
        (join(&[a, b, c]), 1.0),
    ];
    let groups = DEFAULT_GROUPS.min(ds.n_settings());
    let purities = regions
        .iter()
        .map(|(q, _)| purity_jackknife(ds, q, groups))
        .collect::<Result<Vec<_>>>()?;
    for (p, (q, _)) in purities.iter().zip(&regions) {
        if !(p.value > 0.0) {
            return Err(Error::NonPositive {
                quantity: format!("purity of {q:?}"),
                value: p.value,
            });
        }
    }
    let refs: Vec<&Jackknife> = purities.iter().collect();
    let signs: Vec<f64> = regions.iter().map(|(_, s)| *s).collect();
    let s = Jackknife::combine(&refs, |v| {
        v.iter().zip(&signs).map(|(p, s)| -s * p.log2()).sum()
    })?;
    Ok(s.estimate())
}
