//! Twin-experiment OTOC protocol: the same local random unitaries prepare the
//! initial state of two evolutions, one of which is kicked by `V`.
//!
//! For each setting `U` and computational state `s` the run stores
//! `⟨W(t)⟩₁ = ⟨s|U† W(t) U|s⟩` and `⟨W(t)⟩₂ = ⟨s|U† V W(t) V U|s⟩`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{sample_setting, EnsembleSpec};
use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::pauli::PauliString;
use crate::seed;
use crate::shadows::stats::{jackknife_mean, EstimateWithError, Jackknife, DEFAULT_GROUPS};
use crate::sim::{HamiltonianSpec, Propagator};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OtocMode {
    /// Exact expectation values.
    #[default]
    Expectation,
    /// Each expectation replaced by the mean of `k` simulated ±1 outcomes.
    Shots { k: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtocEstimator {
    /// `Σ_{s,s'} (-2)^{-D(s,s')} ⟨W⟩₁,s ⟨W⟩₂,s'` normalized by the same sum with `V = I`.
    #[default]
    Hamming,
    /// `mean_U[⟨W⟩₁⟨W⟩₂] / mean_U[⟨W⟩₁²]` from the all-zero initial state only.
    SingleStateRatio,
}

/// Paired expectations of one setting, indexed by the initial basis state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtocPair {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    /// Independent repeat of the first experiment (shot mode only), used for
    /// the normalization so that no shot enters squared.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_repeat: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtocTime {
    pub t: f64,
    pub pairs: Vec<OtocPair>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtocRun {
    pub hamiltonian: HamiltonianSpec,
    pub w: PauliString,
    pub v: PauliString,
    pub ensemble: EnsembleSpec,
    pub m: usize,
    pub seed: u64,
    pub mode: OtocMode,
    /// `(m, setting seed)`; the unitaries are regenerated from these.
    pub settings: Vec<(u64, u64)>,
    pub times: Vec<OtocTime>,
}

/// `U† A U` for `U = ⊗_q u_q`.
fn conjugate_local(a: &DMatrix<Complex64>, us: &[Mat2]) -> DMatrix<Complex64> {
    let d = a.nrows();
    let mut x = a.clone();
    for (q, u) in us.iter().enumerate() {
        let bit = 1usize << q;
        for i in (0..d).filter(|i| i & bit == 0) {
            let j = i | bit;
            for c in 0..d {
                // rows: U† from the left
                let (x0, x1) = (x[(i, c)], x[(j, c)]);
                x[(i, c)] = u[0][0].conj() * x0 + u[1][0].conj() * x1;
                x[(j, c)] = u[0][1].conj() * x0 + u[1][1].conj() * x1;
            }
        }
        for i in (0..d).filter(|i| i & bit == 0) {
            let j = i | bit;
            for r in 0..d {
                let (x0, x1) = (x[(r, i)], x[(r, j)]);
                x[(r, i)] = x0 * u[0][0] + x1 * u[1][0];
                x[(r, j)] = x0 * u[0][1] + x1 * u[1][1];
            }
        }
    }
    x
}

fn diagonal(m: &DMatrix<Complex64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, i)].re).collect()
}

fn sample_mean(expect: &[f64], k: usize, rng: &mut seed::Rng) -> Vec<f64> {
    expect
        .iter()
        .map(|&e| {
            let p_up = ((1.0 + e) / 2.0).clamp(0.0, 1.0);
            let ups = (0..k).filter(|_| rng.random::<f64>() < p_up).count();
            (2 * ups) as f64 / k as f64 - 1.0
        })
        .collect()
}

/// Simulates both experiments for every setting and time.
#[allow(clippy::too_many_arguments)]
pub fn otoc_run(
    h: &HamiltonianSpec,
    w: &PauliString,
    v: &PauliString,
    times: &[f64],
    e: &EnsembleSpec,
    m: usize,
    seed_value: u64,
    mode: OtocMode,
) -> Result<OtocRun> {
    let n = h.n_qubits;
    for p in [w, v] {
        if p.n_qubits() != n {
            return Err(Error::QubitMismatch {
                expected: n,
                found: p.n_qubits(),
            });
        }
        if p.sign() != Some(1) {
            return Err(Error::invalid(format!(
                "{p} must be an unsigned Hermitian Pauli"
            )));
        }
    }
    if e.n_qubits != n {
        return Err(Error::QubitMismatch {
            expected: n,
            found: e.n_qubits,
        });
    }
    if m == 0 {
        return Err(Error::invalid("otoc run needs at least one setting"));
    }
    if let OtocMode::Shots { k: 0 } = mode {
        return Err(Error::invalid("shot mode needs K >= 1"));
    }
    let prop = Propagator::new(h)?;
    let vm = v.to_matrix()?;
    let ops: Vec<(DMatrix<Complex64>, DMatrix<Complex64>)> = times
        .iter()
        .map(|&t| {
            let wt = prop.heisenberg(w, t)?;
            let kicked = &vm * &wt * &vm;
            Ok((wt, kicked))
        })
        .collect::<Result<_>>()?;
    let settings: Vec<_> = (0..m as u64)
        .map(|mi| sample_setting(e, seed_value, mi))
        .collect();
    // per setting, per time
    let per_setting: Vec<Vec<OtocPair>> = settings
        .par_iter()
        .map(|s| {
            ops.iter()
                .enumerate()
                .map(|(ti, (wt, kicked))| {
                    let first = diagonal(&conjugate_local(wt, s.unitaries()));
                    let second = diagonal(&conjugate_local(kicked, s.unitaries()));
                    match mode {
                        OtocMode::Expectation => OtocPair {
                            first,
                            second,
                            first_repeat: None,
                        },
                        OtocMode::Shots { k } => {
                            let mut rng = seed::rng(seed::derive_tagged(s.seed, 2, ti as u64));
                            OtocPair {
                                first_repeat: Some(sample_mean(&first, k, &mut rng)),
                                first: sample_mean(&first, k, &mut rng),
                                second: sample_mean(&second, k, &mut rng),
                            }
                        }
                    }
                })
                .collect()
        })
        .collect();
    let times = times
        .iter()
        .enumerate()
        .map(|(ti, &t)| OtocTime {
            t,
            pairs: per_setting.iter().map(|row| row[ti].clone()).collect(),
        })
        .collect();
    Ok(OtocRun {
        hamiltonian: h.clone(),
        w: *w,
        v: *v,
        ensemble: *e,
        m,
        seed: seed_value,
        mode,
        settings: settings.iter().map(|s| (s.m, s.seed)).collect(),
        times,
    })
}

/// `Σ_{s,s'} (-2)^{-D(s,s')} a_s b_{s'}` via a per-qubit kernel transform.
fn hamming_form(a: &[f64], b: &[f64]) -> f64 {
    let mut t = b.to_vec();
    let d = t.len();
    let mut bit = 1;
    while bit < d {
        for i in (0..d).filter(|i| i & bit == 0) {
            let (x0, x1) = (t[i], t[i | bit]);
            t[i] = x0 - 0.5 * x1;
            t[i | bit] = x1 - 0.5 * x0;
        }
        bit <<= 1;
    }
    a.iter().zip(&t).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtocPoint {
    pub t: f64,
    pub otoc: EstimateWithError,
    /// Set when the normalization is too small to divide by; `otoc` is then NaN.
    pub flagged: bool,
}

/// Per-time OTOC estimates with jackknife errors over settings.
pub fn otoc_estimate(run: &OtocRun, estimator: OtocEstimator) -> Result<Vec<OtocPoint>> {
    if run.m < 2 {
        return Err(Error::invalid("otoc estimate needs at least two settings"));
    }
    run.times
        .iter()
        .map(|time| {
            let terms: Vec<(f64, f64)> = time
                .pairs
                .iter()
                .map(|p| {
                    let norm_with = p.first_repeat.as_deref().unwrap_or(&p.first);
                    match estimator {
                        OtocEstimator::Hamming => (
                            hamming_form(&p.first, &p.second),
                            hamming_form(&p.first, norm_with),
                        ),
                        OtocEstimator::SingleStateRatio => {
                            (p.first[0] * p.second[0], p.first[0] * norm_with[0])
                        }
                    }
                })
                .collect();
            let num = jackknife_mean(
                &terms.iter().map(|t| t.0).collect::<Vec<_>>(),
                DEFAULT_GROUPS,
            );
            let den = jackknife_mean(
                &terms.iter().map(|t| t.1).collect::<Vec<_>>(),
                DEFAULT_GROUPS,
            );
            let flagged = den.value.abs() < 1e-12;
            let ratio = Jackknife::combine(&[&num, &den], |v| v[0] / v[1])?;
            let mut otoc = ratio.estimate();
            if flagged {
                otoc.value = f64::NAN;
            }
            Ok(OtocPoint {
                t: time.t,
                otoc,
                flagged,
            })
        })
        .collect()
}
