use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use randmeas::dataset::hex_digest;
use randmeas::hamlearn::{learn_from_dataset, AnsatzBasis};
use randmeas::protocols::{dfe_estimate, dfe_plan, fmax, otoc_estimate, otoc_run};
use randmeas::shadows::predict::compatible_count;
use randmeas::shadows::{
    p3_ppt_test, predict_observable, predict_pauli_with, pt_moments, purity_shadow,
    reflection_invariant, renyi2_from, topological_entropy, Aggregation, EstimateWithError,
};
use randmeas::sim::{
    oracle_expectation, oracle_otoc_with, oracle_pt_moments, oracle_purity, oracle_reflection,
    Propagator, QuantumState, StatePrepSpec,
};
use randmeas::{acquire_on_device, MeasurementDataset};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{read_json_file, HamiltonianConfig, RunConfig};
use crate::error::{CliError, CliResult};
use crate::record::{write_csv, Input, ResultRecord};
use crate::{
    CompareArgs, DfeArgs, EstimateArgs, Estimator, HamlearnArgs, MeasureArgs, OracleArgs, OtocArgs,
    PurityRoute, Quantity,
};

fn params(args: &impl Serialize) -> Value {
    serde_json::to_value(args).expect("arguments are plain data")
}

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> CliResult<&'a T> {
    v.as_ref()
        .ok_or_else(|| CliError::Config(format!("{flag} is required here")))
}

/// Reads a dataset and hashes the exact bytes on disk.
fn load_dataset(path: &Path) -> CliResult<(MeasurementDataset, String)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let digest = hex_digest(&bytes);
    let ds = MeasurementDataset::read_from(&bytes[..])?;
    Ok((ds, digest))
}

fn prefix(l: usize) -> Vec<usize> {
    (0..l).collect()
}

pub fn measure(a: &MeasureArgs) -> CliResult<Vec<ResultRecord>> {
    let loaded = RunConfig::load(&a.config, &(&a.overrides).into())?;
    let cfg = &loaded.config;
    let (m, k, seed) = (cfg.m()?, cfg.k()?, cfg.seed()?);
    let out = required(&cfg.output, "an output path (config `output` or --out)")?;
    let state = cfg.prepare()?;
    let e = cfg.ensemble_for(state.n_qubits());
    let provenance = serde_json::to_value(cfg).expect("config is plain data");
    let ds = acquire_on_device(&state, &e, m, k, seed, cfg.device)?.with_state(provenance);
    let bytes = ds.to_bytes();
    std::fs::write(out, &bytes).map_err(|e| CliError::io(out, e))?;
    let digest = hex_digest(&bytes);
    eprintln!(
        "measured N={} M={m} K={k} -> {} ({} bytes, sha256 {digest})",
        ds.n_qubits(),
        out.display(),
        bytes.len()
    );
    let result =
        json!({ "dataset": Input::dataset("dataset", &digest, &ds), "bytes": bytes.len() });
    Ok(vec![ResultRecord::new(
        "measure",
        json!({ "config": cfg }),
        vec![Input::config(&loaded.digest)],
        result,
    )?])
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorFile {
    qubits: Vec<usize>,
    re: Vec<Vec<f64>>,
    #[serde(default)]
    im: Option<Vec<Vec<f64>>>,
}

fn read_operator(path: &Path) -> CliResult<(Vec<usize>, DMatrix<Complex64>)> {
    let (bytes, _) = read_json_file(path)?;
    let f: OperatorFile = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let d = f.re.len();
    let im = f.im.unwrap_or_else(|| vec![vec![0.0; d]; d]);
    if im.len() != d || f.re.iter().chain(&im).any(|row| row.len() != d) {
        return Err(CliError::Config(format!(
            "{}: operator must be square",
            path.display()
        )));
    }
    let op = DMatrix::from_fn(d, d, |r, c| Complex64::new(f.re[r][c], im[r][c]));
    Ok((f.qubits, op))
}

#[derive(Serialize)]
struct PurityRow {
    size: usize,
    purity: f64,
    purity_se: f64,
    renyi2: Option<f64>,
    renyi2_se: Option<f64>,
}

fn purity_via(
    route: PurityRoute,
    ds: &MeasurementDataset,
    qubits: &[usize],
) -> CliResult<EstimateWithError> {
    Ok(match route {
        PurityRoute::Shadow => purity_shadow(ds, qubits)?,
        PurityRoute::Hamming => randmeas::protocols::purity_hamming(ds, qubits)?,
    })
}

pub fn estimate(a: &EstimateArgs) -> CliResult<Vec<ResultRecord>> {
    let (full, digest) = load_dataset(&a.dataset)?;
    let ds = match &a.subsys {
        Some(q) => full.restrict(q)?,
        None => full.clone(),
    };
    let n = ds.n_qubits();
    if a.csv.is_some() && !a.sweep {
        return Err(CliError::Config("--csv needs --sweep".into()));
    }
    let route = match a.estimator {
        Estimator::PurityShadow => Some(PurityRoute::Shadow),
        Estimator::PurityHamming => Some(PurityRoute::Hamming),
        Estimator::Renyi2 => Some(a.purity),
        _ => None,
    };
    if a.sweep && route.is_none() {
        return Err(CliError::Config(
            "--sweep applies to purity and renyi2 estimators".into(),
        ));
    }
    let result = match (a.estimator, route) {
        (_, Some(route)) if a.sweep => {
            let rows = (1..=n)
                .map(|l| {
                    let p = purity_via(route, &ds, &prefix(l))?;
                    let s = renyi2_from(&p).ok();
                    Ok(PurityRow {
                        size: l,
                        purity: p.value,
                        purity_se: p.std_error,
                        renyi2: s.map(|s| s.value),
                        renyi2_se: s.map(|s| s.std_error),
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            if let Some(path) = &a.csv {
                write_csv(path, &rows)?;
            }
            eprintln!("{:?} sweep over {n} prefix subsystems", a.estimator);
            json!({ "sweep": rows })
        }
        (Estimator::Renyi2, Some(route)) => {
            let p = purity_via(route, &ds, &prefix(n))?;
            let s = renyi2_from(&p)?;
            eprintln!(
                "S2 = {:.6} ± {:.6} (purity {:.6})",
                s.value, s.std_error, p.value
            );
            json!({ "renyi2": s, "purity": p })
        }
        (_, Some(route)) => {
            let p = purity_via(route, &ds, &prefix(n))?;
            eprintln!("purity = {:.6} ± {:.6}", p.value, p.std_error);
            json!({ "purity": p })
        }
        (Estimator::Pauli, _) => {
            let p = required(&a.pauli, "--pauli")?;
            let how = match a.mom_batches {
                Some(batches) => Aggregation::MedianOfMeans { batches },
                None => Aggregation::Mean,
            };
            let e = predict_pauli_with(&ds, p, how)?;
            eprintln!("<{p}> = {:.6} ± {:.6}", e.value, e.std_error);
            json!({ "pauli": p, "estimate": e, "compatible": compatible_count(&ds, p) })
        }
        (Estimator::Observable, _) => {
            let (qubits, op) = read_operator(required(&a.op, "--op")?)?;
            let e = predict_observable(&ds, &qubits, &op)?;
            eprintln!("<O> = {:.6} ± {:.6}", e.value, e.std_error);
            json!({ "qubits": qubits, "estimate": e })
        }
        (Estimator::PtMoments, _) => {
            let e = pt_moments(&ds, required(&a.a, "--a")?, required(&a.b, "--b")?, a.order)?;
            eprintln!("p{} = {:.6} ± {:.6}", a.order, e.value, e.std_error);
            json!({ "order": a.order, "estimate": e })
        }
        (Estimator::P3Test, _) => {
            let v = p3_ppt_test(&ds, required(&a.a, "--a")?, required(&a.b, "--b")?, a.z)?;
            eprintln!(
                "p2^2 - p3 = {:.6} ({:.2} sigma), entangled: {}",
                v.violation.value, v.margin_sigmas, v.entangled
            );
            serde_json::to_value(v).expect("plain data")
        }
        (Estimator::Reflection, _) => {
            let r = reflection_invariant(&ds, required(&a.window, "--window")?)?;
            eprintln!(
                "Z = {:.6}, normalized {:.6} ± {:.6}",
                r.z.value, r.z_normalized.value, r.z_normalized.std_error
            );
            serde_json::to_value(r).expect("plain data")
        }
        (Estimator::TopoEntropy, _) => {
            let e = topological_entropy(
                &ds,
                required(&a.a, "--a")?,
                required(&a.b, "--b")?,
                required(&a.c, "--c")?,
            )?;
            eprintln!("S_topo = {:.6} ± {:.6}", e.value, e.std_error);
            json!({ "estimate": e })
        }
        (Estimator::PurityShadow | Estimator::PurityHamming | Estimator::Renyi2, None) => {
            unreachable!("purity estimators carry a route")
        }
    };
    Ok(vec![ResultRecord::new(
        "estimate",
        params(a),
        vec![Input::dataset("dataset", &digest, &full)],
        result,
    )?])
}

#[derive(Serialize)]
struct OracleRow {
    size: usize,
    purity: f64,
    renyi2: f64,
}

#[derive(Serialize)]
struct OtocRow {
    t: f64,
    otoc: f64,
    std_error: Option<f64>,
    oracle: Option<f64>,
}

pub fn oracle(a: &OracleArgs) -> CliResult<Vec<ResultRecord>> {
    let loaded = RunConfig::load(&a.config, &Default::default())?;
    let cfg = &loaded.config;
    if a.csv.is_some() && !(a.sweep || a.quantity == Quantity::Otoc) {
        return Err(CliError::Config(
            "--csv needs --sweep or the otoc quantity".into(),
        ));
    }
    let state = || -> CliResult<QuantumState> { cfg.prepare() };
    let result = match a.quantity {
        Quantity::Purity | Quantity::Renyi2 if a.sweep => {
            let s = state()?;
            let rows = (1..=s.n_qubits())
                .map(|l| {
                    let p = oracle_purity(&s, &prefix(l))?;
                    Ok(OracleRow {
                        size: l,
                        purity: p,
                        renyi2: -p.log2(),
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            if let Some(path) = &a.csv {
                write_csv(path, &rows)?;
            }
            json!({ "sweep": rows })
        }
        Quantity::Purity | Quantity::Renyi2 => {
            let s = state()?;
            let q = a.subsys.clone().unwrap_or_else(|| prefix(s.n_qubits()));
            let p = oracle_purity(&s, &q)?;
            eprintln!("purity {p:.10}, S2 {:.10}", -p.log2());
            json!({ "purity": p, "renyi2": -p.log2() })
        }
        Quantity::Expectation => {
            let p = required(&a.pauli, "--pauli")?;
            let v = oracle_expectation(&state()?, p)?;
            eprintln!("<{p}> = {v:.10}");
            json!({ "pauli": p, "value": v })
        }
        Quantity::PtMoment => {
            let v = oracle_pt_moments(
                &state()?,
                required(&a.a, "--a")?,
                required(&a.b, "--b")?,
                a.order,
            )?;
            eprintln!("p{} = {v:.10}", a.order);
            json!({ "order": a.order, "value": v })
        }
        Quantity::Reflection => {
            let v = oracle_reflection(&state()?, required(&a.window, "--window")?)?;
            eprintln!("tr(R rho) = {v:.10}");
            json!({ "value": v })
        }
        Quantity::Otoc => {
            let o = required(&cfg.otoc, "an `otoc` config section")?;
            let prop = Propagator::new(&cfg.hamiltonian()?)?;
            let rows = o
                .times
                .iter()
                .map(|&t| {
                    Ok(OtocRow {
                        t,
                        otoc: oracle_otoc_with(&prop, &o.w, &o.v, t)?,
                        std_error: None,
                        oracle: None,
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            if let Some(path) = &a.csv {
                write_csv(path, &rows)?;
            }
            json!({ "curve": rows })
        }
    };
    Ok(vec![ResultRecord::new(
        "oracle",
        json!({ "args": params(a), "config": cfg }),
        vec![Input::config(&loaded.digest)],
        result,
    )?])
}

pub fn compare(a: &CompareArgs) -> CliResult<Vec<ResultRecord>> {
    let (d1, h1) = load_dataset(&a.first)?;
    let (d2, h2) = load_dataset(&a.second)?;
    let q = a.subsys.clone().unwrap_or_else(|| prefix(d1.n_qubits()));
    let f = fmax(&d1, &d2, &q)?;
    eprintln!(
        "F_max = {:.6} ± {:.6} (overlap {:.6}, purities {:.6} / {:.6})",
        f.fmax.value, f.fmax.std_error, f.overlap.value, f.purity_1.value, f.purity_2.value
    );
    Ok(vec![ResultRecord::new(
        "compare",
        params(a),
        vec![
            Input::dataset("first", &h1, &d1),
            Input::dataset("second", &h2, &d2),
        ],
        f,
    )?])
}

/// A target file holds either a bare state spec or a full run config.
fn read_target(path: &Path) -> CliResult<(QuantumState, String)> {
    let (bytes, digest) = read_json_file(path)?;
    let v: Value = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| CliError::Config(format!("{}: {e}", path.display()));
    let state = if v.get("state").is_some() {
        let cfg: RunConfig = serde_json::from_value(v).map_err(bad)?;
        cfg.validate()?;
        cfg.prepare()?
    } else {
        serde_json::from_value::<StatePrepSpec>(v)
            .map_err(bad)?
            .prepare()?
    };
    Ok((state, digest))
}

pub fn dfe(a: &DfeArgs) -> CliResult<Vec<ResultRecord>> {
    let (ds, digest) = load_dataset(&a.dataset)?;
    let (target, target_digest) = read_target(&a.target)?;
    let QuantumState::Pure(psi) = target else {
        return Err(CliError::Config(
            "fidelity target must be a pure state".into(),
        ));
    };
    let plan = dfe_plan(&psi, &a.target.display().to_string(), a.samples, a.seed)?;
    let f = dfe_estimate(&plan, &ds)?;
    eprintln!(
        "F = {:.6} ± {:.6} from {} of {} sampled strings ({} distinct)",
        f.fidelity.value,
        f.fidelity.std_error,
        f.effective_samples,
        a.samples,
        plan.terms.len()
    );
    Ok(vec![ResultRecord::new(
        "dfe",
        params(a),
        vec![
            Input::dataset("dataset", &digest, &ds),
            Input {
                role: "target",
                digest: target_digest,
                detail: json!({}),
            },
        ],
        json!({ "estimate": f, "distinct_terms": plan.terms.len() }),
    )?])
}

pub fn otoc(a: &OtocArgs) -> CliResult<Vec<ResultRecord>> {
    let loaded = RunConfig::load(&a.config, &(&a.overrides).into())?;
    let cfg = &loaded.config;
    let o = required(&cfg.otoc, "an `otoc` config section")?;
    let h = cfg.hamiltonian()?;
    let e = cfg.ensemble_for(h.n_qubits);
    let run = otoc_run(&h, &o.w, &o.v, &o.times, &e, cfg.m()?, cfg.seed()?, o.mode)?;
    let bytes = serde_json::to_vec(&run).expect("run is plain data");
    let run_digest = hex_digest(&bytes);
    if let Some(out) = &cfg.output {
        std::fs::write(out, &bytes).map_err(|e| CliError::io(out, e))?;
    }
    let points = otoc_estimate(&run, o.estimator)?;
    let exact = if a.oracle {
        let prop = Propagator::new(&h)?;
        points
            .iter()
            .map(|p| Ok(Some(oracle_otoc_with(&prop, &o.w, &o.v, p.t)?)))
            .collect::<CliResult<Vec<_>>>()?
    } else {
        vec![None; points.len()]
    };
    if let Some(path) = &a.csv {
        let rows: Vec<OtocRow> = points
            .iter()
            .zip(&exact)
            .map(|(p, x)| OtocRow {
                t: p.t,
                otoc: p.otoc.value,
                std_error: Some(p.otoc.std_error),
                oracle: *x,
            })
            .collect();
        write_csv(path, &rows)?;
    }
    let p = json!({ "args": params(a), "config": cfg });
    let inputs = vec![
        Input::config(&loaded.digest),
        Input {
            role: "otoc_run",
            digest: run_digest,
            detail: json!({ "m": run.m, "seed": run.seed }),
        },
    ];
    points
        .iter()
        .zip(&exact)
        .map(|(pt, x)| {
            eprintln!(
                "t = {:<8} O = {:.6} ± {:.6}",
                pt.t, pt.otoc.value, pt.otoc.std_error
            );
            let mut r = serde_json::to_value(pt).expect("plain data");
            if let Some(x) = x {
                r["oracle"] = json!(x);
            }
            ResultRecord::new("otoc", p.clone(), inputs.clone(), r)
        })
        .collect()
}

fn parse_pair(s: &str, what: &str) -> CliResult<(usize, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [k, r] => match (k.parse(), r.parse()) {
            (Ok(k), Ok(r)) => Ok((k, r)),
            _ => Err(CliError::Config(format!("{what} {s:?} is not K:R"))),
        },
        _ => Err(CliError::Config(format!("{what} {s:?} is not K:R"))),
    }
}

fn ansatz(a: &HamlearnArgs, n: usize) -> CliResult<(AnsatzBasis, Option<String>)> {
    let (mut basis, digest) = match (&a.basis, a.ansatz.as_deref()) {
        (Some(path), _) => {
            let (bytes, digest) = read_json_file(path)?;
            let b: AnsatzBasis = serde_json::from_slice(&bytes)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            b.validate()?;
            (b, Some(digest))
        }
        (None, Some("ising")) => (AnsatzBasis::ising(n)?, None),
        (None, Some(s)) if s.starts_with("chain:") => {
            let (k, r) = parse_pair(&s["chain:".len()..], "ansatz")?;
            (AnsatzBasis::chain(n, k, r)?, None)
        }
        (None, Some(s)) => return Err(CliError::Config(format!("unknown ansatz {s:?}"))),
        (None, None) => return Err(CliError::Config("give --basis or --ansatz".into())),
    };
    if let Some(p) = &a.probes {
        let (k, r) = parse_pair(p, "probes")?;
        basis = basis.with_chain_probes(k, r);
    }
    Ok((basis, digest))
}

pub fn hamlearn(a: &HamlearnArgs) -> CliResult<Vec<ResultRecord>> {
    let (ds, digest) = load_dataset(&a.dataset)?;
    let (basis, basis_digest) = ansatz(a, ds.n_qubits())?;
    let k = learn_from_dataset(&ds, &basis, a.threshold)?;
    let mut inputs = vec![Input::dataset("dataset", &digest, &ds)];
    if let Some(d) = basis_digest {
        inputs.push(Input {
            role: "basis",
            digest: d,
            detail: json!({}),
        });
    }
    let mut result = serde_json::to_value(&k).expect("plain data");
    if let Some(path) = &a.truth {
        let (bytes, d) = read_json_file(path)?;
        let h: HamiltonianConfig = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let truth = basis.couplings(&h.build()?);
        result["cosine_similarity"] = json!(k.cosine_similarity(&truth));
        inputs.push(Input {
            role: "truth",
            digest: d,
            detail: json!({}),
        });
    }
    eprintln!(
        "{} terms, gap {:.3e}, ill-conditioned: {}",
        k.terms.len(),
        k.gap,
        k.ill_conditioned
    );
    for (p, c) in k.terms.iter().zip(&k.coefficients) {
        eprintln!("  {p} {c:+.6}");
    }
    Ok(vec![ResultRecord::new(
        "hamlearn",
        params(a),
        inputs,
        result,
    )?])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_parsing() {
        assert_eq!(parse_pair("4:3", "probes").unwrap(), (4, 3));
        assert!(parse_pair("4", "probes").is_err());
        assert!(parse_pair("a:b", "probes").is_err());
    }

    #[test]
    fn operator_file_must_be_square() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("op.json");
        std::fs::write(&p, r#"{"qubits":[0],"re":[[1,0],[0,-1]]}"#).unwrap();
        let (q, op) = read_operator(&p).unwrap();
        assert_eq!(q, [0]);
        assert_eq!(op[(1, 1)], Complex64::new(-1.0, 0.0));
        std::fs::write(&p, r#"{"qubits":[0],"re":[[1,0]]}"#).unwrap();
        assert!(matches!(read_operator(&p), Err(CliError::Config(_))));
    }
}
