//! Randomized-measurement datasets and their line-delimited JSON format.
//!
//! Line 1 is the header, then one line per setting. Shots are hex strings
//! with bit 0 holding qubit 0.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::ensembles::{
    sample_setting, shot_seed, CliffordQubit, EnsembleKind, EnsembleSpec, LocalUnitarySetting,
};
use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::seed;
use crate::sim::{BornSampler, QuantumState};
use num_complex::Complex64;

pub const SCHEMA: &str = "rmds/1";
const TOOL: &str = concat!("randmeas ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema: String,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub ensemble: EnsembleKind,
    pub seed: u64,
    /// Index of the first record; nonzero only for split datasets.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub first_m: u64,
    /// Shot-stream tag; datasets of different devices share settings but not shots.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub device: u64,
    /// Original qubit labels after a restriction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubits: Option<Vec<usize>>,
    /// Provenance only; estimators never read it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Value>,
    pub tool: String,
}

fn is_zero(x: &u64) -> bool {
    *x == 0
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub setting: LocalUnitarySetting,
    pub shots: Vec<u64>,
}

impl MeasurementRecord {
    pub fn m(&self) -> u64 {
        self.setting.m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementDataset {
    pub header: DatasetHeader,
    pub records: Vec<MeasurementRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum QubitEntry {
    Clifford(CliffordQubit),
    Haar([f64; 8]),
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    m: u64,
    seed: u64,
    setting: Vec<QubitEntry>,
    shots: Vec<String>,
}

fn mat_to_floats(u: &Mat2) -> [f64; 8] {
    [
        u[0][0].re, u[0][0].im, u[0][1].re, u[0][1].im, u[1][0].re, u[1][0].im, u[1][1].re,
        u[1][1].im,
    ]
}

fn floats_to_mat(f: &[f64; 8]) -> Mat2 {
    [
        [Complex64::new(f[0], f[1]), Complex64::new(f[2], f[3])],
        [Complex64::new(f[4], f[5]), Complex64::new(f[6], f[7])],
    ]
}

fn hex_width(n: usize) -> usize {
    n.div_ceil(4).max(1)
}

/// Measures `k` shots in each of `m` settings drawn from `e`.
pub fn acquire(
    state: &QuantumState,
    e: &EnsembleSpec,
    m: usize,
    k: usize,
    master_seed: u64,
) -> Result<MeasurementDataset> {
    acquire_with(state, e, m, k, master_seed, |m| {
        sample_setting(e, master_seed, m)
    })
}

/// As [`acquire`] with independent shots for `device`; the settings are
/// unchanged, as a second platform replaying the same unitaries would see.
pub fn acquire_on_device(
    state: &QuantumState,
    e: &EnsembleSpec,
    m: usize,
    k: usize,
    master_seed: u64,
    device: u64,
) -> Result<MeasurementDataset> {
    acquire_impl(state, e, m, k, master_seed, device, |m| {
        sample_setting(e, master_seed, m)
    })
}

fn device_shot_seed(setting_seed: u64, device: u64) -> u64 {
    if device == 0 {
        shot_seed(setting_seed)
    } else {
        seed::derive_tagged(setting_seed, 1, device)
    }
}

/// As [`acquire`] with a caller-supplied setting generator (e.g. symmetric settings).
pub fn acquire_with<F>(
    state: &QuantumState,
    e: &EnsembleSpec,
    m: usize,
    k: usize,
    master_seed: u64,
    setting: F,
) -> Result<MeasurementDataset>
where
    F: Fn(u64) -> LocalUnitarySetting + Sync,
{
    acquire_impl(state, e, m, k, master_seed, 0, setting)
}

fn acquire_impl<F>(
    state: &QuantumState,
    e: &EnsembleSpec,
    m: usize,
    k: usize,
    master_seed: u64,
    device: u64,
    setting: F,
) -> Result<MeasurementDataset>
where
    F: Fn(u64) -> LocalUnitarySetting + Sync,
{
    if state.n_qubits() != e.n_qubits {
        return Err(Error::QubitMismatch {
            expected: e.n_qubits,
            found: state.n_qubits(),
        });
    }
    if m == 0 || k == 0 {
        return Err(Error::invalid("acquisition needs M >= 1 and K >= 1"));
    }
    let records = (0..m as u64)
        .into_par_iter()
        .map(|mi| {
            let s = setting(mi);
            let mut rotated = state.clone();
            rotated.apply_local(s.unitaries())?;
            let sampler = BornSampler::new(&rotated.probabilities());
            let mut rng = seed::rng(device_shot_seed(s.seed, device));
            let shots = (0..k).map(|_| sampler.sample(&mut rng) as u64).collect();
            Ok(MeasurementRecord { setting: s, shots })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasurementDataset {
        header: DatasetHeader {
            schema: SCHEMA.to_string(),
            n: e.n_qubits,
            m,
            k,
            ensemble: e.kind,
            seed: master_seed,
            first_m: 0,
            device,
            qubits: None,
            state: None,
            tool: TOOL.to_string(),
        },
        records,
    })
}

impl MeasurementDataset {
    pub fn n_qubits(&self) -> usize {
        self.header.n
    }

    pub fn n_settings(&self) -> usize {
        self.records.len()
    }

    pub fn shots_per_setting(&self) -> usize {
        self.header.k
    }

    pub fn ensemble(&self) -> EnsembleSpec {
        EnsembleSpec::new(self.header.ensemble, self.header.n)
    }

    pub fn with_state(mut self, state: Value) -> Self {
        self.header.state = Some(state);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.header;
        if h.schema != SCHEMA {
            return Err(Error::SchemaVersion {
                found: h.schema.clone(),
                expected: SCHEMA.to_string(),
            });
        }
        let inv = |msg: String| Err(Error::Invariant(msg));
        if h.n == 0 || h.n > 64 {
            return inv(format!("qubit count {} outside 1..=64", h.n));
        }
        if h.k == 0 {
            return inv("K must be at least 1".into());
        }
        if self.records.len() != h.m {
            return inv(format!(
                "header declares M = {}, found {} records",
                h.m,
                self.records.len()
            ));
        }
        if let Some(q) = &h.qubits {
            if q.len() != h.n {
                return inv("restriction labels do not match qubit count".into());
            }
        }
        for (i, r) in self.records.iter().enumerate() {
            let want = h.first_m + i as u64;
            if r.setting.m != want {
                return inv(format!(
                    "record {i} has setting index {}, expected {want}",
                    r.setting.m
                ));
            }
            if r.setting.n_qubits() != h.n {
                return inv(format!(
                    "setting {want} covers {} qubits",
                    r.setting.n_qubits()
                ));
            }
            if r.setting.kind() != h.ensemble {
                return inv(format!("setting {want} does not match the ensemble"));
            }
            if r.shots.len() != h.k {
                return inv(format!(
                    "setting {want} has {} shots, expected {}",
                    r.shots.len(),
                    h.k
                ));
            }
            if h.n < 64 && r.shots.iter().any(|&s| s >> h.n != 0) {
                return inv(format!("setting {want} has a shot wider than {} bits", h.n));
            }
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header).map_err(|e| Error::Malformed(e.to_string()))?;
        w.write_all(b"\n")?;
        let width = hex_width(self.header.n);
        for r in &self.records {
            let setting = match r.setting.clifford() {
                Some(c) => c.iter().map(|q| QubitEntry::Clifford(*q)).collect(),
                None => r
                    .setting
                    .unitaries()
                    .iter()
                    .map(|u| QubitEntry::Haar(mat_to_floats(u)))
                    .collect(),
            };
            let line = RecordLine {
                m: r.setting.m,
                seed: r.setting.seed,
                setting,
                shots: r.shots.iter().map(|s| format!("{s:0width$x}")).collect(),
            };
            serde_json::to_writer(&mut w, &line).map_err(|e| Error::Malformed(e.to_string()))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory");
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// SHA-256 of the serialized form, hex encoded.
    pub fn digest(&self) -> String {
        hex_digest(&self.to_bytes())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = Vec::new();
        let mut reader = r;
        loop {
            let mut line = String::new();
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                break;
            }
            if !line.ends_with('\n') {
                return Err(Error::Malformed(format!(
                    "line {} is truncated (no trailing newline)",
                    lines.len() + 1
                )));
            }
            line.pop();
            lines.push(line);
        }
        let Some(first) = lines.first() else {
            return Err(Error::Malformed("empty file".into()));
        };
        let raw: Value =
            serde_json::from_str(first).map_err(|e| Error::Malformed(format!("header: {e}")))?;
        match raw.get("schema").and_then(Value::as_str) {
            Some(SCHEMA) => {}
            Some(other) => {
                return Err(Error::SchemaVersion {
                    found: other.to_string(),
                    expected: SCHEMA.to_string(),
                })
            }
            None => return Err(Error::Malformed("header has no schema field".into())),
        }
        let header: DatasetHeader =
            serde_json::from_value(raw).map_err(|e| Error::Malformed(format!("header: {e}")))?;
        let mut records = Vec::with_capacity(lines.len() - 1);
        for (i, line) in lines[1..].iter().enumerate() {
            let lineno = i + 2;
            let rec: RecordLine = serde_json::from_str(line)
                .map_err(|e| Error::Malformed(format!("line {lineno}: {e}")))?;
            let setting = match header.ensemble {
                EnsembleKind::SingleQubitClifford => {
                    let mut qs = Vec::with_capacity(rec.setting.len());
                    for e in &rec.setting {
                        let QubitEntry::Clifford(c) = e else {
                            return Err(Error::Invariant(format!(
                                "line {lineno}: expected Clifford entries"
                            )));
                        };
                        let canon = CliffordQubit::from_index(c.index).map_err(|_| {
                            Error::Invariant(format!("line {lineno}: Clifford index {}", c.index))
                        })?;
                        if canon != *c {
                            return Err(Error::Invariant(format!(
                                "line {lineno}: basis/sign disagree with Clifford index {}",
                                c.index
                            )));
                        }
                        qs.push(*c);
                    }
                    LocalUnitarySetting::from_clifford(rec.m, rec.seed, qs)
                }
                EnsembleKind::SingleQubitHaar => {
                    let mut us = Vec::with_capacity(rec.setting.len());
                    for e in &rec.setting {
                        let QubitEntry::Haar(f) = e else {
                            return Err(Error::Invariant(format!(
                                "line {lineno}: expected unitary entries"
                            )));
                        };
                        us.push(floats_to_mat(f));
                    }
                    LocalUnitarySetting::from_unitaries(rec.m, rec.seed, us)
                        .map_err(|e| Error::Invariant(format!("line {lineno}: {e}")))?
                }
            };
            let shots = rec
                .shots
                .iter()
                .map(|s| {
                    u64::from_str_radix(s, 16)
                        .map_err(|e| Error::Malformed(format!("line {lineno}: shot {s:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            records.push(MeasurementRecord { setting, shots });
        }
        let ds = MeasurementDataset { header, records };
        ds.validate()?;
        Ok(ds)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let f = fs::File::open(path)?;
        Self::read_from(BufReader::new(f))
    }

    /// Projection onto `qubits`; entry `i` of the list becomes qubit `i`.
    pub fn restrict(&self, qubits: &[usize]) -> Result<MeasurementDataset> {
        if qubits.is_empty() {
            return Err(Error::invalid("cannot restrict to an empty subsystem"));
        }
        crate::sim::oracle::check_subsystem(self.header.n, qubits).or_else(|e| match e {
            Error::SizeCap { .. } => Ok(()),
            other => Err(other),
        })?;
        let mut header = self.header.clone();
        header.n = qubits.len();
        header.qubits = Some(match &self.header.qubits {
            Some(orig) => qubits.iter().map(|&q| orig[q]).collect(),
            None => qubits.to_vec(),
        });
        let records = self
            .records
            .iter()
            .map(|r| MeasurementRecord {
                setting: r.setting.restrict(qubits),
                shots: r
                    .shots
                    .iter()
                    .map(|&s| crate::linalg::gather_bits(s as usize, qubits) as u64)
                    .collect(),
            })
            .collect();
        Ok(MeasurementDataset { header, records })
    }

    /// Consecutive blocks of settings with sizes proportional to `fractions`.
    pub fn split(&self, fractions: &[f64]) -> Result<Vec<MeasurementDataset>> {
        if fractions.is_empty() || fractions.iter().any(|f| !(*f > 0.0) || !f.is_finite()) {
            return Err(Error::invalid("split fractions must be positive"));
        }
        let total: f64 = fractions.iter().sum();
        let m = self.records.len();
        let mut bounds = vec![0usize];
        let mut acc = 0.0;
        for f in fractions {
            acc += f;
            bounds.push(((acc / total) * m as f64).round() as usize);
        }
        *bounds.last_mut().expect("nonempty") = m;
        let mut out = Vec::with_capacity(fractions.len());
        for w in bounds.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::invalid("split produces an empty part"));
            }
            let mut header = self.header.clone();
            header.m = w[1] - w[0];
            header.first_m = self.header.first_m + w[0] as u64;
            out.push(MeasurementDataset {
                header,
                records: self.records[w[0]..w[1]].to_vec(),
            });
        }
        Ok(out)
    }

    /// Concatenates consecutive parts produced by [`split`](Self::split).
    pub fn concat(parts: &[MeasurementDataset]) -> Result<MeasurementDataset> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("nothing to concatenate"))?;
        let mut header = first.header.clone();
        let mut records = Vec::new();
        for p in parts {
            records.extend(p.records.iter().cloned());
        }
        header.m = records.len();
        let ds = MeasurementDataset { header, records };
        ds.validate()?;
        Ok(ds)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::Basis;
    use crate::sim::prep::{ghz, random_mixed};
    use crate::sim::PureState;

    fn small(kind: EnsembleKind) -> MeasurementDataset {
        let st = QuantumState::Mixed(random_mixed(3, 1).unwrap());
        acquire(&st, &EnsembleSpec::new(kind, 3), 20, 5, 99).unwrap()
    }

    #[test]
    fn zero_state_measured_in_z_gives_zero() {
        let st = QuantumState::Pure(PureState::basis(4, 0).unwrap());
        let ds = acquire(&st, &EnsembleSpec::clifford(4), 300, 20, 1).unwrap();
        let mut checked = 0;
        for r in &ds.records {
            let c = r.setting.clifford().unwrap();
            for (q, e) in c.iter().enumerate() {
                if e.basis == Basis::Z {
                    let want = if e.sign > 0 { 0 } else { 1 };
                    for s in &r.shots {
                        assert_eq!(s >> q & 1, want);
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn acquisition_is_reproducible_across_pools() {
        let st = QuantumState::Pure(ghz(5).unwrap());
        let e = EnsembleSpec::haar(5);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| acquire(&st, &e, 64, 7, 5).unwrap().to_bytes())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn single_setting_supported() {
        let st = QuantumState::Pure(ghz(2).unwrap());
        let ds = acquire(&st, &EnsembleSpec::clifford(2), 1, 10, 3).unwrap();
        assert_eq!(ds.n_settings(), 1);
        ds.validate().unwrap();
    }

    #[test]
    fn round_trip_both_ensembles() {
        for kind in [
            EnsembleKind::SingleQubitClifford,
            EnsembleKind::SingleQubitHaar,
        ] {
            let ds = small(kind)
                .with_state(serde_json::json!({"kind": "random_mixed", "n": 3, "seed": 1}));
            let bytes = ds.to_bytes();
            let back = MeasurementDataset::read_from(&bytes[..]).unwrap();
            assert_eq!(back, ds);
            assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn file_round_trip_and_digest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        let ds = small(EnsembleKind::SingleQubitClifford);
        ds.write(&p).unwrap();
        let back = MeasurementDataset::read(&p).unwrap();
        assert_eq!(back.digest(), ds.digest());
        assert_eq!(ds.digest(), hex_digest(&fs::read(&p).unwrap()));
    }

    #[test]
    fn read_errors_are_distinct() {
        let bytes = small(EnsembleKind::SingleQubitClifford).to_bytes();
        let text = String::from_utf8(bytes).unwrap();

        let truncated = &text[..text.len() - 10];
        assert!(matches!(
            MeasurementDataset::read_from(truncated.as_bytes()),
            Err(Error::Malformed(_))
        ));

        let lines: Vec<&str> = text.lines().collect();
        let dropped = lines[..lines.len() - 1].join("\n") + "\n";
        assert!(matches!(
            MeasurementDataset::read_from(dropped.as_bytes()),
            Err(Error::Invariant(_))
        ));

        let versioned = text.replacen("rmds/1", "rmds/9", 1);
        assert!(matches!(
            MeasurementDataset::read_from(versioned.as_bytes()),
            Err(Error::SchemaVersion { .. })
        ));

        let garbage = "{\"schema\":\"rmds/1\"\n";
        assert!(matches!(
            MeasurementDataset::read_from(garbage.as_bytes()),
            Err(Error::Malformed(_))
        ));
        assert!(matches!(
            MeasurementDataset::read_from(&b""[..]),
            Err(Error::Malformed(_))
        ));
    }

    #[test]
    fn restriction() {
        let ds = small(EnsembleKind::SingleQubitClifford);
        let all = ds.restrict(&[0, 1, 2]).unwrap();
        assert_eq!(all.records, ds.records);
        let one = ds.restrict(&[2]).unwrap();
        assert_eq!(one.n_qubits(), 1);
        assert!(one.records.iter().all(|r| r.shots.iter().all(|&s| s < 2)));
        for (a, b) in one.records.iter().zip(&ds.records) {
            for (x, y) in a.shots.iter().zip(&b.shots) {
                assert_eq!(*x, y >> 2 & 1);
            }
        }
        one.validate().unwrap();
        let rt = MeasurementDataset::read_from(&one.to_bytes()[..]).unwrap();
        assert_eq!(rt, one);
        assert!(ds.restrict(&[]).is_err());
        assert!(ds.restrict(&[3]).is_err());
    }

    #[test]
    fn split_and_concat() {
        let ds = small(EnsembleKind::SingleQubitHaar);
        let parts = ds.split(&[0.5, 0.5]).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].n_settings() + parts[1].n_settings(), 20);
        for p in &parts {
            p.validate().unwrap();
            assert_eq!(p.shots_per_setting(), 5);
            assert_eq!(p.n_qubits(), 3);
        }
        let last0 = parts[0].records.last().unwrap().m();
        assert!(parts[1].records.iter().all(|r| r.m() > last0));
        let rt = MeasurementDataset::read_from(&parts[1].to_bytes()[..]).unwrap();
        assert_eq!(rt, parts[1]);
        assert_eq!(MeasurementDataset::concat(&parts).unwrap(), ds);
    }
}
