//! Run configuration: one JSON document per experiment.

use std::path::{Path, PathBuf};

use randmeas::dataset::hex_digest;
use randmeas::protocols::{OtocEstimator, OtocMode};
use randmeas::sim::{
    build_ising_chain, build_xy_hamiltonian, evolve, HamiltonianSpec, QuantumState, StatePrepSpec,
};
use randmeas::{EnsembleKind, EnsembleSpec, PauliString};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Hamiltonians either spelled out term by term or built from a named chain model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HamiltonianConfig {
    Model(ChainModel),
    Explicit(HamiltonianSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChainModel {
    /// `Σ_{i<j} J/|i-j|^α (X_i X_j + Y_i Y_j)/2`.
    Xy { n: usize, j: f64, alpha: f64 },
    /// `J Σ Z_i Z_{i+1} + h_x Σ X_i + h_z Σ Z_i`.
    Ising {
        n: usize,
        j: f64,
        hx: f64,
        #[serde(default)]
        hz: f64,
    },
}

impl HamiltonianConfig {
    pub fn build(&self) -> CliResult<HamiltonianSpec> {
        Ok(match self {
            HamiltonianConfig::Model(ChainModel::Xy { n, j, alpha }) => {
                build_xy_hamiltonian(*n, *j, *alpha)?
            }
            HamiltonianConfig::Model(ChainModel::Ising { n, j, hx, hz }) => {
                build_ising_chain(*n, *j, *hx, *hz)?
            }
            HamiltonianConfig::Explicit(h) => {
                h.validate()?;
                h.clone()
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OtocConfig {
    pub w: PauliString,
    pub v: PauliString,
    pub times: Vec<f64>,
    #[serde(default)]
    pub mode: OtocMode,
    #[serde(default)]
    pub estimator: OtocEstimator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Absent for runs that never prepare a state, such as OTOC sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StatePrepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<HamiltonianConfig>,
    /// Evolve the prepared state under `hamiltonian` for this time before measuring.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(default = "default_ensemble")]
    pub ensemble: EnsembleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub device: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub otoc: Option<OtocConfig>,
}

fn default_ensemble() -> EnsembleKind {
    EnsembleKind::SingleQubitClifford
}

fn is_zero(x: &u64) -> bool {
    *x == 0
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub ensemble: Option<EnsembleKind>,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub device: Option<u64>,
    pub output: Option<PathBuf>,
}

/// A parsed configuration with the digest of the file it came from.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub digest: String,
}

pub fn read_json_file(path: &Path) -> CliResult<(Vec<u8>, String)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let digest = hex_digest(&bytes);
    Ok((bytes, digest))
}

impl RunConfig {
    pub fn load(path: &Path, o: &Overrides) -> CliResult<LoadedConfig> {
        let (bytes, digest) = read_json_file(path)?;
        let mut config: RunConfig = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.apply(o);
        config.validate()?;
        Ok(LoadedConfig { config, digest })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(e) = o.ensemble {
            self.ensemble = e;
        }
        if o.m.is_some() {
            self.m = o.m;
        }
        if o.k.is_some() {
            self.k = o.k;
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if let Some(d) = o.device {
            self.device = d;
        }
        if o.output.is_some() {
            self.output.clone_from(&o.output);
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.m == Some(0) {
            return Err(CliError::Config("m must be at least 1".into()));
        }
        if self.k == Some(0) {
            return Err(CliError::Config("k must be at least 1".into()));
        }
        if self.time.is_some() && self.hamiltonian.is_none() {
            return Err(CliError::Config(
                "time is set but no hamiltonian is given".into(),
            ));
        }
        Ok(())
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.seed.ok_or_else(|| {
            CliError::Config("seed is required; no default is derived from the clock".into())
        })
    }

    pub fn m(&self) -> CliResult<usize> {
        self.m
            .ok_or_else(|| CliError::Config("m is required".into()))
    }

    pub fn k(&self) -> CliResult<usize> {
        self.k
            .ok_or_else(|| CliError::Config("k is required".into()))
    }

    pub fn hamiltonian(&self) -> CliResult<HamiltonianSpec> {
        self.hamiltonian
            .as_ref()
            .ok_or_else(|| CliError::Config("a hamiltonian is required".into()))?
            .build()
    }

    /// The prepared state, evolved when `time` is set.
    pub fn prepare(&self) -> CliResult<QuantumState> {
        let s = self
            .state
            .as_ref()
            .ok_or_else(|| CliError::Config("a state is required".into()))?
            .prepare()?;
        match self.time {
            Some(t) => Ok(evolve(&s, &self.hamiltonian()?, t)?),
            None => Ok(s),
        }
    }

    pub fn ensemble_for(&self, n: usize) -> EnsembleSpec {
        EnsembleSpec::new(self.ensemble, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> CliResult<RunConfig> {
        let c: RunConfig = serde_json::from_str(s).map_err(|e| CliError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    #[test]
    fn named_models_and_overrides() {
        let c = parse(
            r#"{"state":{"kind":"neel","n":4},"hamiltonian":{"model":"xy","n":4,"j":1.0,"alpha":1.2},
                "time":0.5,"m":10,"k":2,"seed":3}"#,
        )
        .unwrap();
        assert_eq!(c.hamiltonian().unwrap().n_qubits, 4);
        assert_eq!(c.ensemble, EnsembleKind::SingleQubitClifford);
        let mut c2 = c.clone();
        c2.apply(&Overrides {
            m: Some(20),
            seed: Some(9),
            ensemble: Some(EnsembleKind::SingleQubitHaar),
            ..Default::default()
        });
        assert_eq!((c2.m, c2.k, c2.seed), (Some(20), Some(2), Some(9)));
        assert_eq!(c2.ensemble, EnsembleKind::SingleQubitHaar);
        assert!(c.prepare().unwrap().n_qubits() == 4);
    }

    #[test]
    fn explicit_hamiltonian_parses() {
        let c = parse(
            r#"{"state":{"kind":"ghz","n":2},"hamiltonian":{"n_qubits":2,"terms":[{"coeff":1.0,"pauli":"ZZ"}]},"seed":1}"#,
        )
        .unwrap();
        assert_eq!(c.hamiltonian().unwrap().terms.len(), 1);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(parse(r#"{"state":{"kind":"ghz","n":2},"m":0,"k":1,"seed":1}"#).is_err());
        assert!(parse(r#"{"state":{"kind":"ghz","n":2},"m":1,"k":0,"seed":1}"#).is_err());
        assert!(parse(r#"{"state":{"kind":"ghz","n":2},"time":1.0,"seed":1}"#).is_err());
        assert!(parse(r#"{"state":{"kind":"ghz","n":2},"bogus":1}"#).is_err());
        let c = parse(r#"{"state":{"kind":"ghz","n":2},"m":1,"k":1}"#).unwrap();
        assert!(matches!(c.seed(), Err(CliError::Config(_))));
    }
}
