//! `rmres/1` result records and plot-ready CSV tables.

use std::path::Path;

use randmeas::MeasurementDataset;
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const SCHEMA: &str = "rmres/1";
pub const TOOL: &str = concat!("randmeas ", env!("CARGO_PKG_VERSION"));

/// Provenance of one input file.
#[derive(Clone, Debug, Serialize)]
pub struct Input {
    pub role: &'static str,
    pub digest: String,
    #[serde(flatten)]
    pub detail: Value,
}

impl Input {
    pub fn config(digest: &str) -> Self {
        Input {
            role: "config",
            digest: digest.to_string(),
            detail: Value::Object(Default::default()),
        }
    }

    pub fn dataset(role: &'static str, digest: &str, ds: &MeasurementDataset) -> Self {
        let h = &ds.header;
        Input {
            role,
            digest: digest.to_string(),
            detail: serde_json::json!({
                "n": h.n,
                "m": h.m,
                "k": h.k,
                "ensemble": h.ensemble,
                "seed": h.seed,
                "device": h.device,
            }),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResultRecord {
    pub schema: &'static str,
    pub tool: &'static str,
    pub command: &'static str,
    pub params: Value,
    pub inputs: Vec<Input>,
    pub result: Value,
}

impl ResultRecord {
    pub fn new(
        command: &'static str,
        params: Value,
        inputs: Vec<Input>,
        result: impl Serialize,
    ) -> CliResult<Self> {
        Ok(ResultRecord {
            schema: SCHEMA,
            tool: TOOL,
            command,
            params,
            inputs,
            result: serde_json::to_value(result)
                .map_err(|e| CliError::Config(format!("result encoding: {e}")))?,
        })
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records hold only JSON-representable values")
    }
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Config(format!("{}: {other:?}", path.display())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_are_single_line_and_ordered() {
        let r = ResultRecord::new(
            "oracle",
            serde_json::json!({"z": 1, "a": [0, 1]}),
            vec![Input::config("ab")],
            serde_json::json!({"value": 0.5}),
        )
        .unwrap();
        let line = r.to_line();
        assert!(!line.contains('\n'));
        assert!(line.starts_with(r#"{"schema":"rmres/1","tool":"randmeas "#));
        assert!(line.contains(r#""params":{"a":[0,1],"z":1}"#));
        assert!(line.contains(r#""inputs":[{"role":"config","digest":"ab"}]"#));
    }
}
