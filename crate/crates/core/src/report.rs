//! Experiment output: CSV tables and a JSON sidecar carrying the config,
//! version, wall time and the outcome of every in-run assertion.

use crate::error::Result;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Duration;

/// `git describe` output baked in at build time when available, else the
/// package version.
pub fn version() -> String {
    match option_env!("EULERFIELD_GIT_DESCRIBE") {
        Some(d) if !d.is_empty() => d.to_string(),
        _ => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

/// One checked claim of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Assertion {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// JSON sidecar of a run.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub command: String,
    pub version: String,
    /// Full configuration, echoed verbatim.
    pub config: serde_json::Value,
    pub wall_seconds: f64,
    pub assertions: Vec<Assertion>,
    pub results: serde_json::Value,
}

impl RunSummary {
    pub fn new(
        command: &str,
        config: &impl Serialize,
        results: &impl Serialize,
        assertions: Vec<Assertion>,
        wall: Duration,
    ) -> Result<Self> {
        Ok(RunSummary {
            command: command.to_string(),
            version: version(),
            config: serde_json::to_value(config)?,
            wall_seconds: wall.as_secs_f64(),
            assertions,
            results: serde_json::to_value(results)?,
        })
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

/// Writes `rows` as CSV with a header taken from the row type's fields.
/// Output depends only on the rows, so reruns are byte-identical.
pub fn write_csv<S: Serialize>(path: &Path, rows: impl IntoIterator<Item = S>) -> Result<usize> {
    let mut w = csv::Writer::from_path(path)?;
    let mut n = 0;
    for r in rows {
        w.serialize(r)?;
        n += 1;
    }
    w.flush()?;
    Ok(n)
}

/// `(replicate, Z, Z_tilde, max)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExceedRow {
    pub replicate: u64,
    #[serde(rename = "Z")]
    pub z: u64,
    #[serde(rename = "Z_tilde")]
    pub z_tilde: u64,
    pub max: f64,
}

impl From<&crate::exceed::ReplicateCounts> for ExceedRow {
    fn from(c: &crate::exceed::ReplicateCounts) -> Self {
        ExceedRow {
            replicate: c.replicate,
            z: c.z,
            z_tilde: c.z_tilde,
            max: c.max,
        }
    }
}

/// `(n, estimate, se_or_error, method)` for walk probabilities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WalkRow {
    pub n: usize,
    pub estimate: f64,
    pub se_or_error: f64,
    pub method: String,
}

/// `(replicate, h, value)` for field samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FieldRow {
    pub replicate: u64,
    pub h: f64,
    pub value: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        let rows = [
            ExceedRow {
                replicate: 0,
                z: 3,
                z_tilde: 1,
                max: 2.5,
            },
            ExceedRow {
                replicate: 1,
                z: 0,
                z_tilde: 0,
                max: -0.25,
            },
        ];
        assert_eq!(write_csv(&p, rows).unwrap(), 2);
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "replicate,Z,Z_tilde,max\n0,3,1,2.5\n1,0,0,-0.25\n");
    }

    #[test]
    fn csv_is_byte_identical_on_rewrite() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<FieldRow> = (0..50)
            .map(|i| FieldRow {
                replicate: i,
                h: i as f64 / 7.0,
                value: (i as f64).sin(),
            })
            .collect();
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        write_csv(&a, &rows).unwrap();
        write_csv(&b, &rows).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }

    #[test]
    fn summary_echoes_config_and_outcome() {
        #[derive(Serialize)]
        struct Cfg {
            n: usize,
            seed: u64,
        }
        let s = RunSummary::new(
            "max",
            &Cfg { n: 3, seed: 7 },
            &1.5,
            vec![
                Assertion::new("a", true, ""),
                Assertion::new("b", false, "x > y"),
            ],
            Duration::from_millis(1500),
        )
        .unwrap();
        assert!(!s.passed());
        assert_eq!(s.config["seed"], 7);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        s.write_json(&p).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(v["assertions"][1]["passed"], false);
        assert_eq!(v["wall_seconds"], 1.5);
        assert!(v["version"].as_str().unwrap().starts_with('v'));
    }
}
