//! Append-only JSON-lines ledger of experiment records.

use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use crate::{Error, Result};

/// One threshold comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    /// `"<="` or `">="`.
    pub relation: String,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, observed: f64, threshold: f64) -> Self {
        Self { name: name.into(), observed, relation: "<=".into(), threshold, passed: observed <= threshold }
    }

    pub fn at_least(name: impl Into<String>, observed: f64, threshold: f64) -> Self {
        Self { name: name.into(), observed, relation: ">=".into(), threshold, passed: observed >= threshold }
    }
}

/// Everything an experiment computes. Deterministic in (config, seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    /// Per-sample results; enough to recompute `summary`.
    pub samples: serde_json::Value,
    pub summary: serde_json::Map<String, serde_json::Value>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub id: String,
    pub timestamp: String,
    pub kind: ExperimentKind,
    pub config_digest: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub samples: serde_json::Value,
    pub summary: serde_json::Map<String, serde_json::Value>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub elapsed_ms: f64,
}

impl ExperimentRecord {
    pub fn outcome(&self) -> Outcome {
        Outcome { samples: self.samples.clone(), summary: self.summary.clone(), checks: self.checks.clone() }
    }
}

/// A ledger file. Records are only ever appended.
#[derive(Debug, Clone)]
pub struct Ledger {
    path: PathBuf,
}

impl Ledger {
    pub fn open(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// All records in file order. A missing file is an empty ledger.
    pub fn records(&self) -> Result<Vec<ExperimentRecord>> {
        let file = match fs::File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(
                serde_json::from_str(&line)
                    .map_err(|e| Error::Parse(format!("{}:{}: {e}", self.path.display(), i + 1)))?,
            );
        }
        Ok(out)
    }

    /// Record by full id or unique prefix.
    pub fn find(&self, id: &str) -> Result<ExperimentRecord> {
        let mut hits: Vec<ExperimentRecord> = self.records()?.into_iter().filter(|r| r.id.starts_with(id)).collect();
        match hits.len() {
            1 => Ok(hits.pop().unwrap()),
            0 => Err(Error::MissingRecord(id.into())),
            n => Err(Error::Domain(format!("id prefix {id:?} matches {n} records"))),
        }
    }

    /// Most recent record.
    pub fn last(&self) -> Result<ExperimentRecord> {
        self.records()?.pop().ok_or_else(|| Error::MissingRecord("(empty ledger)".into()))
    }

    /// Next record id for a config digest: digest prefix plus sequence number.
    pub fn next_id(&self, digest: &str) -> Result<String> {
        let seq = self.records()?.len() + 1;
        Ok(format!("{}-{seq:04}", &digest[..12.min(digest.len())]))
    }

    /// Appends one line with a single write.
    pub fn append(&self, record: &ExperimentRecord) -> Result<()> {
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        f.write_all(&line)?;
        f.sync_data()?;
        Ok(())
    }
}
