//! Seeded, replayable experiment campaigns persisted to a JSON-lines ledger.

pub mod config;
pub mod experiments;
pub mod ledger;
pub mod report;

use std::path::Path;
use std::time::Instant;

pub use config::{Experiment, ExperimentConfig, ExperimentKind, FunctionSpec, GrowthSystem};
pub use experiments::{execute, summarize};
pub use ledger::{Check, ExperimentRecord, Ledger, Outcome};
pub use report::{data_files, report, summary_text, write_data_files, Report};

use crate::{Error, Result};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "LACUNARY_THREADS";

/// Thread count requested through [`THREADS_ENV`], if set and valid.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Sizes the global rayon pool from `explicit` or [`THREADS_ENV`]; returns
/// the size applied, if any. Must run before any parallel work.
pub fn configure_threads(explicit: Option<usize>) -> Result<Option<usize>> {
    let Some(n) = explicit.filter(|&n| n > 0).or_else(threads_from_env) else {
        return Ok(None);
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    Ok(Some(n))
}

/// Executes `cfg`, appends the record to `ledger` and, if `data_dir` is
/// given, writes the CSV series there.
pub fn run_experiment(cfg: &ExperimentConfig, ledger: &Ledger, data_dir: Option<&Path>) -> Result<ExperimentRecord> {
    let started = Instant::now();
    let outcome = execute(cfg)?;
    let digest = cfg.digest();
    let record = ExperimentRecord {
        id: ledger.next_id(&digest)?,
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        kind: cfg.kind(),
        config_digest: digest,
        seed: cfg.seed,
        config: cfg.clone(),
        passed: outcome.passed(),
        samples: outcome.samples,
        summary: outcome.summary,
        checks: outcome.checks,
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    ledger.append(&record)?;
    if let Some(dir) = data_dir {
        write_data_files(&record, dir)?;
    }
    Ok(record)
}

/// Recomputes a record from its stored config and compares summaries and
/// checks bit for bit.
pub fn replay(record: &ExperimentRecord) -> Result<bool> {
    if record.config.digest() != record.config_digest {
        return Err(Error::Schema(format!("record {} config does not match its digest", record.id)));
    }
    let fresh = execute(&record.config)?;
    Ok(fresh.summary == record.summary && fresh.checks == record.checks)
}

/// Re-derives summary and checks from the stored per-sample data.
pub fn resummarize(record: &ExperimentRecord) -> Result<Outcome> {
    summarize(&record.config, record.samples.clone())
}
