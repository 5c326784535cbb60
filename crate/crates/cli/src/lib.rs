//! Command-line driver: reads a config, runs one pipeline, writes CSV tables
//! and a manifest.
//!
//! Exit codes: 0 success, 1 a suite criterion failed, 2 configuration error,
//! 3 numeric failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod suite;

use std::ffi::OsString;
use std::time::Instant;

use clap::Parser;

use config::{Command, Flags, ResolvedConfig};
use output::{real, PartSeed, RunManifest, Table};
use suite::{run_suite, SuiteOptions, CRITERIA};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<qrisk_core::Error> for CliError {
    fn from(e: qrisk_core::Error) -> Self {
        use qrisk_core::Error as E;
        match e {
            E::InvalidLevel(m) => CliError::config("delta", m),
            E::InvalidInput(m) => CliError::config("parameters", m),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    pub manifest: RunManifest,
    /// False when a suite criterion failed.
    pub passed: bool,
}

fn suite_tables(cfg: &ResolvedConfig) -> (Vec<Table>, Vec<PartSeed>, bool) {
    let results = run_suite(SuiteOptions {
        seed: cfg.seed,
        quick: cfg.quick,
    });
    let mut t = Table::new("suite", &["id", "criterion", "passed", "measured", "required", "seconds"]);
    for r in &results {
        println!("{}", r.line());
        t.push(vec![
            r.id.to_string(),
            r.name.to_string(),
            r.passed.to_string(),
            r.measured.clone(),
            r.required.clone(),
            real(r.seconds),
        ]);
    }
    let parts = CRITERIA
        .iter()
        .map(|(id, name)| PartSeed {
            name: format!("{id}: {name}"),
            seed: cfg.seed,
            stream: *id,
        })
        .collect();
    let passed = results.iter().all(|r| r.passed);
    // timings vary run to run; keep them out of the CSV
    for row in &mut t.rows {
        row[5] = String::new();
    }
    (vec![t], parts, passed)
}

/// Runs the resolved configuration and writes its outputs.
pub fn execute(cfg: &ResolvedConfig) -> Result<RunOutput, CliError> {
    let start = Instant::now();
    let work = || -> Result<(Vec<Table>, Vec<PartSeed>, bool), CliError> {
        Ok(match cfg.command {
            Command::Fit => (commands::fit(cfg)?, vec![], true),
            Command::Risk => (commands::risk(cfg)?, vec![], true),
            Command::Minimax => (commands::minimax(cfg)?, vec![], true),
            Command::Eigen => (commands::eigen(cfg)?, vec![], true),
            Command::VarEst => (commands::var_est(cfg)?, vec![], true),
            Command::Bounds => (commands::bounds(cfg)?, vec![], true),
            Command::Suite => suite_tables(cfg),
        })
    };
    let (tables, parts, passed) = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| CliError::config("workers", e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let mut manifest = RunManifest {
        command: cfg.command.name().to_string(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        files: Vec::new(),
        parts,
    };
    output::write_run(&cfg.out, &tables, &mut manifest)?;
    Ok(RunOutput {
        tables,
        manifest,
        passed,
    })
}

/// Parses `args`, runs, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let flags = match Flags::try_parse_from(args) {
        Ok(f) => f,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = ResolvedConfig::resolve(&flags).and_then(|cfg| execute(&cfg).map(|out| (cfg, out)));
    match result {
        Ok((cfg, out)) => {
            if cfg.command != Command::Suite {
                if let Some(t) = out.tables.first() {
                    print!("{}", String::from_utf8_lossy(&t.to_csv()));
                }
            }
            eprintln!("wrote {} files to {}", out.manifest.files.len() + 1, cfg.out.display());
            if out.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("qrisk: {e}");
            e.exit_code()
        }
    }
}
