//! `potlab` command line: runs one experiment per TOML config.

mod config;
mod error;
mod output;
mod run;
mod source;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use potlab::constructions::CantorFamily;
use toml::{Table, Value};

use crate::config::{LoadedConfig, MeasureSource};
use crate::error::CliError;
use crate::output::{error_document, write_all, Provenance};

#[derive(Parser)]
#[command(name = "potlab", version, about = "Potential-theory experiments driven by TOML configs")]
struct Cli {
    #[command(subcommand)]
    action: Action,
}

#[derive(Subcommand)]
enum Action {
    /// Run the experiment a config describes and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config and estimate its size without computing anything.
    Validate { config: PathBuf },
}

fn output_dir(cfg: &LoadedConfig, out: Option<PathBuf>) -> PathBuf {
    match (out, &cfg.config.output_dir) {
        (Some(dir), _) => dir,
        (None, Some(dir)) => cfg.resolve(dir),
        (None, None) => cfg.base_dir.join("output").join(cfg.config.command.name()),
    }
}

fn estimate_row(item: &str, dim: usize, atoms: f64) -> Value {
    let mut t = Table::new();
    t.insert("item".into(), item.into());
    t.insert("dim".into(), Value::Integer(dim as i64));
    t.insert("atoms".into(), atoms.into());
    t.insert("memory_bytes".into(), (atoms * (dim + 1) as f64 * 8.0).into());
    Value::Table(t)
}

fn cantor_estimate(family: CantorFamily, generation: usize, item: &str, cfg: &LoadedConfig) -> Result<Value, CliError> {
    let src = MeasureSource::Cantor {
        family,
        generation,
        lift_to_3d: false,
    };
    let (dim, atoms) = source::estimate(&src, cfg)?;
    Ok(estimate_row(item, dim, atoms))
}

fn validate(cfg: &LoadedConfig) -> Result<String, CliError> {
    let c = &cfg.config;
    let mut rows = Vec::new();
    if let Some(src) = &c.measure {
        let (dim, atoms) = source::estimate(src, cfg)?;
        rows.push(estimate_row("measure", dim, atoms));
    }
    if let Some(s) = &c.cantor {
        rows.push(cantor_estimate(s.family, s.generation, "cantor", cfg)?);
    }
    if let Some(s) = &c.opnorm {
        for &g in &s.generations {
            rows.push(cantor_estimate(s.family, g, &format!("opnorm generation {g}"), cfg)?);
        }
    }
    if let Some(s) = &c.counterexample {
        // The probe builds only the blocks near the point, so the full
        // measure size is not a bound here.
        source::check_family(s.family)?;
    }
    let mut doc = Table::new();
    doc.insert("status".into(), "ok".into());
    doc.insert("command".into(), c.command.name().into());
    doc.insert("config_sha256".into(), cfg.hash.as_str().into());
    doc.insert("estimates".into(), Value::Array(rows));
    Ok(toml::to_string(&doc).expect("validation tables always serialise"))
}

fn report(err: &CliError, hash: Option<&str>, dir: Option<&Path>) -> ExitCode {
    let code = err.exit_code();
    let doc = error_document(code, err.kind(), &err.to_string(), hash);
    eprint!("{doc}");
    if let Some(dir) = dir {
        if std::fs::create_dir_all(dir).is_ok() {
            let _ = std::fs::write(dir.join("error.toml"), &doc);
        }
    }
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.action {
        Action::Validate { config } => match config::load(&config).and_then(|cfg| validate(&cfg)) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => report(&e, None, None),
        },
        Action::Run { config, out } => {
            let cfg = match config::load(&config) {
                Ok(cfg) => cfg,
                Err(e) => return report(&e, None, out.as_deref()),
            };
            let dir = output_dir(&cfg, out);
            let prov = Provenance {
                command: cfg.config.command.name(),
                seed: cfg.config.seed,
                config_hash: &cfg.hash,
            };
            let result = run::execute(&cfg).and_then(|a| write_all(&dir, &a, &prov).map_err(CliError::from));
            match result {
                Ok(()) => {
                    let _ = std::fs::remove_file(dir.join("error.toml"));
                    println!("{}", dir.join("summary.toml").display());
                    ExitCode::SUCCESS
                }
                Err(e) => report(&e, Some(&cfg.hash), Some(&dir)),
            }
        }
    }
}
