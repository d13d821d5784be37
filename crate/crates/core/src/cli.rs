//! The `qfound` command line: run a scenario from a TOML config, or list
//! the registry.
//!
//! A config names one scenario, an explicit seed and its parameters:
//!
//! ```toml
//! scenario = "many_worlds_bs"
//! seed = 7
//! output_dir = "out"          # optional, default "."
//! formats = ["json", "csv"]   # optional, default both
//!
//! [params]                    # or a table named after the scenario
//! n = 10000
//! transmit_prob = 0.7
//! ```
//!
//! The summary `<scenario>.json` is always written; `csv` adds one
//! `<scenario>_<table>.csv` per table the scenario emits. Outputs depend only
//! on the config and seed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, ErrorKind, Result};
use crate::scenarios::{self, registry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::Config(format!("unknown format {other:?}"))),
        }
    }
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from(".")
}

// Unknown keys are rejected by hand: `deny_unknown_fields` does not combine
// with the flattened scenario-named section.
#[derive(Debug, Clone, PartialEq, Deserialize)]
struct RawConfig {
    scenario: String,
    seed: u64,
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
    #[serde(default = "default_formats")]
    formats: Vec<Format>,
    #[serde(default)]
    params: Option<toml::Table>,
    #[serde(flatten)]
    sections: toml::Table,
}

/// A validated run request.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub formats: Vec<Format>,
    pub params: Map<String, Value>,
}

impl RunConfig {
    /// Parses and validates a config: the scenario must be registered and
    /// its parameters must type-check.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let mut sections = raw.sections;
        let named = sections.remove(&raw.scenario);
        if let Some(key) = sections.keys().next() {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
        let table = match (raw.params, named) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(format!(
                    "parameters given both in [params] and [{}]",
                    raw.scenario
                )))
            }
            (Some(t), None) => t,
            (None, Some(toml::Value::Table(t))) => t,
            (None, Some(_)) => {
                return Err(Error::Config(format!("[{}] must be a table", raw.scenario)))
            }
            (None, None) => toml::Table::new(),
        };
        let params = match serde_json::to_value(&table) {
            Ok(Value::Object(m)) => m,
            _ => return Err(Error::Config("parameters must be a table".into())),
        };
        if raw.formats.is_empty() {
            return Err(Error::Config("formats must not be empty".into()));
        }
        let cfg = Self {
            scenario: raw.scenario,
            seed: raw.seed,
            output_dir: raw.output_dir,
            formats: raw.formats,
            params,
        };
        scenarios::find(&cfg.scenario)?.resolve(&cfg.params)?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }
}

/// Summary object and tables of a completed run, before anything is written.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: Value,
    pub tables: Vec<scenarios::Table>,
}

impl RunOutput {
    pub fn summary_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// Runs the scenario in memory.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput> {
    let out = scenarios::run_scenario(&cfg.scenario, &cfg.params, cfg.seed)?;
    let summary = json!({
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "params": out.params,
        "results": out.results,
        "version": env!("CARGO_PKG_VERSION"),
    });
    Ok(RunOutput {
        summary,
        tables: out.tables,
    })
}

/// Runs the scenario and writes its files, returning their paths.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let out = execute(cfg)?;
    fs::create_dir_all(&cfg.output_dir)?;
    let mut written = Vec::new();
    let summary_path = cfg.output_dir.join(format!("{}.json", cfg.scenario));
    fs::write(&summary_path, out.summary_text())?;
    written.push(summary_path);
    if cfg.formats.contains(&Format::Csv) {
        for t in &out.tables {
            let path = cfg.output_dir.join(format!("{}_{}.csv", cfg.scenario, t.name));
            fs::write(&path, &t.csv)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Registry as a plain-text table: name, anchor, summary and parameters.
pub fn list_text() -> String {
    let width = registry().iter().map(|s| s.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for s in registry() {
        out.push_str(&format!("{:width$}  {}  {}\n", s.name, s.anchor, s.summary));
        if let Value::Object(params) = s.defaults() {
            for (k, v) in params {
                out.push_str(&format!("{:width$}    {k} = {v}\n", ""));
            }
        }
    }
    out
}

/// Registry as JSON.
pub fn list_json() -> Value {
    Value::Array(
        registry()
            .iter()
            .map(|s| {
                json!({
                    "name": s.name,
                    "anchor": s.anchor,
                    "summary": s.summary,
                    "params": s.defaults(),
                })
            })
            .collect(),
    )
}

#[derive(Debug, Parser)]
#[command(name = "qfound", version, about = "Run quantum-foundations scenarios")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scenario described by a TOML config.
    Run {
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated output formats (json, csv).
        #[arg(long, value_delimiter = ',')]
        format: Option<Vec<String>>,
    },
    /// List registered scenarios.
    List {
        #[arg(long)]
        json: bool,
    },
}

pub fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Io => 4,
    }
}

/// Machine-readable error object printed on failure.
pub fn error_json(err: &Error) -> Value {
    json!({
        "error": {
            "code": err.code(),
            "kind": format!("{:?}", err.kind()).to_lowercase(),
            "message": err.to_string(),
        }
    })
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::List { json } => {
            if json {
                println!("{}", serde_json::to_string_pretty(&list_json()).expect("serializes"));
            } else {
                print!("{}", list_text());
            }
            Ok(())
        }
        Command::Run {
            config,
            seed,
            out,
            format,
        } => {
            let mut cfg = RunConfig::from_path(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            if let Some(format) = format {
                cfg.formats = format
                    .iter()
                    .map(|f| f.parse())
                    .collect::<Result<_>>()?;
            }
            for path in run(&cfg)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

/// Entry point shared by the binary: parse, dispatch, map errors to exit codes.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_json(&err));
            ExitCode::from(exit_code(err.kind()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_section_or_named_table() {
        let a = RunConfig::from_toml_str("scenario = \"uncertainty\"\nseed = 1\n[params]\nn_states = 5\n").unwrap();
        let b = RunConfig::from_toml_str("scenario = \"uncertainty\"\nseed = 1\n[uncertainty]\nn_states = 5\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.formats, default_formats());
    }

    #[test]
    fn config_errors() {
        for text in [
            "seed = 1\nscenario = \"nope\"\n",
            "scenario = \"ghz_parity\"\n",
            "scenario = \"ghz_parity\"\nseed = 1\nextra = 3\n",
            "scenario = \"uncertainty\"\nseed = 1\n[params]\nbogus = 1\n",
            "scenario = \"uncertainty\"\nseed = 1\nformats = [\"xml\"]\n",
            "scenario = \"uncertainty\"\nseed = 1\n[params]\nn_states = 1\n[uncertainty]\nn_states = 2\n",
        ] {
            let err = RunConfig::from_toml_str(text).unwrap_err();
            assert_eq!(err.kind(), ErrorKind::Config, "{text}");
        }
    }

    #[test]
    fn listing_mentions_every_scenario() {
        let text = list_text();
        for s in registry() {
            assert!(text.contains(s.name));
        }
    }
}
