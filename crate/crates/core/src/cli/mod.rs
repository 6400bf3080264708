//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error
//! (including a missing prerequisite stage), 3 provider error.

pub mod config;
pub mod stages;

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::lexstats::{FrequencyTable, Tokenizer};
use crate::report::Format;
use config::RunConfig;
use stages::{Context, RunDir};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Provider(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Provider(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "formshift", version, about = "Transform clinical speech transcripts and measure what survives")]
pub struct Cli {
    /// Run configuration (`key = value` lines). Later stages default to the
    /// configuration recorded at ingest.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run directory holding the manifest and stage outputs.
    #[arg(long, global = true)]
    pub run_dir: Option<PathBuf>,
    /// Never touch the network; cached and mock responses only.
    #[arg(long, global = true)]
    pub offline: bool,
    /// Report formats: md, csv, json or all (comma separated).
    #[arg(long, global = true, default_value = "all")]
    pub format: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate the dataset; starts a run.
    Ingest,
    /// Generate the transformed corpora.
    Transform,
    /// Similarity of each transformation to the reference text.
    Similarity,
    /// Lexical and part-of-speech group comparisons.
    Lexical,
    /// Embedding classifier per transformation.
    Classify,
    /// Significance tests and correlation.
    Stats,
    /// Write report tables.
    Report,
    /// Every stage in order.
    Run,
    /// Build a word frequency table from text or JSONL files.
    FreqTable(FreqTableArgs),
}

#[derive(Debug, Args)]
pub struct FreqTableArgs {
    /// Plain-text files, or JSONL files with a `text` field per line.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value = "en")]
    pub language: String,
}

pub fn parse_formats(s: &str) -> Result<Vec<Format>, CliError> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        if part == "all" {
            return Ok(Format::ALL.to_vec());
        }
        let f: Format = part.parse().map_err(|e: String| CliError::Usage(e))?;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    Ok(out)
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let content = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    RunConfig::parse(&content).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Count words over the inputs and write a `word<TAB>probability` table.
pub fn freq_table(args: &FreqTableArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let tokenizer = Tokenizer::default();
    let mut counts: HashMap<String, u64> = HashMap::new();
    for path in &args.inputs {
        let file = fs::File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let jsonl = path.extension().is_some_and(|e| e == "jsonl");
        for (i, line) in io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let text = if jsonl {
                if line.trim().is_empty() {
                    continue;
                }
                let v: serde_json::Value = serde_json::from_str(&line)
                    .map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
                v.get("text")
                    .and_then(|t| t.as_str())
                    .ok_or_else(|| CliError::Data(format!("{}:{}: missing `text`", path.display(), i + 1)))?
                    .to_string()
            } else {
                line
            };
            for w in tokenizer.tokenize(&text) {
                *counts.entry(w).or_default() += 1;
            }
        }
    }
    let table = FrequencyTable::from_counts(counts, &args.language).map_err(|e| CliError::Data(e.to_string()))?;
    let mut buf = Vec::new();
    table.write_tsv(&mut buf).map_err(|e| CliError::Data(e.to_string()))?;
    if let Some(parent) = args.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Data(e.to_string()))?;
    }
    fs::write(&args.output, buf).map_err(|e| CliError::Data(format!("{}: {e}", args.output.display())))?;
    writeln!(out, "freq-table: {} words -> {}", table.len(), args.output.display()).map_err(|e| CliError::Data(e.to_string()))
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    if let Command::FreqTable(args) = &cli.command {
        return freq_table(args, out);
    }
    let formats = parse_formats(&cli.format)?;
    let run_dir = cli.run_dir.clone().ok_or_else(|| CliError::Usage("--run-dir is required".into()))?;
    let starts_run = matches!(cli.command, Command::Ingest | Command::Run);
    let config = match (&cli.config, starts_run) {
        (Some(path), true) => load_config(path)?,
        (None, true) => return Err(CliError::Usage("--config is required to start a run".into())),
        (Some(path), false) => {
            let cfg = load_config(path)?;
            stages::check_digest(&RunDir::new(&run_dir), &cfg)?;
            cfg
        }
        (None, false) => stages::manifest_config(&RunDir::new(&run_dir))?,
    };
    let mut ctx = Context::new(&run_dir, config, cli.offline)?;
    match cli.command {
        Command::Ingest => stages::ingest(&mut ctx, out),
        Command::Transform => stages::transform(&mut ctx, out),
        Command::Similarity => stages::similarity(&mut ctx, out),
        Command::Lexical => stages::lexical(&mut ctx, out),
        Command::Classify => stages::classify(&mut ctx, out),
        Command::Stats => stages::stats(&mut ctx, out),
        Command::Report => stages::report(&mut ctx, &formats, out),
        Command::Run => stages::run_all(&mut ctx, &formats, out),
        Command::FreqTable(_) => unreachable!("handled above"),
    }
}

/// Parse arguments, run, and map the outcome to an exit code. Messages go to
/// `out`; errors to `err`.
pub fn run_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // --help and --version are not errors.
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 1;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
