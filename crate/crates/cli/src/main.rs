//! `bandlab`: command-line experiments on band-limited spaces.

mod commands;
mod config;
mod output;

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use serde_json::json;

use crate::config::{Config, ConfigError, KEYS};
use crate::output::Output;

const EXIT_CODES: &str = "\
Exit codes:
   0  success
   2  command-line usage error
   3  configuration error (bad file, unknown key, invalid value or manifold)
   4  input/output error
   5  manifold not implemented
   6  radius exceeds the admissible maximum
   7  bandwidth too small
   8  invalid argument
   9  singular point configuration
  10  numerical integrity violation
  11  degenerate Fekete candidate set
  12  family has no level at a requested L
  13  malformed family file

Errors are reported on stderr as one JSON object {\"error\", \"code\", \"message\"}.
Configuration keys may be set in a `key = value` file (--config); each key
is overridden by its flag, with underscores written as dashes.";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(std::io::Error),
    Core(bandlab::Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<bandlab::Error> for CliError {
    fn from(e: bandlab::Error) -> Self {
        match e {
            bandlab::Error::Io(io) => CliError::Io(io),
            bandlab::Error::ManifoldSyntax(_) => CliError::Config(e.to_string()),
            other => CliError::Core(other),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => f.write_str(m),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    fn kind_and_code(&self) -> (&'static str, u8) {
        use bandlab::Error as E;
        match self {
            CliError::Config(_) => ("config", 3),
            CliError::Io(_) => ("io", 4),
            CliError::Core(e) => match e {
                E::UnimplementedManifold(_) => ("unimplemented_manifold", 5),
                E::RadiusTooLarge { .. } => ("radius_too_large", 6),
                E::BandwidthTooSmall(_) => ("bandwidth_too_small", 7),
                E::InvalidArgument(_) => ("invalid_argument", 8),
                E::SingularConfiguration(_) => ("singular_configuration", 9),
                E::NumericalIntegrity(_) => ("numerical_integrity", 10),
                E::EnlargeCandidates(_) => ("enlarge_candidates", 11),
                E::MissingLevel(_) => ("missing_level", 12),
                E::FamilyFormat { .. } => ("family_format", 13),
                E::ManifoldSyntax(_) => ("config", 3),
                E::Io(_) => ("io", 4),
            },
        }
    }
}

fn cli() -> Command {
    let mut cmd = Command::new("bandlab")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Experiments on band-limited spaces of Laplacian eigenfunctions")
        .after_help(EXIT_CODES)
        .subcommand_required(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .global(true)
                .help("flat key = value configuration file"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .value_name("DIR")
                .global(true)
                .help("output directory [default: out]"),
        )
        .arg(
            Arg::new("print-config")
                .long("print-config")
                .action(ArgAction::SetTrue)
                .global(true)
                .help("print the effective configuration and exit"),
        );
    for (name, about) in commands::SUBCOMMANDS {
        cmd = cmd.subcommand(Command::new(*name).about(*about).after_help(EXIT_CODES));
    }
    for (key, help) in KEYS {
        cmd = cmd.arg(
            Arg::new(*key)
                .long(key.replace('_', "-"))
                .value_name("VALUE")
                .global(true)
                .allow_hyphen_values(true)
                .help(*help),
        );
    }
    cmd
}

fn load_config(matches: &ArgMatches) -> Result<Config, CliError> {
    let mut cfg = Config::default();
    if let Some(path) = matches.get_one::<String>("config") {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read config `{path}`: {e}")))?;
        cfg.apply_text(&text)?;
    }
    for (key, _) in KEYS {
        if let Some(v) = matches.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(name: &str, matches: &ArgMatches) -> Result<(), CliError> {
    let cfg = load_config(matches)?;
    if matches.get_flag("print-config") {
        print!("{}", cfg.to_text());
        return Ok(());
    }
    let dir = PathBuf::from(matches.get_one::<String>("out").map(String::as_str).unwrap_or("out"));
    let mut out = Output::default();
    let summary = commands::run(name, &cfg, &mut out)?;
    out.json("summary.json", &summary);
    out.text("config.txt", cfg.to_text());
    out.commit(&dir, name, &cfg.entries()).map_err(CliError::Io)?;
    println!("{}", serde_json::to_string(&summary).expect("json values serialize"));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let body = json!({"error": "usage", "code": 2, "message": e.to_string().trim()});
            eprintln!("{body}");
            return ExitCode::from(2);
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    match execute(name, sub) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = e.kind_and_code();
            eprintln!("{}", json!({"error": kind, "code": code, "message": e.to_string()}));
            ExitCode::from(code)
        }
    }
}
