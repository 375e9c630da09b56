//! Command-line front end. `run` parses arguments, executes one command and
//! returns the process exit code: 0 on success, 1 for usage errors and 2 for
//! data errors.

pub mod args;
pub mod config;
pub mod stages;
pub mod synth;

use std::ffi::OsString;
use std::fmt;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use config::RunConfig;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// Environment variable holding the log filter, `warn` when unset.
pub const LOG_ENV: &str = "CONCEPT_REALM_LOG";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(concept_realm::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<concept_realm::Error> for CliError {
    fn from(e: concept_realm::Error) -> Self {
        CliError::Data(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
        }
    };
    init_logging();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.jobs {
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))?
            .install(|| dispatch(cli.command)),
        None => dispatch(cli.command),
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth(a) => synth::run(&a),
        Command::Ingest(a) => {
            stages::ingest(&RunConfig::resolve(&a)?)?;
            Ok(())
        }
        Command::SelectK(a) => {
            stages::select_k(&RunConfig::resolve(&a)?)?;
            Ok(())
        }
        Command::Train(a) => {
            stages::train(&RunConfig::resolve(&a)?)?;
            Ok(())
        }
        Command::Realm(a) => {
            stages::realm(&RunConfig::resolve(&a)?)?;
            Ok(())
        }
        Command::Analyze(a) => {
            stages::analyze(&RunConfig::resolve(&a)?)?;
            Ok(())
        }
        Command::Report(a) => {
            stages::report(&RunConfig::resolve(&a)?, None)?;
            Ok(())
        }
        Command::Pipeline(a) => {
            stages::pipeline(&RunConfig::resolve(&a)?)?;
            Ok(())
        }
    }
}
