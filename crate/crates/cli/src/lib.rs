//! Command-line front end of `blockmt`.
//!
//! [`run`] is the whole program: it takes the argument vector, the relevant
//! environment and the standard streams, and returns the exit code. The
//! binary only forwards the process state to it.

mod args;
mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::io::{Read, Write};

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

/// Environment variables the program reads.
#[derive(Debug, Clone, Default)]
pub struct RunEnv {
    /// `BLOCKMT_THREADS`: default worker count.
    pub threads: Option<String>,
    /// `SOURCE_DATE_EPOCH`: manifest timestamp; wall-clock time when unset.
    pub source_date_epoch: Option<String>,
}

impl RunEnv {
    pub fn from_process() -> Self {
        Self {
            threads: std::env::var("BLOCKMT_THREADS").ok(),
            source_date_epoch: std::env::var("SOURCE_DATE_EPOCH").ok(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub(crate) enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl From<blockmt::Error> for CliError {
    fn from(e: blockmt::Error) -> Self {
        match e {
            blockmt::Error::Config(_) | blockmt::Error::Parse { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub(crate) type CliResult<T> = Result<T, CliError>;

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(
    args: I,
    env: &RunEnv,
    stdin: &mut dyn Read,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match parse(&argv) {
        Ok(cli) => cli,
        Err(Parsed::Exit(code, text, to_stdout)) => {
            let sink: &mut dyn Write = if to_stdout { stdout } else { stderr };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    match execute(cli, env, stdin) {
        Ok(text) => {
            if stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()).is_err() {
                return EXIT_DATA;
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.code()
        }
    }
}

enum Parsed {
    Exit(i32, String, bool),
}

fn clap_exit(e: clap::Error) -> Parsed {
    let to_stdout = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
    let code = if to_stdout { EXIT_OK } else { EXIT_USAGE };
    Parsed::Exit(code, e.render().to_string(), to_stdout)
}

// The config file is expanded into flags placed before the command-line
// flags, so that a later occurrence of the same flag wins.
fn parse(argv: &[OsString]) -> Result<Cli, Parsed> {
    let first = Cli::try_parse_from(argv).map_err(clap_exit)?;
    let Some(path) = first.config.clone() else {
        return Ok(first);
    };
    let expanded = config::expand(&path, argv)
        .map_err(|e| Parsed::Exit(e.code(), format!("error: {e}\n"), false))?;
    Cli::try_parse_from(&expanded).map_err(clap_exit)
}

fn thread_count(cli: &Cli, env: &RunEnv) -> CliResult<Option<usize>> {
    if let Some(n) = cli.threads {
        return Ok((n > 0).then_some(n));
    }
    match env.threads.as_deref().map(str::trim) {
        None | Some("") => Ok(None),
        Some(s) => s
            .parse::<usize>()
            .map(|n| (n > 0).then_some(n))
            .map_err(|_| usage(format!("BLOCKMT_THREADS must be a non-negative integer, got '{s}'"))),
    }
}

fn execute(cli: Cli, env: &RunEnv, stdin: &mut dyn Read) -> CliResult<String> {
    // Only `adjust` reads standard input, and only without --input.
    let input = match &cli.command {
        Command::Adjust(a) if a.input.as_ref().is_none_or(|p| p.as_os_str() == "-") => {
            let mut text = String::new();
            stdin
                .read_to_string(&mut text)
                .map_err(|e| usage(format!("cannot read standard input: {e}")))?;
            Some(text)
        }
        _ => None,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(&cli, env)? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Data(format!("cannot start worker threads: {e}")))?;
    let ctx = commands::Context {
        timestamp: output::timestamp(env)?,
        config: cli.config.clone(),
        stdin: input,
    };
    pool.install(|| match cli.command {
        Command::Adjust(a) => commands::adjust::run(&a, &ctx),
        Command::Sweep(a) => commands::sweep::run(&a, &ctx),
        Command::Example2(a) => commands::example2::run(&a, &ctx),
        Command::Connectome(a) => commands::connectome::run(&a, &ctx),
        Command::Generate(a) => commands::generate::run(&a, &ctx),
    })
}
