//! File formats, provenance manifests, the bi-layer layout exporter and the
//! `mic` command-line driver for `mic-core`.

pub mod artifact;
pub mod args;
mod commands;
pub mod error;
pub mod formats;
pub mod layout;
pub mod sweep;

use std::ffi::OsString;

use clap::Parser;

pub use error::{CliError, EXIT_DATA, EXIT_NUMERICAL, EXIT_USAGE};

/// Parses `argv` (program name first), runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match args::Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();

    // the program path differs between installs; manifests record the tool name instead
    let args: Vec<String> = std::iter::once("mic".to_string())
        .chain(argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()))
        .collect();
    let outcome = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(pool) => pool.install(|| commands::dispatch(&cli.command, args)),
        Err(e) => Err(CliError::Usage(format!("cannot start {:?} worker threads: {e}", cli.threads))),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
