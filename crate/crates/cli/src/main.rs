mod args;
mod commands;
mod config;
mod error;
mod inputs;
mod manifest;

use std::ffi::OsString;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;

use crate::args::Cli;
use crate::error::{usage, CliResult};
use crate::manifest::{digest, RunManifest};

fn main() {
    std::process::exit(run(std::env::args_os().collect()));
}

fn run(args: Vec<OsString>) -> i32 {
    let args = match config::expand(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> CliResult<()> {
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| usage(format!("cannot start {workers} workers: {e}")))?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis());
    let clock = Instant::now();
    let outcome = pool.install(|| commands::dispatch(&cli.command, workers))?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name().to_owned(),
        params: outcome.params,
        seed: outcome.seed,
        workers,
        inputs: outcome.inputs.iter().map(|p| digest(p)).collect::<CliResult<_>>()?,
        outputs: outcome.outputs.iter().map(|p| digest(p)).collect::<CliResult<_>>()?,
        details: outcome.details,
        started_unix_ms: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
    };
    catrank::data::save_json(&outcome.manifest, &manifest)?;
    Ok(())
}
