//! `mia-llr`: score, evaluate, simulate and diagnose membership-inference
//! audits from the command line.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("MIA_LLR_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("MIA_LLR_THREADS must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        return Err("MIA_LLR_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("thread pool: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Score(a) => commands::score(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Diagnose(a) => commands::diagnose(&a),
        Command::Compare(a) => commands::compare(&a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
