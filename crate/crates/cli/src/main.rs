//! Command-line front end: reproducible experiments over the stochastic
//! system x^t = (A + B^t) x^{t-1}.

mod args;
mod commands;
mod config;

use args::Args;
use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or unknown subcommand: exit 2 with usage.
    Usage(String),
    /// Config file problems: exit 2.
    Config(String),
    /// Numerical failure inside an operation: exit 3.
    Numerical(momentlyap::Error),
    Io(std::io::Error),
}

fn emit_error(kind: &str, message: &str) {
    let doc = json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{doc}");
}

fn dispatch(args: &Args) -> Result<(), CliError> {
    match args.subcommand.as_str() {
        "simulate" => commands::simulate(args),
        "lyapunov" => commands::lyapunov(args),
        "iterate" => commands::iterate(args),
        "critical" => commands::critical(args),
        "phase" => commands::phase(args),
        "bounds" => commands::bounds(args),
        "classify" => commands::classify_cmd(args),
        "ensemble" => commands::ensemble_cmd(args),
        "scalar" => commands::scalar(args),
        "report" => commands::report(args),
        "histogram" => commands::histogram(args),
        other => Err(CliError::Usage(format!("unknown subcommand {other:?}"))),
    }
}

fn main() {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let args = match Args::parse(&argv) {
        Ok(a) => a,
        Err(msg) => {
            emit_error("usage", &msg);
            eprintln!("{}", commands::USAGE);
            std::process::exit(2);
        }
    };

    // Worker count may change timing only, never results.
    if let Ok(Some(threads)) = args.get_parsed::<usize>("threads") {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }

    match dispatch(&args) {
        Ok(()) => {}
        Err(CliError::Usage(msg)) => {
            emit_error("usage", &msg);
            eprintln!("{}", commands::USAGE);
            std::process::exit(2);
        }
        Err(CliError::Config(msg)) => {
            emit_error("config", &msg);
            std::process::exit(2);
        }
        Err(CliError::Io(e)) => {
            emit_error("config", &format!("i/o failure: {e}"));
            std::process::exit(2);
        }
        Err(CliError::Numerical(e)) => {
            emit_error("numerical", &e.to_string());
            std::process::exit(3);
        }
    }
}
