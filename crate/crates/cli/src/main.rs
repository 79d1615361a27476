//! `curate`: command-line front end for the curation pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 endpoint failure.

mod args;
mod commands;

use clap::error::ErrorKind;
use clap::Parser;

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let mut cfg = match commands::load_config(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => return report_failure(&e),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match commands::dispatch(&cli.command, &cfg) {
        Ok(()) => 0,
        Err(e) => report_failure(&e),
    }
}

fn report_failure(e: &commands::AppError) -> i32 {
    eprintln!("error: {}", e.message());
    e.exit_code()
}
