//! `moran-esf` command-line interface.

mod args;
mod run;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("moran-esf: cannot start {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run::run(&cli.command) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("moran-esf: {e}");
            ExitCode::from(run::exit_code(&e))
        }
    }
}
