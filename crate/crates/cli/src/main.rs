use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = agvc_cli::Cli::parse();
    match agvc_cli::run(&cli) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(agvc_cli::exit_code(&err))
        }
    }
}
