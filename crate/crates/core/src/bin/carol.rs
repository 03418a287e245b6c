use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = carol::cli::Cli::parse();
    let stdout = std::io::stdout();
    match carol::cli::run(cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
