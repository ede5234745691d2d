use std::process::ExitCode;

use clap::Parser;
use hlmax_cli::{run, Cli, Overrides};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = Overrides::from_env(|k| std::env::var(k).ok()).and_then(|env| run(&cli, &env));
    match result {
        Ok(manifest) => {
            println!("{}: {}", cli.command.name(), manifest.summary);
            println!("artifacts in {}", cli.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("hlmax {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
