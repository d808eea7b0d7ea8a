mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

#[derive(Debug)]
pub enum CliError {
    /// Invalid flags or config file. Exit code 2.
    Config(String),
    /// The analysis itself failed. Exit code 1.
    Analysis(String),
}

impl CliError {
    fn exit(&self) -> ExitCode {
        let (kind, message, code) = match self {
            CliError::Config(m) => ("config", m, 2),
            CliError::Analysis(m) => ("analysis", m, 1),
        };
        let body = serde_json::json!({ "error": { "kind": kind, "message": message } });
        eprintln!("{body}");
        ExitCode::from(code)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match config::Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return CliError::Config(e.to_string().trim().to_string()).exit(),
    };
    let result = config::resolve(cli).and_then(|cfg| {
        log::info!("running {}", cfg.command.name());
        commands::run(&cfg)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.exit(),
    }
}
