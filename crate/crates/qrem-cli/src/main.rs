mod commands;
mod config;
mod output;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::json;

use config::{default_out_dir, Cli, Cmd, ConfigError, OutputConfig, RunConfig};

fn fail(kind: &str, message: impl std::fmt::Display, code: u8) -> ExitCode {
    let err = json!({ "error": { "kind": kind, "message": message.to_string() } });
    println!("{err}");
    ExitCode::from(code)
}

fn resolve(cli: Cli) -> anyhow::Result<RunConfig> {
    let out_dir = cli.out_dir.clone();
    let name = cli.name.clone();
    let format = cli.format;
    let mut config = match cli.command {
        Cmd::Replay { manifest } => output::read_manifest(&manifest)?.config,
        other => {
            let command = other.into_command()?.expect("non-replay command");
            let stem = command.name().to_string();
            RunConfig { command, output: OutputConfig { dir: default_out_dir(), stem, format } }
        }
    };
    if let Some(dir) = out_dir {
        config.output.dir = dir;
    }
    if let Some(stem) = name {
        config.output.stem = stem;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim_end(), 2),
    };
    let config = match resolve(cli) {
        Ok(c) => c,
        Err(e) => return fail("config", format!("{e:#}"), 2),
    };
    if let Err(ConfigError(msg)) = config.validate() {
        return fail("config", msg, 2);
    }
    let start = Instant::now();
    let payload = match commands::run(&config.command) {
        Ok(p) => p,
        Err(e) => return fail("runtime", format!("{e:#}"), 1),
    };
    match output::write(&config, &payload, start.elapsed().as_secs_f64()) {
        Ok(path) => {
            println!("{}", json!({ "manifest": path, "flagged_rows": payload.flagged }));
            ExitCode::SUCCESS
        }
        Err(e) => fail("io", format!("{e:#}"), 1),
    }
}
