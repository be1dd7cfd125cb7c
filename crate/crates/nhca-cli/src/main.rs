mod args;
mod commands;
mod error;
mod output;
mod validate;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use serde::Serialize;
use serde_json::Value;

use args::{Cli, Command, Global, HaarCmd, MeasureCmd};
use commands::Ctx;
use error::{CliError, Result};

#[derive(Serialize)]
struct RunConfig<'a, A: Serialize> {
    command: &'a str,
    #[serde(flatten)]
    args: &'a A,
    out: Option<&'a std::path::Path>,
    threads: usize,
    seed: u64,
}

fn config_of<A: Serialize>(command: &str, args: &A, global: &Global, threads: usize) -> Value {
    serde_json::to_value(RunConfig {
        command,
        args,
        out: global.out.as_deref(),
        threads,
        seed: global.seed,
    })
    .expect("argument types serialize")
}

fn run(cli: &Cli) -> Result<Value> {
    let threads = match cli.global.threads {
        Some(0) => return Err(CliError::Usage("--threads must be positive".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let name = cli.command.name();
    let ctx = |config: Value| Ctx {
        command: name,
        config,
        global: &cli.global,
    };
    let g = &cli.global;
    match &cli.command {
        Command::Measure { action: MeasureCmd::Gen(a) } => commands::measure_gen(&ctx(config_of(name, a, g, threads)), a),
        Command::Measure { action: MeasureCmd::Check(a) } => {
            commands::measure_check(&ctx(config_of(name, a, g, threads)), a)
        }
        Command::Haar { action: HaarCmd::Check(a) } => commands::haar_check(&ctx(config_of(name, a, g, threads)), a),
        Command::Scan(a) => commands::scan(&ctx(config_of(name, a, g, threads)), a),
        Command::Compact(a) => commands::compact(&ctx(config_of(name, a, g, threads)), a),
        Command::Bump(a) => commands::bump(&ctx(config_of(name, a, g, threads)), a),
        Command::Para(a) => commands::para(&ctx(config_of(name, a, g, threads)), a),
        Command::Collar(a) => commands::collar(&ctx(config_of(name, a, g, threads)), a),
        Command::Buckets(a) => commands::buckets(&ctx(config_of(name, a, g, threads)), a),
        Command::Validate(a) => Ok(serde_json::to_value(validate::validate(a)).expect("report serializes")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("values serialize"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
