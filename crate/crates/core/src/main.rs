use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use proxflow::config::{parse_config_for, Command};
use proxflow::harness::{init_logging, run_experiment, HarnessError};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Flow,
    Pp,
    Newton,
    Lambda,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Flow => Command::Flow,
            Cmd::Pp => Command::Pp,
            Cmd::Newton => Command::Newton,
            Cmd::Lambda => Command::Lambda,
        }
    }
}

/// Run a proximal-method experiment described by a TOML config.
#[derive(Debug, Parser)]
#[command(name = "proxflow", version)]
struct Cli {
    command: Cmd,
    /// Experiment config (flat TOML).
    #[arg(long)]
    config: PathBuf,
    /// CSV output path; overrides `output_path` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: &Cli) -> Result<i32, HarnessError> {
    let text = std::fs::read_to_string(&cli.config).map_err(|e| {
        proxflow::config::ConfigError::Io(format!("{}: {e}", cli.config.display()))
    })?;
    let mut cfg = parse_config_for(&text, Some(cli.command.into()))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let env = run_experiment(&cfg, cli.out.as_deref())?;
    println!("{}", env.to_json_line());
    if !env.success() {
        eprintln!(
            "run did not succeed: status {}, max invariant violation {:e}",
            env.summary.status, env.summary.max_invariant_violation
        );
    }
    Ok(env.exit_code())
}

fn main() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
