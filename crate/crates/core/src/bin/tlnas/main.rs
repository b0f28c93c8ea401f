mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Exit statuses other than success.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numeric(_) => 4,
        }
    }
}

impl From<tlnas::Error> for Failure {
    fn from(e: tlnas::Error) -> Self {
        use tlnas::Error as E;
        let msg = e.to_string();
        match e {
            E::OutOfRange { .. } | E::Parse { .. } => Failure::Usage(msg),
            E::Io { .. }
            | E::Format { .. }
            | E::InsufficientData(_)
            | E::FixtureMiss { .. }
            | E::Json(_)
            | E::Csv(_)
            | E::Dimension { .. } => Failure::Data(msg),
            _ => Failure::Numeric(msg),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let file = match commands::ConfigFile::load(cli.config.as_deref()) {
        Ok(f) => f,
        Err(f) => return report(f),
    };
    let result = match cli.command {
        Command::Score(a) => commands::score(a, &file),
        Command::Search(a) => commands::search(a, &file),
        Command::Study(a) => commands::study(a, &file),
        Command::Baseline(a) => commands::baseline(a, &file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    let (Failure::Usage(m) | Failure::Data(m) | Failure::Numeric(m)) = &f;
    eprintln!("error: {m}");
    ExitCode::from(f.code())
}
