use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use oppenheim_cli::config::{self, Experiment, Format, Overrides, RawConfig};
use oppenheim_cli::suite::{self, Scale};
use oppenheim_cli::{run_to_file, CliError};

#[derive(Parser)]
#[command(name = "oppenheim", version, about = "Experiments on values of inhomogeneous quadratic forms at integer points")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file and/or flags.
    Run {
        #[arg(long)]
        experiment: Option<Experiment>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        format: Option<Format>,
    },
    /// Run the acceptance suite and print one line per criterion.
    Verify {
        #[arg(long, default_value = "quick")]
        suite: Scale,
        /// Root for golden tables; written to `<DIR>/<date>/` (full suite default: `golden`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Compare fresh tables byte for byte against this directory.
        #[arg(long)]
        golden: Option<PathBuf>,
        /// Restrict to these criterion numbers (comma separated).
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
}

fn verify(scale: Scale, out: Option<PathBuf>, golden: Option<PathBuf>, only: &[String]) -> Result<bool, CliError> {
    let mut ok = true;
    if let Some(bad) = only.iter().find(|o| !suite::CHECKS.iter().any(|(id, _)| id == o)) {
        return Err(CliError::Validation(format!("unknown criterion {bad:?}")));
    }
    for (id, check) in suite::CHECKS {
        if !only.is_empty() && !only.iter().any(|o| o == id) {
            continue;
        }
        for o in suite::run_check(check, scale)? {
            println!("{o}");
            ok &= !o.is_blocking();
        }
    }
    let out = out.or_else(|| (scale == Scale::Full).then(|| PathBuf::from("golden")));
    if let Some(root) = out {
        let dir = root.join(chrono::Local::now().format("%Y-%m-%d").to_string());
        let files = suite::write_golden(&dir)?;
        println!("wrote {} golden tables to {}", files.len(), dir.display());
    }
    if let Some(g) = golden {
        let drift = suite::golden_drift(&g)?;
        for d in &drift {
            println!("DRIFT {d}");
        }
        if !drift.is_empty() {
            return Err(CliError::Drift(format!("{} golden tables differ from {}", drift.len(), g.display())));
        }
        println!("golden tables in {} match", g.display());
    }
    Ok(ok)
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Run { experiment, config, seed, output, format } => {
            let raw = match &config {
                Some(p) => config::load_raw(p)?,
                None => RawConfig::default(),
            };
            let written = run_to_file(raw, &Overrides { experiment, seed, output, format })?;
            eprintln!("wrote {}", written.output.path.display());
            Ok(true)
        }
        Command::Verify { suite, out, golden, only } => verify(suite, out, golden, &only),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| dispatch(cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
