use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use stmi_cli::config::ExperimentConfig;
use stmi_cli::{experiments, output, suites};

/// Space-time mutual information experiments.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML or JSON configuration.
    Run {
        config: PathBuf,
        /// Overrides the configured output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run one acceptance suite (by number or name) or `all`.
    Verify { suite: String },
    /// List the acceptance suites.
    ListSuites,
}

/// Exit status for a configuration error.
const EXIT_CONFIG: u8 = 1;
/// A verification failed.
const EXIT_FAILED: u8 = 2;
/// `strict` was set and an optimizer did not converge.
const EXIT_NONCONVERGED: u8 = 3;

fn init_pool() -> usize {
    if let Some(n) = std::env::var("STMI_WORKERS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Fails only if a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    rayon::current_num_threads()
}

fn run(config: PathBuf, output_dir: Option<PathBuf>) -> anyhow::Result<u8> {
    let cfg = match ExperimentConfig::load(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(EXIT_CONFIG);
        }
    };
    let workers = init_pool();
    let start = Instant::now();
    let out = experiments::run(&cfg).with_context(|| format!("running {}", config.display()))?;
    let dir = output_dir.unwrap_or_else(|| cfg.output.clone());
    for p in output::write_outputs(&dir, &cfg, &out, start.elapsed(), workers)? {
        println!("wrote {}", p.display());
    }
    if !out.passed {
        eprintln!("verification failed; see {}", dir.join("report.json").display());
        return Ok(EXIT_FAILED);
    }
    if cfg.strict && !out.all_converged() {
        eprintln!("optimizer did not converge on every point");
        return Ok(EXIT_NONCONVERGED);
    }
    Ok(0)
}

fn verify(key: &str) -> u8 {
    init_pool();
    let ids: Vec<u32> = if key == "all" {
        suites::names().into_iter().map(|(i, _)| i).collect()
    } else if let Some(i) = suites::find(key) {
        vec![i]
    } else {
        eprintln!("error: unknown suite {key:?}; try `stmi list-suites`");
        return EXIT_CONFIG;
    };
    let mut ok = true;
    for id in ids {
        let outcome = suites::run(id).expect("listed suite");
        println!("{}", outcome.summary());
        ok &= outcome.passed;
    }
    if ok { 0 } else { EXIT_FAILED }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, output } => run(config, output).unwrap_or_else(|e| {
            eprintln!("error: {e:#}");
            EXIT_FAILED
        }),
        Command::Verify { suite } => verify(&suite),
        Command::ListSuites => {
            for (i, n) in suites::names() {
                println!("{i:>2}  {n}");
            }
            0
        }
    };
    ExitCode::from(code)
}
