//! `pqfl`: run scenarios, check the masking protocol, print byte tables.
//!
//! Exit codes: 0 on success, 2 on a configuration error, 3 when a property
//! check fails, 1 for anything else.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pqfl_core::sim::{
    account_bytes, emit_metrics, run_experiment, scenario_param_count, setup_bytes, verify_masking, Aggregator,
    ConfigError, Mode, RoundContext, ScenarioConfig, SimError,
};

#[derive(Parser)]
#[command(name = "pqfl", version, about = "Byzantine-robust federated learning with post-quantum secure aggregation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write metrics files.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        aggregator: Option<Aggregator>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check mask cancellation and dropout recovery on random fixtures.
    VerifyMasking {
        #[arg(long, default_value_t = 5)]
        clients: usize,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the per-client byte table of a scenario.
    AccountBytes {
        #[arg(long)]
        scenario: PathBuf,
    },
}

/// `println!` that stops quietly when stdout is closed.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

enum Failure {
    Config(String),
    Property(String),
    Other(String),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => Failure::Config(c.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            mode,
            aggregator,
            threads,
        } => {
            let mut cfg = ScenarioConfig::load(&scenario)?;
            if let Some(s) = seed {
                cfg.federation.seed = s;
            }
            if let Some(m) = mode {
                cfg.federation.mode = m;
            }
            if let Some(a) = aggregator {
                cfg.federation.aggregator = a;
            }
            if let Some(t) = threads {
                cfg.federation.threads = t;
            }
            cfg.validate()?;
            let result = run_experiment(cfg)?;
            emit_metrics(&result, &out)?;
            let m = &result.final_metrics;
            say!(
                "rounds {}  accuracy {:.4}  f1 {:.4}  convergence {}  bytes {}",
                result.rounds.len(),
                m.accuracy,
                m.f1,
                result.convergence_round.map_or("unreached".to_string(), |r| r.to_string()),
                result.total_bytes
            );
            say!("privacy composition across rounds: not tracked");
            say!("wrote {}", out.display());
            Ok(())
        }
        Command::VerifyMasking {
            clients,
            dim,
            trials,
            seed,
        } => {
            let report = verify_masking(clients, dim, trials, seed, None).map_err(|e| Failure::Config(e.to_string()))?;
            match &report.first_failure {
                None => {
                    say!(
                        "pass: {trials} trials, {clients} clients, dim {dim}, up to {} dropouts",
                        report.max_dropouts
                    );
                    Ok(())
                }
                Some(f) => Err(Failure::Property(format!(
                    "fail: {} of {trials} trials; first at trial {} ({:?}), coordinate {}: expected {}, got {}",
                    report.failures, f.trial, f.check, f.coordinate, f.expected, f.got
                ))),
            }
        }
        Command::AccountBytes { scenario } => {
            let cfg = ScenarioConfig::load(&scenario)?;
            let m = scenario_param_count(&cfg)?;
            let row = account_bytes(
                &cfg,
                &RoundContext {
                    param_count: m,
                    cohort_size: cfg.federation.cohort,
                    participated: true,
                    dropped: false,
                },
            );
            say!("parameters      {m}");
            say!("model_down      {}", row.model_down);
            say!("masked_up       {}", row.masked_up);
            say!("kem_pk          {} (setup)", row.kem_pk);
            say!("kem_ct          {} (setup)", row.kem_ct);
            say!("shares          {}", row.shares);
            say!("per_round       {}", row.per_round());
            say!("federation_setup {}", setup_bytes(&cfg));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Property(m)) => {
            eprintln!("{m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
