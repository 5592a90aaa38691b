use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use overlap_core::analytics::{
    copy_overhead, crossover, fisher_information, tp_fisher_information, TheoryParams, TP_FISHER_SAMPLES,
};
use overlap_core::harness::run_benchmark;
use overlap_core::io::{emit_report, format_sig, parse_config, render_report, ReportFormat};
use overlap_core::oracle::{oracle_check, OracleCheckSettings};
use overlap_core::par::{configure_threads, Execution};
use overlap_core::tomography::{estimate_kappa_seeded, KAPPA_MUB};
use overlap_core::{Result, Strategy};

#[derive(Parser)]
#[command(name = "overlap", version, about = "Overlap estimation benchmarks and theory")]
struct Cli {
    /// Master seed; overrides the configuration file where one is read.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "OVERLAP_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Physics {
    #[arg(long, default_value_t = KAPPA_MUB)]
    kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
}

impl Physics {
    fn params(&self) -> TheoryParams {
        TheoryParams {
            kappa: self.kappa,
            gamma: self.gamma,
            eta: self.eta,
            dim: 2,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark campaign described by a configuration file.
    Benchmark {
        config: PathBuf,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the closed-form variance and Fisher information.
    Theory {
        #[arg(long)]
        strategy: Strategy,
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 900)]
        n: usize,
        #[command(flatten)]
        physics: Physics,
    },
    /// Print the overlap at which two strategies' variances cross.
    Crossover {
        #[arg(long)]
        a: Strategy,
        #[arg(long)]
        b: Strategy,
        #[command(flatten)]
        physics: Physics,
    },
    /// Print the pairs needed for precision `eps` with failure probability `prob`.
    Overhead {
        #[arg(long)]
        strategy: Strategy,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        prob: f64,
        #[command(flatten)]
        physics: Physics,
    },
    /// Compare exact small-instance moments with Monte Carlo runs.
    OracleCheck { config: PathBuf },
    /// Fit the tomography infidelity scale κ.
    KappaFit {
        #[arg(long, value_delimiter = ',', default_value = "300,900,3000")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 20)]
        repeats: usize,
    },
}

fn run(cli: Cli) -> Result<bool> {
    let seed = cli.seed;
    match cli.command {
        Command::Benchmark { config, format, out } => {
            let mut config = parse_config(&config)?;
            if let Some(s) = seed {
                config.seed = s;
            }
            let report = run_benchmark(&config)?;
            match out {
                Some(path) => emit_report(&report, format, &path)?,
                None => print!("{}", render_report(&report, format)?),
            }
        }
        Command::Theory { strategy, c, n, physics } => {
            let params = physics.params();
            let v = overlap_core::analytics::theory_variance(strategy, c, n, &params)?;
            println!("v = {}", format_sig(v));
            println!("Nv = {}", format_sig(n as f64 * v));
            let fi = match (strategy, seed) {
                (Strategy::Tp, Some(s)) => {
                    tp_fisher_information(c, n, params.kappa, TP_FISHER_SAMPLES, s, Execution::default())
                }
                _ => fisher_information(strategy, c, n, &params),
            };
            if let Ok(fi) = fi {
                println!("FI = {}", format_sig(fi));
            }
        }
        Command::Crossover { a, b, physics } => {
            println!("{}", format_sig(crossover(a, b, &physics.params())?));
        }
        Command::Overhead { strategy, c, eps, prob, physics } => {
            println!("{}", copy_overhead(strategy, c, eps, prob, &physics.params())?);
        }
        Command::OracleCheck { config } => {
            let mut config = parse_config(&config)?;
            if let Some(s) = seed {
                config.seed = s;
            }
            let settings = OracleCheckSettings {
                seed: config.seed,
                ..Default::default()
            };
            let results = oracle_check(&settings, &config.strategy_params(), Execution::default())?;
            let mut ok = true;
            for r in &results {
                ok &= r.passed;
                println!(
                    "{} {}: exact {} monte-carlo {} se {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.label,
                    format_sig(r.exact_mse),
                    format_sig(r.monte_carlo_mse),
                    format_sig(r.stderr)
                );
            }
            return Ok(ok);
        }
        Command::KappaFit { n, samples, repeats } => {
            let fit = estimate_kappa_seeded(&n, samples, repeats, seed.unwrap_or(0), Execution::default())?;
            for (n, (loss, se)) in fit.n_grid.iter().zip(&fit.infidelity) {
                println!("n = {n}: 1-F = {} ± {}", format_sig(*loss), format_sig(*se));
            }
            println!("kappa = {} ± {}", format_sig(fit.kappa), format_sig(fit.stderr));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads(cli.threads) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
