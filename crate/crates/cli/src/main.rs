use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dpmix::rate_lab::{
    canonical_json, emit_report, run_rate_experiment, run_suite, theoretical_rate, MixingPriorKind,
    RateExperimentConfig, ReportFormat, Suite,
};

#[derive(Parser)]
#[command(name = "rate-lab", version, about = "Contraction-rate laboratory for Dirichlet mixtures of normals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the theoretical rate for the given smoothness and dimension.
    Rates {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        dim: usize,
        /// Covariance prior tail index, 1 or 2.
        #[arg(long, default_value_t = 2.0)]
        kappa: f64,
        /// Density tail exponent.
        #[arg(long)]
        tau: f64,
        /// Anisotropy weights, one per axis, summing to the dimension.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
        /// Use the finite mixture prior instead of the Dirichlet process.
        #[arg(long, requires = "tau1")]
        finite_mixture: bool,
        /// Tail exponent of the prior on the number of components.
        #[arg(long)]
        tau1: Option<f64>,
    },
    /// Run a rate experiment from a TOML or JSON config file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the report files.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "RATE_LAB_WORKERS", default_value_t = default_workers())]
        workers: usize,
        #[arg(long, value_enum, default_value_t = OutputFormat::Both)]
        format: OutputFormat,
    },
    /// Run a named property suite.
    Verify {
        #[arg(value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Lemma2,
    Theorem3,
    Sieve,
    Priors,
    Discretize,
    Divergences,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Suite {
        match s {
            SuiteArg::Lemma2 => Suite::Lemma2,
            SuiteArg::Theorem3 => Suite::Theorem3,
            SuiteArg::Sieve => Suite::Sieve,
            SuiteArg::Priors => Suite::Priors,
            SuiteArg::Discretize => Suite::Discretize,
            SuiteArg::Divergences => Suite::Divergences,
        }
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Rates {
            beta,
            dim,
            kappa,
            tau,
            alpha,
            finite_mixture,
            tau1,
        } => {
            let prior = match (finite_mixture, tau1) {
                (true, Some(tau1)) => MixingPriorKind::FiniteMixture { tau1 },
                (true, None) => bail!("--finite-mixture needs --tau1"),
                (false, _) => MixingPriorKind::DirichletProcess,
            };
            let r = theoretical_rate(beta, dim, kappa, tau, alpha.as_deref(), prior)?;
            println!("{}", canonical_json(&r)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Experiment {
            config,
            out,
            seed,
            workers,
            format,
        } => {
            let mut cfg = RateExperimentConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let result = run_rate_experiment(&cfg, workers)?;
            let formats: &[ReportFormat] = match format {
                OutputFormat::Csv => &[ReportFormat::Csv],
                OutputFormat::Json => &[ReportFormat::Json],
                OutputFormat::Both => &[ReportFormat::Csv, ReportFormat::Json],
            };
            for &f in formats {
                let path = emit_report(&result, f, &out)?;
                println!("wrote {}", path.display());
            }
            match &result.fit {
                Some(fit) => println!(
                    "slope {:.4} ({:.0}% CI [{:.4}, {:.4}]), expected {:.4}",
                    fit.slope,
                    100.0 * fit.ci_level,
                    fit.ci_low,
                    fit.ci_high,
                    result.expected_slope
                ),
                None => println!("too few successful cells to fit a slope"),
            }
            let failed = result.failed_cells();
            if failed > 0 {
                eprintln!("{failed} of {} cells failed", result.cells.len());
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite, seed } => {
            let report = run_suite(suite.into(), seed)?;
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
