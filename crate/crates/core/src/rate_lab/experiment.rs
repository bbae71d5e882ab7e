use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::RateExperimentConfig;
use super::formula::{theoretical_rate, MixingPriorKind, RateFormula};
use super::registry::lookup_density;
use super::report::fingerprint;
use crate::error::{Error, Result};
use crate::posterior_gibbs::{default_truncation, run_gibbs};
use crate::rng::{derive_seed, stream_rng};
use crate::stats::{median, ols, percentile_interval};

pub const SLOPE_CI_LEVEL: f64 = 0.95;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellOutcome {
    Ok {
        /// Posterior median of `ρ(f0, p)`.
        median_loss: f64,
        /// `ρ(f0, p̄)` for the posterior mean density.
        mean_density_loss: f64,
        retained: usize,
        jitter_retries: usize,
    },
    Failed {
        reason: String,
    },
}

/// One `(n, replication)` job.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellResult {
    pub n: usize,
    pub replication: usize,
    pub seed: u64,
    pub truncation: usize,
    pub outcome: CellOutcome,
}

impl CellResult {
    pub fn median_loss(&self) -> Option<f64> {
        match self.outcome {
            CellOutcome::Ok { median_loss, .. } => Some(median_loss),
            CellOutcome::Failed { .. } => None,
        }
    }
}

/// Slope of log median loss against log n, with a percentile bootstrap
/// interval over replications within each sample size.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_level: f64,
    pub resamples: usize,
    pub points: usize,
}

impl SlopeFit {
    pub fn excludes_zero(&self) -> bool {
        self.ci_high < 0.0 || self.ci_low > 0.0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentResult {
    pub fingerprint: String,
    pub config: RateExperimentConfig,
    pub formula: RateFormula,
    /// `−β/(2β + d*)`.
    pub expected_slope: f64,
    pub cells: Vec<CellResult>,
    pub fit: Option<SlopeFit>,
}

impl ExperimentResult {
    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.median_loss().is_none()).count()
    }
}

fn cell_seed(seed: u64, n: usize, rep: usize) -> u64 {
    derive_seed(derive_seed(seed, n as u64), rep as u64)
}

/// Fit on successful cells; the bootstrap resamples replications within each
/// sample size.
pub fn fit_slope<R: Rng + ?Sized>(cells: &[CellResult], resamples: usize, rng: &mut R) -> Option<SlopeFit> {
    let mut groups: Vec<(f64, Vec<f64>)> = Vec::new();
    for c in cells {
        let Some(loss) = c.median_loss().filter(|l| *l > 0.0) else { continue };
        let x = (c.n as f64).ln();
        match groups.iter_mut().find(|g| g.0 == x) {
            Some(g) => g.1.push(loss.ln()),
            None => groups.push((x, vec![loss.ln()])),
        }
    }
    if groups.len() < 2 {
        return None;
    }
    let flatten = |pick: &dyn Fn(usize, usize) -> usize| {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (gi, (x, ys_g)) in groups.iter().enumerate() {
            for k in 0..ys_g.len() {
                xs.push(*x);
                ys.push(ys_g[pick(gi, k)]);
            }
        }
        (xs, ys)
    };
    let (xs, ys) = flatten(&|_, k| k);
    let fit = ols(&xs, &ys);
    let mut slopes = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let picks: Vec<Vec<usize>> = groups
            .iter()
            .map(|g| (0..g.1.len()).map(|_| rng.random_range(0..g.1.len())).collect())
            .collect();
        let (bx, by) = flatten(&|gi, k| picks[gi][k]);
        slopes.push(ols(&bx, &by).slope);
    }
    let (ci_low, ci_high) = percentile_interval(&slopes, SLOPE_CI_LEVEL);
    Some(SlopeFit {
        slope: fit.slope,
        intercept: fit.intercept,
        ci_low,
        ci_high,
        ci_level: SLOPE_CI_LEVEL,
        resamples,
        points: xs.len(),
    })
}

/// Simulate, sample the posterior and summarise every `(n, replication)`
/// cell on a pool of `workers` threads. Cell seeds depend only on the master
/// seed and the cell key, so the result does not depend on `workers`.
pub fn run_rate_experiment(config: &RateExperimentConfig, workers: usize) -> Result<ExperimentResult> {
    config.validate()?;
    let f0 = lookup_density(&config.density)?;
    let prior = config.prior_spec()?;
    let formula = theoretical_rate(
        config.beta.unwrap_or_else(|| f0.working_beta()),
        f0.dim(),
        prior.kappa(),
        config.tau.unwrap_or_else(|| f0.tail().tau),
        None,
        MixingPriorKind::DirichletProcess,
    )?;
    let jobs: Vec<(usize, usize)> = config
        .ladder
        .iter()
        .flat_map(|&n| (0..config.replications).map(move |r| (n, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let cells: Vec<CellResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(n, rep)| {
                let seed = cell_seed(config.seed, n, rep);
                let truncation = config
                    .chain
                    .truncation
                    .unwrap_or_else(|| default_truncation(n, formula.polynomial_rate(n as f64)));
                let run = || -> Result<CellOutcome> {
                    let mut data_rng = stream_rng(seed, 0);
                    let data: Vec<Vec<f64>> = (0..n).map(|_| f0.sample(&mut data_rng)).collect();
                    let mut chain_rng = stream_rng(seed, 1);
                    let summary = run_gibbs(&data, &prior, &config.chain.gibbs(truncation), &mut chain_rng)?;
                    let losses = summary.losses(f0.as_ref(), config.loss)?;
                    Ok(CellOutcome::Ok {
                        median_loss: median(&losses),
                        mean_density_loss: summary.mean_density_loss(f0.as_ref(), config.loss)?,
                        retained: summary.draws.len(),
                        jitter_retries: summary.jitter_retries,
                    })
                };
                CellResult {
                    n,
                    replication: rep,
                    seed,
                    truncation,
                    outcome: run().unwrap_or_else(|e| CellOutcome::Failed { reason: e.to_string() }),
                }
            })
            .collect()
    });
    let mut boot_rng = stream_rng(derive_seed(config.seed, 0xB007), 0);
    let fit = fit_slope(&cells, config.bootstrap_resamples, &mut boot_rng);
    Ok(ExperimentResult {
        fingerprint: fingerprint(config)?,
        config: config.clone(),
        expected_slope: -formula.exponent,
        formula,
        cells,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(n: usize, rep: usize, loss: Option<f64>) -> CellResult {
        CellResult {
            n,
            replication: rep,
            seed: 0,
            truncation: 20,
            outcome: match loss {
                Some(l) => CellOutcome::Ok {
                    median_loss: l,
                    mean_density_loss: l,
                    retained: 100,
                    jitter_retries: 0,
                },
                None => CellOutcome::Failed { reason: "x".into() },
            },
        }
    }

    #[test]
    fn exact_power_law_recovered() {
        let cells: Vec<CellResult> = [100, 200, 400, 800]
            .iter()
            .flat_map(|&n| (0..3).map(move |r| cell(n, r, Some(2.0 * (n as f64).powf(-0.4)))))
            .collect();
        let fit = fit_slope(&cells, 200, &mut stream_rng(0, 0)).unwrap();
        assert!((fit.slope + 0.4).abs() < 1e-12);
        assert!((fit.ci_low + 0.4).abs() < 1e-12 && (fit.ci_high + 0.4).abs() < 1e-12);
        assert!(fit.excludes_zero());
    }

    #[test]
    fn failed_cells_skipped() {
        let mut cells = vec![cell(100, 0, Some(0.1)), cell(200, 0, Some(0.05)), cell(400, 0, None)];
        let fit = fit_slope(&cells, 50, &mut stream_rng(0, 0)).unwrap();
        assert_eq!(fit.points, 2);
        assert!((fit.slope + 1.0).abs() < 1e-12);
        cells.truncate(1);
        assert!(fit_slope(&cells, 50, &mut stream_rng(0, 0)).is_none());
    }

    #[test]
    fn small_experiment_runs_and_is_reproducible() {
        let mut cfg = RateExperimentConfig::from_toml_str(
            r#"
density = "std-normal-d1"
ladder = [40, 80, 160, 320]
replications = 3
seed = 3
bootstrap_resamples = 100
[chain]
iterations = 400
burn_in = 100
thin = 3
truncation = 10
"#,
        )
        .unwrap();
        let a = run_rate_experiment(&cfg, 1).unwrap();
        let b = run_rate_experiment(&cfg, 2).unwrap();
        assert_eq!(a.cells, b.cells);
        assert_eq!(a.fit, b.fit);
        assert_eq!(a.failed_cells(), 0);
        assert!((a.expected_slope + 1.0 / 3.0).abs() < 1e-15);
        cfg.seed = 4;
        assert_ne!(run_rate_experiment(&cfg, 1).unwrap().fingerprint, a.fingerprint);
    }
}
