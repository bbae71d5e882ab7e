use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampler::GibbsChain;
use crate::density::Density;
use crate::divergences::{hellinger_from_values, l1_from_values};
use crate::error::{Error, Result};
use crate::linalg::CovarianceSpec;
use crate::measure_discretization::MixingMeasure;
use crate::prior_model::PriorSpec;
use crate::quadrature::{GridSpec, QuadratureRule};
use crate::stats::quantile;
use crate::test_densities::make_gaussian_mixture;

pub const MIN_OBSERVATIONS: usize = 10;
pub const MIN_TRUNCATION: usize = 5;
pub const MIN_RETAINED: usize = 100;
/// Floor of the truncation level used with rate sizing.
pub const TRUNCATION_FLOOR: usize = 20;

/// `H = ⌊n ε_n²/log n⌋ ∨ 20`.
pub fn default_truncation(n: usize, eps_n: f64) -> usize {
    let nf = n.max(2) as f64;
    ((nf * eps_n * eps_n / nf.ln()).floor() as usize).max(TRUNCATION_FLOOR)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub truncation: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Held-out observations; when present their mean log predictive density
    /// is recorded for every retained draw.
    #[serde(default)]
    pub holdout: Option<Vec<Vec<f64>>>,
    /// Evaluation grid for posterior densities; chosen from the data when
    /// absent.
    #[serde(skip)]
    pub grid: Option<GridSpec<f64>>,
}

impl GibbsConfig {
    pub fn new(truncation: usize, iterations: usize, burn_in: usize, thin: usize) -> Self {
        GibbsConfig {
            truncation,
            iterations,
            burn_in,
            thin,
            holdout: None,
            grid: None,
        }
    }

    pub fn retained(&self) -> usize {
        if self.thin == 0 || self.iterations <= self.burn_in {
            return 0;
        }
        (self.iterations - self.burn_in) / self.thin
    }
}

/// One retained posterior draw.
#[derive(Clone, Debug, Serialize)]
pub struct PosteriorDraw {
    pub mixing: MixingMeasure,
    pub covariance: CovarianceSpec,
    /// Share of observations in the most populated component.
    pub largest_cluster_share: f64,
}

impl PosteriorDraw {
    pub fn values(&self, grid: &GridSpec<f64>) -> Result<Vec<f64>> {
        let p = make_gaussian_mixture(self.mixing.clone(), self.covariance.clone())?;
        grid.evaluate_density(&p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossMetric {
    L1,
    Hellinger,
}

#[derive(Clone, Debug, Serialize)]
pub struct PosteriorSummary {
    pub draws: Vec<PosteriorDraw>,
    #[serde(skip)]
    pub grid: GridSpec<f64>,
    /// Posterior mean density on `grid`, in grid order.
    pub mean_density: Vec<f64>,
    pub holdout_log_likelihood: Option<Vec<f64>>,
    pub jitter_retries: usize,
    pub covariance_resamples: usize,
}

impl PosteriorSummary {
    pub fn mean_density_mass(&self) -> f64 {
        self.grid.sum_values(&self.mean_density)
    }

    /// `ρ(f0, p)` for every retained draw, in draw order.
    pub fn losses(&self, f0: &dyn Density, metric: LossMetric) -> Result<Vec<f64>> {
        let truth = self.grid.evaluate_density(f0)?;
        self.draws
            .par_iter()
            .map(|draw| {
                let v = draw.values(&self.grid)?;
                Ok(match metric {
                    LossMetric::L1 => l1_from_values(&self.grid, &truth, &v),
                    LossMetric::Hellinger => hellinger_from_values(&self.grid, &truth, &v),
                })
            })
            .collect()
    }

    /// `ρ(f0, p̄)` for the posterior mean density `p̄`.
    pub fn mean_density_loss(&self, f0: &dyn Density, metric: LossMetric) -> Result<f64> {
        let truth = self.grid.evaluate_density(f0)?;
        Ok(match metric {
            LossMetric::L1 => l1_from_values(&self.grid, &truth, &self.mean_density),
            LossMetric::Hellinger => hellinger_from_values(&self.grid, &truth, &self.mean_density),
        })
    }

    /// Draws as JSON lines.
    pub fn draws_jsonl(&self) -> String {
        self.draws
            .iter()
            .map(|d| serde_json::to_string(d).expect("draws serialise") + "\n")
            .collect()
    }

    pub fn write_draws_jsonl(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.draws_jsonl()).map_err(|e| Error::io(path, e))
    }
}

/// Empirical `q`-quantile of `ρ(f0, p)` over the retained draws.
pub fn posterior_loss_quantile(summary: &PosteriorSummary, f0: &dyn Density, metric: LossMetric, q: f64) -> Result<f64> {
    if summary.draws.len() < MIN_RETAINED {
        return Err(Error::Precondition(format!(
            "need at least {MIN_RETAINED} retained draws, have {}",
            summary.draws.len()
        )));
    }
    if !(0.0..1.0).contains(&q) {
        return Err(Error::invalid(format!("quantile level {q} outside [0, 1)")));
    }
    Ok(quantile(&summary.losses(f0, metric)?, q))
}

/// Box around the data and the base measure, padded by eight data standard
/// deviations per axis.
pub fn default_posterior_grid(data: &[Vec<f64>], prior: &PriorSpec) -> Result<GridSpec<f64>> {
    let d = prior.dim();
    let mut lower = Vec::with_capacity(d);
    let mut upper = Vec::with_capacity(d);
    for j in 0..d {
        let col: Vec<f64> = data.iter().map(|x| x[j]).collect();
        let sd = if col.len() > 1 { crate::stats::variance(&col).sqrt() } else { 1.0 };
        let s0 = prior.base_cov.entry(j, j).sqrt();
        let lo = col.iter().copied().fold(prior.base_mean[j] - 6.0 * s0, f64::min);
        let hi = col.iter().copied().fold(prior.base_mean[j] + 6.0 * s0, f64::max);
        lower.push(lo - 8.0 * sd);
        upper.push(hi + 8.0 * sd);
    }
    let count = match d {
        1 => 2048,
        2 => 128,
        _ => 32,
    };
    GridSpec::new(lower, upper, vec![count; d], QuadratureRule::Midpoint)
}

/// Run one chain and summarise the retained draws.
pub fn run_gibbs<R: Rng + ?Sized>(
    data: &[Vec<f64>],
    prior: &PriorSpec,
    config: &GibbsConfig,
    rng: &mut R,
) -> Result<PosteriorSummary> {
    if data.len() < MIN_OBSERVATIONS {
        return Err(Error::Precondition(format!(
            "need at least {MIN_OBSERVATIONS} observations, got {}",
            data.len()
        )));
    }
    if config.truncation < MIN_TRUNCATION {
        return Err(Error::Precondition(format!("truncation must be at least {MIN_TRUNCATION}")));
    }
    if config.iterations <= config.burn_in || config.thin == 0 {
        return Err(Error::Precondition("need iterations > burn_in and thin >= 1".into()));
    }
    if config.retained() < MIN_RETAINED {
        return Err(Error::Precondition(format!(
            "settings retain {} draws, need at least {MIN_RETAINED}",
            config.retained()
        )));
    }
    let grid = match &config.grid {
        Some(g) => g.clone(),
        None => default_posterior_grid(data, prior)?,
    };
    let mut chain = GibbsChain::new(data, prior, config.truncation, rng)?;
    let mut draws = Vec::with_capacity(config.retained());
    let mut holdout_trace = config.holdout.as_ref().map(|_| Vec::new());
    for it in 1..=config.iterations {
        chain.step(rng)?;
        if it <= config.burn_in || (it - config.burn_in) % config.thin != 0 {
            continue;
        }
        let counts = chain.state.counts();
        let draw = PosteriorDraw {
            mixing: chain.state.mixing()?,
            covariance: chain.state.covariance.clone(),
            largest_cluster_share: *counts.iter().max().expect("H >= 1") as f64 / data.len() as f64,
        };
        if let (Some(trace), Some(hold)) = (holdout_trace.as_mut(), config.holdout.as_ref()) {
            let p = make_gaussian_mixture(draw.mixing.clone(), draw.covariance.clone())?;
            let ll = hold.iter().map(|x| p.evaluate(x).max(f64::MIN_POSITIVE).ln()).sum::<f64>() / hold.len() as f64;
            trace.push(ll);
        }
        draws.push(draw);
    }
    let values: Vec<Vec<f64>> = draws.par_iter().map(|d| d.values(&grid)).collect::<Result<_>>()?;
    let mut mean_density = vec![0.0; grid.total_points()];
    for v in &values {
        for (m, x) in mean_density.iter_mut().zip(v) {
            *m += x;
        }
    }
    let k = draws.len() as f64;
    mean_density.iter_mut().for_each(|m| *m /= k);
    Ok(PosteriorSummary {
        draws,
        grid,
        mean_density,
        holdout_log_likelihood: holdout_trace,
        jitter_retries: chain.jitter_retries,
        covariance_resamples: chain.covariance_resamples,
    })
}

/// Observations from CSV text: one row per observation, an optional header
/// line, commas or whitespace between columns.
pub fn parse_data_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: std::result::Result<Vec<f64>, _> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse::<f64>)
            .collect();
        match fields {
            Ok(r) => rows.push(r),
            Err(_) if rows.is_empty() && line_no == 0 => continue,
            Err(e) => return Err(Error::invalid(format!("line {}: {e}", line_no + 1))),
        }
    }
    if let Some(first) = rows.first() {
        if rows.iter().any(|r| r.len() != first.len()) {
            return Err(Error::invalid("rows have different lengths"));
        }
    }
    Ok(rows)
}

pub fn read_data_csv(path: &std::path::Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_data_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::test_densities::GaussianMixtureDensity;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn truncation_floor() {
        assert_eq!(default_truncation(200, 0.3), 20);
        assert_eq!(default_truncation(10_000, 0.5), 271);
    }

    #[test]
    fn csv_with_and_without_header() {
        let a = parse_data_csv("x,y\n1,2\n3, 4\n\n").unwrap();
        assert_eq!(a, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(parse_data_csv("0.5\n-1e-3\n").unwrap(), vec![vec![0.5], vec![-1e-3]]);
        assert!(parse_data_csv("1,2\n3\n").is_err());
        assert!(parse_data_csv("1\nfoo\n").is_err());
    }

    #[test]
    fn preconditions() {
        let prior = PriorSpec::standard(1);
        let data: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 10.0]).collect();
        let mut rng = stream_rng(0, 0);
        assert!(run_gibbs(&data[..5], &prior, &GibbsConfig::new(10, 300, 100, 1), &mut rng).is_err());
        assert!(run_gibbs(&data, &prior, &GibbsConfig::new(4, 300, 100, 1), &mut rng).is_err());
        assert!(run_gibbs(&data, &prior, &GibbsConfig::new(10, 150, 100, 1), &mut rng).is_err());
    }

    #[test]
    fn single_cluster_concentrates() {
        let prior = PriorSpec::standard(1);
        let mut rng = stream_rng(9, 0);
        let data: Vec<Vec<f64>> = (0..50)
            .map(|_| { let e: f64 = StandardNormal.sample(&mut rng); vec![0.7 + 1e-3 * e] })
            .collect();
        let s = run_gibbs(&data, &prior, &GibbsConfig::new(10, 600, 200, 4), &mut rng).unwrap();
        let share = s.draws.iter().map(|d| d.largest_cluster_share).sum::<f64>() / s.draws.len() as f64;
        assert!(share > 0.9, "{share}");
    }

    #[test]
    fn summary_invariants() {
        let prior = PriorSpec::standard(1);
        let truth = GaussianMixtureDensity::standard(1);
        let mut rng = stream_rng(10, 0);
        let data: Vec<Vec<f64>> = (0..60).map(|_| vec![StandardNormal.sample(&mut rng)]).collect();
        let mut config = GibbsConfig::new(10, 400, 100, 3);
        config.holdout = Some(data[..10].to_vec());
        let s = run_gibbs(&data, &prior, &config, &mut rng).unwrap();
        assert_eq!(s.draws.len(), 100);
        assert!((s.mean_density_mass() - 1.0).abs() < 1e-4);
        assert_eq!(s.holdout_log_likelihood.as_ref().unwrap().len(), 100);
        let q0 = posterior_loss_quantile(&s, &truth, LossMetric::L1, 0.0).unwrap();
        let q5 = posterior_loss_quantile(&s, &truth, LossMetric::L1, 0.5).unwrap();
        let q9 = posterior_loss_quantile(&s, &truth, LossMetric::L1, 0.9).unwrap();
        assert!(0.0 <= q0 && q0 <= q5 && q5 <= q9);
        assert!(posterior_loss_quantile(&s, &truth, LossMetric::Hellinger, 0.5).unwrap() <= 2f64.sqrt());
        assert_eq!(s.draws_jsonl().lines().count(), 100);
    }

    #[test]
    fn mean_density_invariant_under_relabelling() {
        let prior = PriorSpec::standard(1);
        let mut rng = stream_rng(11, 0);
        let data: Vec<Vec<f64>> = (0..30).map(|_| vec![StandardNormal.sample(&mut rng)]).collect();
        let s = run_gibbs(&data, &prior, &GibbsConfig::new(6, 250, 50, 2), &mut rng).unwrap();
        let mut shuffled = 0.0;
        for d in s.draws.iter().rev() {
            let atoms: Vec<Vec<f64>> = d.mixing.atoms().iter().rev().cloned().collect();
            let weights: Vec<f64> = d.mixing.weights().iter().rev().copied().collect();
            let m = MixingMeasure::normalized(atoms, weights).unwrap();
            let p = PosteriorDraw { mixing: m, ..d.clone() };
            shuffled += p.values(&s.grid).unwrap()[1000];
        }
        let shuffled = shuffled / s.draws.len() as f64;
        assert!((shuffled - s.mean_density[1000]).abs() <= 1e-12 * shuffled.abs().max(1e-300));
    }
}
