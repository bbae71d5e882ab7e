use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::FnDensity;
use crate::divergences::{check_hellinger_mixing, check_kl_by_hell, gaussian_hellinger_oracle, hellinger, lambda0};
use crate::error::{Error, Result};
use crate::kernel_approx::{approximation_error_scan, ScanNorm};
use crate::linalg::CovarianceSpec;
use crate::measure_discretization::{moment_match_discretize, AxisLaw, MixingSource};
use crate::posterior_gibbs::prior_reproduction_check;
use crate::prior_model::{check_inverse_wishart_facts, sample_sticks, stick_tail_probability, stick_weights, PriorSpec};
use crate::quadrature::{GridSpec, QuadratureRule};
use crate::rng::stream_rng;
use crate::sieve_entropy::{complement_mass, entropy_shape_check, sieve_lattice, verify_net_covers, SieveSpec};
use crate::special::normal_pdf;
use crate::test_densities::{make_spline_density, TestDensity};
use rand::Rng;

/// Named property suites runnable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Lemma2,
    Theorem3,
    Sieve,
    Priors,
    Discretize,
    Divergences,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Lemma2,
        Suite::Theorem3,
        Suite::Sieve,
        Suite::Priors,
        Suite::Discretize,
        Suite::Divergences,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lemma2 => "lemma2",
            Suite::Theorem3 => "theorem3",
            Suite::Sieve => "sieve",
            Suite::Priors => "priors",
            Suite::Discretize => "discretize",
            Suite::Divergences => "divergences",
        }
    }

    pub fn parse(name: &str) -> Result<Suite> {
        Suite::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown suite '{name}'")))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<SuiteCheck>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> SuiteCheck {
    SuiteCheck {
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

const SCALES: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

fn sup_weighted_order() -> Result<Vec<SuiteCheck>> {
    let mut out = Vec::new();
    for m in [2usize, 3, 4] {
        let f: Arc<dyn TestDensity> = Arc::new(make_spline_density(m, 1.0, 1)?);
        let r = approximation_error_scan(f, m as f64, &SCALES, ScanNorm::SupWeighted)?;
        out.push(check(
            format!("spline m={m} d=1 sup-weighted slope"),
            r.slope() >= m as f64 - 0.2,
            format!("slope {:.3}, need >= {}", r.slope(), m as f64 - 0.2),
        ));
    }
    Ok(out)
}

fn hellinger_order() -> Result<Vec<SuiteCheck>> {
    let f: Arc<dyn TestDensity> = Arc::new(make_spline_density(2, 1.0, 1)?);
    let mut out = Vec::new();
    for norm in [ScanNorm::Hellinger, ScanNorm::HellingerTruncated { epsilon: 0.5 }] {
        let r = approximation_error_scan(f.clone(), 2.0, &SCALES, norm)?;
        out.push(check(
            format!("spline m=2 d=1 {norm:?} slope"),
            r.slope() >= 1.8,
            format!("slope {:.3}, need >= 1.8", r.slope()),
        ));
        let ratios: Vec<f64> = r.rows.iter().filter_map(|row| row.mass_ratio).collect();
        if !ratios.is_empty() {
            let top = ratios.iter().copied().fold(0.0, f64::max);
            out.push(check(
                "tail mass ratio bounded along the ladder",
                top.is_finite() && ratios.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)),
                format!("ratios {ratios:?}"),
            ));
        }
    }
    Ok(out)
}

fn sieve(seed: u64) -> Result<Vec<SuiteCheck>> {
    let spec = SieveSpec::new(1, 0.1, 2.0, 0.5, 3, 20)?;
    let cov = verify_net_covers(&spec, 50, seed);
    let mut out = vec![check(
        "net covers 50 sampled members (d=1, eps=0.1)",
        cov.is_ok(),
        match &cov {
            Ok(r) => format!("max distance {:.4} <= {:.4}", r.max_distance, r.limit),
            Err(e) => e.to_string(),
        },
    )];
    let cspec = SieveSpec::new(1, 0.1, 3.0, 0.3, 8, 200)?;
    let c = complement_mass(&cspec, &PriorSpec::standard(1), 20_000, seed)?;
    out.push(check(
        "complement mass below its bound",
        c.within_bound(3.0),
        format!("estimate {:.5} (se {:.5}), bound {:.5}", c.estimate, c.stderr, c.bound),
    ));
    let cal = sieve_lattice(2, &[0.1, 0.3], &[1.0, 4.0], &[2, 8], 0.5, 30)?;
    let val = sieve_lattice(2, &[0.15, 0.25], &[2.0, 3.0], &[3, 5], 0.5, 30)?;
    let e = entropy_shape_check(&cal, &val)?;
    out.push(check(
        "net size within calibrated K times the bracket",
        e.passed,
        format!("K {:.4}, max validation ratio {:.4}", e.constant, e.max_ratio),
    ));
    Ok(out)
}

fn priors(seed: u64) -> Result<Vec<SuiteCheck>> {
    let mut out = Vec::new();
    let draws = 20_000;
    for (h, alpha, eps) in [(3usize, 1.0, 0.1), (5, 2.0, 0.05)] {
        let t = stick_tail_probability(h, alpha, eps)?;
        let mut rng = stream_rng(seed, h as u64);
        let mut hits = 0usize;
        for _ in 0..draws {
            let v = sample_sticks(h, alpha, &mut rng)?;
            if stick_weights(&v).1 > eps {
                hits += 1;
            }
        }
        let p = hits as f64 / draws as f64;
        let se = (t.exact * (1.0 - t.exact) / draws as f64).sqrt();
        out.push(check(
            format!("stick tail H={h} alpha={alpha} eps={eps}"),
            (p - t.exact).abs() <= 3.0 * se && (!t.bound_applies || t.exact <= t.stirling_bound),
            format!("exact {:.5}, Monte Carlo {p:.5} (se {se:.5})", t.exact),
        ));
    }
    let l = check_inverse_wishart_facts(4.0, &CovarianceSpec::isotropic(2, 1.0)?, 10_000, seed)?;
    out.push(check(
        "inverse-Wishart trace and small-eigenvalue facts",
        l.passed,
        format!("trace KS p {:.4}", l.trace.ks_p_value),
    ));
    let r = prior_reproduction_check(&PriorSpec::standard(1), 10, 5_000, seed)?;
    out.push(check(
        "Gibbs chain without data reproduces the prior",
        r.passed,
        format!(
            "KS p-values {:.4}, {:.4}, {:.4}",
            r.first_stick.p_value, r.first_atom.p_value, r.precision_trace.p_value
        ),
    ));
    Ok(out)
}

fn discretize() -> Result<Vec<SuiteCheck>> {
    let src = MixingSource::Product(vec![AxisLaw::Uniform { lo: -1.0, hi: 1.0 }]);
    let r = moment_match_discretize(&src, 1.0, 0.2, 1.0)?;
    let x = 1.0 / 3f64.sqrt();
    let atoms: Vec<f64> = r.measure.atoms().iter().map(|a| a[0]).collect();
    let ok = atoms.len() == 2
        && (atoms[0] + x).abs() < 1e-10
        && (atoms[1] - x).abs() < 1e-10
        && r.measure.weights().iter().all(|w| (w - 0.5).abs() < 1e-10);
    Ok(vec![check(
        "uniform[-1,1] gives the two-point Gauss rule",
        ok,
        format!("atoms {atoms:?}, weights {:?}", r.measure.weights()),
    )])
}

fn divergences(seed: u64) -> Result<Vec<SuiteCheck>> {
    let grid = GridSpec::cube(1, 40.0, 1 << 16, QuadratureRule::Midpoint)?;
    let mut rng = stream_rng(seed, 0);
    let mut worst: f64 = 0.0;
    let mut kl_ok = true;
    let mut mix_ok = true;
    let lambda = 0.5 * lambda0();
    for _ in 0..20 {
        let (m1, m2): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let (s1, s2): (f64, f64) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));
        let p = FnDensity::new(1, move |x: &[f64]| normal_pdf((x[0] - m1) / s1) / s1);
        let q = FnDensity::new(1, move |x: &[f64]| normal_pdf((x[0] - m2) / s2) / s2);
        let oracle = gaussian_hellinger_oracle(
            &CovarianceSpec::isotropic(1, s1 * s1)?,
            &CovarianceSpec::isotropic(1, s2 * s2)?,
            &[m1],
            &[m2],
        )?;
        worst = worst.max((hellinger(&p, &q, &grid)? - oracle).abs());
        kl_ok &= check_kl_by_hell(&p, &q, lambda, &grid)?.holds();
        let w = rng.random_range(0.1..0.9);
        mix_ok &= check_hellinger_mixing(&[(&p, &q), (&q, &p)], &[w, 1.0 - w], &grid, None)?.holds();
    }
    Ok(vec![
        check("quadrature Hellinger matches the Gaussian oracle", worst < 1e-6, format!("max error {worst:.2e}")),
        check("KL moments bounded through Hellinger", kl_ok, format!("lambda {lambda:.4}")),
        check("Hellinger convexity under mixing", mix_ok, "20 random pairs"),
    ])
}

/// Run one suite.
pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Lemma2 => sup_weighted_order()?,
        Suite::Theorem3 => hellinger_order()?,
        Suite::Sieve => sieve(seed)?,
        Suite::Priors => priors(seed)?,
        Suite::Discretize => discretize()?,
        Suite::Divergences => divergences(seed)?,
    };
    Ok(SuiteReport { suite, seed, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(Suite::parse(s.name()).unwrap(), s);
        }
        assert!(Suite::parse("nope").is_err());
    }

    #[test]
    fn quick_suites_pass() {
        for s in [Suite::Discretize, Suite::Divergences, Suite::Lemma2] {
            let r = run_suite(s, 1).unwrap();
            assert!(r.passed(), "{r:?}");
        }
    }
}
