use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use super::net::{build_net, Net};
use super::spec::SieveSpec;
use crate::density::Density;
use crate::divergences::l1_from_values;
use crate::error::{Error, Result};
use crate::linalg::CovarianceSpec;
use crate::measure_discretization::MixingMeasure;
use crate::quadrature::{GridSpec, QuadratureRule};
use crate::rng::stream_rng;
use crate::test_densities::make_gaussian_mixture;

/// A random member of the sieve with the number of stick draws rejected
/// on the tail clause.
#[derive(Clone, Debug, Serialize)]
pub struct SieveMember {
    pub mixing: MixingMeasure,
    pub covariance: CovarianceSpec,
    pub rejections: usize,
}

/// Stick-breaking weights with `V_h ∼ Beta(1, 1)` conditioned by rejection on
/// a tail below `ε`; uniform atoms in the cube; the tail split over two atoms
/// in the doubled cube; covariance eigenvalues log-uniform in the window and a
/// uniform frame (with a random reflection) for `d = 2`.
pub fn sample_sieve_member<R: Rng + ?Sized>(spec: &SieveSpec, rng: &mut R) -> Result<SieveMember> {
    spec.validate()?;
    let d = spec.dim;
    if d > 2 {
        return Err(Error::Precondition("random sieve members are drawn for d <= 2".into()));
    }
    let beta = Beta::new(1.0, 1.0).expect("valid");
    let mut rejections = 0;
    let (weights, rest) = loop {
        let mut rest = 1.0;
        let w: Vec<f64> = (0..spec.h)
            .map(|_| {
                let v: f64 = beta.sample(rng);
                let p = v * rest;
                rest *= 1.0 - v;
                p
            })
            .collect();
        if rest < spec.eps {
            break (w, rest);
        }
        rejections += 1;
    };
    let mut atoms: Vec<Vec<f64>> = (0..spec.h)
        .map(|_| (0..d).map(|_| rng.random_range(-spec.a..=spec.a)).collect())
        .collect();
    let mut all = weights;
    let split: f64 = rng.random();
    for share in [split, 1.0 - split] {
        atoms.push((0..d).map(|_| rng.random_range(-2.0 * spec.a..=2.0 * spec.a)).collect());
        all.push(rest * share);
    }
    let mixing = MixingMeasure::normalized(atoms, all)?;

    let (lo, _) = spec.eigen_window();
    let span = spec.m as f64 * spec.ladder_ratio().ln();
    let levels: Vec<f64> = (0..d).map(|_| lo * (span * rng.random::<f64>()).exp()).collect();
    let covariance = if d == 1 {
        CovarianceSpec::diagonal(&levels)?
    } else {
        let theta = rng.random_range(0.0..2.0 * PI);
        let (s, c) = theta.sin_cos();
        let flip = if rng.random::<bool>() { -1.0 } else { 1.0 };
        CovarianceSpec::from_eigen(&levels, &[c, -s * flip, s, c * flip])?
    };
    Ok(SieveMember {
        mixing,
        covariance,
        rejections,
    })
}

/// Grid for `L1` distances between sieve members: covers the doubled cube
/// plus eight of the largest kernel scales, spacing about `σ0/8` within a
/// point budget.
pub fn coverage_grid(spec: &SieveSpec) -> Result<GridSpec<f64>> {
    let (lo, hi) = spec.eigen_window();
    let half = 2.0 * spec.a + 8.0 * hi.sqrt();
    let want = (16.0 * half / lo.sqrt()).ceil() as usize;
    let (floor, cap) = if spec.dim == 1 { (1 << 10, 1 << 14) } else { (1 << 7, 1 << 8) };
    GridSpec::cube(spec.dim, half, want.next_power_of_two().clamp(floor, cap), QuadratureRule::Midpoint)
}

/// `‖p_{F,Σ} − p_{F',Σ'}‖₁` on a grid.
pub fn mixture_l1(
    grid: &GridSpec<f64>,
    a: (&MixingMeasure, &CovarianceSpec),
    b: (&MixingMeasure, &CovarianceSpec),
) -> Result<f64> {
    let p = make_gaussian_mixture(a.0.clone(), a.1.clone())?;
    let q = make_gaussian_mixture(b.0.clone(), b.1.clone())?;
    let (pv, qv): (Vec<f64>, Vec<f64>) = (0..grid.total_points())
        .map(|i| {
            let x = grid.location(i);
            (p.evaluate(&x), q.evaluate(&x))
        })
        .unzip();
    Ok(l1_from_values(grid, &pv, &qv))
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverageReport {
    pub spec: SieveSpec,
    pub trials: usize,
    /// `6ε`.
    pub limit: f64,
    pub max_distance: f64,
    pub mean_distance: f64,
    pub distances: Vec<f64>,
    /// Fraction of stick draws rejected on the tail clause.
    pub rejection_rate: f64,
    pub log_net_count: f64,
}

/// Draw `trials` random members, map each to the net element assigned by
/// the covering argument, and measure the `L1` distance on a grid. Every
/// distance must be at most `6ε`; the first violation is returned as an
/// error carrying the member as JSON.
pub fn verify_net_covers(spec: &SieveSpec, trials: usize, seed: u64) -> Result<CoverageReport> {
    let net = build_net(spec)?;
    if spec.dim > 2 || !net.is_explicit() {
        return Err(Error::Precondition("coverage trials need an explicit net (d <= 2)".into()));
    }
    let grid = coverage_grid(spec)?;
    let results: Vec<(f64, usize, SieveMember)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t as u64);
            let member = sample_sieve_member(spec, &mut rng)?;
            let dist = distance_to_net(&net, &grid, &member.mixing, &member.covariance)?;
            Ok((dist, member.rejections, member))
        })
        .collect::<Result<_>>()?;
    let limit = 6.0 * spec.eps;
    for (trial, (distance, _, member)) in results.iter().enumerate() {
        if *distance > limit {
            return Err(Error::CoverageFailure {
                trial,
                distance: *distance,
                limit,
                member: serde_json::to_string(member).expect("plain data"),
            });
        }
    }
    let distances: Vec<f64> = results.iter().map(|r| r.0).collect();
    let rejected: usize = results.iter().map(|r| r.1).sum();
    Ok(CoverageReport {
        spec: *spec,
        trials,
        limit,
        max_distance: distances.iter().copied().fold(0.0, f64::max),
        mean_distance: distances.iter().sum::<f64>() / trials.max(1) as f64,
        rejection_rate: rejected as f64 / (rejected + trials).max(1) as f64,
        distances,
        log_net_count: net.count.log_total,
    })
}

/// Distance from `(F, Σ)` to its assigned net element.
pub fn distance_to_net(net: &Net, grid: &GridSpec<f64>, f: &MixingMeasure, cov: &CovarianceSpec) -> Result<f64> {
    let e = net.encode(f, cov)?;
    let (fh, ch) = net.decode(&e)?;
    mixture_l1(grid, (f, cov), (&fh, &ch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sieve_entropy::sieve_membership;

    #[test]
    fn members_are_members() {
        let spec = SieveSpec::new(2, 0.2, 1.0, 0.5, 3, 5).unwrap();
        let mut rng = stream_rng(4, 0);
        for _ in 0..50 {
            let m = sample_sieve_member(&spec, &mut rng).unwrap();
            let r = sieve_membership(&m.mixing, &m.covariance, &spec).unwrap();
            assert!(r.member, "{r:?}");
        }
    }

    #[test]
    fn net_element_has_distance_zero() {
        let spec = SieveSpec::new(1, 0.1, 1.0, 0.5, 2, 10).unwrap();
        let net = build_net(&spec).unwrap();
        let grid = coverage_grid(&spec).unwrap();
        let e = net.iter().unwrap().nth(12345).unwrap();
        let (f, c) = net.decode(&e).unwrap();
        assert_eq!(distance_to_net(&net, &grid, &f, &c).unwrap(), 0.0);
    }

    #[test]
    fn covers_in_one_dimension() {
        let spec = SieveSpec::new(1, 0.1, 1.0, 0.5, 2, 10).unwrap();
        let r = verify_net_covers(&spec, 50, 7).unwrap();
        assert!(r.max_distance <= r.limit);
        assert!(r.rejection_rate > 0.0 && r.rejection_rate < 1.0);
    }

    #[test]
    fn distances_shrink_with_eps() {
        let maxima: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&eps| {
                let spec = SieveSpec::new(1, eps, 1.0, 0.5, 2, 10).unwrap();
                verify_net_covers(&spec, 40, 3).unwrap().max_distance
            })
            .collect();
        assert!(maxima[0] > maxima[1] && maxima[1] > maxima[2], "{maxima:?}");
    }
}
