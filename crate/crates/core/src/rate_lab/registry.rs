use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::CovarianceSpec;
use crate::measure_discretization::MixingMeasure;
use crate::test_densities::{make_gaussian_mixture, make_spline_density, GaussianMixtureDensity, TestDensity};

/// Identifiers accepted by [`lookup_density`]. Spline densities are also
/// accepted as `spline-m{m}-d{d}` with `m ∈ 1..=6`.
pub const REGISTERED_DENSITIES: &[&str] = &[
    "std-normal-d1",
    "std-normal-d2",
    "bimodal-normal-d1",
    "correlated-normal-d2",
    "spline-m2-d1",
    "spline-m3-d1",
    "spline-m4-d1",
    "spline-m2-d2",
    "spline-m3-d2",
];

fn parse_spline(id: &str) -> Option<(usize, usize)> {
    let rest = id.strip_prefix("spline-m")?;
    let (m, d) = rest.split_once("-d")?;
    Some((m.parse().ok()?, d.parse().ok()?))
}

/// Ground-truth density by identifier.
pub fn lookup_density(id: &str) -> Result<Arc<dyn TestDensity>> {
    let f: Arc<dyn TestDensity> = match id {
        "std-normal-d1" => Arc::new(GaussianMixtureDensity::standard(1)),
        "std-normal-d2" => Arc::new(GaussianMixtureDensity::standard(2)),
        "bimodal-normal-d1" => Arc::new(
            make_gaussian_mixture(
                MixingMeasure::new(vec![vec![-1.5], vec![1.5]], vec![0.5, 0.5])?,
                CovarianceSpec::isotropic(1, 0.5)?,
            )?
            .with_id(id),
        ),
        "correlated-normal-d2" => Arc::new(
            make_gaussian_mixture(MixingMeasure::dirac(vec![0.0, 0.0]), CovarianceSpec::new(2, &[1.0, 0.6, 0.6, 1.0])?)?
                .with_id(id),
        ),
        _ => match parse_spline(id) {
            Some((m, d)) => Arc::new(make_spline_density(m, 1.0, d)?),
            None => {
                return Err(Error::Config(format!(
                    "unknown density '{id}'; known: {}",
                    REGISTERED_DENSITIES.join(", ")
                )))
            }
        },
    };
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_registered_id_resolves_to_itself() {
        for id in REGISTERED_DENSITIES {
            assert_eq!(lookup_density(id).unwrap().id(), *id);
        }
        assert!(lookup_density("spline-m9-d1").is_err());
        assert!(matches!(lookup_density("nope"), Err(Error::Config(_))));
    }
}
