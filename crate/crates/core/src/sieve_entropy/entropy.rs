use serde::Serialize;

use super::net::{build_net, NetCount};
use super::spec::SieveSpec;
use crate::error::{Error, Result};

/// Net size against the bracket at one sieve configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EntropyPoint {
    pub spec: SieveSpec,
    pub count: NetCount,
    /// `log N / bracket`.
    pub ratio: f64,
}

fn entropy_point(spec: &SieveSpec) -> Result<EntropyPoint> {
    let count = build_net(spec)?.count;
    if !(count.bracket > 0.0) {
        return Err(Error::invalid(format!("bracket {} is not positive", count.bracket)));
    }
    Ok(EntropyPoint {
        spec: *spec,
        count,
        ratio: count.log_total / count.bracket,
    })
}

/// `K = max log N / bracket` over a calibration lattice.
pub fn calibrate_entropy_constant(specs: &[SieveSpec]) -> Result<f64> {
    if specs.is_empty() {
        return Err(Error::invalid("empty calibration lattice"));
    }
    specs
        .iter()
        .map(|s| entropy_point(s).map(|p| p.ratio))
        .try_fold(f64::NEG_INFINITY, |k, r| r.map(|r| k.max(r)))
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyShapeReport {
    pub constant: f64,
    pub calibration: Vec<EntropyPoint>,
    pub validation: Vec<EntropyPoint>,
    /// Largest validation ratio.
    pub max_ratio: f64,
    pub passed: bool,
}

/// Calibrate `K` on one lattice and check `log N ≤ K · bracket` on another.
pub fn entropy_shape_check(calibration: &[SieveSpec], validation: &[SieveSpec]) -> Result<EntropyShapeReport> {
    if validation.is_empty() {
        return Err(Error::invalid("empty validation lattice"));
    }
    let constant = calibrate_entropy_constant(calibration)?;
    let calibration = calibration.iter().map(entropy_point).collect::<Result<Vec<_>>>()?;
    let validation = validation.iter().map(entropy_point).collect::<Result<Vec<_>>>()?;
    let max_ratio = validation.iter().map(|p| p.ratio).fold(f64::NEG_INFINITY, f64::max);
    Ok(EntropyShapeReport {
        constant,
        passed: max_ratio <= constant * (1.0 + 1e-12),
        calibration,
        validation,
        max_ratio,
    })
}

/// A lattice over `(ε, a, H)` at fixed `d`, `σ0` and `M`.
pub fn sieve_lattice(dim: usize, eps: &[f64], a: &[f64], h: &[usize], sigma0: f64, m: usize) -> Result<Vec<SieveSpec>> {
    let mut out = Vec::with_capacity(eps.len() * a.len() * h.len());
    for &e in eps {
        for &aa in a {
            for &hh in h {
                out.push(SieveSpec::new(dim, e, aa, sigma0, hh, m)?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_total(s: SieveSpec) -> f64 {
        build_net(&s).unwrap().count.log_total
    }

    #[test]
    fn net_size_is_monotone() {
        let base = SieveSpec::new(2, 0.2, 2.0, 0.5, 4, 20).unwrap();
        let grow = [
            SieveSpec { a: 4.0, ..base },
            SieveSpec { eps: 0.1, ..base },
            SieveSpec { h: 6, ..base },
            SieveSpec { m: 40, ..base },
            SieveSpec { sigma0: 0.25, ..base },
        ];
        for s in grow {
            assert!(log_total(s) > log_total(base), "{s:?}");
        }
    }

    #[test]
    fn calibrated_constant_holds_on_disjoint_lattice() {
        let cal = sieve_lattice(2, &[0.1, 0.3], &[1.0, 4.0], &[2, 8], 0.5, 30).unwrap();
        let val = sieve_lattice(2, &[0.15, 0.2, 0.25], &[2.0, 3.0], &[3, 5], 0.5, 30).unwrap();
        let r = entropy_shape_check(&cal, &val).unwrap();
        assert!(r.passed, "{} > {}", r.max_ratio, r.constant);
        assert!(r.constant.is_finite() && r.constant > 0.0);
    }
}
