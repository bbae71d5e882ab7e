use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};

use super::spec::CovariancePrior;
use crate::error::{Error, Result};
use crate::linalg::CovarianceSpec;

/// Draws rejected as numerically singular before giving up.
const MAX_RESAMPLES: usize = 1000;

/// A covariance drawn from a [`CovariancePrior`].
#[derive(Clone, Debug)]
pub struct CovarianceDraw {
    pub covariance: CovarianceSpec,
    /// Eigenvalues of `Σ^{-1}`, ascending.
    pub precision_eigenvalues: Vec<f64>,
    /// Draws discarded because `Σ^{-1}` was not numerically positive definite.
    pub resamples: usize,
}

/// Precision matrix `Σ^{-1}` (row-major) drawn from the prior.
fn draw_precision<R: Rng + ?Sized>(prior: &CovariancePrior, d: usize, rng: &mut R) -> DMatrix<f64> {
    match prior {
        CovariancePrior::InverseWishart { nu, psi } => {
            // Bartlett: Σ^{-1} = L A Aᵀ Lᵀ with L Lᵀ = Ψ^{-1}
            let psi_inv = DMatrix::from_row_slice(d, d, psi.precision());
            let l = psi_inv
                .cholesky()
                .expect("scale matrix validated as SPD")
                .l();
            let mut a = DMatrix::<f64>::zeros(d, d);
            for i in 0..d {
                let chi = ChiSquared::new(nu - i as f64).expect("nu > d - 1");
                a[(i, i)] = chi.sample(rng).sqrt();
                for j in 0..i {
                    a[(i, j)] = rng.sample(StandardNormal);
                }
            }
            let la = l * a;
            &la * la.transpose()
        }
        CovariancePrior::DiagonalInverseGamma { shape, rate } => {
            let g = Gamma::new(*shape, 1.0 / rate).expect("validated");
            DMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |_, _| g.sample(rng)))
        }
        CovariancePrior::DiagonalSquaredInverseGamma { shape, rate } => {
            let g = Gamma::new(*shape, 1.0 / rate).expect("validated");
            DMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |_, _| g.sample(rng).powi(2)))
        }
    }
}

fn sorted_eigen(p: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(p);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |i, c| eig.eigenvectors[(i, order[c])]);
    (vals, vecs)
}

/// Eigenvalues of `Σ^{-1}` (ascending) for one prior draw, without forming `Σ`.
pub fn sample_precision_eigenvalues<R: Rng + ?Sized>(prior: &CovariancePrior, d: usize, rng: &mut R) -> Vec<f64> {
    let p = draw_precision(prior, d, rng);
    if d == 1 || !matches!(prior, CovariancePrior::InverseWishart { .. }) {
        let mut v: Vec<f64> = (0..d).map(|i| p[(i, i)]).collect();
        v.sort_by(f64::total_cmp);
        return v;
    }
    sorted_eigen(p).0
}

/// `Σ ∼ G`. Draws whose precision is not numerically positive definite are
/// discarded and counted.
pub fn sample_covariance<R: Rng + ?Sized>(prior: &CovariancePrior, d: usize, rng: &mut R) -> Result<CovarianceDraw> {
    prior.validate(d)?;
    let wishart = matches!(prior, CovariancePrior::InverseWishart { .. });
    for resamples in 0..=MAX_RESAMPLES {
        let p = draw_precision(prior, d, rng);
        let cov = if wishart {
            let (vals, vecs) = sorted_eigen(p);
            if !vals.iter().all(|v| v.is_finite()) || vals[0] <= vals[d - 1].abs() * 1e-14 {
                continue;
            }
            let variances: Vec<f64> = vals.iter().map(|v| 1.0 / v).collect();
            let vecs: Vec<f64> = (0..d * d).map(|ij| vecs[(ij / d, ij % d)]).collect();
            CovarianceSpec::from_eigen(&variances, &vecs).map(|c| (c, vals))
        } else {
            let diag: Vec<f64> = (0..d).map(|i| p[(i, i)]).collect();
            let mut vals = diag.clone();
            vals.sort_by(f64::total_cmp);
            CovarianceSpec::diagonal(&diag.iter().map(|v| 1.0 / v).collect::<Vec<_>>()).map(|c| (c, vals))
        };
        match cov {
            Ok((covariance, precision_eigenvalues)) => {
                return Ok(CovarianceDraw {
                    covariance,
                    precision_eigenvalues,
                    resamples,
                })
            }
            Err(Error::NotPositiveDefinite { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Diverged {
        reason: format!("{MAX_RESAMPLES} consecutive covariance draws were singular"),
        state: prior.name().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn wishart_mean_of_precision() {
        // E Σ^{-1} = ν Ψ^{-1}
        let psi = CovarianceSpec::new(2, &[2.0, 0.6, 0.6, 1.0]).unwrap();
        let target: Vec<f64> = psi.precision().iter().map(|v| 5.0 * v).collect();
        let prior = CovariancePrior::InverseWishart { nu: 5.0, psi };
        let mut rng = stream_rng(11, 0);
        let n = 40_000;
        let mut sum = vec![0.0; 4];
        let mut sq = vec![0.0; 4];
        for _ in 0..n {
            let draw = sample_covariance(&prior, 2, &mut rng).unwrap();
            for (k, v) in draw.covariance.precision().iter().enumerate() {
                sum[k] += v;
                sq[k] += v * v;
            }
        }
        for k in 0..4 {
            let m = sum[k] / n as f64;
            let se = ((sq[k] / n as f64 - m * m) / n as f64).sqrt();
            assert!((m - target[k]).abs() < 4.0 * se, "entry {k}: {m} vs {} (se {se})", target[k]);
        }
    }

    #[test]
    fn eigenvalues_ascending_and_consistent() {
        let prior = CovariancePrior::InverseWishart {
            nu: 4.0,
            psi: CovarianceSpec::isotropic(3, 1.0).unwrap(),
        };
        let mut rng = stream_rng(3, 1);
        for _ in 0..200 {
            let draw = sample_covariance(&prior, 3, &mut rng).unwrap();
            let e = &draw.precision_eigenvalues;
            assert!(e.windows(2).all(|w| w[0] <= w[1]));
            let from_cov = draw.covariance.precision_eigenvalues();
            let mut from_cov = from_cov.clone();
            from_cov.sort_by(f64::total_cmp);
            for (a, b) in e.iter().zip(&from_cov) {
                assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn diagonal_priors_stay_diagonal() {
        let mut rng = stream_rng(5, 0);
        for prior in [
            CovariancePrior::DiagonalInverseGamma { shape: 2.0, rate: 1.0 },
            CovariancePrior::DiagonalSquaredInverseGamma { shape: 2.0, rate: 1.0 },
        ] {
            let draw = sample_covariance(&prior, 3, &mut rng).unwrap();
            assert!(draw.covariance.is_diagonal());
            let mut v: Vec<f64> = (0..3).map(|i| 1.0 / draw.covariance.entry(i, i)).collect();
            v.sort_by(f64::total_cmp);
            for (a, b) in v.iter().zip(&draw.precision_eigenvalues) {
                assert!((a - b).abs() <= 1e-12 * b);
            }
        }
    }
}
