use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CovarianceSpec;

/// Prior on the kernel covariance `Σ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CovariancePrior {
    /// `Σ ∼ IW(ν, Ψ)`, i.e. `Σ^{-1} ∼ Wishart(ν, Ψ^{-1})`.
    InverseWishart { nu: f64, psi: CovarianceSpec },
    /// Independent variances `σ_j² ∼ IG(shape, rate)`.
    DiagonalInverseGamma { shape: f64, rate: f64 },
    /// Independent standard deviations `σ_j ∼ IG(shape, rate)`.
    DiagonalSquaredInverseGamma { shape: f64, rate: f64 },
}

impl CovariancePrior {
    /// Exponent of the eigenvalue-band lower bound: the band around
    /// `σ^{-2}` has prior mass at least `exp(−C σ^{−κ})` up to polynomial factors.
    pub fn kappa(&self) -> f64 {
        match self {
            CovariancePrior::InverseWishart { .. } | CovariancePrior::DiagonalInverseGamma { .. } => 2.0,
            CovariancePrior::DiagonalSquaredInverseGamma { .. } => 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CovariancePrior::InverseWishart { .. } => "inverse-wishart",
            CovariancePrior::DiagonalInverseGamma { .. } => "diagonal-inverse-gamma",
            CovariancePrior::DiagonalSquaredInverseGamma { .. } => "diagonal-squared-inverse-gamma",
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            CovariancePrior::InverseWishart { nu, psi } => {
                if psi.dim() != d {
                    return Err(Error::invalid(format!("scale matrix has dimension {}, expected {d}", psi.dim())));
                }
                if !(*nu > d as f64 - 1.0) || !nu.is_finite() {
                    return Err(Error::invalid(format!("inverse-Wishart needs nu > d - 1, got {nu}")));
                }
            }
            CovariancePrior::DiagonalInverseGamma { shape, rate }
            | CovariancePrior::DiagonalSquaredInverseGamma { shape, rate } => {
                if !(*shape > 0.0 && *rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
                    return Err(Error::invalid("shape and rate must be positive and finite"));
                }
            }
        }
        Ok(())
    }
}

/// Dirichlet process mixture prior `D_α × G` with Gaussian base measure
/// `ᾱ = N(base_mean, base_cov)` and total mass `|α|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub base_mean: Vec<f64>,
    pub base_cov: CovarianceSpec,
    pub total_mass: f64,
    pub covariance: CovariancePrior,
}

impl PriorSpec {
    pub fn new(
        base_mean: Vec<f64>,
        base_cov: CovarianceSpec,
        total_mass: f64,
        covariance: CovariancePrior,
    ) -> Result<Self> {
        let spec = PriorSpec {
            base_mean,
            base_cov,
            total_mass,
            covariance,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Standard choice in `d` dimensions: `ᾱ = N(0, I)`, `|α| = 1`,
    /// `Σ ∼ IW(d + 2, I)`.
    pub fn standard(d: usize) -> Self {
        Self::new(
            vec![0.0; d],
            CovarianceSpec::isotropic(d, 1.0).expect("identity"),
            1.0,
            CovariancePrior::InverseWishart {
                nu: d as f64 + 2.0,
                psi: CovarianceSpec::isotropic(d, 1.0).expect("identity"),
            },
        )
        .expect("valid standard prior")
    }

    pub fn dim(&self) -> usize {
        self.base_mean.len()
    }

    pub fn kappa(&self) -> f64 {
        self.covariance.kappa()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || self.base_cov.dim() != d {
            return Err(Error::invalid("base mean and covariance dimensions differ"));
        }
        if self.base_mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("base mean must be finite"));
        }
        if !(self.total_mass > 0.0) || !self.total_mass.is_finite() {
            return Err(Error::invalid(format!("total mass must be positive, got {}", self.total_mass)));
        }
        self.covariance.validate(d)
    }
}
