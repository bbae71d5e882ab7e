use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CovarianceSpec;
use crate::measure_discretization::MixingMeasure;

/// Parameters of the sieve: the first `H` atoms lie in `[−a, a]^d`, the
/// mass beyond them is below `ε`, and every eigenvalue of `Σ` lies in
/// `[σ0², σ0²(1 + ε²/d)^M)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SieveSpec {
    pub dim: usize,
    pub eps: f64,
    pub a: f64,
    pub sigma0: f64,
    pub h: usize,
    pub m: usize,
}

impl SieveSpec {
    pub fn new(dim: usize, eps: f64, a: f64, sigma0: f64, h: usize, m: usize) -> Result<Self> {
        let s = SieveSpec {
            dim,
            eps,
            a,
            sigma0,
            h,
            m,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::invalid(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if !(self.a > 0.0 && self.a.is_finite() && self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(Error::invalid("a and sigma0 must be positive and finite"));
        }
        if self.h < self.dim || self.m < self.dim {
            return Err(Error::invalid(format!(
                "H and M must be at least d = {}; got H = {}, M = {}",
                self.dim, self.h, self.m
            )));
        }
        Ok(())
    }

    /// `1 + ε²/d`, the ratio between consecutive eigenvalue levels.
    pub fn ladder_ratio(&self) -> f64 {
        1.0 + self.eps * self.eps / self.dim as f64
    }

    /// `σ0²` and `σ0²(1 + ε²/d)^M`.
    pub fn eigen_window(&self) -> (f64, f64) {
        let lo = self.sigma0 * self.sigma0;
        (lo, lo * (self.m as f64 * self.ladder_ratio().ln()).exp())
    }

    /// Sizing used for contraction rates at sample size `n`:
    /// `H = ⌊n ε²/log n⌋ ∨ d`, `M = a^{a₁} = σ0^{−2a₂} = n`.
    pub fn rate_sizing(dim: usize, n: usize, eps: f64, a1: f64, a2: f64) -> Result<Self> {
        let nf = n as f64;
        let h = ((nf * eps * eps / nf.ln()).floor() as usize).max(dim);
        Self::new(dim, eps, nf.powf(1.0 / a1), nf.powf(-1.0 / (2.0 * a2)), h, n.max(dim))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "clause", rename_all = "kebab-case")]
pub enum SieveViolation {
    AtomOutside { index: usize, atom: Vec<f64> },
    TailMass { mass: f64 },
    EigenvalueBelow { j: usize, value: f64, lower: f64 },
    EigenvalueAbove { j: usize, value: f64, upper: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MembershipReport {
    pub member: bool,
    pub violations: Vec<SieveViolation>,
}

/// Check all three clauses. The mixture is read in stick order: atoms
/// `1..=H` are the constrained ones and the weights of the rest form the tail.
pub fn sieve_membership(f: &MixingMeasure, cov: &CovarianceSpec, spec: &SieveSpec) -> Result<MembershipReport> {
    spec.validate()?;
    if f.dim() != spec.dim || cov.dim() != spec.dim {
        return Err(Error::invalid("mixture and sieve dimensions differ"));
    }
    let mut violations = Vec::new();
    for (index, z) in f.atoms().iter().take(spec.h).enumerate() {
        if z.iter().any(|v| v.abs() > spec.a) {
            violations.push(SieveViolation::AtomOutside { index, atom: z.clone() });
        }
    }
    let tail: f64 = f.weights().iter().skip(spec.h).sum();
    if tail >= spec.eps {
        violations.push(SieveViolation::TailMass { mass: tail });
    }
    let (lower, upper) = spec.eigen_window();
    for (j, &value) in cov.eigenvalues().iter().enumerate() {
        if value < lower {
            violations.push(SieveViolation::EigenvalueBelow { j, value, lower });
        }
        if value >= upper {
            violations.push(SieveViolation::EigenvalueAbove { j, value, upper });
        }
    }
    Ok(MembershipReport {
        member: violations.is_empty(),
        violations,
    })
}
