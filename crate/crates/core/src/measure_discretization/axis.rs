use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::special::{gauss_legendre, normal_cdf, normal_pdf};

/// A probability law on the line, used as one factor of a product mixing
/// measure.
#[derive(Clone)]
pub enum AxisLaw {
    Uniform { lo: f64, hi: f64 },
    Discrete { atoms: Vec<f64>, weights: Vec<f64> },
    /// A density on `[lo, hi]`; it need not be normalised.
    Density {
        lo: f64,
        hi: f64,
        pdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for AxisLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisLaw::Uniform { lo, hi } => write!(f, "Uniform({lo}, {hi})"),
            AxisLaw::Discrete { atoms, .. } => write!(f, "Discrete({} atoms)", atoms.len()),
            AxisLaw::Density { lo, hi, .. } => write!(f, "Density([{lo}, {hi}])"),
        }
    }
}

/// Panels of the composite rule used to discretise [`AxisLaw::Density`].
const DENSITY_PANELS: usize = 64;
const PANEL_POINTS: usize = 16;

impl AxisLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            AxisLaw::Uniform { lo, hi } | AxisLaw::Density { lo, hi, .. } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::invalid(format!("bad interval [{lo}, {hi}]")));
                }
            }
            AxisLaw::Discrete { atoms, weights } => {
                if atoms.is_empty() || atoms.len() != weights.len() {
                    return Err(Error::invalid("need matching, non-empty atoms and weights"));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) || atoms.iter().any(|a| !a.is_finite()) {
                    return Err(Error::invalid("weights must be non-negative and atoms finite"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::invalid(format!("weights sum to {total}, expected 1")));
                }
            }
        }
        Ok(())
    }

    /// Bounds of the support.
    pub fn support(&self) -> (f64, f64) {
        match self {
            AxisLaw::Uniform { lo, hi } | AxisLaw::Density { lo, hi, .. } => (*lo, *hi),
            AxisLaw::Discrete { atoms, .. } => (
                atoms.iter().copied().fold(f64::INFINITY, f64::min),
                atoms.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
        }
    }

    /// Exact (or high-order quadrature) discretisation of the law restricted
    /// to `[a, b)`, as unnormalised nodes and weights. The last cell is closed.
    fn restricted(&self, a: f64, b: f64, closed: bool) -> (Vec<f64>, Vec<f64>) {
        match self {
            AxisLaw::Uniform { lo, hi } => {
                let (l, h) = (a.max(*lo), b.min(*hi));
                if l >= h {
                    return (vec![], vec![]);
                }
                let rule = gauss_legendre(PANEL_POINTS);
                let mass = (h - l) / (hi - lo);
                rule.0
                    .iter()
                    .zip(&rule.1)
                    .map(|(x, w)| (0.5 * (l + h) + 0.5 * (h - l) * x, 0.5 * w * mass))
                    .unzip()
            }
            AxisLaw::Discrete { atoms, weights } => atoms
                .iter()
                .zip(weights)
                .filter(|(&z, &w)| w > 0.0 && z >= a && (z < b || (closed && z <= b)))
                .map(|(&z, &w)| (z, w))
                .unzip(),
            AxisLaw::Density { lo, hi, pdf } => {
                let total = density_mass(*lo, *hi, pdf.as_ref());
                let (l, h) = (a.max(*lo), b.min(*hi));
                if l >= h {
                    return (vec![], vec![]);
                }
                let rule = gauss_legendre(PANEL_POINTS);
                let panels = ((DENSITY_PANELS as f64 * (h - l) / (hi - lo)).ceil() as usize).max(1);
                let width = (h - l) / panels as f64;
                let mut nodes = Vec::new();
                let mut weights = Vec::new();
                for p in 0..panels {
                    let mid = l + (p as f64 + 0.5) * width;
                    for (x, w) in rule.0.iter().zip(&rule.1) {
                        let z = mid + 0.5 * width * x;
                        let v = pdf(z).max(0.0) * 0.5 * width * w / total;
                        if v > 0.0 {
                            nodes.push(z);
                            weights.push(v);
                        }
                    }
                }
                (nodes, weights)
            }
        }
    }

    /// Mass of `[a, b)`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        self.restricted(a, b, false).1.iter().sum()
    }

    /// `(φ_σ ∗ law)(x)`.
    pub fn smoothed_density(&self, x: f64, sigma: f64) -> f64 {
        match self {
            AxisLaw::Uniform { lo, hi } => {
                (normal_cdf((x - lo) / sigma) - normal_cdf((x - hi) / sigma)) / (hi - lo)
            }
            AxisLaw::Discrete { atoms, weights } => atoms
                .iter()
                .zip(weights)
                .map(|(z, w)| w * normal_pdf((x - z) / sigma) / sigma)
                .sum(),
            AxisLaw::Density { lo, hi, .. } => {
                let (nodes, weights) = self.restricted(*lo, *hi, true);
                nodes
                    .iter()
                    .zip(&weights)
                    .map(|(z, w)| w * normal_pdf((x - z) / sigma) / sigma)
                    .sum()
            }
        }
    }

    /// A rule with at most `k` nodes matching the moments of the law
    /// restricted to `[a, b)` through degree `2k − 1` (a Gauss rule). The
    /// weights carry the restricted mass.
    pub fn cell_rule(&self, a: f64, b: f64, closed: bool, k: usize) -> (Vec<f64>, Vec<f64>) {
        let (nodes, weights) = self.restricted(a, b, closed);
        if let AxisLaw::Uniform { lo, hi } = self {
            let (l, h) = (a.max(*lo), b.min(*hi));
            if l >= h {
                return (vec![], vec![]);
            }
            let rule = gauss_legendre(k);
            let mass = (h - l) / (hi - lo);
            return rule
                .0
                .iter()
                .zip(&rule.1)
                .map(|(x, w)| (0.5 * (l + h) + 0.5 * (h - l) * x, 0.5 * w * mass))
                .unzip();
        }
        gauss_rule_from_discrete(&nodes, &weights, k)
    }
}

fn density_mass(lo: f64, hi: f64, pdf: &(dyn Fn(f64) -> f64 + Send + Sync)) -> f64 {
    let rule = gauss_legendre(PANEL_POINTS);
    let width = (hi - lo) / DENSITY_PANELS as f64;
    (0..DENSITY_PANELS)
        .map(|p| {
            let mid = lo + (p as f64 + 0.5) * width;
            rule.0
                .iter()
                .zip(&rule.1)
                .map(|(x, w)| pdf(mid + 0.5 * width * x).max(0.0) * 0.5 * width * w)
                .sum::<f64>()
        })
        .sum()
}

/// Gauss rule with `min(k, #nodes)` nodes for a discrete measure, through the
/// Stieltjes procedure and the eigen-decomposition of the Jacobi matrix.
/// Discrete measures with at most `k` atoms are returned as they are.
pub fn gauss_rule_from_discrete(nodes: &[f64], weights: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let mass: f64 = weights.iter().sum();
    if nodes.is_empty() || mass <= 0.0 {
        return (vec![], vec![]);
    }
    if nodes.len() <= k {
        return (nodes.to_vec(), weights.to_vec());
    }
    // work in [-1, 1] coordinates
    let lo = nodes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = nodes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    let half = (0.5 * (hi - lo)).max(f64::MIN_POSITIVE);
    let t: Vec<f64> = nodes.iter().map(|x| (x - mid) / half).collect();
    let w: Vec<f64> = weights.iter().map(|v| v / mass).collect();

    let mut alpha = Vec::with_capacity(k);
    let mut beta = Vec::with_capacity(k);
    let mut prev = vec![0.0; t.len()];
    let mut cur = vec![1.0; t.len()];
    let mut norm_prev = 1.0;
    let mut n = 0;
    while n < k {
        let norm_cur: f64 = w.iter().zip(&cur).map(|(wi, p)| wi * p * p).sum();
        if norm_cur <= 1e-28 {
            break;
        }
        let a: f64 = w.iter().zip(&cur).zip(&t).map(|((wi, p), x)| wi * x * p * p).sum::<f64>() / norm_cur;
        let b = if n == 0 { 0.0 } else { norm_cur / norm_prev };
        alpha.push(a);
        beta.push(b);
        let next: Vec<f64> = (0..t.len()).map(|i| (t[i] - a) * cur[i] - b * prev[i]).collect();
        prev = cur;
        cur = next;
        norm_prev = norm_cur;
        n += 1;
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jac[(i, i)] = alpha[i];
        if i + 1 < n {
            let b = beta[i + 1].sqrt();
            jac[(i, i + 1)] = b;
            jac[(i + 1, i)] = b;
        }
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (mid + half * eig.eigenvalues[i], mass * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}
