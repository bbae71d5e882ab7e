use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm;

/// A finitely supported probability measure on `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingMeasure {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
}

impl MixingMeasure {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::invalid("need matching, non-empty atoms and weights"));
        }
        let d = atoms[0].len();
        if d == 0 || atoms.iter().any(|a| a.len() != d) {
            return Err(Error::invalid("atoms must share a positive dimension"));
        }
        if atoms.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("atoms must be finite"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("weights sum to {total}, expected 1")));
        }
        Ok(MixingMeasure {
            atoms,
            weights,
            radius: None,
        })
    }

    /// Like [`MixingMeasure::new`] but rescales the weights to sum to one.
    pub fn normalized(atoms: Vec<Vec<f64>>, mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("weights must have positive total"));
        }
        for w in &mut weights {
            *w /= total;
        }
        Self::new(atoms, weights)
    }

    pub fn dirac(atom: Vec<f64>) -> Self {
        Self::new(vec![atom], vec![1.0]).expect("valid dirac")
    }

    /// Declare a support radius; every atom must lie inside it.
    pub fn with_radius(mut self, a: f64) -> Result<Self> {
        if let Some(z) = self.atoms.iter().find(|z| norm(z) > a * (1.0 + 1e-12)) {
            return Err(Error::invalid(format!("atom {z:?} lies outside radius {a}")));
        }
        self.radius = Some(a);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn radius(&self) -> Option<f64> {
        self.radius
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.atoms.iter().map(|a| a.as_slice()).zip(self.weights.iter().copied())
    }

    /// `∫ z^k dF` for an exponent vector.
    pub fn moment(&self, k: &[u32]) -> f64 {
        self.iter()
            .map(|(z, w)| {
                w * z
                    .iter()
                    .zip(k)
                    .map(|(&zi, &ki)| zi.powi(ki as i32))
                    .product::<f64>()
            })
            .sum()
    }

    pub fn max_atom_norm(&self) -> f64 {
        self.atoms.iter().map(|z| norm(z)).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(MixingMeasure::new(vec![vec![0.0]], vec![0.9]).is_err());
        assert!(MixingMeasure::new(vec![vec![0.0], vec![1.0, 2.0]], vec![0.5, 0.5]).is_err());
        let m = MixingMeasure::new(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        assert_eq!(m.moment(&[2]), 1.0);
        assert!(m.clone().with_radius(0.5).is_err());
        let json = m.to_json();
        assert_eq!(json, r#"{"atoms":[[-1.0],[1.0]],"weights":[0.5,0.5]}"#);
    }
}
