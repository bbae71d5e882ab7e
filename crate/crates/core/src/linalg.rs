//! Symmetric positive-definite covariance matrices with a cached
//! eigen-decomposition.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Covariance matrix `Σ` with its precision `Σ^{-1}`, eigenvalues (ascending),
/// eigenvectors and a square-root factor, all computed once.
#[derive(Clone, Debug)]
pub struct CovarianceSpec {
    d: usize,
    sigma: Vec<f64>,
    precision: Vec<f64>,
    /// `A` with `A Aᵀ = Σ`, row-major.
    root: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// Column `j` is the eigenvector for `eigenvalues[j]`, row-major storage.
    eigenvectors: Vec<f64>,
    log_det: f64,
    diagonal: bool,
}

impl PartialEq for CovarianceSpec {
    fn eq(&self, other: &Self) -> bool {
        self.sigma == other.sigma
    }
}

#[derive(Serialize, Deserialize)]
struct CovarianceRepr {
    matrix: Vec<Vec<f64>>,
}

impl Serialize for CovarianceSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CovarianceRepr {
            matrix: (0..self.d)
                .map(|i| self.sigma[i * self.d..(i + 1) * self.d].to_vec())
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CovarianceSpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let r = CovarianceRepr::deserialize(de)?;
        CovarianceSpec::from_rows(&r.matrix).map_err(serde::de::Error::custom)
    }
}

impl CovarianceSpec {
    /// From a row-major `d × d` matrix.
    pub fn new(d: usize, entries: &[f64]) -> Result<Self> {
        if d == 0 || entries.len() != d * d {
            return Err(Error::invalid("covariance needs d*d entries with d >= 1"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "covariance entries".into(),
                location: entries.to_vec(),
            });
        }
        let scale = entries.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
        for i in 0..d {
            for j in 0..i {
                if (entries[i * d + j] - entries[j * d + i]).abs() > 1e-10 * scale {
                    return Err(Error::invalid("covariance matrix is not symmetric"));
                }
            }
        }
        let diagonal = (0..d).all(|i| (0..d).all(|j| i == j || entries[i * d + j] == 0.0));
        if diagonal {
            return Self::diagonal(&(0..d).map(|i| entries[i * d + i]).collect::<Vec<_>>());
        }
        let m = DMatrix::from_fn(d, d, |i, j| 0.5 * (entries[i * d + j] + entries[j * d + i]));
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j]).collect();
        if eigenvalues[0] <= 0.0 || !eigenvalues[0].is_finite() {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: eigenvalues[0],
            });
        }
        let mut eigenvectors = vec![0.0; d * d];
        for (col, &j) in order.iter().enumerate() {
            for i in 0..d {
                eigenvectors[i * d + col] = eig.eigenvectors[(i, j)];
            }
        }
        let sym: Vec<f64> = (0..d * d)
            .map(|ij| 0.5 * (entries[ij] + entries[(ij % d) * d + ij / d]))
            .collect();
        Ok(Self::assemble(d, eigenvalues, eigenvectors, false, Some(sym)))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("covariance rows must form a square matrix"));
        }
        Self::new(d, &rows.concat())
    }

    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        let d = variances.len();
        if d == 0 {
            return Err(Error::invalid("empty covariance"));
        }
        let min = variances.iter().cloned().fold(f64::INFINITY, f64::min);
        if min <= 0.0 || !min.is_finite() {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| variances[a].total_cmp(&variances[b]));
        let eigenvalues = order.iter().map(|&j| variances[j]).collect();
        let mut eigenvectors = vec![0.0; d * d];
        for (col, &j) in order.iter().enumerate() {
            eigenvectors[j * d + col] = 1.0;
        }
        Ok(Self::assemble(d, eigenvalues, eigenvectors, true, None))
    }

    pub fn isotropic(d: usize, variance: f64) -> Result<Self> {
        Self::diagonal(&vec![variance; d])
    }

    /// Rebuild from eigenvalues and an orthogonal matrix whose columns are the
    /// matching eigenvectors (row-major).
    pub fn from_eigen(eigenvalues: &[f64], eigenvectors: &[f64]) -> Result<Self> {
        let d = eigenvalues.len();
        if eigenvectors.len() != d * d {
            return Err(Error::invalid("eigenvector matrix has the wrong size"));
        }
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                m[i * d + j] = (0..d)
                    .map(|c| eigenvectors[i * d + c] * eigenvalues[c] * eigenvectors[j * d + c])
                    .sum();
            }
        }
        for i in 0..d {
            for j in 0..i {
                let avg = 0.5 * (m[i * d + j] + m[j * d + i]);
                m[i * d + j] = avg;
                m[j * d + i] = avg;
            }
        }
        Self::new(d, &m)
    }

    fn assemble(
        d: usize,
        eigenvalues: Vec<f64>,
        eigenvectors: Vec<f64>,
        diagonal: bool,
        given: Option<Vec<f64>>,
    ) -> Self {
        let mut sigma = vec![0.0; d * d];
        let mut precision = vec![0.0; d * d];
        let mut root = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                let mut p = 0.0;
                for c in 0..d {
                    let vv = eigenvectors[i * d + c] * eigenvectors[j * d + c];
                    s += vv * eigenvalues[c];
                    p += vv / eigenvalues[c];
                }
                sigma[i * d + j] = s;
                precision[i * d + j] = p;
                root[i * d + j] = eigenvectors[i * d + j] * eigenvalues[j].sqrt();
            }
        }
        if let Some(g) = given {
            sigma = g;
        }
        let log_det = eigenvalues.iter().map(|l| l.ln()).sum();
        CovarianceSpec {
            d,
            sigma,
            precision,
            root,
            eigenvalues,
            eigenvectors,
            log_det,
            diagonal,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.sigma[i * self.d + j]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.sigma
    }

    pub fn precision(&self) -> &[f64] {
        &self.precision
    }

    pub fn root(&self) -> &[f64] {
        &self.root
    }

    /// Eigenvalues of `Σ`, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &[f64] {
        &self.eigenvectors
    }

    /// Eigenvalues of `Σ^{-1}`, ascending.
    pub fn precision_eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues.iter().rev().map(|l| 1.0 / l).collect()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn trace_precision(&self) -> f64 {
        self.eigenvalues.iter().map(|l| 1.0 / l).sum()
    }

    /// `uᵀ Σ^{-1} u`.
    pub fn mahalanobis_sq(&self, u: &[f64]) -> f64 {
        let d = self.d;
        if self.diagonal {
            return (0..d).map(|i| u[i] * u[i] * self.precision[i * d + i]).sum();
        }
        let mut acc = 0.0;
        for i in 0..d {
            let mut row = 0.0;
            for j in 0..d {
                row += self.precision[i * d + j] * u[j];
            }
            acc += u[i] * row;
        }
        acc
    }

    /// `Σ^{-1} u`.
    pub fn precision_times(&self, u: &[f64]) -> Vec<f64> {
        let d = self.d;
        (0..d)
            .map(|i| (0..d).map(|j| self.precision[i * d + j] * u[j]).sum())
            .collect()
    }

    /// `log φ_Σ(u)`.
    pub fn log_normal_density(&self, u: &[f64]) -> f64 {
        -0.5 * (self.d as f64 * LN_2PI + self.log_det + self.mahalanobis_sq(u))
    }

    pub fn normal_density(&self, u: &[f64]) -> f64 {
        self.log_normal_density(u).exp()
    }

    /// `(2π)^{-d/2} det(Σ)^{-1/2}`, the peak of `φ_Σ`.
    pub fn normal_peak(&self) -> f64 {
        (-0.5 * (self.d as f64 * LN_2PI + self.log_det)).exp()
    }

    /// `Σ + diag(extra)`.
    pub fn add_diagonal(&self, extra: &[f64]) -> Result<Self> {
        assert_eq!(extra.len(), self.d);
        if self.diagonal {
            let v: Vec<f64> = (0..self.d)
                .map(|i| self.sigma[i * self.d + i] + extra[i])
                .collect();
            return Self::diagonal(&v);
        }
        let mut m = self.sigma.clone();
        for i in 0..self.d {
            m[i * self.d + i] += extra[i];
        }
        Self::new(self.d, &m)
    }

    /// `c · Σ`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if self.diagonal {
            let v: Vec<f64> = (0..self.d)
                .map(|i| self.sigma[i * self.d + i] * c)
                .collect();
            return Self::diagonal(&v);
        }
        Self::new(self.d, &self.sigma.iter().map(|v| v * c).collect::<Vec<_>>())
    }

    /// `A z` with `A Aᵀ = Σ`; maps standard normal draws to `N(0, Σ)`.
    pub fn transform_standard(&self, z: &[f64]) -> Vec<f64> {
        let d = self.d;
        (0..d)
            .map(|i| (0..d).map(|j| self.root[i * d + j] * z[j]).sum())
            .collect()
    }
}

/// Euclidean norm.
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Product of two row-major square matrices.
pub fn mat_mul(d: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    out
}

pub fn transpose(d: usize, a: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[j * d + i] = a[i * d + j];
        }
    }
    out
}

/// Inverse of a row-major SPD matrix through its eigen-decomposition.
pub fn spd_inverse(d: usize, a: &[f64]) -> Result<Vec<f64>> {
    Ok(CovarianceSpec::new(d, a)?.precision().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_indefinite() {
        let e = CovarianceSpec::new(2, &[1.0, 2.0, 2.0, 1.0]).unwrap_err();
        match e {
            Error::NotPositiveDefinite { min_eigenvalue } => {
                assert!((min_eigenvalue + 1.0).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inverse_and_root() {
        let c = CovarianceSpec::new(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let prod = mat_mul(2, c.matrix(), c.precision());
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[i * 2 + j] - want).abs() < 1e-12);
            }
        }
        let aat = mat_mul(2, c.root(), &transpose(2, c.root()));
        for (x, y) in aat.iter().zip(c.matrix()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((c.log_det() - (1.75_f64).ln()).abs() < 1e-12);
        assert!(c.eigenvalues()[0] <= c.eigenvalues()[1]);
    }

    #[test]
    fn diagonal_fast_path() {
        let c = CovarianceSpec::new(2, &[3.0, 0.0, 0.0, 0.5]).unwrap();
        assert!(c.is_diagonal());
        assert_eq!(c.eigenvalues(), &[0.5, 3.0]);
        assert!((c.mahalanobis_sq(&[1.0, 1.0]) - (1.0 / 3.0 + 2.0)).abs() < 1e-14);
    }

    #[test]
    fn serde_round_trip() {
        let c = CovarianceSpec::new(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        let back: CovarianceSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(c, back);
    }
}
