//! Exact check that Gaussian smoothing undoes the bias-correction transform.
//!
//! Test functions are `P(x)·exp(−|x|²/2)` with rational polynomial `P`. Such
//! functions are closed under differentiation, so the formal expansion
//! `K_σ g = Σ_k σ^{k.} (−1)^{k.} m_k / k! · D^k g` can be carried out exactly
//! and each power of σ in `K_σ(T_{β,σ} f) − f` inspected.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::coefficients::CoefficientTable;
use super::multi_index::{enumerate_multiindices, MultiIndex};
use crate::error::{Error, Result};
use crate::scalar::strict_floor;

/// `P(x)·exp(−|x|²/2)` stored as the coefficient map of `P`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyGaussian {
    dim: usize,
    coeffs: BTreeMap<Vec<u32>, BigRational>,
}

impl PolyGaussian {
    pub fn zero(dim: usize) -> Self {
        PolyGaussian {
            dim,
            coeffs: BTreeMap::new(),
        }
    }

    /// Build from `(exponents, coefficient)` pairs; repeated exponents add.
    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (Vec<u32>, BigRational)>) -> Self {
        let mut p = Self::zero(dim);
        for (e, c) in terms {
            assert_eq!(e.len(), dim, "exponent length");
            p.add_term(e, c);
        }
        p
    }

    fn add_term(&mut self, e: Vec<u32>, c: BigRational) {
        use std::collections::btree_map::Entry;
        if c.is_zero() {
            return;
        }
        match self.coeffs.entry(e) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.coeffs.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn add_scaled(&mut self, other: &PolyGaussian, s: &BigRational) {
        for (e, c) in &other.coeffs {
            self.add_term(e.clone(), c * s);
        }
    }

    /// `∂_i (P e) = (∂_i P − x_i P) e`.
    pub fn derivative(&self, axis: usize) -> PolyGaussian {
        let mut out = Self::zero(self.dim);
        for (e, c) in &self.coeffs {
            if e[axis] > 0 {
                let mut de = e.clone();
                de[axis] -= 1;
                out.add_term(de, c * BigRational::from_integer(BigInt::from(e[axis])));
            }
            let mut up = e.clone();
            up[axis] += 1;
            out.add_term(up, -c.clone());
        }
        out
    }

    pub fn derivative_multi(&self, k: &MultiIndex) -> PolyGaussian {
        let mut out = self.clone();
        for (axis, &times) in k.entries().iter().enumerate() {
            for _ in 0..times {
                out = out.derivative(axis);
            }
        }
        out
    }

    /// Evaluate at a point (float), for cross-checks.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        use num_traits::ToPrimitive;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let p: f64 = self
            .coeffs
            .iter()
            .map(|(e, c)| {
                c.to_f64().unwrap()
                    * e.iter()
                        .zip(x)
                        .map(|(&k, &xi)| xi.powi(k as i32))
                        .product::<f64>()
            })
            .sum();
        p * (-0.5 * r2).exp()
    }
}

/// Outcome of an exact cancellation check.
#[derive(Clone, Debug)]
pub struct CancellationReport {
    pub beta: f64,
    /// `⌊β⌋` in the strict convention.
    pub floor_beta: u32,
    pub powers_checked: u32,
    /// Lowest power of σ with a non-vanishing coefficient, if any was found.
    pub first_nonzero_power: Option<u32>,
}

impl CancellationReport {
    /// Every power `1..=⌊β⌋` vanishes.
    pub fn passes(&self) -> bool {
        self.first_nonzero_power
            .map_or(true, |p| p > self.floor_beta)
    }
}

fn oracle_moment(m: u32) -> BigInt {
    // μ(0)=1, μ(1)=0, μ(m+2) = (m+1) μ(m)
    let mut even = BigInt::one();
    if m % 2 == 1 {
        return BigInt::zero();
    }
    let mut j = 0;
    while j < m {
        even *= BigInt::from(j + 1);
        j += 2;
    }
    even
}

fn oracle_factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |a, i| a * BigInt::from(i))
}

/// Smoothing series coefficient `(−1)^{k.} m_k / k!`, from scratch.
fn smoothing_weight(k: &MultiIndex) -> BigRational {
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for &m in k.entries() {
        num *= oracle_moment(m);
        den *= oracle_factorial(m);
    }
    if k.order() % 2 == 1 {
        num = -num;
    }
    BigRational::new(num, den)
}

/// Coefficients of `σ^0, …, σ^{max_power}` in `K_σ(T_{β,σ} f) − f`.
pub fn smoothing_residual_series(
    f: &PolyGaussian,
    table: &CoefficientTable<BigRational>,
    beta: f64,
    max_power: u32,
) -> Result<Vec<PolyGaussian>> {
    let fb = strict_floor(beta).max(0) as u32;
    if table.dimension() != f.dim {
        return Err(Error::invalid("table and function dimensions differ"));
    }
    if table.max_order() < fb {
        return Err(Error::invalid(format!(
            "table order {} below floor(beta) = {fb}",
            table.max_order()
        )));
    }
    // correction weights b_l: 1 at l = 0, −d_l for 1 ≤ l. ≤ ⌊β⌋
    let b = |l: &MultiIndex| -> BigRational {
        if l.order() == 0 {
            BigRational::one()
        } else if l.order() <= fb {
            -table.d(l)
        } else {
            BigRational::zero()
        }
    };
    let mut series = Vec::with_capacity(max_power as usize + 1);
    let all = enumerate_multiindices(f.dim, max_power);
    for j in 0..=max_power {
        let mut acc = PolyGaussian::zero(f.dim);
        for n in all.iter().filter(|n| n.order() == j) {
            let mut coef = BigRational::zero();
            for l in n.sub_indices() {
                let bl = b(&l);
                if bl.is_zero() {
                    continue;
                }
                let k = n.checked_sub(&l).unwrap();
                coef += smoothing_weight(&k) * bl;
            }
            if !coef.is_zero() {
                acc.add_scaled(&f.derivative_multi(n), &coef);
            }
        }
        if j == 0 {
            acc.add_scaled(f, &-BigRational::one());
        }
        series.push(acc);
    }
    Ok(series)
}

/// Check that powers `1..=⌊β⌋` of σ vanish, scanning up to `⌊β⌋ + 2`.
pub fn check_cancellation(
    f: &PolyGaussian,
    table: &CoefficientTable<BigRational>,
    beta: f64,
) -> Result<CancellationReport> {
    let fb = strict_floor(beta).max(0) as u32;
    let max_power = fb + 2;
    let series = smoothing_residual_series(f, table, beta, max_power)?;
    let first_nonzero_power = series
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_zero())
        .map(|(j, _)| j as u32);
    Ok(CancellationReport {
        beta,
        floor_beta: fb,
        powers_checked: max_power,
        first_nonzero_power,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index_calculus::cd_coefficients_exact;
    use crate::scalar::rational;

    #[test]
    fn derivative_of_gaussian() {
        let g = PolyGaussian::from_terms(1, [(vec![0], rational(1, 1))]);
        let d = g.derivative(0);
        let x = 0.7_f64;
        assert!((d.evaluate(&[x]) + x * (-0.5 * x * x).exp()).abs() < 1e-15);
    }

    #[test]
    fn plain_gaussian_cancels() {
        let table = cd_coefficients_exact(1, 8).unwrap();
        let g = PolyGaussian::from_terms(1, [(vec![0], rational(1, 1)), (vec![3], rational(2, 7))]);
        for beta in [1.5, 2.5, 4.5, 6.5] {
            let r = check_cancellation(&g, &table, beta).unwrap();
            assert!(r.passes(), "beta {beta}: {r:?}");
        }
    }

    #[test]
    fn wrong_table_is_caught() {
        let mut table = cd_coefficients_exact(1, 4).unwrap();
        table = table.map(|v| v * rational(2, 1));
        let g = PolyGaussian::from_terms(1, [(vec![0], rational(1, 1))]);
        let r = check_cancellation(&g, &table, 2.5).unwrap();
        assert_eq!(r.first_nonzero_power, Some(2));
    }
}
