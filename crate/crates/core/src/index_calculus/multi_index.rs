use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A d-vector of non-negative integers indexing a mixed partial derivative
/// `D^k` or a mixed moment.
///
/// Ordering is graded lexicographic: lower order first, and within an order
/// the index with the larger leading entry comes first, so in two dimensions
/// `(0,0) < (1,0) < (0,1) < (2,0) < (1,1) < (0,2)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("multi-index needs dimension at least 1"));
        }
        Ok(MultiIndex(entries))
    }

    pub fn zeros(d: usize) -> Self {
        assert!(d >= 1, "dimension must be positive");
        MultiIndex(vec![0; d])
    }

    /// `e_axis`, the unit index along one coordinate.
    pub fn unit(d: usize, axis: usize) -> Self {
        let mut k = Self::zeros(d);
        k.0[axis] = 1;
        k
    }

    /// Index with `order` on a single axis and zero elsewhere.
    pub fn axial(d: usize, axis: usize, order: u32) -> Self {
        let mut k = Self::zeros(d);
        k.0[axis] = order;
        k
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    /// The total order `k.`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `⟨k, α⟩` for an anisotropy vector.
    pub fn weighted_order(&self, alpha: &[f64]) -> f64 {
        debug_assert_eq!(alpha.len(), self.dim());
        self.0.iter().zip(alpha).map(|(&k, &a)| k as f64 * a).sum()
    }

    /// `k! = ∏ k_j!` as an exact integer.
    pub fn factorial(&self) -> BigUint {
        self.0
            .iter()
            .fold(BigUint::one(), |acc, &k| acc * factorial(k))
    }

    pub fn factorial_f64(&self) -> f64 {
        self.0
            .iter()
            .map(|&k| (1..=k).map(f64::from).product::<f64>())
            .product()
    }

    pub fn has_odd_entry(&self) -> bool {
        self.0.iter().any(|k| k % 2 == 1)
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if self.dim() != other.dim() {
            return None;
        }
        let mut out = Vec::with_capacity(self.dim());
        for (a, b) in self.0.iter().zip(&other.0) {
            out.push(a.checked_sub(*b)?);
        }
        Some(MultiIndex(out))
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self + e_axis`.
    pub fn bump(&self, axis: usize) -> MultiIndex {
        let mut out = self.clone();
        out.0[axis] += 1;
        out
    }

    /// All indices `j` with `j ≤ self` componentwise (including zero and self).
    pub fn sub_indices(&self) -> Vec<MultiIndex> {
        let mut out = vec![Vec::with_capacity(self.dim())];
        for &k in &self.0 {
            let mut next = Vec::with_capacity(out.len() * (k as usize + 1));
            for prefix in &out {
                for j in 0..=k {
                    let mut p = prefix.clone();
                    p.push(j);
                    next.push(p);
                }
            }
            out = next;
        }
        let mut v: Vec<MultiIndex> = out.into_iter().map(MultiIndex).collect();
        v.sort();
        v
    }

    /// Apply a coordinate permutation: entry `i` of the result is `self[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> MultiIndex {
        MultiIndex(perm.iter().map(|&p| self.0[p]).collect())
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}

pub(crate) fn factorial(n: u32) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
}

/// All multi-indices of dimension `d` and order at most `max_order`, in
/// graded lexicographic order.
pub fn enumerate_multiindices(d: usize, max_order: u32) -> Vec<MultiIndex> {
    assert!(d >= 1, "dimension must be positive");
    let mut out = Vec::new();
    for n in 0..=max_order {
        let mut buf = vec![0u32; d];
        compositions(n, 0, &mut buf, &mut out);
    }
    out
}

/// Indices of exactly order `n`, largest leading entry first.
pub fn indices_of_order(d: usize, n: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut buf = vec![0u32; d];
    compositions(n, 0, &mut buf, &mut out);
    out
}

fn compositions(remaining: u32, pos: usize, buf: &mut [u32], out: &mut Vec<MultiIndex>) {
    if pos + 1 == buf.len() {
        buf[pos] = remaining;
        out.push(MultiIndex(buf.to_vec()));
        return;
    }
    for first in (0..=remaining).rev() {
        buf[pos] = first;
        compositions(remaining - first, pos + 1, buf, out);
    }
    buf[pos] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec()).unwrap()
    }

    #[test]
    fn small_enumerations() {
        assert_eq!(enumerate_multiindices(1, 2), vec![mi(&[0]), mi(&[1]), mi(&[2])]);
        assert_eq!(
            enumerate_multiindices(2, 1),
            vec![mi(&[0, 0]), mi(&[1, 0]), mi(&[0, 1])]
        );
        assert_eq!(enumerate_multiindices(3, 4).len(), 35);
    }

    #[test]
    fn enumeration_is_sorted_and_unique() {
        let v = enumerate_multiindices(3, 6);
        for w in v.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn sub_indices_count() {
        assert_eq!(mi(&[2, 1]).sub_indices().len(), 6);
        assert_eq!(mi(&[3]).sub_indices().last().unwrap(), &mi(&[3]));
    }

    #[test]
    fn factorials() {
        assert_eq!(mi(&[3, 2]).factorial(), BigUint::from(12u32));
        assert_eq!(mi(&[3, 2]).factorial_f64(), 12.0);
    }

    #[test]
    fn rejects_empty() {
        assert!(MultiIndex::new(vec![]).is_err());
    }
}
