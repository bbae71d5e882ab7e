use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use super::multi_index::{enumerate_multiindices, MultiIndex};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest order accepted by [`cd_coefficients`].
pub const MAX_COEFFICIENT_ORDER: u32 = 32;

/// `μ(m)`: 0 for odd m, `(m−1)!!` for even m.
pub fn univariate_gaussian_moment(m: u32) -> BigUint {
    if m % 2 == 1 {
        return BigUint::zero();
    }
    let mut acc = BigUint::one();
    let mut j = 1u32;
    while j < m {
        acc *= BigUint::from(j);
        j += 2;
    }
    acc
}

/// Mixed standard-normal moment `m_k = ∏_j μ(k_j)`, exact.
pub fn gaussian_moment_exact(k: &MultiIndex) -> BigUint {
    k.entries()
        .iter()
        .fold(BigUint::one(), |acc, &m| acc * univariate_gaussian_moment(m))
}

/// Mixed standard-normal moment `m_k` as a float.
pub fn gaussian_moment(k: &MultiIndex) -> f64 {
    k.entries()
        .iter()
        .map(|&m| {
            if m % 2 == 1 {
                0.0
            } else {
                (1..m).step_by(2).map(f64::from).product()
            }
        })
        .product()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CdPair<S> {
    pub c: S,
    pub d: S,
}

/// The coefficients `(c_k, d_k)` for every `1 ≤ k. ≤ max_order`, keyed in
/// graded-lex order.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientTable<S> {
    dimension: usize,
    max_order: u32,
    entries: BTreeMap<MultiIndex, CdPair<S>>,
}

impl<S: Scalar> CoefficientTable<S> {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn get(&self, k: &MultiIndex) -> Option<&CdPair<S>> {
        self.entries.get(k)
    }

    /// `d_k`, or zero when `k` is outside the table.
    pub fn d(&self, k: &MultiIndex) -> S {
        self.entries.get(k).map(|p| p.d.clone()).unwrap_or_else(S::zero)
    }

    pub fn c(&self, k: &MultiIndex) -> S {
        self.entries.get(k).map(|p| p.c.clone()).unwrap_or_else(S::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &CdPair<S>)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries with non-zero `d_k`, which are the only ones the transform uses.
    pub fn nonzero_d(&self) -> impl Iterator<Item = (&MultiIndex, &S)> {
        self.entries
            .iter()
            .filter(|(_, p)| !p.d.is_zero())
            .map(|(k, p)| (k, &p.d))
    }

    pub fn map<T, F: Fn(&S) -> T>(&self, f: F) -> CoefficientTable<T> {
        CoefficientTable {
            dimension: self.dimension,
            max_order: self.max_order,
            entries: self
                .entries
                .iter()
                .map(|(k, p)| {
                    (
                        k.clone(),
                        CdPair {
                            c: f(&p.c),
                            d: f(&p.d),
                        },
                    )
                })
                .collect(),
        }
    }

    /// Canonical JSON document: `{dimension, entries: [{c, d, index}], max_order}`
    /// with entries in graded-lex order.
    pub fn to_canonical_json(&self) -> String {
        let entries: Vec<Value> = self
            .entries
            .iter()
            .map(|(k, p)| json!({"index": k.entries(), "c": p.c.to_json(), "d": p.d.to_json()}))
            .collect();
        let doc = json!({
            "dimension": self.dimension,
            "max_order": self.max_order,
            "entries": entries,
        });
        serde_json::to_string_pretty(&doc).expect("json serialization")
    }
}

/// Exact coefficient table.
pub fn cd_coefficients_exact(d: usize, max_order: u32) -> Result<CoefficientTable<BigRational>> {
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if max_order > MAX_COEFFICIENT_ORDER {
        return Err(Error::invalid(format!(
            "max_order {max_order} exceeds the supported limit {MAX_COEFFICIENT_ORDER}"
        )));
    }
    let mut entries: BTreeMap<MultiIndex, CdPair<BigRational>> = BTreeMap::new();
    // (-1)^{k.} m_k / k!, cached per index
    let mut signed_moment: BTreeMap<MultiIndex, BigRational> = BTreeMap::new();
    for k in enumerate_multiindices(d, max_order) {
        let m = gaussian_moment_exact(&k);
        let mut r = BigRational::new(BigInt::from(m), BigInt::from(k.factorial()));
        if k.order() % 2 == 1 {
            r = -r;
        }
        signed_moment.insert(k, r);
    }

    for n in enumerate_multiindices(d, max_order) {
        let order = n.order();
        if order == 0 {
            continue;
        }
        if order == 1 {
            // (-1)^1 m_n/n! is exactly -m_n/n!
            let d_n = signed_moment[&n].clone();
            entries.insert(
                n,
                CdPair {
                    c: BigRational::zero(),
                    d: d_n,
                },
            );
            continue;
        }
        let mut c = BigRational::zero();
        for k in n.sub_indices() {
            if k.order() == 0 || k.order() == order {
                continue;
            }
            let sm = &signed_moment[&k];
            if sm.is_zero() {
                continue;
            }
            let l = n.checked_sub(&k).expect("sub-index");
            let dl = &entries[&l].d;
            if dl.is_zero() {
                continue;
            }
            c -= sm * dl;
        }
        let d_n = signed_moment[&n].clone() + &c;
        entries.insert(n, CdPair { c, d: d_n });
    }
    Ok(CoefficientTable {
        dimension: d,
        max_order,
        entries,
    })
}

/// Coefficient table converted to the requested scalar type. The recursion is
/// always evaluated exactly.
pub fn cd_coefficients<S: Scalar>(d: usize, max_order: u32) -> Result<CoefficientTable<S>> {
    let exact = cd_coefficients_exact(d, max_order)?;
    Ok(exact.map(S::from_rational))
}

/// Sum of `|d_k| * w^{k.}` over the table, useful for smallness checks.
pub fn weighted_abs_d_sum(table: &CoefficientTable<BigRational>, w: f64) -> f64 {
    table
        .iter()
        .map(|(k, p)| p.d.abs().as_f64() * w.powi(k.order() as i32))
        .sum()
}
