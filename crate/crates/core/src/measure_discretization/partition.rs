use serde::Serialize;

use super::measure::MixingMeasure;
use super::smooth::{error_grid, mixture_values, sup_and_l1};
use crate::error::{Error, Result};

/// A half-open box `[lower, upper)` with a representative point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub representative: Vec<f64>,
}

impl Cell {
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= *l && *v < *u)
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Cells `V_1, …, V_N`; the remainder of `R^d` is the implicit cell `V_0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Partition {
    cells: Vec<Cell>,
}

impl Partition {
    pub fn new(cells: Vec<Cell>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::invalid("a partition needs at least one cell"));
        }
        let d = cells[0].lower.len();
        for c in &cells {
            if c.lower.len() != d || c.upper.len() != d || c.representative.len() != d {
                return Err(Error::invalid("cells must share the dimension"));
            }
            if c.lower.iter().zip(&c.upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
                return Err(Error::invalid("cell bounds must be finite with lower < upper"));
            }
            if !c.contains(&c.representative) {
                return Err(Error::invalid(format!("representative {:?} is outside its cell", c.representative)));
            }
        }
        Ok(Partition { cells })
    }

    /// Regular grid of `counts[i]` cells per axis over `[lower, upper)`,
    /// represented by their centres.
    pub fn regular(lower: &[f64], upper: &[f64], counts: &[usize]) -> Result<Self> {
        let d = lower.len();
        let total: usize = counts.iter().product();
        let cells = (0..total)
            .map(|mut flat| {
                let mut idx = vec![0; d];
                for a in (0..d).rev() {
                    idx[a] = flat % counts[a];
                    flat /= counts[a];
                }
                let width: Vec<f64> = (0..d).map(|a| (upper[a] - lower[a]) / counts[a] as f64).collect();
                let lo: Vec<f64> = (0..d).map(|a| lower[a] + idx[a] as f64 * width[a]).collect();
                let hi: Vec<f64> = (0..d).map(|a| lo[a] + width[a]).collect();
                let rep = (0..d).map(|a| lo[a] + 0.5 * width[a]).collect();
                Cell {
                    lower: lo,
                    upper: hi,
                    representative: rep,
                }
            })
            .collect();
        Self::new(cells)
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Index of the cell holding `x`, if any.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        self.cells.iter().position(|c| c.contains(x))
    }

    pub fn max_diameter(&self) -> f64 {
        self.cells.iter().map(Cell::diameter).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PerturbationReport {
    pub sup_distance: f64,
    pub l1_distance: f64,
    pub max_diameter: f64,
    /// `Σ_j |F(V_j) − p_j|`.
    pub mass_mismatch: f64,
    /// `max diam / σ^{d+1} + mismatch / σ^d`, without a constant.
    pub sup_bound: f64,
    /// `max diam / σ + mismatch`, without a constant.
    pub l1_bound: f64,
    /// Measured distance over bound: the empirical constants.
    pub sup_constant: f64,
    pub l1_constant: f64,
}

/// Both sides of the partition perturbation inequalities for `p_{F,σ}` and
/// `p_{F′,σ}`, where the atoms of `F′` are the cell representatives in order.
pub fn partition_perturbation_bound(
    f: &MixingMeasure,
    f_prime: &MixingMeasure,
    partition: &Partition,
    sigma: f64,
) -> Result<PerturbationReport> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma must be positive"));
    }
    let cells = partition.cells();
    if f_prime.len() != cells.len()
        || f_prime
            .atoms()
            .iter()
            .zip(cells)
            .any(|(z, c)| z != &c.representative)
    {
        return Err(Error::invalid("the atoms of F' must be the cell representatives, in order"));
    }
    let mut cell_mass = vec![0.0; cells.len()];
    for (z, w) in f.iter() {
        let j = partition
            .cell_of(z)
            .ok_or_else(|| Error::PartitionCoverage { atom: z.to_vec() })?;
        cell_mass[j] += w;
    }
    let mass_mismatch: f64 = cell_mass.iter().zip(f_prime.weights()).map(|(a, b)| (a - b).abs()).sum();
    let d = f.dim();
    let a = f.max_atom_norm().max(f_prime.max_atom_norm()).max(1e-3);
    let grid = error_grid(d, a, sigma)?;
    let p = mixture_values(&grid, f, sigma)?;
    let q = mixture_values(&grid, f_prime, sigma)?;
    let (sup_distance, l1_distance) = sup_and_l1(&grid, &p, &q);
    let max_diameter = partition.max_diameter();
    let sup_bound = max_diameter / sigma.powi(d as i32 + 1) + mass_mismatch / sigma.powi(d as i32);
    let l1_bound = max_diameter / sigma + mass_mismatch;
    Ok(PerturbationReport {
        sup_distance,
        l1_distance,
        max_diameter,
        mass_mismatch,
        sup_bound,
        l1_bound,
        sup_constant: sup_distance / sup_bound,
        l1_constant: l1_distance / l1_bound,
    })
}
