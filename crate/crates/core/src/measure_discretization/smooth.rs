use nalgebra::DMatrix;

use super::axis::AxisLaw;
use super::measure::MixingMeasure;
use crate::error::{Error, Result};
use crate::quadrature::{GridSpec, QuadratureRule};
use crate::special::normal_pdf;

/// Per-axis table `φ_σ(x_i − z_a)` with rows indexed by atom.
fn axis_table(nodes: &[f64], atoms: &[Vec<f64>], axis: usize, sigma: f64) -> DMatrix<f64> {
    DMatrix::from_fn(atoms.len(), nodes.len(), |a, i| {
        normal_pdf((nodes[i] - atoms[a][axis]) / sigma) / sigma
    })
}

/// `p_{F,σ}` on a grid (isotropic kernel), in grid order.
pub fn mixture_values(grid: &GridSpec<f64>, f: &MixingMeasure, sigma: f64) -> Result<Vec<f64>> {
    let d = grid.dim();
    if f.dim() != d {
        return Err(Error::invalid("grid and measure dimensions differ"));
    }
    let nodes: Vec<Vec<f64>> = (0..d).map(|a| grid.nodes(a)).collect();
    let w = f.weights();
    match d {
        1 => {
            let t = axis_table(&nodes[0], f.atoms(), 0, sigma);
            Ok((0..nodes[0].len())
                .map(|i| (0..w.len()).map(|a| w[a] * t[(a, i)]).sum())
                .collect())
        }
        2 => {
            let mut t0 = axis_table(&nodes[0], f.atoms(), 0, sigma);
            for (a, mut row) in t0.row_iter_mut().enumerate() {
                row *= w[a];
            }
            let t1 = axis_table(&nodes[1], f.atoms(), 1, sigma);
            let m = t0.transpose() * t1;
            let (n0, n1) = (nodes[0].len(), nodes[1].len());
            let mut out = vec![0.0; n0 * n1];
            for i in 0..n0 {
                for j in 0..n1 {
                    out[i * n1 + j] = m[(i, j)];
                }
            }
            Ok(out)
        }
        _ => {
            let tables: Vec<DMatrix<f64>> = (0..d).map(|a| axis_table(&nodes[a], f.atoms(), a, sigma)).collect();
            Ok((0..grid.total_points())
                .map(|flat| {
                    let idx = grid.unflatten(flat);
                    (0..w.len())
                        .map(|a| w[a] * (0..d).map(|ax| tables[ax][(a, idx[ax])]).product::<f64>())
                        .sum()
                })
                .collect())
        }
    }
}

/// `p_{P,σ}` for a product law `P = ⊗ laws`, as an outer product of the
/// smoothed marginals.
pub fn product_values(grid: &GridSpec<f64>, laws: &[AxisLaw], sigma: f64) -> Result<Vec<f64>> {
    let d = grid.dim();
    if laws.len() != d {
        return Err(Error::invalid("one law per axis is required"));
    }
    let marg: Vec<Vec<f64>> = (0..d)
        .map(|a| grid.nodes(a).iter().map(|&x| laws[a].smoothed_density(x, sigma)).collect())
        .collect();
    Ok((0..grid.total_points())
        .map(|flat| {
            let idx = grid.unflatten(flat);
            (0..d).map(|a| marg[a][idx[a]]).product()
        })
        .collect())
}

/// Grid covering `[−a − 8σ, a + 8σ]^d` with spacing at most `σ/16` where the
/// point budget allows (at least 4096 points in one dimension).
pub fn error_grid(d: usize, a: f64, sigma: f64) -> Result<GridSpec<f64>> {
    let half = a + 8.0 * sigma;
    let want = (32.0 * half / sigma).ceil() as usize;
    let (floor, cap) = match d {
        1 => (1 << 12, 1 << 16),
        2 => (1 << 8, 1 << 10),
        _ => (1 << 5, 1 << 6),
    };
    GridSpec::cube(d, half, want.next_power_of_two().clamp(floor, cap), QuadratureRule::Midpoint)
}

/// Sup and L1 distances between two sets of grid values.
pub fn sup_and_l1(grid: &GridSpec<f64>, p: &[f64], q: &[f64]) -> (f64, f64) {
    let sup = p.iter().zip(q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    (sup, crate::divergences::l1_from_values(grid, p, q))
}
