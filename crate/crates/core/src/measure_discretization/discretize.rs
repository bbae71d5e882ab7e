use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use super::axis::AxisLaw;
use super::measure::MixingMeasure;
use super::smooth::{error_grid, mixture_values, product_values, sup_and_l1};
use crate::error::{Error, Result};

/// Universal constant `D` in the support-point bound
/// `N = D [max(a/σ, 1) log(1/ε)]^d`, calibrated on truncated-Gaussian and
/// Gaussian-mixture mixing measures (see the calibration test).
pub const SUPPORT_CONSTANT_D: f64 = 5.0;

/// A mixing measure to be discretised.
#[derive(Clone, Debug)]
pub enum MixingSource {
    Discrete(MixingMeasure),
    /// Product of independent axis laws.
    Product(Vec<AxisLaw>),
}

impl MixingSource {
    pub fn dim(&self) -> usize {
        match self {
            MixingSource::Discrete(m) => m.dim(),
            MixingSource::Product(l) => l.len(),
        }
    }

    /// Radius of the smallest origin-centred ball holding the support.
    pub fn support_radius(&self) -> f64 {
        match self {
            MixingSource::Discrete(m) => m.max_atom_norm(),
            MixingSource::Product(laws) => laws
                .iter()
                .map(|l| {
                    let (lo, hi) = l.support();
                    lo.abs().max(hi.abs()).powi(2)
                })
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// `p_{P,σ}` on the error grid.
    fn smoothed_values(&self, grid: &crate::quadrature::GridSpec<f64>, sigma: f64) -> Result<Vec<f64>> {
        match self {
            MixingSource::Discrete(m) => mixture_values(grid, m, sigma),
            MixingSource::Product(laws) => product_values(grid, laws, sigma),
        }
    }
}

/// `k = ⌈log(1/ε)⌉` (at least 1): per-axis moments through `2k − 2` are matched.
pub fn moment_order(eps: f64) -> usize {
    ((1.0 / eps).ln().ceil() as usize).max(1)
}

/// `D [max(a/σ, 1) log(1/ε)]^d`.
pub fn atom_bound(a: f64, sigma: f64, eps: f64, d: usize) -> f64 {
    SUPPORT_CONSTANT_D * ((a / sigma).max(1.0) * (1.0 / eps).ln()).powi(d as i32)
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscretizationReport {
    pub measure: MixingMeasure,
    pub moment_order: usize,
    pub cells_per_axis: usize,
    pub atom_count: usize,
    pub atom_bound: f64,
    pub support_constant: f64,
    /// `‖p_{P0,σ} − p_{F,σ}‖_∞` on the error grid.
    pub sup_error: f64,
    /// `‖p_{P0,σ} − p_{F,σ}‖₁` on the error grid.
    pub l1_error: f64,
    /// `ε / σ^d`, the sup-norm scale.
    pub sup_scale: f64,
    /// `ε {log(1/ε)}^{1/2}`, the L1 scale.
    pub l1_scale: f64,
    /// Set when the moment system could not be reduced and atoms were copied.
    pub warning: Option<String>,
}

/// Discrete `F_σ` with moments of `P0` matched cell by cell. The support box
/// `[−a, a]^d` is cut into `J = max(⌈a/σ⌉, 1)` cells per axis; in each cell all
/// mixed moments with exponents up to `2k − 2` are matched.
///
/// Product sources use per-axis Gauss rules, tensorised. Discrete sources
/// with more atoms than the bound are reduced by Carathéodory pruning.
pub fn moment_match_discretize(p0: &MixingSource, sigma: f64, eps: f64, a: f64) -> Result<DiscretizationReport> {
    if !(sigma > 0.0) || !(eps > 0.0 && eps < 1.0) || !(a > 0.0) {
        return Err(Error::invalid("need sigma > 0, eps in (0, 1) and a > 0"));
    }
    let d = p0.dim();
    if let MixingSource::Product(laws) = p0 {
        for l in laws {
            l.validate()?;
        }
    }
    let r = p0.support_radius();
    if r > a * (1.0 + 1e-12) {
        return Err(Error::invalid(format!("support radius {r} exceeds a = {a}")));
    }
    let k = moment_order(eps);
    let cells = ((a / sigma).ceil() as usize).max(1);
    let bound = atom_bound(a, sigma, eps, d);
    let edges: Vec<f64> = (0..=cells).map(|j| -a + 2.0 * a * j as f64 / cells as f64).collect();

    let mut warning = None;
    let measure = match p0 {
        MixingSource::Discrete(m) if (m.len() as f64) <= bound => m.clone(),
        MixingSource::Discrete(m) => match prune_by_cells(m, &edges, k) {
            Some(f) => f,
            None => {
                warning = Some("moment system could not be reduced; support points copied".into());
                m.clone()
            }
        },
        MixingSource::Product(laws) => {
            let axes: Vec<(Vec<f64>, Vec<f64>)> = laws
                .iter()
                .map(|law| {
                    let mut nodes = Vec::new();
                    let mut weights = Vec::new();
                    for j in 0..cells {
                        let (x, w) = law.cell_rule(edges[j], edges[j + 1], j + 1 == cells, k);
                        nodes.extend(x);
                        weights.extend(w);
                    }
                    (nodes, weights)
                })
                .collect();
            tensorize(&axes)?
        }
    };

    let grid = error_grid(d, a, sigma)?;
    let p = p0.smoothed_values(&grid, sigma)?;
    let q = mixture_values(&grid, &measure, sigma)?;
    let (sup_error, l1_error) = sup_and_l1(&grid, &p, &q);
    let l = (1.0 / eps).ln();
    Ok(DiscretizationReport {
        atom_count: measure.len(),
        measure,
        moment_order: k,
        cells_per_axis: cells,
        atom_bound: bound,
        support_constant: SUPPORT_CONSTANT_D,
        sup_error,
        l1_error,
        sup_scale: eps / sigma.powi(d as i32),
        l1_scale: eps * l.sqrt(),
        warning,
    })
}

fn tensorize(axes: &[(Vec<f64>, Vec<f64>)]) -> Result<MixingMeasure> {
    let mut atoms: Vec<Vec<f64>> = vec![vec![]];
    let mut weights = vec![1.0];
    for (nodes, w) in axes {
        let mut na = Vec::with_capacity(atoms.len() * nodes.len());
        let mut nw = Vec::with_capacity(atoms.len() * nodes.len());
        for (z, wz) in atoms.iter().zip(&weights) {
            for (x, wx) in nodes.iter().zip(w) {
                let mut p = z.clone();
                p.push(*x);
                na.push(p);
                nw.push(wz * wx);
            }
        }
        atoms = na;
        weights = nw;
    }
    MixingMeasure::normalized(atoms, weights)
}

fn cell_index(x: f64, edges: &[f64]) -> usize {
    let n = edges.len() - 1;
    let t = (x - edges[0]) / (edges[n] - edges[0]) * n as f64;
    (t.floor().max(0.0) as usize).min(n - 1)
}

/// Tensor Chebyshev features `Π T_{l_i}(u_i)` for `0 ≤ l_i ≤ deg`.
fn chebyshev_features(u: &[f64], deg: usize) -> Vec<f64> {
    let per_axis: Vec<Vec<f64>> = u
        .iter()
        .map(|&x| {
            let mut t = vec![1.0, x];
            for j in 2..=deg {
                t.push(2.0 * x * t[j - 1] - t[j - 2]);
            }
            t.truncate(deg + 1);
            t
        })
        .collect();
    let mut out = vec![1.0];
    for t in &per_axis {
        out = out.iter().flat_map(|a| t.iter().map(move |b| a * b)).collect();
    }
    out
}

fn prune_by_cells(m: &MixingMeasure, edges: &[f64], k: usize) -> Option<MixingMeasure> {
    let d = m.dim();
    let deg = 2 * k - 2;
    let mut groups: std::collections::BTreeMap<Vec<usize>, Vec<usize>> = Default::default();
    for (i, z) in m.atoms().iter().enumerate() {
        let key: Vec<usize> = z.iter().map(|&x| cell_index(x, edges)).collect();
        groups.entry(key).or_default().push(i);
    }
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (key, members) in groups {
        // cell-local coordinates in [-1, 1]
        let centre: Vec<f64> = key.iter().map(|&j| 0.5 * (edges[j] + edges[j + 1])).collect();
        let half = 0.5 * (edges[1] - edges[0]);
        let features: Vec<Vec<f64>> = members
            .iter()
            .map(|&i| {
                let u: Vec<f64> = (0..d).map(|a| (m.atoms()[i][a] - centre[a]) / half).collect();
                chebyshev_features(&u, deg)
            })
            .collect();
        let w: Vec<f64> = members.iter().map(|&i| m.weights()[i]).collect();
        let (keep, kw) = caratheodory(&features, &w)?;
        for (j, wj) in keep.into_iter().zip(kw) {
            atoms.push(m.atoms()[members[j]].clone());
            weights.push(wj);
        }
    }
    MixingMeasure::normalized(atoms, weights).ok()
}

/// Reduce a non-negative combination of feature vectors to at most `M` of
/// them with the same weighted sum (`M` = feature length). Returns kept
/// indices and new weights, or `None` if the reduction breaks down.
pub fn caratheodory(features: &[Vec<f64>], weights: &[f64]) -> Option<(Vec<usize>, Vec<f64>)> {
    let n = features.len();
    let mdim = features.first().map(Vec::len).unwrap_or(0);
    let mut w = weights.to_vec();
    let mut active: Vec<usize> = (0..n).filter(|&i| w[i] > 0.0).collect();
    let target: Vec<f64> = (0..mdim)
        .map(|r| (0..n).map(|i| weights[i] * features[i][r]).sum())
        .collect();
    while active.len() > mdim {
        let cols = &active[..mdim + 1];
        let a = DMatrix::from_fn(mdim, mdim + 1, |r, c| features[cols[c]][r]);
        let ata = a.transpose() * &a;
        let eig = SymmetricEigen::new(ata);
        let imin = eig.eigenvalues.imin();
        let v = eig.eigenvectors.column(imin).clone_owned();
        let v = if v.iter().any(|&x| x > 0.0) { v } else { -v };
        let (argmin, step) = cols
            .iter()
            .zip(v.iter())
            .filter(|(_, &vi)| vi > 1e-300)
            .map(|(&i, &vi)| (i, w[i] / vi))
            .fold((usize::MAX, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        if !step.is_finite() {
            return None;
        }
        let scale = cols.iter().map(|&i| w[i]).fold(0.0, f64::max);
        for (c, &i) in cols.iter().enumerate() {
            w[i] -= step * v[c];
            if w[i] < 1e-15 * scale {
                w[i] = 0.0;
            }
        }
        w[argmin] = 0.0;
        let before = active.len();
        active.retain(|&i| w[i] > 0.0);
        if active.len() == before {
            return None;
        }
    }
    // polish: least squares on the kept support
    let a = DMatrix::from_fn(mdim, active.len(), |r, c| features[active[c]][r]);
    let b = DVector::from_vec(target);
    let svd = a.clone().svd(true, true);
    if let Ok(x) = svd.solve(&b, 1e-13) {
        if x.iter().all(|&v| v >= 0.0) {
            let res_new = (&a * &x - &b).norm();
            let cur = DVector::from_iterator(active.len(), active.iter().map(|&i| w[i]));
            let res_old = (&a * &cur - &b).norm();
            if res_new < res_old {
                for (c, &i) in active.iter().enumerate() {
                    w[i] = x[c];
                }
            }
        }
    }
    let kw: Vec<f64> = active.iter().map(|&i| w[i]).collect();
    Some((active, kw))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_gives_two_point_gauss_rule() {
        let src = MixingSource::Product(vec![AxisLaw::Uniform { lo: -1.0, hi: 1.0 }]);
        let r = moment_match_discretize(&src, 1.0, 0.2, 1.0).unwrap();
        assert_eq!(r.moment_order, 2);
        let m = &r.measure;
        assert_eq!(m.len(), 2);
        let s = 1.0 / 3f64.sqrt();
        assert!((m.atoms()[0][0] + s).abs() < 1e-12 && (m.atoms()[1][0] - s).abs() < 1e-12);
        assert!(m.weights().iter().all(|w| (w - 0.5).abs() < 1e-12));
    }

    #[test]
    fn uniform_square_gives_four_atoms() {
        let u = AxisLaw::Uniform { lo: -1.0, hi: 1.0 };
        let src = MixingSource::Product(vec![u.clone(), u]);
        let r = moment_match_discretize(&src, 2.0, 0.2, 2f64.sqrt()).unwrap();
        assert_eq!(r.measure.len(), 4);
        let s = 1.0 / 3f64.sqrt();
        for (z, w) in r.measure.iter() {
            assert!((z[0].abs() - s).abs() < 1e-12 && (z[1].abs() - s).abs() < 1e-12);
            assert!((w - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn small_discrete_measure_is_a_fixed_point() {
        let m = MixingMeasure::new(vec![vec![0.1], vec![-0.4]], vec![0.3, 0.7]).unwrap();
        let r = moment_match_discretize(&MixingSource::Discrete(m.clone()), 0.5, 0.1, 1.0).unwrap();
        assert_eq!(r.measure, m);
        assert_eq!((r.sup_error, r.l1_error), (0.0, 0.0));
    }

    #[test]
    fn caratheodory_preserves_moments() {
        let n = 400;
        let atoms: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![((i * 7919) % 1000) as f64 / 500.0 - 1.0, ((i * 104_729) % 997) as f64 / 498.5 - 1.0])
            .collect();
        let m = MixingMeasure::normalized(atoms, (0..n).map(|i| 1.0 + (i % 5) as f64).collect()).unwrap();
        let r = moment_match_discretize(&MixingSource::Discrete(m.clone()), 1.0, 0.1, 2f64.sqrt()).unwrap();
        let k = r.moment_order;
        assert!(r.measure.len() <= (2 * k - 1).pow(2) * r.cells_per_axis.pow(2));
        assert!(r.measure.len() < m.len());
        for l0 in 0..=(2 * k - 2) as u32 {
            for l1 in 0..=(2 * k - 2) as u32 {
                let a = m.moment(&[l0, l1]);
                let b = r.measure.moment(&[l0, l1]);
                assert!((a - b).abs() <= 1e-8 * a.abs().max(1e-3), "{l0},{l1}: {a} vs {b}");
            }
        }
    }

    /// Recomputes the support constant on the calibration suite: truncated
    /// standard normals (product laws) and 600-atom samples from them, for
    /// d ∈ {1, 2}, a ∈ {1, 2}, σ ∈ {1/4, 1/2, 1}, ε ∈ {0.1, 0.05, 0.01}.
    #[test]
    fn support_constant_calibration() {
        use rand::Rng;
        use std::sync::Arc;
        let mut rng = crate::rng::stream_rng(7, 0);
        let mut worst: f64 = 0.0;
        for d in [1usize, 2] {
            for a in [1.0, 2.0] {
                let h = a / (d as f64).sqrt();
                let law = AxisLaw::Density {
                    lo: -h,
                    hi: h,
                    pdf: Arc::new(|x: f64| (-0.5 * x * x).exp()),
                };
                let prod = MixingSource::Product(vec![law; d]);
                let atoms: Vec<Vec<f64>> = (0..600)
                    .map(|_| {
                        (0..d)
                            .map(|_| loop {
                                let z: f64 = rng.sample(rand_distr::StandardNormal);
                                if z.abs() < h {
                                    break z;
                                }
                            })
                            .collect()
                    })
                    .collect();
                let disc = MixingSource::Discrete(MixingMeasure::normalized(atoms, vec![1.0; 600]).unwrap());
                for sigma in [0.25, 0.5, 1.0] {
                    for eps in [0.1, 0.05, 0.01] {
                        for src in [&prod, &disc] {
                            let r = moment_match_discretize(src, sigma, eps, a).unwrap();
                            assert!(r.warning.is_none());
                            assert!(r.l1_error <= r.l1_scale && r.sup_error <= r.sup_scale);
                            worst = worst.max(r.atom_count as f64 / (r.atom_bound / SUPPORT_CONSTANT_D));
                        }
                    }
                }
            }
        }
        assert!(worst <= SUPPORT_CONSTANT_D, "{worst}");
        assert!(worst > 0.8 * SUPPORT_CONSTANT_D, "constant is loose: {worst}");
    }
}
