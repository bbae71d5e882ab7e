use serde::Serialize;

use super::measure::MixingMeasure;
use super::smooth::{error_grid, mixture_values, sup_and_l1};
use crate::error::{Error, Result};
use crate::scalar::strict_ceil;

#[derive(Clone, Debug, Serialize)]
pub struct SnapReport {
    pub measure: MixingMeasure,
    /// Lattice mesh `σε`.
    pub mesh: f64,
    /// Largest admissible `|n_i|`, one less than the strict ceiling of `a/(σε)`.
    pub max_index: i64,
    /// Largest Euclidean distance an atom moved.
    pub max_shift: f64,
    pub sup_increment: f64,
    pub l1_increment: f64,
    /// `ε²/σ^d`.
    pub sup_scale: f64,
    /// `ε`.
    pub l1_scale: f64,
}

/// Move every atom to the nearest point of `{n σε : |n_i| < ⌈a/(σε)⌉}`
/// (strict ceiling). Weights are kept exactly and atoms are never merged.
pub fn snap_to_grid(f: &MixingMeasure, sigma: f64, eps: f64, a: f64) -> Result<SnapReport> {
    if !(sigma > 0.0) || !(eps > 0.0 && eps < 1.0) || !(a > 0.0) {
        return Err(Error::invalid("need sigma > 0, eps in (0, 1) and a > 0"));
    }
    if f.max_atom_norm() > a * (1.0 + 1e-12) {
        return Err(Error::invalid(format!("atoms exceed radius {a}")));
    }
    let mesh = sigma * eps;
    let max_index = strict_ceil(a / mesh) - 1;
    let mut max_shift: f64 = 0.0;
    let atoms: Vec<Vec<f64>> = f
        .atoms()
        .iter()
        .map(|z| {
            let s: Vec<f64> = z
                .iter()
                .map(|&x| ((x / mesh).round() as i64).clamp(-max_index, max_index) as f64 * mesh)
                .collect();
            max_shift = max_shift.max(crate::linalg::norm(
                &z.iter().zip(&s).map(|(a, b)| a - b).collect::<Vec<_>>(),
            ));
            s
        })
        .collect();
    let snapped = MixingMeasure::new(atoms, f.weights().to_vec())?;
    let d = f.dim();
    let grid = error_grid(d, a, sigma)?;
    let p = mixture_values(&grid, f, sigma)?;
    let q = mixture_values(&grid, &snapped, sigma)?;
    let (sup_increment, l1_increment) = sup_and_l1(&grid, &p, &q);
    Ok(SnapReport {
        measure: snapped,
        mesh,
        max_index,
        max_shift,
        sup_increment,
        l1_increment,
        sup_scale: eps * eps / sigma.powi(d as i32),
        l1_scale: eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal_cdf;

    #[test]
    fn lattice_atoms_are_fixed() {
        let (sigma, eps) = (0.5, 0.1);
        let m = MixingMeasure::new(vec![vec![0.15, -0.2], vec![0.0, 0.95]], vec![0.4, 0.6]).unwrap();
        let r = snap_to_grid(&m, sigma, eps, 1.0).unwrap();
        for (z, s) in m.atoms().iter().zip(r.measure.atoms()) {
            for (a, b) in z.iter().zip(s) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!(r.l1_increment < 1e-10);
        assert_eq!(r.measure.weights(), m.weights());
    }

    #[test]
    fn single_atom_shift_matches_mean_shift_formula() {
        let (sigma, eps) = (0.5, 0.2);
        let z = 0.499 * sigma * eps;
        let r = snap_to_grid(&MixingMeasure::dirac(vec![z]), sigma, eps, 1.0).unwrap();
        assert_eq!(r.measure.atoms()[0][0], 0.0);
        // exact L1 distance between two unit-variance normals a distance δ apart
        let exact = 2.0 * (2.0 * normal_cdf(z / (2.0 * sigma)) - 1.0);
        assert!((r.l1_increment - exact).abs() < 1e-6, "{} vs {exact}", r.l1_increment);
        assert!(r.l1_increment <= (2.0 / std::f64::consts::PI).sqrt() * 0.5 * eps);
    }

    #[test]
    fn edge_atoms_stay_inside_the_index_range() {
        // a/(σε) = 10 exactly, so |n| ≤ 10 with the strict ceiling 11
        let r = snap_to_grid(&MixingMeasure::dirac(vec![1.0]), 1.0, 0.1, 1.0).unwrap();
        assert_eq!(r.max_index, 10);
        assert!((r.measure.atoms()[0][0] - 1.0).abs() < 1e-12);
    }
}
