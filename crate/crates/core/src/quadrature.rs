//! Tensor-product grids and fixed-rule quadrature.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::Density;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Smallest number of points allowed on an axis.
pub const MIN_POINTS_PER_AXIS: usize = 16;
/// Largest total number of grid points.
pub const MAX_TOTAL_POINTS: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadratureRule {
    /// Cell centres, equal weights.
    Midpoint,
    /// Endpoints included, half weight at the ends.
    Trapezoid,
}

/// An axis-aligned box with a per-axis point count and quadrature rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    lower: Vec<T>,
    upper: Vec<T>,
    counts: Vec<usize>,
    rule: QuadratureRule,
}

impl<T: Real> GridSpec<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>, counts: Vec<usize>, rule: QuadratureRule) -> Result<Self> {
        let d = lower.len();
        if d == 0 || upper.len() != d || counts.len() != d {
            return Err(Error::invalid("grid bounds and counts must share a positive dimension"));
        }
        for i in 0..d {
            if !lower[i].is_finite() || !upper[i].is_finite() || !(upper[i] > lower[i]) {
                return Err(Error::invalid(format!("axis {i}: bounds must be finite with lower < upper")));
            }
            if counts[i] < MIN_POINTS_PER_AXIS {
                return Err(Error::invalid(format!(
                    "axis {i}: {} points, need at least {MIN_POINTS_PER_AXIS}",
                    counts[i]
                )));
            }
        }
        let total = counts.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c));
        match total {
            Some(t) if t <= MAX_TOTAL_POINTS => {}
            _ => return Err(Error::invalid(format!("grid exceeds {MAX_TOTAL_POINTS} points"))),
        }
        Ok(GridSpec { lower, upper, counts, rule })
    }

    /// `[-half_width, half_width]^d` with `count` points per axis.
    pub fn cube(d: usize, half_width: T, count: usize, rule: QuadratureRule) -> Result<Self> {
        Self::new(vec![-half_width; d], vec![half_width; d], vec![count; d], rule)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn total_points(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn spacing(&self, axis: usize) -> T {
        let n = T::from_usize(self.counts[axis]).unwrap();
        let width = self.upper[axis] - self.lower[axis];
        match self.rule {
            QuadratureRule::Midpoint => width / n,
            QuadratureRule::Trapezoid => width / (n - T::one()),
        }
    }

    pub fn nodes(&self, axis: usize) -> Vec<T> {
        let h = self.spacing(axis);
        let offset = match self.rule {
            QuadratureRule::Midpoint => T::lit(0.5),
            QuadratureRule::Trapezoid => T::zero(),
        };
        (0..self.counts[axis])
            .map(|i| self.lower[axis] + (T::from_usize(i).unwrap() + offset) * h)
            .collect()
    }

    pub fn weights(&self, axis: usize) -> Vec<T> {
        let h = self.spacing(axis);
        let n = self.counts[axis];
        (0..n)
            .map(|i| match self.rule {
                QuadratureRule::Trapezoid if i == 0 || i + 1 == n => h * T::lit(0.5),
                _ => h,
            })
            .collect()
    }

    /// Multi-index of a flat position (last axis fastest).
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let d = self.dim();
        let mut idx = vec![0; d];
        for a in (0..d).rev() {
            idx[a] = flat % self.counts[a];
            flat /= self.counts[a];
        }
        idx
    }

    /// Nodes and weights for every point, flat order.
    pub fn points(&self) -> (Vec<Vec<T>>, Vec<T>) {
        let nodes: Vec<Vec<T>> = (0..self.dim()).map(|a| self.nodes(a)).collect();
        let weights: Vec<Vec<T>> = (0..self.dim()).map(|a| self.weights(a)).collect();
        let total = self.total_points();
        let mut xs = Vec::with_capacity(total);
        let mut ws = Vec::with_capacity(total);
        for flat in 0..total {
            let idx = self.unflatten(flat);
            xs.push(idx.iter().enumerate().map(|(a, &i)| nodes[a][i]).collect());
            ws.push(idx.iter().enumerate().fold(T::one(), |acc, (a, &i)| acc * weights[a][i]));
        }
        (xs, ws)
    }

    /// Evaluate `f` at every node in parallel; output in flat order.
    pub fn evaluate<F>(&self, f: F) -> Vec<T>
    where
        F: Fn(&[T]) -> T + Sync,
    {
        let nodes: Vec<Vec<T>> = (0..self.dim()).map(|a| self.nodes(a)).collect();
        (0..self.total_points())
            .into_par_iter()
            .map_init(
                || vec![T::zero(); self.dim()],
                |x, flat| {
                    let idx = self.unflatten(flat);
                    for (a, &i) in idx.iter().enumerate() {
                        x[a] = nodes[a][i];
                    }
                    f(x)
                },
            )
            .collect()
    }

    /// Flat quadrature weights.
    pub fn flat_weights(&self) -> Vec<T> {
        let weights: Vec<Vec<T>> = (0..self.dim()).map(|a| self.weights(a)).collect();
        (0..self.total_points())
            .map(|flat| {
                self.unflatten(flat)
                    .iter()
                    .enumerate()
                    .fold(T::one(), |acc, (a, &i)| acc * weights[a][i])
            })
            .collect()
    }

    /// Quadrature sum of pre-evaluated values (sequential, fixed order).
    pub fn sum_values(&self, values: &[T]) -> T {
        assert_eq!(values.len(), self.total_points());
        let w = self.flat_weights();
        values.iter().zip(&w).fold(T::zero(), |acc, (&v, &w)| acc + v * w)
    }

    pub fn integrate<F>(&self, f: F) -> T
    where
        F: Fn(&[T]) -> T + Sync,
    {
        self.sum_values(&self.evaluate(f))
    }
}

impl GridSpec<f64> {
    pub fn evaluate_density(&self, p: &dyn Density) -> Result<Vec<f64>> {
        if p.dim() != self.dim() {
            return Err(Error::invalid("density and grid dimensions differ"));
        }
        let values = self.evaluate(|x| p.evaluate(x));
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let idx = self.unflatten(pos);
            let loc = idx.iter().enumerate().map(|(a, &i)| self.nodes(a)[i]).collect();
            return Err(Error::NonFinite {
                what: "density evaluation".into(),
                location: loc,
            });
        }
        Ok(values)
    }

    pub fn location(&self, flat: usize) -> Vec<f64> {
        self.unflatten(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.nodes(a)[i])
            .collect()
    }
}

/// Values of a function on a grid, evaluable elsewhere by multilinear
/// interpolation (zero outside the box).
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub grid: GridSpec<f64>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: GridSpec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(grid.total_points(), values.len());
        GridFunction { grid, values }
    }

    pub fn sample(grid: &GridSpec<f64>, f: &dyn Density) -> Result<Self> {
        Ok(GridFunction::new(grid.clone(), grid.evaluate_density(f)?))
    }

    pub fn integral(&self) -> f64 {
        self.grid.sum_values(&self.values)
    }

    fn axis_position(&self, axis: usize, x: f64) -> Option<(usize, f64)> {
        let h = self.grid.spacing(axis);
        let first = self.grid.nodes(axis)[0];
        let n = self.grid.counts()[axis];
        let t = (x - first) / h;
        if t < -1e-9 || t > (n - 1) as f64 + 1e-9 {
            return None;
        }
        let t = t.clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        Some((i, t - i as f64))
    }
}

impl Density for GridFunction {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        let d = self.grid.dim();
        let mut base = Vec::with_capacity(d);
        for (a, &xa) in x.iter().enumerate() {
            match self.axis_position(a, xa) {
                Some(p) => base.push(p),
                None => return 0.0,
            }
        }
        let counts = self.grid.counts();
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0;
            for a in 0..d {
                let bit = (corner >> a) & 1;
                let (i, frac) = base[a];
                w *= if bit == 1 { frac } else { 1.0 - frac };
                flat = flat * counts[a] + i + bit;
            }
            if w != 0.0 {
                acc += w * self.values[flat];
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(GridSpec::<f64>::cube(1, 1.0, 8, QuadratureRule::Midpoint).is_err());
        assert!(GridSpec::<f64>::new(vec![1.0], vec![0.0], vec![32], QuadratureRule::Midpoint).is_err());
        assert!(GridSpec::<f64>::cube(3, 1.0, 1 << 9, QuadratureRule::Midpoint).is_err());
    }

    #[test]
    fn integrates_polynomials() {
        let g = GridSpec::<f64>::cube(2, 1.0, 64, QuadratureRule::Trapezoid).unwrap();
        let v = g.integrate(|x| 1.0 + x[0] * x[1]);
        assert!((v - 4.0).abs() < 1e-12);
        let g32 = GridSpec::<f32>::cube(1, 1.0, 256, QuadratureRule::Midpoint).unwrap();
        let v32 = g32.integrate(|x| x[0] * x[0]);
        assert!((v32 - 2.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn interpolation_reproduces_linear() {
        let g = GridSpec::<f64>::cube(2, 1.0, 16, QuadratureRule::Trapezoid).unwrap();
        let vals = g.evaluate(|x| 2.0 * x[0] - x[1]);
        let gf = GridFunction::new(g, vals);
        assert!((gf.evaluate(&[0.123, -0.4]) - (0.246 + 0.4)).abs() < 1e-12);
        assert_eq!(gf.evaluate(&[3.0, 0.0]), 0.0);
    }
}
