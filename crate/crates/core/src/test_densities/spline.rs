use std::sync::Arc;

use rand::{Rng, RngCore};

use super::{Smoothness, SmoothedDerivatives, TailParams, TestDensity};
use crate::density::Density;
use crate::error::{Error, Result};
use crate::index_calculus::MultiIndex;
use crate::special::{bisect, gauss_legendre, gl_integrate, truncated_normal_moments};

/// Piecewise polynomial on the unit knots `0, 1, …, n`, zero outside
/// `[0, n)`. Piece `i` is stored in the local variable `v = t − i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewisePoly {
    pieces: Vec<Vec<f64>>,
}

impl PiecewisePoly {
    pub fn new(pieces: Vec<Vec<f64>>) -> Self {
        PiecewisePoly { pieces }
    }

    /// Cardinal B-spline `M_m`, the density of a sum of `m` uniforms:
    /// `M_m(t) = 1/(m−1)! Σ_j (−1)^j C(m,j) (t−j)_+^{m−1}`.
    pub fn cardinal_bspline(m: usize) -> Self {
        assert!(m >= 1);
        let deg = m - 1;
        let fact: f64 = (1..=deg).map(|v| v as f64).product();
        let mut pieces = Vec::with_capacity(m);
        for i in 0..m {
            let mut coeffs = vec![0.0; deg + 1];
            for j in 0..=i {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                let cmj = binom(m, j);
                // (v + (i − j))^{deg}
                let c = (i - j) as f64;
                for p in 0..=deg {
                    coeffs[p] += sign * cmj * binom(deg, p) * c.powi((deg - p) as i32);
                }
            }
            for v in &mut coeffs {
                *v /= fact;
            }
            pieces.push(coeffs);
        }
        PiecewisePoly { pieces }
    }

    pub fn num_pieces(&self) -> usize {
        self.pieces.len()
    }

    pub fn eval(&self, t: f64) -> f64 {
        if !(t >= 0.0) || t >= self.pieces.len() as f64 {
            return 0.0;
        }
        let i = t.floor() as usize;
        horner(&self.pieces[i], t - i as f64)
    }

    pub fn derivative(&self) -> Self {
        PiecewisePoly {
            pieces: self
                .pieces
                .iter()
                .map(|c| {
                    if c.len() <= 1 {
                        vec![0.0]
                    } else {
                        (1..c.len()).map(|p| p as f64 * c[p]).collect()
                    }
                })
                .collect(),
        }
    }

    /// `∫_0^t`.
    pub fn integral_to(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for (i, c) in self.pieces.iter().enumerate() {
            let lo = i as f64;
            if t <= lo {
                break;
            }
            let v = (t - lo).min(1.0);
            acc += c
                .iter()
                .enumerate()
                .map(|(p, &cp)| cp * v.powi(p as i32 + 1) / (p + 1) as f64)
                .sum::<f64>();
        }
        acc
    }

    /// `∫ P(y) φ_s(t − y) dy`, exact up to rounding.
    pub fn smooth(&self, t: f64, s: f64) -> f64 {
        if s == 0.0 {
            return self.eval(t);
        }
        let mut acc = 0.0;
        for (i, c) in self.pieces.iter().enumerate() {
            let a = (i as f64 - t) / s;
            let b = (i as f64 + 1.0 - t) / s;
            if b < -38.0 || a > 38.0 {
                continue;
            }
            let v0 = t - i as f64;
            let deg = c.len() - 1;
            let j = truncated_normal_moments(a, b, deg);
            let mut spow = 1.0;
            for p in 0..=deg {
                // Taylor coefficient of order p at v0
                let q: f64 = (p..=deg)
                    .map(|n| c[n] * binom(n, p) * v0.powi((n - p) as i32))
                    .sum();
                acc += q * spow * j[p];
                spow *= s;
            }
        }
        acc
    }

    /// Rigorous upper bound on `sup |P|`.
    pub fn sup_abs(&self) -> f64 {
        let samples = 4096;
        let h = 1.0 / samples as f64;
        let mut best: f64 = 0.0;
        for c in &self.pieces {
            let lip: f64 = (1..c.len()).map(|p| p as f64 * c[p].abs()).sum();
            let mut m: f64 = 0.0;
            for i in 0..=samples {
                m = m.max(horner(c, i as f64 * h).abs());
            }
            best = best.max(m + 0.5 * h * lip);
        }
        best
    }
}

fn horner(c: &[f64], v: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * v + a)
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Marginal `b(x) = M_m(x/scale + m/2) / scale` with its derivatives.
#[derive(Debug)]
struct SplineMarginal {
    m: usize,
    scale: f64,
    /// `M_m^{(r)}` for `r = 0..m−1`.
    derivs: Vec<PiecewisePoly>,
    /// `sup |b^{(r)}|` for `r = 0..m−1`.
    sups: Vec<f64>,
}

impl SplineMarginal {
    fn new(m: usize, scale: f64) -> Self {
        let mut derivs = vec![PiecewisePoly::cardinal_bspline(m)];
        for _ in 1..m {
            let next = derivs.last().unwrap().derivative();
            derivs.push(next);
        }
        let sups = derivs
            .iter()
            .enumerate()
            .map(|(r, p)| p.sup_abs() / scale.powi(r as i32 + 1))
            .collect();
        SplineMarginal {
            m,
            scale,
            derivs,
            sups,
        }
    }

    fn t_of(&self, x: f64) -> f64 {
        x / self.scale + 0.5 * self.m as f64
    }

    fn half_width(&self) -> f64 {
        0.5 * self.m as f64 * self.scale
    }

    fn eval(&self, r: usize, x: f64) -> f64 {
        self.derivs[r].eval(self.t_of(x)) / self.scale.powi(r as i32 + 1)
    }

    fn smooth(&self, r: usize, x: f64, s: f64) -> f64 {
        self.derivs[r].smooth(self.t_of(x), s / self.scale) / self.scale.powi(r as i32 + 1)
    }

    fn cdf(&self, x: f64) -> f64 {
        self.derivs[0].integral_to(self.t_of(x))
    }

    fn peak(&self) -> f64 {
        self.eval(0, 0.0)
    }

    fn knot_distance(&self, x: f64) -> f64 {
        let t = self.t_of(x);
        let nearest = t.round().clamp(0.0, self.m as f64);
        (t - nearest).abs() * self.scale
    }

    /// Modulus `ω_r(x)`: Lipschitz constant of `b^{(r)}` for `r ≤ m−2`; for the
    /// top order, the piecewise-constant jump bound `2 sup|b^{(m−1)}| / dist`.
    fn modulus(&self, r: usize, x: f64) -> f64 {
        if r + 1 < self.m {
            self.sups[r + 1]
        } else {
            let dist = self.knot_distance(x).max(1e-9 * self.scale);
            2.0 * self.sups[r] / dist
        }
    }

    /// `b` at distance `u ∈ [0, half_width]` inside the support edge, computed
    /// from the left piece so that tiny distances keep full precision.
    fn edge_eval(&self, u: f64) -> f64 {
        self.derivs[0].eval(u / self.scale) / self.scale
    }

    /// `u` with `edge_eval(u) = level`, for `0 < level ≤ peak` (`m ≥ 2`).
    fn edge_root(&self, level: f64) -> f64 {
        // on the first piece M_m(t) = t^{m−1}/(m−1)!
        let fact: f64 = (1..self.m).map(|i| i as f64).product();
        let t = (fact * level * self.scale).powf(1.0 / (self.m - 1) as f64);
        if t <= 1.0 {
            return t * self.scale;
        }
        bisect(|u| self.edge_eval(u) - level, 0.0, self.half_width(), 1e-15 * self.scale)
    }

    /// `x ≥ 0` with `b(x) = level`, for `0 < level ≤ peak` (`m ≥ 2`).
    fn level_root(&self, level: f64) -> f64 {
        self.half_width() - self.edge_root(level)
    }

    /// Mass within distance `u` of one support edge.
    fn edge_mass(&self, u: f64) -> f64 {
        self.derivs[0].integral_to(u / self.scale)
    }

    /// `P(b(X) < level)` for `X ~ b`.
    fn mass_below(&self, level: f64) -> f64 {
        let peak = self.peak();
        if level <= 0.0 {
            return 0.0;
        }
        if self.m == 1 {
            return if level > peak { 1.0 } else { 0.0 };
        }
        if level > peak {
            return 1.0;
        }
        (2.0 * self.edge_mass(self.edge_root(level))).clamp(0.0, 1.0)
    }
}

/// Product of `d` independent rescaled sums of `m` uniforms.
#[derive(Clone, Debug)]
pub struct SplineDensity {
    d: usize,
    marginal: Arc<SplineMarginal>,
}

/// Spline density of order `m ∈ 1..=6`: each coordinate is
/// `scale · (U_1 + … + U_m − m/2)`. Its smoothness tag is `β = m`.
pub fn make_spline_density(m: usize, scale: f64, d: usize) -> Result<SplineDensity> {
    if !(1..=6).contains(&m) {
        return Err(Error::invalid(format!("spline order {m} outside 1..=6")));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::invalid("spline scale must be positive"));
    }
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    Ok(SplineDensity {
        d,
        marginal: Arc::new(SplineMarginal::new(m, scale)),
    })
}

impl SplineDensity {
    pub fn order(&self) -> usize {
        self.marginal.m
    }

    pub fn scale(&self) -> f64 {
        self.marginal.scale
    }

    /// Marginal density on one axis.
    pub fn marginal_eval(&self, x: f64) -> f64 {
        self.marginal.eval(0, x)
    }

    /// Marginal CDF on one axis.
    pub fn marginal_cdf(&self, x: f64) -> f64 {
        self.marginal.cdf(x)
    }

    fn check_index(&self, k: &MultiIndex) -> Result<()> {
        let top = self.marginal.m as u32 - 1;
        if k.dim() != self.d {
            return Err(Error::invalid("multi-index dimension mismatch"));
        }
        if k.entries().iter().any(|&v| v > top) {
            return Err(Error::UnsupportedOrder {
                requested: k.order(),
                available: top,
            });
        }
        Ok(())
    }
}

impl Density for SplineDensity {
    fn dim(&self) -> usize {
        self.d
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        x.iter().map(|&xi| self.marginal.eval(0, xi)).product()
    }
}

struct SplineSmoothing {
    marginal: Arc<SplineMarginal>,
    scales: Vec<f64>,
}

impl SmoothedDerivatives for SplineSmoothing {
    fn eval(&self, k: &MultiIndex, x: &[f64]) -> f64 {
        k.entries()
            .iter()
            .zip(x)
            .zip(&self.scales)
            .map(|((&r, &xi), &s)| self.marginal.smooth(r as usize, xi, s))
            .product()
    }

    fn eval_combination(&self, terms: &[(MultiIndex, f64)], x: &[f64]) -> f64 {
        // cache per-axis factors by derivative order
        let m = self.marginal.m;
        let factors: Vec<Vec<f64>> = x
            .iter()
            .zip(&self.scales)
            .map(|(&xi, &s)| (0..m).map(|r| self.marginal.smooth(r, xi, s)).collect())
            .collect();
        terms
            .iter()
            .map(|(k, c)| {
                c * k
                    .entries()
                    .iter()
                    .enumerate()
                    .map(|(a, &r)| factors[a][r as usize])
                    .product::<f64>()
            })
            .sum()
    }
}

impl TestDensity for SplineDensity {
    fn id(&self) -> String {
        format!("spline-m{}-d{}", self.marginal.m, self.d)
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::isotropic(self.marginal.m as f64, self.d)
    }

    fn max_derivative_order(&self) -> u32 {
        self.marginal.m as u32 - 1
    }

    fn derivative(&self, k: &MultiIndex, x: &[f64]) -> Result<f64> {
        self.check_index(k)?;
        Ok(k.entries()
            .iter()
            .zip(x)
            .map(|(&r, &xi)| self.marginal.eval(r as usize, xi))
            .product())
    }

    /// `max_{k. = m−1} Σ_a ω_{k_a}(x_a) ∏_{b≠a} sup|b^{(k_b)}|`. The top
    /// derivative is piecewise constant with jumps at the knots, so the
    /// envelope grows like the inverse distance to the nearest knot.
    fn envelope(&self, x: &[f64]) -> f64 {
        let top = self.marginal.m as u32 - 1;
        let sups = &self.marginal.sups;
        crate::index_calculus::indices_of_order(self.d, top)
            .iter()
            .map(|k| {
                let e = k.entries();
                (0..self.d)
                    .map(|a| {
                        let others: f64 = (0..self.d)
                            .filter(|&b| b != a)
                            .map(|b| sups[e[b] as usize])
                            .product();
                        self.marginal.modulus(e[a] as usize, x[a]) * others
                    })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    fn tail(&self) -> TailParams {
        TailParams {
            a: self.marginal.half_width() * (self.d as f64).sqrt(),
            b: 1.0,
            c: 1.0,
            tau: 2.0,
        }
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let m = self.marginal.m;
        (0..self.d)
            .map(|_| {
                let s: f64 = (0..m).map(|_| rng.random::<f64>()).sum();
                self.marginal.scale * (s - 0.5 * m as f64)
            })
            .collect()
    }

    fn working_box(&self) -> Vec<(f64, f64)> {
        let w = self.marginal.half_width();
        vec![(-w, w); self.d]
    }

    fn support_box(&self) -> Option<Vec<(f64, f64)>> {
        Some(self.working_box())
    }

    fn smoothing(&self, scales: &[f64]) -> Option<Arc<dyn SmoothedDerivatives>> {
        Some(Arc::new(SplineSmoothing {
            marginal: self.marginal.clone(),
            scales: scales.to_vec(),
        }))
    }

    /// Exact in one dimension; in two dimensions
    /// `2 ∫_0^w b(x) P(b(X) < t / b(x)) dx` by Gauss–Legendre on panels
    /// refined geometrically towards the support edge.
    fn mass_below_level(&self, t: f64) -> Option<f64> {
        let mg = &self.marginal;
        match self.d {
            1 => Some(mg.mass_below(t)),
            2 => {
                if t <= 0.0 {
                    return Some(0.0);
                }
                let peak = mg.peak();
                if t > peak * peak {
                    return Some(1.0);
                }
                let w = mg.half_width();
                if mg.m == 1 {
                    return Some(0.0);
                }
                // Integrate over the distance u to the edge of the first axis:
                // below u* the second factor is always under the level.
                let u_star = mg.edge_root(t / peak);
                let mut breaks: Vec<f64> = (0..=mg.m)
                    .map(|j| mg.scale * j as f64)
                    .filter(|&u| u > u_star && u < w)
                    .collect();
                for j in 0..60 {
                    breaks.push(u_star + (w - u_star) * 0.5f64.powi(j));
                }
                breaks.push(u_star);
                breaks.sort_by(f64::total_cmp);
                breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * w.max(*a));
                let rule = gauss_legendre(24);
                let f = |u: f64| {
                    let bu = mg.edge_eval(u);
                    if bu <= 0.0 {
                        0.0
                    } else {
                        bu * mg.mass_below(t / bu)
                    }
                };
                let total: f64 = mg.edge_mass(u_star)
                    + breaks
                        .windows(2)
                        .map(|p| gl_integrate(f, p[0], p[1], &rule))
                        .sum::<f64>();
                Some((2.0 * total).clamp(0.0, 1.0))
            }
            _ => None,
        }
    }

    fn superlevel_radius(&self, t: f64) -> Option<f64> {
        let mg = &self.marginal;
        let peak = mg.peak();
        if mg.m == 1 {
            let w = mg.half_width();
            return Some(if t <= peak.powi(self.d as i32) {
                w * (self.d as f64).sqrt()
            } else {
                0.0
            });
        }
        match self.d {
            1 => Some(if t > peak { 0.0 } else { mg.level_root(t) }),
            2 => {
                if t > peak * peak {
                    return Some(0.0);
                }
                let x1max = mg.level_root(t / peak);
                let n = 4096;
                let best = (0..=n)
                    .map(|i| {
                        let x1 = x1max * i as f64 / n as f64;
                        let b1 = mg.eval(0, x1);
                        let x2 = if b1 > 0.0 && t / b1 <= peak {
                            mg.level_root(t / b1)
                        } else {
                            0.0
                        };
                        (x1 * x1 + x2 * x2).sqrt()
                    })
                    .fold(0.0, f64::max);
                Some(best)
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{GridSpec, QuadratureRule};

    #[test]
    fn bspline_values() {
        let m2 = PiecewisePoly::cardinal_bspline(2);
        assert_eq!(m2.eval(1.0), 1.0);
        assert_eq!(m2.eval(0.5), 0.5);
        let m3 = PiecewisePoly::cardinal_bspline(3);
        assert!((m3.eval(1.5) - 0.75).abs() < 1e-15);
        assert!((m3.integral_to(3.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn uniform_and_triangle() {
        let u = make_spline_density(1, 2.0, 1).unwrap();
        assert_eq!(u.evaluate(&[0.3]), 0.5);
        assert_eq!(u.evaluate(&[-0.9]), 0.5);
        assert_eq!(u.evaluate(&[1.5]), 0.0);
        let tri = make_spline_density(2, 1.0, 1).unwrap();
        assert_eq!(tri.evaluate(&[0.0]), 1.0);
        assert!(make_spline_density(7, 1.0, 1).is_err());
    }

    #[test]
    fn quadratic_product_integrates() {
        let f = make_spline_density(3, 0.8, 2).unwrap();
        let g = GridSpec::cube(2, 1.2, 1024, QuadratureRule::Midpoint).unwrap();
        let v = g.integrate(|x| f.evaluate(x));
        assert!((v - 1.0).abs() < 1e-6);
    }

    #[test]
    fn smoothing_matches_quadrature() {
        let p = PiecewisePoly::cardinal_bspline(4);
        let s = 0.3;
        let rule = gauss_legendre(40);
        for &t in &[-0.5, 0.2, 1.7, 2.0, 3.9] {
            let direct: f64 = (0..4)
                .map(|i| {
                    gl_integrate(
                        |y| p.eval(y) * crate::special::normal_pdf((t - y) / s) / s,
                        i as f64,
                        i as f64 + 1.0,
                        &rule,
                    )
                })
                .sum();
            assert!((p.smooth(t, s) - direct).abs() < 1e-13, "t={t} {} {direct}", p.smooth(t, s));
        }
    }

    #[test]
    fn level_mass_one_dim() {
        let f = make_spline_density(2, 1.0, 1).unwrap();
        // triangle: b(x) = 1 − |x|, {b < 0.5} = {|x| > 0.5} has mass 0.25
        assert!((f.mass_below_level(0.5).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn level_mass_two_dim_against_grid() {
        let f = make_spline_density(2, 1.0, 2).unwrap();
        let t = 0.2;
        let g = GridSpec::cube(2, 1.0, 2048, QuadratureRule::Midpoint).unwrap();
        let grid = g.integrate(|x| {
            let v = f.evaluate(x);
            if v < t {
                v
            } else {
                0.0
            }
        });
        let exact = f.mass_below_level(t).unwrap();
        assert!((grid - exact).abs() < 1e-4, "{grid} vs {exact}");
    }
}
