//! Small statistical helpers: regression, Kolmogorov–Smirnov, bootstrap.

use rand::Rng;
use serde::Serialize;

/// Ordinary least squares fit `y ≈ intercept + slope · x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (NaN with two points).
    pub slope_se: f64,
}

pub fn ols(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    assert!(x.len() >= 2, "need two points for a line");
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if x.len() > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    LinearFit {
        slope,
        intercept,
        slope_se,
    }
}

/// Slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> LinearFit {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    ols(&lx, &ly)
}

/// Least squares with a general design matrix (rows of regressors), solved
/// through the normal equations. Returns coefficients and residual sum of squares.
pub fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let p = rows.first()?.len();
    let mut xtx = nalgebra::DMatrix::<f64>::zeros(p, p);
    let mut xty = nalgebra::DVector::<f64>::zeros(p);
    for (r, &yi) in rows.iter().zip(y) {
        for i in 0..p {
            xty[i] += r[i] * yi;
            for j in 0..p {
                xtx[(i, j)] += r[i] * r[j];
            }
        }
    }
    let sol = xtx.clone().lu().solve(&xty)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let beta: Vec<f64> = sol.iter().copied().collect();
    let rss = rows
        .iter()
        .zip(y)
        .map(|(r, yi)| (yi - r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>()).powi(2))
        .sum();
    Some((beta, rss))
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut dmax: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        dmax = dmax.max((i as f64 / na - j as f64 / nb).abs());
    }
    dmax
}

/// Asymptotic Kolmogorov distribution survival `P(K > t)`.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 0.3 {
        // lower tail series: P(K ≤ t) = √(2π)/t Σ exp(−(2k−1)²π²/(8t²))
        let c = (2.0 * std::f64::consts::PI).sqrt() / t;
        let s: f64 = (1..=50)
            .map(|k| {
                let m = (2 * k - 1) as f64;
                (-m * m * std::f64::consts::PI.powi(2) / (8.0 * t * t)).exp()
            })
            .sum();
        return (1.0 - c * s).clamp(0.0, 1.0);
    }
    let s: f64 = (1..=100)
        .map(|k| {
            let kf = k as f64;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * kf * kf * t * t).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

/// p-value of a one-sample KS statistic with the finite-n correction
/// `(√n + 0.12 + 0.11/√n) D`.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

/// p-value of a two-sample KS statistic using the effective size `n m/(n+m)`.
pub fn ks_two_sample_p_value(d: f64, n: usize, m: usize) -> f64 {
    let ne = (n * m) as f64 / (n + m) as f64;
    let sn = ne.sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with divisor `n − 1`.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(x: &[f64], q: f64) -> f64 {
    assert!(!x.is_empty());
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
}

pub fn median(x: &[f64]) -> f64 {
    quantile(x, 0.5)
}

/// Percentile interval from bootstrap replicates.
pub fn percentile_interval(replicates: &[f64], level: f64) -> (f64, f64) {
    let a = 0.5 * (1.0 - level);
    (quantile(replicates, a), quantile(replicates, 1.0 - a))
}

/// Bootstrap replicates of a statistic computed from resampled index sets.
pub fn bootstrap<R: Rng + ?Sized, F: Fn(&[usize]) -> f64>(
    n: usize,
    resamples: usize,
    rng: &mut R,
    stat: F,
) -> Vec<f64> {
    let mut idx = vec![0; n];
    (0..resamples)
        .map(|_| {
            for v in idx.iter_mut() {
                *v = rng.random_range(0..n);
            }
            stat(&idx)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_exact_line() {
        let f = ols(&[0.0, 1.0, 2.0, 3.0], &[1.0, 3.0, 5.0, 7.0]);
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept - 1.0).abs() < 1e-14);
        assert!(f.slope_se.abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_distribution_values() {
        // P(K > 1.3581) ≈ 0.05; P(K > 1.9495) ≈ 0.001
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 2e-4);
        assert!((kolmogorov_sf(1.9495) - 0.001).abs() < 2e-5);
        // the two series agree where they meet
        let lo = {
            let t: f64 = 0.3;
            let c = (2.0 * std::f64::consts::PI).sqrt() / t;
            let s: f64 = (1..=50)
                .map(|k| {
                    let m = (2 * k - 1) as f64;
                    (-m * m * std::f64::consts::PI.powi(2) / (8.0 * t * t)).exp()
                })
                .sum();
            1.0 - c * s
        };
        assert!((lo - kolmogorov_sf(0.3)).abs() < 1e-10);
    }

    #[test]
    fn quantiles() {
        let x = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(quantile(&x, 0.0), 1.0);
        assert_eq!(quantile(&x, 1.0), 4.0);
        assert_eq!(median(&x), 2.5);
    }

    #[test]
    fn general_least_squares() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64, (i * i) as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 2.0 - i as f64 + 0.5 * (i * i) as f64).collect();
        let (b, rss) = least_squares(&rows, &y).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-9 && (b[1] + 1.0).abs() < 1e-9 && (b[2] - 0.5).abs() < 1e-9);
        assert!(rss < 1e-15);
    }
}
