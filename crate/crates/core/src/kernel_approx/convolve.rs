use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::density::Density;
use crate::error::{Error, Result};
use crate::quadrature::{GridFunction, GridSpec};
use crate::test_densities::GaussianMixtureDensity;

/// Kernel scale must be at least this many grid spacings.
pub const MIN_SCALE_IN_SPACINGS: f64 = 2.0;

/// Inputs accepted by [`convolve`].
pub enum Smoothable<'a> {
    /// Closed form: the covariance absorbs the kernel.
    Mixture(&'a GaussianMixtureDensity),
    /// Values on a uniform grid.
    Grid(&'a GridFunction),
    /// Any function, sampled on the given grid first.
    Function(&'a dyn Density, &'a GridSpec<f64>),
}

/// Result of [`convolve`].
#[derive(Clone, Debug)]
pub enum Convolved {
    Mixture(GaussianMixtureDensity),
    Grid(GridFunction),
}

impl Density for Convolved {
    fn dim(&self) -> usize {
        match self {
            Convolved::Mixture(m) => m.dim(),
            Convolved::Grid(g) => g.dim(),
        }
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            Convolved::Mixture(m) => m.evaluate(x),
            Convolved::Grid(g) => g.evaluate(x),
        }
    }
}

/// `K_σ f`, or `K_{α,σ} f` with per-axis scales `σ^{α_j}` when `alpha` is given.
pub fn convolve(f: Smoothable<'_>, sigma: f64, alpha: Option<&[f64]>) -> Result<Convolved> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma must be positive"));
    }
    let d = match &f {
        Smoothable::Mixture(m) => m.dim(),
        Smoothable::Grid(g) => g.dim(),
        Smoothable::Function(p, _) => p.dim(),
    };
    let scales: Vec<f64> = match alpha {
        Some(a) => {
            if a.len() != d {
                return Err(Error::invalid("anisotropy vector has the wrong length"));
            }
            a.iter().map(|&aj| sigma.powf(aj)).collect()
        }
        None => vec![sigma; d],
    };
    match f {
        Smoothable::Mixture(m) => Ok(Convolved::Mixture(m.convolved(&scales)?)),
        Smoothable::Grid(g) => Ok(Convolved::Grid(convolve_grid(g, &scales)?)),
        Smoothable::Function(p, grid) => {
            let g = GridFunction::sample(grid, p)?;
            Ok(Convolved::Grid(convolve_grid(&g, &scales)?))
        }
    }
}

/// Separable Gaussian convolution of grid values with per-axis standard
/// deviations, by zero-padded FFT. Values beyond the box are taken as zero.
/// The discrete kernel `h φ_s(j h)` is used; each scale must be at least
/// [`MIN_SCALE_IN_SPACINGS`] spacings.
pub fn convolve_grid(f: &GridFunction, scales: &[f64]) -> Result<GridFunction> {
    let grid = &f.grid;
    let d = grid.dim();
    if scales.len() != d {
        return Err(Error::invalid("one kernel scale per axis is required"));
    }
    for (axis, &s) in scales.iter().enumerate() {
        let h = grid.spacing(axis);
        if s < MIN_SCALE_IN_SPACINGS * h {
            return Err(Error::Resolution {
                sigma: s,
                spacing: h,
                axis,
            });
        }
    }
    let mut values = f.values.clone();
    let counts = grid.counts().to_vec();
    for axis in 0..d {
        convolve_axis(&mut values, &counts, axis, grid.spacing(axis), scales[axis]);
    }
    Ok(GridFunction::new(grid.clone(), values))
}

fn convolve_axis(values: &mut [f64], counts: &[usize], axis: usize, h: f64, s: f64) {
    let n = counts[axis];
    let len = (2 * n).next_power_of_two();
    let stride: usize = counts[axis + 1..].iter().product();
    let outer: usize = counts[..axis].iter().product();

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);

    let mut kernel = vec![Complex::new(0.0, 0.0); len];
    for j in 0..n {
        let v = h * crate::special::normal_pdf(j as f64 * h / s) / s;
        kernel[j].re = v;
        if j > 0 {
            kernel[len - j].re = v;
        }
    }
    fwd.process(&mut kernel);
    let scale = 1.0 / len as f64;

    // gather lines, transform in parallel, scatter back
    let lines: Vec<(usize, usize)> = (0..outer)
        .flat_map(|o| (0..stride).map(move |i| (o, i)))
        .collect();
    let results: Vec<Vec<f64>> = lines
        .par_iter()
        .map_init(
            || vec![Complex::new(0.0, 0.0); len],
            |buf, &(o, i)| {
                for b in buf.iter_mut() {
                    *b = Complex::new(0.0, 0.0);
                }
                let base = o * n * stride + i;
                for j in 0..n {
                    buf[j].re = values[base + j * stride];
                }
                fwd.process(buf);
                for (b, k) in buf.iter_mut().zip(&kernel) {
                    *b *= k;
                }
                inv.process(buf);
                (0..n).map(|j| buf[j].re * scale).collect()
            },
        )
        .collect();
    for ((o, i), line) in lines.into_iter().zip(results) {
        let base = o * n * stride + i;
        for (j, v) in line.into_iter().enumerate() {
            values[base + j * stride] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CovarianceSpec;
    use crate::measure_discretization::MixingMeasure;
    use crate::quadrature::QuadratureRule;
    use crate::test_densities::make_gaussian_mixture;

    #[test]
    fn closed_form_versus_fft() {
        let m = MixingMeasure::new(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let p = make_gaussian_mixture(m, CovarianceSpec::isotropic(1, 0.25).unwrap()).unwrap();
        let grid = GridSpec::cube(1, 14.0, 4096, QuadratureRule::Midpoint).unwrap();
        let exact = convolve(Smoothable::Mixture(&p), 1.0, None).unwrap();
        let fft = convolve(Smoothable::Function(&p, &grid), 1.0, None).unwrap();
        let Convolved::Grid(gf) = &fft else { panic!() };
        let err = grid
            .nodes(0)
            .iter()
            .zip(&gf.values)
            .map(|(x, v)| (exact.evaluate(&[*x]) - v).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn coarse_grid_rejected() {
        let p = GaussianMixtureDensity::standard(1);
        let grid = GridSpec::cube(1, 8.0, 64, QuadratureRule::Midpoint).unwrap();
        let r = convolve(Smoothable::Function(&p, &grid), 0.1, None);
        assert!(matches!(r, Err(Error::Resolution { .. })));
    }

    #[test]
    fn semigroup_on_mixtures() {
        let p = GaussianMixtureDensity::standard(2);
        let Convolved::Mixture(a) = convolve(Smoothable::Mixture(&p), 0.3, None).unwrap() else {
            panic!()
        };
        let Convolved::Mixture(b) = convolve(Smoothable::Mixture(&a), 0.4, None).unwrap() else {
            panic!()
        };
        let Convolved::Mixture(c) = convolve(Smoothable::Mixture(&p), 0.5, None).unwrap() else {
            panic!()
        };
        for x in [[0.0, 0.0], [0.3, -1.2]] {
            assert!((b.evaluate(&x) - c.evaluate(&x)).abs() < 1e-15);
        }
    }
}
