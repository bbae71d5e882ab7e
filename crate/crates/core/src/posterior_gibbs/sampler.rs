use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::CovarianceSpec;
use crate::measure_discretization::MixingMeasure;
use crate::prior_model::{sample_covariance, stick_weights, CovariancePrior, PriorSpec};

/// Jittered retries of the covariance update before giving up.
const MAX_JITTER_RETRIES: usize = 20;
const SLICE_WIDTH: f64 = 1.0;
const SLICE_MAX_STEPS: usize = 64;

/// Current state of the truncated blocked Gibbs chain.
#[derive(Clone, Debug, Serialize)]
pub struct GibbsState {
    pub truncation: usize,
    pub sticks: Vec<f64>,
    pub atoms: Vec<Vec<f64>>,
    pub covariance: CovarianceSpec,
    /// Component index in `0..H` for each observation.
    pub allocations: Vec<usize>,
    pub iteration: usize,
}

impl GibbsState {
    /// Mixture weights with the stick remainder folded into the last atom.
    pub fn weights(&self) -> Vec<f64> {
        let (mut w, rest) = stick_weights(&self.sticks);
        *w.last_mut().expect("H >= 1") += rest;
        w
    }

    pub fn mixing(&self) -> Result<MixingMeasure> {
        MixingMeasure::normalized(self.atoms.clone(), self.weights())
    }

    /// Number of observations per component.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.truncation];
        for &k in &self.allocations {
            c[k] += 1;
        }
        c
    }

    fn dump(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|e| format!("<unserialisable state: {e}>"))
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    (0..d * d).map(|ij| m[(ij / d, ij % d)]).collect()
}

/// One chain: data, prior and the mutable state.
pub struct GibbsChain<'a> {
    data: &'a [Vec<f64>],
    prior: &'a PriorSpec,
    pub state: GibbsState,
    /// Covariance updates that needed a diagonal jitter.
    pub jitter_retries: usize,
    /// Numerically singular prior-style covariance draws discarded.
    pub covariance_resamples: usize,
}

impl<'a> GibbsChain<'a> {
    /// Start from a prior draw of sticks, atoms and covariance, then allocate.
    pub fn new<R: Rng + ?Sized>(data: &'a [Vec<f64>], prior: &'a PriorSpec, h: usize, rng: &mut R) -> Result<Self> {
        prior.validate()?;
        let d = prior.dim();
        if h == 0 {
            return Err(Error::Precondition("truncation must be at least 1".into()));
        }
        if let Some(bad) = data.iter().position(|x| x.len() != d || x.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid(format!("observation {bad} is not a finite {d}-vector")));
        }
        let draw = sample_covariance(&prior.covariance, d, rng)?;
        let mut chain = GibbsChain {
            data,
            prior,
            state: GibbsState {
                truncation: h,
                sticks: vec![0.5; h],
                atoms: vec![prior.base_mean.clone(); h],
                covariance: draw.covariance,
                allocations: vec![0; data.len()],
                iteration: 0,
            },
            jitter_retries: 0,
            covariance_resamples: draw.resamples,
        };
        chain.update_sticks(rng)?;
        chain.update_atoms(rng)?;
        chain.update_allocations(rng)?;
        Ok(chain)
    }

    /// One sweep in the fixed order allocations, sticks, atoms, covariance.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.update_allocations(rng)?;
        self.update_sticks(rng)?;
        self.update_atoms(rng)?;
        self.update_covariance(rng)?;
        self.state.iteration += 1;
        Ok(())
    }

    /// `P(k_i = h) ∝ π_h φ_Σ(x_i − z_h)`.
    pub fn update_allocations<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        if self.data.is_empty() {
            return Ok(());
        }
        let d = self.prior.dim();
        let h = self.state.truncation;
        let p = DMatrix::from_row_slice(d, d, self.state.covariance.precision());
        // (x − z)ᵀ P (x − z) = ‖Rᵀx − Rᵀz‖² with P = R Rᵀ
        let rt = p
            .cholesky()
            .ok_or_else(|| Error::Diverged {
                reason: "precision lost positive definiteness".into(),
                state: self.state.dump(),
            })?
            .l()
            .transpose();
        let whiten = |x: &[f64]| -> Vec<f64> { (rt.clone() * DVector::from_column_slice(x)).iter().copied().collect() };
        let centres: Vec<Vec<f64>> = self.state.atoms.iter().map(|z| whiten(z)).collect();
        let log_w: Vec<f64> = self.state.weights().iter().map(|w| w.ln()).collect();
        let mut logp = vec![0.0; h];
        let mut y = vec![0.0; d];
        for i in 0..self.data.len() {
            for (r, yr) in y.iter_mut().enumerate() {
                *yr = (0..d).map(|c| rt[(r, c)] * self.data[i][c]).sum();
            }
            let mut top = f64::NEG_INFINITY;
            for k in 0..h {
                let q: f64 = y.iter().zip(&centres[k]).map(|(a, b)| (a - b) * (a - b)).sum();
                logp[k] = log_w[k] - 0.5 * q;
                top = top.max(logp[k]);
            }
            if !top.is_finite() {
                return Err(Error::Diverged {
                    reason: format!("non-finite likelihood for observation {i}"),
                    state: self.state.dump(),
                });
            }
            let mut total = 0.0;
            for v in logp.iter_mut() {
                *v = (*v - top).exp();
                total += *v;
            }
            let mut u = rng.random::<f64>() * total;
            let mut pick = h - 1;
            for (k, v) in logp.iter().enumerate() {
                if u < *v {
                    pick = k;
                    break;
                }
                u -= v;
            }
            self.state.allocations[i] = pick;
        }
        Ok(())
    }

    /// `V_h ∼ Be(1 + n_h, |α| + Σ_{l>h} n_l)` for `h < H`; the last stick does
    /// not enter the folded weights and is drawn from its prior.
    pub fn update_sticks<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let counts = self.state.counts();
        let h = self.state.truncation;
        let mut above: usize = counts.iter().sum();
        for k in 0..h {
            above -= counts[k];
            let (a, b) = if k + 1 < h {
                (1.0 + counts[k] as f64, self.prior.total_mass + above as f64)
            } else {
                (1.0, self.prior.total_mass)
            };
            let law = Beta::new(a, b).map_err(|e| Error::invalid(format!("stick update: {e}")))?;
            // keep sticks strictly inside (0, 1)
            self.state.sticks[k] = law.sample(rng).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
        }
        Ok(())
    }

    /// `z_h ∼ N(m, S)` with `S^{-1} = Σ0^{-1} + n_h Σ^{-1}` and
    /// `m = S(Σ0^{-1}μ0 + Σ^{-1} Σ_{k_i = h} x_i)`.
    pub fn update_atoms<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let d = self.prior.dim();
        let h = self.state.truncation;
        let p0 = DMatrix::from_row_slice(d, d, self.prior.base_cov.precision());
        let p = DMatrix::from_row_slice(d, d, self.state.covariance.precision());
        let mu0 = DVector::from_column_slice(&self.prior.base_mean);
        let prior_term = &p0 * &mu0;
        let mut sums = vec![DVector::<f64>::zeros(d); h];
        let counts = self.state.counts();
        for (x, &k) in self.data.iter().zip(&self.state.allocations) {
            sums[k] += DVector::from_column_slice(x);
        }
        for k in 0..h {
            let a = &p0 + &p * counts[k] as f64;
            let chol = a.cholesky().ok_or_else(|| Error::Diverged {
                reason: format!("atom {k} posterior precision is not positive definite"),
                state: self.state.dump(),
            })?;
            let mean = chol.solve(&(&prior_term + &p * &sums[k]));
            let e = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let shift = chol
                .l()
                .transpose()
                .solve_upper_triangular(&e)
                .expect("Cholesky factor has a positive diagonal");
            self.state.atoms[k] = (mean + shift).iter().copied().collect();
        }
        Ok(())
    }

    /// Residual scatter `Σ_i (x_i − z_{k_i})(x_i − z_{k_i})ᵀ`.
    fn scatter(&self) -> DMatrix<f64> {
        let d = self.prior.dim();
        let mut s = DMatrix::<f64>::zeros(d, d);
        for (x, &k) in self.data.iter().zip(&self.state.allocations) {
            let r = DVector::from_fn(d, |j, _| x[j] - self.state.atoms[k][j]);
            s += &r * r.transpose();
        }
        s
    }

    /// Conjugate inverse-Wishart or inverse-gamma update; the squared
    /// inverse-gamma prior uses a slice sampler per axis.
    pub fn update_covariance<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let d = self.prior.dim();
        let n = self.data.len() as f64;
        let s = self.scatter();
        let cov = match &self.prior.covariance {
            CovariancePrior::InverseWishart { nu, psi } => {
                let base = DMatrix::from_row_slice(d, d, psi.matrix()) + &s;
                let scale = self.spd_with_jitter(base)?;
                let post = CovariancePrior::InverseWishart { nu: nu + n, psi: scale };
                let draw = sample_covariance(&post, d, rng)?;
                self.covariance_resamples += draw.resamples;
                draw.covariance
            }
            CovariancePrior::DiagonalInverseGamma { shape, rate } => {
                let mut var = Vec::with_capacity(d);
                for j in 0..d {
                    let g = Gamma::new(shape + 0.5 * n, 1.0 / (rate + 0.5 * s[(j, j)]))
                        .map_err(|e| Error::invalid(format!("precision update: {e}")))?;
                    var.push(1.0 / g.sample(rng));
                }
                CovarianceSpec::diagonal(&var)?
            }
            CovariancePrior::DiagonalSquaredInverseGamma { shape, rate } => {
                let mut var = Vec::with_capacity(d);
                for j in 0..d {
                    // precision λ = g², p(g) ∝ g^{shape+n−1} exp(−rate·g − s_jj g²/2)
                    let current = self.state.covariance.entry(j, j).recip().sqrt();
                    let (k, r, q) = (shape + n - 1.0, *rate, 0.5 * s[(j, j)]);
                    let g = slice_sample(current, |g| k * g.ln() - r * g - q * g * g, rng);
                    var.push(1.0 / (g * g));
                }
                CovarianceSpec::diagonal(&var)?
            }
        };
        self.state.covariance = cov;
        Ok(())
    }

    /// `CovarianceSpec` of an SPD candidate, adding growing diagonal jitter
    /// when the factorisation fails.
    fn spd_with_jitter(&mut self, m: DMatrix<f64>) -> Result<CovarianceSpec> {
        let d = m.nrows();
        let scale = (0..d).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let mut jitter = 0.0;
        for _ in 0..=MAX_JITTER_RETRIES {
            let mut c = m.clone();
            for i in 0..d {
                c[(i, i)] += jitter;
            }
            match CovarianceSpec::new(d, &row_major(&c)) {
                Ok(spec) => return Ok(spec),
                Err(Error::NotPositiveDefinite { .. }) => {
                    self.jitter_retries += 1;
                    jitter = if jitter == 0.0 { scale * 1e-12 } else { jitter * 10.0 };
                }
                Err(e) => return Err(e),
            }
        }
        Err(Error::Diverged {
            reason: "inverse-Wishart scale stayed singular after jitter".into(),
            state: self.state.dump(),
        })
    }
}

/// Stepping-out slice sampler on `(0, ∞)` for a log-density `f`.
fn slice_sample<R: Rng + ?Sized, F: Fn(f64) -> f64>(x0: f64, f: F, rng: &mut R) -> f64 {
    let logf = |x: f64| if x > 0.0 { f(x) } else { f64::NEG_INFINITY };
    let level = logf(x0) + rng.random::<f64>().ln();
    let width = SLICE_WIDTH * x0.max(1e-12);
    let mut lo = x0 - width * rng.random::<f64>();
    let mut hi = lo + width;
    for _ in 0..SLICE_MAX_STEPS {
        if logf(lo) <= level {
            break;
        }
        lo -= width;
    }
    for _ in 0..SLICE_MAX_STEPS {
        if logf(hi) <= level {
            break;
        }
        hi += width;
    }
    lo = lo.max(0.0);
    loop {
        let x = lo + (hi - lo) * rng.random::<f64>();
        if logf(x) > level {
            return x;
        }
        if x < x0 {
            lo = x;
        } else {
            hi = x;
        }
    }
}
