use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use super::spec::SieveSpec;
use crate::error::{Error, Result};
use crate::linalg::CovarianceSpec;
use crate::measure_discretization::MixingMeasure;

/// Largest angle count enumerated explicitly.
const MAX_ANGLES: f64 = (1u64 << 52) as f64;

/// `dH log(a/(σ0ε)) − H log ε + log M + Mε²`, the shape of the entropy bound.
pub fn entropy_bracket(spec: &SieveSpec) -> f64 {
    let (d, h, m) = (spec.dim as f64, spec.h as f64, spec.m as f64);
    d * h * (spec.a / (spec.sigma0 * spec.eps)).ln() - h * spec.eps.ln() + m.ln() + m * spec.eps * spec.eps
}

/// Logarithms of the four factors of the net size and their sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NetCount {
    /// `H log |R̂|`.
    pub log_locations: f64,
    pub log_simplex: f64,
    pub log_rotations: f64,
    /// `d log M`.
    pub log_ladder: f64,
    pub log_total: f64,
    pub bracket: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RotationNet {
    /// `d = 1`: `±1` act trivially on `Σ`.
    Trivial,
    /// `d = 2`: rotations by `πk/count`, `k < count`. Reflections and the
    /// half-turn are absorbed by flipping eigenvector signs.
    Angles { count: u64 },
    /// Counted through `δ^{−d(d−1)/2}`, not enumerated.
    CountOnly { log_count: f64 },
}

/// One element: cell indices of the first `H` atoms, a composition of the
/// simplex resolution, eigenvalue ladder indices in `1..=M` and an angle index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct NetElement {
    pub atoms: Vec<Vec<usize>>,
    pub weights: Vec<usize>,
    pub ladder: Vec<usize>,
    pub angle: u64,
}

/// The constructive net: a `(σ0ε)`-net of the cube, an `ε`-net of the
/// simplex in `ℓ1`, a `δ`-net of the orthogonal group with
/// `δ = ε²/{3d(1 + ε²/d)^M}`, and the eigenvalue ladder.
#[derive(Clone, Debug, Serialize)]
pub struct Net {
    pub spec: SieveSpec,
    /// Cell centres per axis.
    pub location_points: usize,
    /// Weights are multiples of `1/simplex_resolution`.
    pub simplex_resolution: usize,
    pub delta: f64,
    pub rotation: RotationNet,
    pub count: NetCount,
    pub notice: Option<String>,
}

fn log_binomial(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Build the net for `spec`. Rotations are enumerated for `d ≤ 2`; larger
/// dimensions fall back to counting with a notice.
pub fn build_net(spec: &SieveSpec) -> Result<Net> {
    spec.validate()?;
    let d = spec.dim;
    // cells of side 2a/n have half-diagonal below σ0ε
    let location_points = ((spec.a * (d as f64).sqrt() / (spec.sigma0 * spec.eps)).floor() as usize) + 1;
    // largest-remainder rounding errs by < 1/N per coordinate
    let simplex_resolution = ((spec.h as f64 / spec.eps).floor() as usize) + 1;
    let log_delta = 2.0 * spec.eps.ln() - (3.0 * d as f64).ln() - spec.m as f64 * spec.ladder_ratio().ln();
    let mut notice = None;
    let rotation = match d {
        1 => RotationNet::Trivial,
        2 if PI * (-log_delta).exp() < MAX_ANGLES => RotationNet::Angles {
            count: (PI * (-log_delta).exp()).floor() as u64 + 1,
        },
        _ => {
            notice = Some(format!(
                "rotation net for d = {d} is counted through delta^(-d(d-1)/2), not enumerated"
            ));
            RotationNet::CountOnly {
                log_count: -((d * (d - 1)) as f64) / 2.0 * log_delta,
            }
        }
    };
    let log_rotations = match rotation {
        RotationNet::Trivial => 0.0,
        RotationNet::Angles { count } => (count as f64).ln(),
        RotationNet::CountOnly { log_count } => log_count,
    };
    let log_locations = (spec.h * d) as f64 * (location_points as f64).ln();
    let log_simplex = log_binomial(simplex_resolution + spec.h - 1, spec.h - 1);
    let log_ladder = d as f64 * (spec.m as f64).ln();
    Ok(Net {
        spec: *spec,
        location_points,
        simplex_resolution,
        delta: log_delta.exp(),
        rotation,
        count: NetCount {
            log_locations,
            log_simplex,
            log_rotations,
            log_ladder,
            log_total: log_locations + log_simplex + log_rotations + log_ladder,
            bracket: entropy_bracket(spec),
        },
        notice,
    })
}

fn rotation(theta: f64) -> [f64; 4] {
    let (s, c) = theta.sin_cos();
    [c, -s, s, c]
}

impl Net {
    pub fn is_explicit(&self) -> bool {
        !matches!(self.rotation, RotationNet::CountOnly { .. })
    }

    fn require_explicit(&self) -> Result<()> {
        if self.is_explicit() {
            Ok(())
        } else {
            Err(Error::Precondition(self.notice.clone().unwrap_or_default()))
        }
    }

    /// Centre of location cell `i` on any axis.
    pub fn location(&self, i: usize) -> f64 {
        let w = 2.0 * self.spec.a / self.location_points as f64;
        -self.spec.a + (i as f64 + 0.5) * w
    }

    fn location_index(&self, x: f64) -> usize {
        let w = 2.0 * self.spec.a / self.location_points as f64;
        (((x + self.spec.a) / w).floor().max(0.0) as usize).min(self.location_points - 1)
    }

    /// `σ0²(1 + ε²/d)^{m−1}`, the covariance eigenvalue of ladder index `m`.
    pub fn ladder_level(&self, m: usize) -> f64 {
        self.spec.sigma0.powi(2) * ((m as f64 - 1.0) * self.spec.ladder_ratio().ln()).exp()
    }

    fn ladder_index(&self, u: f64) -> usize {
        let steps = (u / self.spec.sigma0.powi(2)).ln() / self.spec.ladder_ratio().ln();
        ((steps + 1e-9).floor().max(0.0) as usize + 1).min(self.spec.m)
    }

    fn angle_of(&self, k: u64) -> f64 {
        match self.rotation {
            RotationNet::Angles { count } => PI * k as f64 / count as f64,
            _ => 0.0,
        }
    }

    /// `(F̂, Σ̂)` for a net element.
    pub fn decode(&self, e: &NetElement) -> Result<(MixingMeasure, CovarianceSpec)> {
        self.require_explicit()?;
        let d = self.spec.dim;
        let n = self.simplex_resolution as f64;
        let atoms: Vec<Vec<f64>> = e.atoms.iter().map(|ix| ix.iter().map(|&i| self.location(i)).collect()).collect();
        let weights: Vec<f64> = e.weights.iter().map(|&k| k as f64 / n).collect();
        let f = MixingMeasure::new(atoms, weights)?;
        let levels: Vec<f64> = e.ladder.iter().map(|&m| self.ladder_level(m)).collect();
        let cov = if d == 1 {
            CovarianceSpec::diagonal(&levels)?
        } else {
            CovarianceSpec::from_eigen(&levels, &rotation(self.angle_of(e.angle)))?
        };
        Ok((f, cov))
    }

    /// The element the covering argument assigns to `(F, Σ)`: nearest cell
    /// centres for the first `H` atoms, largest-remainder rounding of the
    /// renormalised first `H` weights, the ladder level just below each
    /// eigenvalue of `Σ`, and the nearest angle.
    pub fn encode(&self, f: &MixingMeasure, cov: &CovarianceSpec) -> Result<NetElement> {
        self.require_explicit()?;
        let (d, h) = (self.spec.dim, self.spec.h);
        if f.dim() != d || cov.dim() != d {
            return Err(Error::invalid("mixture and net dimensions differ"));
        }
        let centre = self.location_points / 2;
        let atoms: Vec<Vec<usize>> = (0..h)
            .map(|i| match f.atoms().get(i) {
                Some(z) => z.iter().map(|&x| self.location_index(x)).collect(),
                None => vec![centre; d],
            })
            .collect();
        let head: Vec<f64> = (0..h).map(|i| f.weights().get(i).copied().unwrap_or(0.0)).collect();
        let total: f64 = head.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("the first H atoms carry no mass"));
        }
        let n = self.simplex_resolution;
        let scaled: Vec<f64> = head.iter().map(|w| w / total * n as f64).collect();
        let mut weights: Vec<usize> = scaled.iter().map(|x| x.floor() as usize).collect();
        let assigned: usize = weights.iter().sum();
        let mut order: Vec<usize> = (0..h).collect();
        order.sort_by(|&a, &b| (scaled[b] - scaled[b].floor()).total_cmp(&(scaled[a] - scaled[a].floor())).then(a.cmp(&b)));
        for &i in order.iter().take(n.saturating_sub(assigned)) {
            weights[i] += 1;
        }

        let ladder: Vec<usize> = cov.eigenvalues().iter().map(|&u| self.ladder_index(u)).collect();
        let angle = match self.rotation {
            RotationNet::Angles { count } => {
                // direction of the first eigenvector modulo π; the second
                // column's sign is free
                let v = cov.eigenvectors();
                let theta = v[2].atan2(v[0]).rem_euclid(PI);
                ((theta / (PI / count as f64)).round() as u64) % count
            }
            _ => 0,
        };
        Ok(NetElement {
            atoms,
            weights,
            ladder,
            angle,
        })
    }

    /// Enumerate all elements; `None` when rotations are only counted.
    pub fn iter(&self) -> Option<NetIter<'_>> {
        if !self.is_explicit() {
            return None;
        }
        let angles = match self.rotation {
            RotationNet::Angles { count } => count,
            _ => 1,
        };
        let mut weights = vec![0; self.spec.h];
        weights[self.spec.h - 1] = self.simplex_resolution;
        Some(NetIter {
            net: self,
            angles,
            current: Some(NetElement {
                atoms: vec![vec![0; self.spec.dim]; self.spec.h],
                weights,
                ladder: vec![1; self.spec.dim],
                angle: 0,
            }),
        })
    }
}

/// Odometer over ladder, angle, weights and atoms (fastest first).
pub struct NetIter<'a> {
    net: &'a Net,
    angles: u64,
    current: Option<NetElement>,
}

/// Next composition of `n` into `k.len()` parts, as an odometer on all but
/// the last part, which absorbs the rest.
fn next_composition(k: &mut [usize], n: usize) -> bool {
    let h = k.len();
    if h == 1 {
        return false;
    }
    let mut head: usize = k[..h - 1].iter().sum();
    let mut i = h - 2;
    loop {
        if head < n {
            k[i] += 1;
            k[h - 1] = n - head - 1;
            return true;
        }
        head -= k[i];
        k[i] = 0;
        if i == 0 {
            return false;
        }
        i -= 1;
    }
}

impl Iterator for NetIter<'_> {
    type Item = NetElement;

    fn next(&mut self) -> Option<NetElement> {
        let out = self.current.clone()?;
        let mut e = out.clone();
        let spec = &self.net.spec;
        let advanced = 'step: {
            for m in e.ladder.iter_mut() {
                if *m < spec.m {
                    *m += 1;
                    break 'step true;
                }
                *m = 1;
            }
            if e.angle + 1 < self.angles {
                e.angle += 1;
                break 'step true;
            }
            e.angle = 0;
            if next_composition(&mut e.weights, self.net.simplex_resolution) {
                break 'step true;
            }
            e.weights = vec![0; spec.h];
            e.weights[spec.h - 1] = self.net.simplex_resolution;
            for i in e.atoms.iter_mut().flatten() {
                if *i + 1 < self.net.location_points {
                    *i += 1;
                    break 'step true;
                }
                *i = 0;
            }
            false
        };
        self.current = advanced.then_some(e);
        Some(out)
    }
}
