//! Particle ensembles and Gaussian-mixture density approximations.
//!
//! The filtering density is approximated by placing a Gaussian kernel of
//! variance `epsilon` on every particle:
//! `p(x) = (1/N_p) Σ_i N(x; X^i, epsilon)`. Expectations of polynomial
//! observation functions under this mixture are exactly computable from
//! Gaussian raw moments, which is what [`hbar`] does — no quadrature anywhere.

use crate::hermite::HermiteSeries;
use crate::{Error, Result};

pub use crate::special::erf;

/// Particle positions `X^1..X^{N_p}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    positions: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn new(positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidParameter("ensemble must be non-empty".into()));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "particle positions must be finite".into(),
            ));
        }
        Ok(Self { positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Smallest and largest particle position.
    pub fn range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &x in &self.positions {
            lo = lo.min(x);
            hi = hi.max(x);
        }
        (lo, hi)
    }
}

/// Gaussian-mixture density: an ensemble plus kernel bandwidth `epsilon`
/// (the per-kernel variance).
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDensity {
    ensemble: ParticleEnsemble,
    epsilon: f64,
}

impl MixtureDensity {
    pub fn new(ensemble: ParticleEnsemble, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bandwidth epsilon must be positive and finite, got {epsilon}"
            )));
        }
        Ok(Self { ensemble, epsilon })
    }

    pub fn ensemble(&self) -> &ParticleEnsemble {
        &self.ensemble
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Mixture density value `(1/N_p) Σ_i N(x; X^i, epsilon)`.
    pub fn pdf(&self, x: f64) -> f64 {
        let sum: f64 = self
            .ensemble
            .positions()
            .iter()
            .map(|&xi| gaussian_pdf_unchecked(x, xi, self.epsilon))
            .sum();
        sum / self.ensemble.len() as f64
    }
}

/// Scalar Gaussian density `N(x; mean, variance)`.
pub fn gaussian_pdf(x: f64, mean: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "variance must be positive and finite, got {variance}"
        )));
    }
    Ok(gaussian_pdf_unchecked(x, mean, variance))
}

#[inline]
pub(crate) fn gaussian_pdf_unchecked(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    (-d * d / (2.0 * variance)).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
}

/// Exact expectation of a Hermite-basis polynomial under the mixture:
/// `∫ h(x) p(x) dx`, via monomial conversion and Gaussian raw moments.
pub fn hbar(h: &HermiteSeries, d: &MixtureDensity) -> f64 {
    hbar_with_condition(h, d).0
}

/// Like [`hbar`], but also returns the mean positive magnitude
/// `(1/N_p) Σ_i Σ_j |c_j M_j|` of the moment sums, which bounds the float
/// cancellation noise of the result.
pub(crate) fn hbar_with_condition(h: &HermiteSeries, d: &MixtureDensity) -> (f64, f64) {
    let monomial = h.to_monomial();
    let eps = d.epsilon();
    let n = d.ensemble().len() as f64;
    let mut total = 0.0;
    let mut magnitude = 0.0;
    let mut moments = vec![0.0; monomial.len()];
    for &xi in d.ensemble().positions() {
        gaussian_raw_moments(xi, eps, &mut moments);
        let mut acc = 0.0;
        let mut mag = 0.0;
        for (c, m) in monomial.iter().zip(&moments) {
            let term = c * m;
            acc += term;
            mag += term.abs();
        }
        total += acc;
        magnitude += mag;
    }
    (total / n, magnitude / n)
}

/// Raw moments `M_k = E[Y^k]` of `N(mean, variance)` for `k = 0..out.len()`,
/// by the recurrence `M_k = mean*M_{k-1} + (k-1)*variance*M_{k-2}`.
pub(crate) fn gaussian_raw_moments(mean: f64, variance: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = mean;
    }
    for k in 2..out.len() {
        out[k] = mean * out[k - 1] + (k as f64 - 1.0) * variance * out[k - 2];
    }
}

/// Sample mean and population variance (divide by `N_p`, matching the
/// empirical-distribution convention) of an ensemble.
pub fn ensemble_moments(e: &ParticleEnsemble) -> (f64, f64) {
    let n = e.len() as f64;
    let mean = e.positions().iter().sum::<f64>() / n;
    let var = e
        .positions()
        .iter()
        .map(|&x| (x - mean) * (x - mean))
        .sum::<f64>()
        / n;
    (mean, var)
}
