//! Exact gain function for the scalar feedback particle filter.
//!
//! With a Gaussian-mixture density `p(x) = (1/N_p) Σ_i N(x; X^i, eps)` and a
//! polynomial observation `h(x) = Σ_k a_k H_k(x)` of degree `p >= 1`, the
//! Poisson equation `(p K)' = -(h - hbar) p` splits per particle into a
//! Gaussian-weighted part with an exact polynomial solution
//! `K^i(x) = Σ_{l<p} Khat^i_l H_l(x)` and a residual part integrating to an
//! error-function term. A free constant `C^i` per particle makes both parts
//! exactly solvable:
//!
//! ```text
//! K(x) = [ Σ_i N(x; X^i, eps) K^i(x) + ((hbar - C^i)/2) erf((x - X^i)/sqrt(2 eps)) ]
//!        / Σ_i N(x; X^i, eps)
//! ```
//!
//! The coefficients come from a backward recursion (O(p) per particle), the
//! constants turn out to be the per-kernel expectations `∫ h N(x; X^i, eps) dx`,
//! and their mean equals `hbar`. Construction is O(p N_p); evaluation is
//! O(p N_p) per point.

use crate::density::{hbar_with_condition, MixtureDensity};
use crate::hermite::HermiteSeries;
use crate::special::{erf, erfc, erfcx};
use crate::{Error, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Backward recursion for one particle: returns the polynomial coefficients
/// `Khat_0..Khat_{p-1}` and the constant `C^i`.
///
/// The recursion runs `k = p-1, ..., 0` with `Khat_p = Khat_{p+1} = 0`:
///
/// ```text
/// Khat_k = 2 eps a_{k+1} + 2 (2 eps - 1)(k + 2) Khat_{k+2} + 2 x_i Khat_{k+1}
/// C^i    = a_0 + (x_i/eps) Khat_0 + (2 - 1/eps) Khat_1
/// ```
///
/// A constant `h` (degree 0) is degenerate but well-defined: no coefficients
/// and `C^i = a_0`.
pub fn solve_coefficients(h: &HermiteSeries, x_i: f64, epsilon: f64) -> Result<(Vec<f64>, f64)> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    let p = h.degree();
    if p == 0 {
        return Ok((Vec::new(), h.coeff(0)));
    }
    let mut coeffs = vec![0.0; p];
    let mut k_plus_1 = 0.0;
    let mut k_plus_2 = 0.0;
    for k in (0..p).rev() {
        let v = 2.0 * epsilon * h.coeff(k + 1)
            + 2.0 * (2.0 * epsilon - 1.0) * ((k + 2) as f64) * k_plus_2
            + 2.0 * x_i * k_plus_1;
        coeffs[k] = v;
        k_plus_2 = k_plus_1;
        k_plus_1 = v;
    }
    let k1 = if p >= 2 { coeffs[1] } else { 0.0 };
    let c = h.coeff(0) + (x_i / epsilon) * coeffs[0] + (2.0 - 1.0 / epsilon) * k1;
    Ok((coeffs, c))
}

/// The assembled decomposition gain for one ensemble snapshot: per-particle
/// coefficient vectors, constants, and the mixture expectation of `h`.
///
/// Immutable once built; evaluation methods are pure and thread-safe.
#[derive(Debug, Clone)]
pub struct DecompositionGain {
    h: HermiteSeries,
    density: MixtureDensity,
    /// Particle-major flattened `Khat^i_l`, stride = degree of `h`.
    coeffs: Vec<f64>,
    constants: Vec<f64>,
    /// Precomputed `(mean C - C^i)/2`, the erf-term weights.
    erf_weights: Vec<f64>,
    hbar_value: f64,
    /// Mean of the constants; used inside evaluations so the erf weights sum
    /// to zero exactly and the boundary decay holds to float precision.
    hbar_c: f64,
    stride: usize,
    min_pos: f64,
    max_pos: f64,
}

/// Runs the backward recursion for every particle and assembles the gain.
///
/// Cross-checks the identity `hbar = (1/N_p) Σ_i C^i` (the two sides travel
/// independent routes: Gaussian raw moments vs. the recursion); disagreement
/// beyond tolerance signals a broken implementation and is reported as
/// [`Error::InternalConsistency`]. The tolerance carries an absolute floor
/// proportional to the moment sums' magnitude, which bounds legitimate float
/// cancellation at very high polynomial degrees.
pub fn build_gain(h: &HermiteSeries, d: &MixtureDensity) -> Result<DecompositionGain> {
    let p = h.degree();
    let n = d.ensemble().len();
    let mut coeffs = Vec::with_capacity(n * p);
    let mut constants = Vec::with_capacity(n);
    for &xi in d.ensemble().positions() {
        let (k, c) = solve_coefficients(h, xi, d.epsilon())?;
        coeffs.extend_from_slice(&k);
        constants.push(c);
    }
    let (hbar_value, moment_magnitude) = hbar_with_condition(h, d);
    let hbar_c = constants.iter().sum::<f64>() / n as f64;
    let gap = (hbar_value - hbar_c).abs();
    let scale = hbar_value.abs().max(hbar_c.abs());
    if gap > 1e-10 * scale + 1e-12 * moment_magnitude {
        return Err(Error::InternalConsistency(format!(
            "hbar = {hbar_value} but mean constant = {hbar_c} (gap {gap:e})"
        )));
    }
    let erf_weights = constants.iter().map(|&c| 0.5 * (hbar_c - c)).collect();
    let (min_pos, max_pos) = d.ensemble().range();
    Ok(DecompositionGain {
        h: h.clone(),
        density: d.clone(),
        coeffs,
        constants,
        erf_weights,
        hbar_value,
        hbar_c,
        stride: p,
        min_pos,
        max_pos,
    })
}

/// Numerator/denominator pieces shared by the gain, its derivative, and the
/// flux derivative, all divided by `scale` (1 on the normal path, the pivot
/// kernel value in the far tail).
struct Assembled {
    num: f64,
    num_prime: f64,
    den: f64,
    den_prime: f64,
    scale: f64,
}

impl DecompositionGain {
    pub fn h(&self) -> &HermiteSeries {
        &self.h
    }

    pub fn density(&self) -> &MixtureDensity {
        &self.density
    }

    /// Mixture expectation of `h` via Gaussian raw moments.
    pub fn hbar(&self) -> f64 {
        self.hbar_value
    }

    /// Per-particle constants `C^i`.
    pub fn constants(&self) -> &[f64] {
        &self.constants
    }

    /// Coefficient vector `Khat^i` for particle `i` (length = degree of `h`).
    pub fn coefficients(&self, i: usize) -> &[f64] {
        &self.coeffs[i * self.stride..(i + 1) * self.stride]
    }

    /// Gain value `K(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.stride == 0 {
            return 0.0;
        }
        let a = self.assemble(x);
        a.num / a.den
    }

    /// Analytic derivative `K'(x)` by the quotient rule.
    pub fn derivative(&self, x: f64) -> f64 {
        self.eval_with_derivative(x).1
    }

    /// `(K(x), K'(x))` in one pass; the filter loop needs both per particle.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        if self.stride == 0 {
            return (0.0, 0.0);
        }
        let a = self.assemble(x);
        let k = a.num / a.den;
        let kp = (a.num_prime - k * a.den_prime) / a.den;
        (k, kp)
    }

    /// FPF control term `u(x) = -K(x)(h(x) + hbar)/2 + K(x)K'(x)/2`.
    pub fn control(&self, x: f64) -> f64 {
        self.gain_and_control(x).1
    }

    /// `(K(x), u(x))` sharing one assembly pass; what the filter loop applies
    /// to each particle.
    pub fn gain_and_control(&self, x: f64) -> (f64, f64) {
        if self.stride == 0 {
            return (0.0, 0.0);
        }
        let (k, kp) = self.eval_with_derivative(x);
        let u = -0.5 * k * (self.h.eval(x) + self.hbar_c) + 0.5 * k * kp;
        (k, u)
    }

    /// Derivative of the probability flux, `d/dx [p(x) K(x)]`, assembled
    /// analytically from the per-particle components. The Poisson equation
    /// states this equals `-(h(x) - hbar) p(x)`.
    pub fn flux_derivative(&self, x: f64) -> f64 {
        if self.stride == 0 {
            return 0.0;
        }
        let a = self.assemble(x);
        a.scale * a.num_prime / self.density.ensemble().len() as f64
    }

    fn assemble(&self, x: f64) -> Assembled {
        let eps = self.density.epsilon();
        let sqrt_2eps = (2.0 * eps).sqrt();
        let inv_norm = 1.0 / (SQRT_2PI * eps.sqrt());
        let positions = self.density.ensemble().positions();

        // erf saturates to +/-1 beyond |z| ~ 6; once every particle is on the
        // same side, the weighted erf sum cancels to zero analytically (the
        // weights sum to zero) and must be evaluated through erfc to avoid
        // losing that cancellation to rounding.
        let z_hi = (x - self.min_pos) / sqrt_2eps;
        let z_lo = (x - self.max_pos) / sqrt_2eps;

        let mut den = 0.0;
        let mut den_prime = 0.0;
        let mut num = 0.0;
        let mut num_prime = 0.0;
        for (i, &xi) in positions.iter().enumerate() {
            let dx = x - xi;
            let z = dx / sqrt_2eps;
            // Flush vanishing kernels to exact zero; subnormal weights only
            // add slow arithmetic, never meaningful mass.
            let e = (-z * z).exp();
            let ni = if e < 1e-290 { 0.0 } else { e * inv_norm };
            let (poly, dpoly) = self.poly_terms(i, x);
            let w = self.erf_weights[i];
            den += ni;
            den_prime += -(dx / eps) * ni;
            num += ni * poly;
            num_prime += ni * (dpoly - (dx / eps) * poly + (self.hbar_c - self.constants[i]));
            if z_lo >= 6.0 {
                num -= w * erfc(z);
            } else if z_hi <= -6.0 {
                num += w * erfc(-z);
            } else {
                num += w * erf(z);
            }
        }

        if den >= 1e-300 {
            return Assembled {
                num,
                num_prime,
                den,
                den_prime,
                scale: 1.0,
            };
        }
        self.assemble_far_tail(x)
    }

    /// Far-tail path: every kernel value underflows, so work relative to the
    /// nearest particle's kernel (all ratios `exp(z_min^2 - z_i^2) <= 1`).
    fn assemble_far_tail(&self, x: f64) -> Assembled {
        let eps = self.density.epsilon();
        let sqrt_2eps = (2.0 * eps).sqrt();
        let inv_norm = 1.0 / (SQRT_2PI * eps.sqrt());
        let positions = self.density.ensemble().positions();

        let mut z2_min = f64::INFINITY;
        for &xi in positions {
            let z = (x - xi) / sqrt_2eps;
            z2_min = z2_min.min(z * z);
        }

        let mut den = 0.0;
        let mut den_prime = 0.0;
        let mut num = 0.0;
        let mut num_prime = 0.0;
        let mut saturated = 0.0;
        for (i, &xi) in positions.iter().enumerate() {
            let dx = x - xi;
            let z = dx / sqrt_2eps;
            let rho = (z2_min - z * z).exp();
            let (poly, dpoly) = self.poly_terms(i, x);
            let w = self.erf_weights[i];
            den += rho;
            den_prime += -(dx / eps) * rho;
            num += rho * poly;
            num_prime += rho * (dpoly - (dx / eps) * poly + (self.hbar_c - self.constants[i]));
            // erfc(|z|)/N_pivot = sqrt(2 pi eps) * erfcx(|z|) * rho
            let scaled_tail = SQRT_2PI * eps.sqrt() * erfcx(z.abs()) * rho;
            if z >= 0.0 {
                num -= w * scaled_tail;
                saturated += w;
            } else {
                num += w * scaled_tail;
                saturated -= w;
            }
        }
        // With particles on both sides of x the saturated erf contributions
        // do not cancel; they re-enter divided by the (underflowed) pivot
        // kernel and may legitimately overflow.
        if saturated != 0.0 {
            num += saturated * SQRT_2PI * eps.sqrt() * z2_min.exp();
        }
        Assembled {
            num,
            num_prime,
            den,
            den_prime,
            scale: (-z2_min).exp() * inv_norm,
        }
    }

    /// `Σ_{l<p} Khat^i_l H_l(x)` and its derivative `Σ 2 l Khat^i_l H_{l-1}(x)`
    /// in one forward recurrence pass.
    fn poly_terms(&self, i: usize, x: f64) -> (f64, f64) {
        let k = self.coefficients(i);
        let mut poly = k[0];
        let mut dpoly = 0.0;
        if k.len() == 1 {
            return (poly, dpoly);
        }
        let mut h_prev = 1.0;
        let mut h_cur = 2.0 * x;
        poly += k[1] * h_cur;
        dpoly += k[1] * 2.0 * h_prev;
        for l in 2..k.len() {
            let h_next = 2.0 * x * h_cur - 2.0 * (l as f64 - 1.0) * h_prev;
            poly += k[l] * h_next;
            dpoly += k[l] * 2.0 * (l as f64) * h_cur;
            h_prev = h_cur;
            h_cur = h_next;
        }
        (poly, dpoly)
    }
}
