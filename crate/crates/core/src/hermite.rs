//! Physicists' Hermite polynomials and series in the Hermite basis.
//!
//! The whole crate is fixed to the physicists' convention: weight `e^{-x^2}`,
//! `H_0 = 1`, `H_1 = 2x`, and the three-term recurrence
//! `H_{n+1}(x) = 2x H_n(x) - 2n H_{n-1}(x)`, with `H_n'(x) = 2n H_{n-1}(x)`
//! and orthogonality `∫ H_m H_n e^{-x^2} dx = sqrt(pi) 2^n n! δ_{mn}`.
//! Switching to the probabilists' family would silently change every
//! recursion constant downstream, so no convention parameter is exposed.

use crate::{Error, Result};

/// Largest accepted polynomial degree.
///
/// High-degree basis polynomials are exercised by the CPU-scaling experiments
/// (up to `H_100`); 512 leaves ample headroom. The normalization `2^n n!` is
/// never materialized, only ratios, so the cap is not an overflow bound.
pub const MAX_DEGREE: usize = 512;

/// Evaluates the physicists' Hermite polynomial `H_k(x)` by the three-term
/// recurrence. Cost is linear in `k`.
pub fn hermite_eval(k: usize, x: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = 2.0 * x;
    for n in 1..k {
        let next = 2.0 * x * cur - 2.0 * (n as f64) * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// A polynomial expressed in the physicists' Hermite basis,
/// `h(x) = Σ_k a_k H_k(x)`.
///
/// The degree is the index of the last stored coefficient; trailing zeros are
/// kept as given (use [`HermiteSeries::reduced`] for the trimmed form).
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteSeries {
    coeffs: Vec<f64>,
}

impl HermiteSeries {
    /// Builds a series from coefficients `a_0..a_p`.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter(
                "Hermite series needs at least one coefficient".into(),
            ));
        }
        if coeffs.len() - 1 > MAX_DEGREE {
            return Err(Error::DegreeTooLarge {
                degree: coeffs.len() - 1,
                max: MAX_DEGREE,
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "Hermite coefficients must be finite".into(),
            ));
        }
        Ok(Self { coeffs })
    }

    /// The constant series `h ≡ c`.
    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    /// The basis element `H_k`.
    pub fn basis(k: usize) -> Result<Self> {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        Self::new(coeffs)
    }

    /// Index of the last stored coefficient.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient `a_k`, zero beyond the stored degree.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// Evaluates `Σ_k a_k H_k(x)` in a single forward recurrence pass.
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = self.coeffs[0];
        if self.coeffs.len() == 1 {
            return acc;
        }
        let mut prev = 1.0;
        let mut cur = 2.0 * x;
        acc += self.coeffs[1] * cur;
        for n in 1..self.degree() {
            let next = 2.0 * x * cur - 2.0 * (n as f64) * prev;
            prev = cur;
            cur = next;
            acc += self.coeffs[n + 1] * next;
        }
        acc
    }

    /// Converts monomial coefficients `m_0 + m_1 x + ...` to the Hermite
    /// basis. Exact up to floating point; round-trips with
    /// [`HermiteSeries::to_monomial`].
    pub fn from_monomial(monomial: &[f64]) -> Result<Self> {
        if monomial.is_empty() {
            return Err(Error::InvalidParameter(
                "monomial coefficient list is empty".into(),
            ));
        }
        if monomial.len() - 1 > MAX_DEGREE {
            return Err(Error::DegreeTooLarge {
                degree: monomial.len() - 1,
                max: MAX_DEGREE,
            });
        }
        if monomial.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "monomial coefficients must be finite".into(),
            ));
        }
        let p = monomial.len() - 1;
        let rows = hermite_monomial_rows(p);
        let mut work = monomial.to_vec();
        let mut coeffs = vec![0.0; p + 1];
        // Back substitution: the leading monomial coefficient of H_k is 2^k.
        for k in (0..=p).rev() {
            let a = work[k] / 2f64.powi(k as i32);
            coeffs[k] = a;
            if a != 0.0 {
                for (j, r) in rows[k].iter().enumerate() {
                    work[j] -= a * r;
                }
            }
        }
        Self::new(coeffs)
    }

    /// Expands the series into monomial coefficients. Exact inverse of
    /// [`HermiteSeries::from_monomial`] up to floating point.
    pub fn to_monomial(&self) -> Vec<f64> {
        let p = self.degree();
        let rows = hermite_monomial_rows(p);
        let mut out = vec![0.0; p + 1];
        for (k, &a) in self.coeffs.iter().enumerate() {
            if a != 0.0 {
                for (j, r) in rows[k].iter().enumerate() {
                    out[j] += a * r;
                }
            }
        }
        out
    }

    /// Derivative as a series, using `H_n' = 2n H_{n-1}`.
    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::constant(0.0);
        }
        let d: Vec<f64> = (1..self.coeffs.len())
            .map(|n| 2.0 * (n as f64) * self.coeffs[n])
            .collect();
        Self { coeffs: d }
    }

    /// Series scaled by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| alpha * c).collect(),
        }
    }

    /// Coefficient-wise sum of two series.
    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|k| self.coeff(k) + other.coeff(k))
            .collect();
        Self { coeffs }
    }

    /// Trims trailing zero coefficients so that `a_p != 0` unless `p = 0`.
    pub fn reduced(mut self) -> Self {
        while self.coeffs.len() > 1 && *self.coeffs.last().unwrap() == 0.0 {
            self.coeffs.pop();
        }
        self
    }
}

/// Monomial coefficient rows of `H_0..H_p`, built once by the coefficient
/// recurrence `H_{k+1} = 2x H_k - 2k H_{k-1}`.
fn hermite_monomial_rows(p: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(p + 1);
    rows.push(vec![1.0]);
    if p == 0 {
        return rows;
    }
    rows.push(vec![0.0, 2.0]);
    for k in 1..p {
        let mut next = vec![0.0; k + 2];
        for (j, &c) in rows[k].iter().enumerate() {
            next[j + 1] += 2.0 * c;
        }
        for (j, &c) in rows[k - 1].iter().enumerate() {
            next[j] -= 2.0 * (k as f64) * c;
        }
        rows.push(next);
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn low_order_values() {
        assert_eq!(hermite_eval(0, 3.7), 1.0);
        assert_eq!(hermite_eval(1, 2.0), 4.0);
        // H_3(x) = 8x^3 - 12x
        assert_eq!(hermite_eval(3, 1.0), -4.0);
    }

    #[test]
    fn series_eval_examples() {
        // 1/40 + H_2/80 == 0.05 x^2
        let s = HermiteSeries::new(vec![1.0 / 40.0, 0.0, 1.0 / 80.0]).unwrap();
        assert_relative_eq!(s.eval(2.0), 0.2, max_relative = 1e-15);

        let c = HermiteSeries::constant(-3.25);
        assert_eq!(c.eval(17.0), -3.25);

        // x = H_1(x)/2
        let x = HermiteSeries::new(vec![0.0, 0.5]).unwrap();
        assert_eq!(x.eval(-3.0), -3.0);
    }

    #[test]
    fn series_eval_matches_basis_eval() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..=12 {
            let basis = HermiteSeries::basis(k).unwrap();
            for _ in 0..100 {
                let x: f64 = rng.random_range(-4.0..4.0);
                let direct = hermite_eval(k, x);
                assert_relative_eq!(basis.eval(x), direct, max_relative = 1e-12, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn monomial_conversion_benchmark_observation() {
        // 0.05 x^2 has Hermite coefficients a_0 = 1/40, a_2 = 1/80.
        let s = HermiteSeries::from_monomial(&[0.0, 0.0, 0.05]).unwrap();
        assert_relative_eq!(s.coeff(0), 1.0 / 40.0, max_relative = 1e-15);
        assert_eq!(s.coeff(1), 0.0);
        assert_relative_eq!(s.coeff(2), 1.0 / 80.0, max_relative = 1e-15);

        let back = s.to_monomial();
        assert_relative_eq!(back[2], 0.05, max_relative = 1e-15);
        assert!(back[0].abs() < 1e-18 && back[1].abs() < 1e-18);
    }

    #[test]
    fn monomial_conversion_cubic() {
        // x^3 = (3/4) H_1 + (1/8) H_3
        let s = HermiteSeries::from_monomial(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_relative_eq!(s.coeff(1), 0.75, max_relative = 1e-15);
        assert_relative_eq!(s.coeff(3), 0.125, max_relative = 1e-15);
        assert_eq!(s.coeff(0), 0.0);
        assert_eq!(s.coeff(2), 0.0);

        let m = HermiteSeries::new(vec![0.0, 0.75, 0.0, 0.125])
            .unwrap()
            .to_monomial();
        assert_relative_eq!(m[3], 1.0, max_relative = 1e-15);
        assert!(m[0].abs() < 1e-18 && m[1].abs() < 1e-15 && m[2].abs() < 1e-18);
    }

    #[test]
    fn linear_monomial_is_half_h1() {
        let s = HermiteSeries::from_monomial(&[0.0, 1.0]).unwrap();
        assert_eq!(s.coeffs(), &[0.0, 0.5]);
        assert_eq!(s.to_monomial(), vec![0.0, 1.0]);
    }

    #[test]
    fn derivative_identity_against_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=10usize {
            for _ in 0..20 {
                let x: f64 = rng.random_range(-3.0..3.0);
                let expected = 2.0 * (n as f64) * hermite_eval(n - 1, x);
                let h = 1e-6;
                let fd = (hermite_eval(n, x + h) - hermite_eval(n, x - h)) / (2.0 * h);
                let scale = expected.abs().max(1.0);
                assert!(
                    (fd - expected).abs() <= 1e-4 * scale,
                    "H_{n}' mismatch at x={x}: fd={fd}, 2nH_(n-1)={expected}"
                );
            }
        }
    }

    #[test]
    fn orthogonality_under_gauss_hermite_quadrature() {
        let (nodes, weights) = gauss_hermite_rule(64);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        for m in 0..=10usize {
            for n in 0..=10usize {
                let quad: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&x, &w)| w * hermite_eval(m, x) * hermite_eval(n, x))
                    .sum();
                if m == n {
                    let mut gamma = sqrt_pi;
                    for j in 1..=n {
                        gamma *= 2.0 * j as f64;
                    }
                    assert_relative_eq!(quad, gamma, max_relative = 1e-8);
                } else {
                    let scale = sqrt_pi * 2f64.powi(n.max(m) as i32) * (1..=n.max(m)).product::<usize>() as f64;
                    assert!(
                        quad.abs() <= 1e-8 * scale,
                        "H_{m} x H_{n} not orthogonal: {quad}"
                    );
                }
            }
        }
    }

    #[test]
    fn degree_cap_enforced() {
        let coeffs = vec![1.0; MAX_DEGREE + 2];
        assert!(matches!(
            HermiteSeries::new(coeffs),
            Err(Error::DegreeTooLarge { .. })
        ));
        assert!(HermiteSeries::basis(MAX_DEGREE).is_ok());
    }

    #[test]
    fn reduced_trims_trailing_zeros() {
        let s = HermiteSeries::new(vec![1.0, 2.0, 0.0, 0.0]).unwrap().reduced();
        assert_eq!(s.degree(), 1);
        let z = HermiteSeries::new(vec![0.0, 0.0]).unwrap().reduced();
        assert_eq!(z.degree(), 0);
    }

    /// Gauss-Hermite rule for the weight `e^{-x^2}`: nodes are roots of `H_n`,
    /// bracketed on a sign-change grid and polished by Newton; weights are
    /// `2^{n-1} n! sqrt(pi) / (n H_{n-1}(x_k))^2 * n`.
    fn gauss_hermite_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
        let bound = (2.0 * n as f64 + 1.0).sqrt() + 2.0;
        let grid: usize = 20000;
        let mut nodes = Vec::with_capacity(n);
        let mut prev_x = -bound;
        let mut prev_f = hermite_eval(n, prev_x);
        for i in 1..=grid {
            let x = -bound + 2.0 * bound * (i as f64) / (grid as f64);
            let f = hermite_eval(n, x);
            if prev_f == 0.0 {
                nodes.push(prev_x);
            } else if prev_f.signum() != f.signum() {
                // Newton from the midpoint.
                let mut r = 0.5 * (prev_x + x);
                for _ in 0..60 {
                    let fr = hermite_eval(n, r);
                    let dfr = 2.0 * n as f64 * hermite_eval(n - 1, r);
                    let step = fr / dfr;
                    r -= step;
                    if step.abs() < 1e-15 * (1.0 + r.abs()) {
                        break;
                    }
                }
                nodes.push(r);
            }
            prev_x = x;
            prev_f = f;
        }
        assert_eq!(nodes.len(), n, "failed to bracket all Hermite roots");
        let mut c = std::f64::consts::PI.sqrt() * 2f64.powi(n as i32 - 1);
        for j in 1..=n {
            c *= j as f64;
        }
        let weights = nodes
            .iter()
            .map(|&x| {
                let hm = hermite_eval(n - 1, x);
                c / ((n as f64) * hm * (n as f64) * hm)
            })
            .collect();
        (nodes, weights)
    }
}
