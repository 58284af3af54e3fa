//! Error function family, implemented in-library.
//!
//! The gain formula evaluates `erf` inside an inner loop over particles, so
//! the accuracy budget is owned here rather than delegated to a platform
//! function. `erf` uses Chebyshev expansions (coefficients generated at
//! 50-digit working precision, truncation error far below f64 resolution):
//! `erf(x)/x` as a function of `x^2` on [0, 1], and the scaled complement
//! `erfcx` on [1, 6]. Beyond 6 the complement comes from a Laplace continued
//! fraction, which also serves the far-tail gain evaluation where `erfc`
//! itself underflows.

/// Chebyshev coefficients of `erf(x)/x` in `t = 2 x^2 - 1`, `x^2` in [0, 1].
const ERF_SMALL_CHEB: [f64; 16] = [
    0.9754769393826540960,
    -0.1422612051037136424,
    0.01003558218759979558,
    -0.0005768764699767484765,
    0.00002741993125219606103,
    -1.104317550734450760e-6,
    3.848875542034503695e-8,
    -1.180858253387546697e-9,
    3.233421582605090965e-11,
    -7.991015947004548758e-13,
    1.799072511396145561e-14,
    -3.718635487818692638e-16,
    7.103599003714252971e-18,
    -1.261245511915522583e-19,
    2.091640694176929437e-21,
    -3.253973102931407298e-23,
];

/// Chebyshev coefficients of `erfcx(x) = e^{x^2} erfc(x)` in
/// `t = (2x - 7)/5`, `x` in [1, 6].
const ERFCX_MID_CHEB: [f64; 31] = [
    0.2019659879122308185,
    -0.1478848355339870006,
    0.05188222158351388936,
    -0.01752570996486752621,
    0.005721802417478219478,
    -0.001810980302814299763,
    0.0005570714353927343884,
    -0.0001668947305252883370,
    0.00004878565911493746024,
    -0.00001393593285982248869,
    3.895514595190114897e-6,
    -1.066839233707002635e-6,
    2.865502572057316123e-7,
    -7.555861081756621877e-8,
    1.957586342968354087e-8,
    -4.987110132992564916e-9,
    1.250187123943118370e-9,
    -3.085885231287241792e-10,
    7.504484747602075292e-11,
    -1.799019306443205335e-11,
    4.253478301220880504e-12,
    -9.923156075376521258e-13,
    2.285294689027942792e-13,
    -5.197545128838963256e-14,
    1.167840264727379672e-14,
    -2.593300539647079034e-15,
    5.693144752523705651e-16,
    -1.236000895530070635e-16,
    2.654495291067210022e-17,
    -5.641103352342303661e-18,
    1.186535810887219476e-18,
];

/// Clenshaw evaluation of a Chebyshev series at `t` in [-1, 1].
fn cheb_eval(coeffs: &[f64], t: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coeffs[1..].iter().rev() {
        let b = 2.0 * t * b1 - b2 + c;
        b2 = b1;
        b1 = b;
    }
    t * b1 - b2 + coeffs[0]
}

/// The error function `erf(x) = 2/sqrt(pi) ∫_0^x e^{-t^2} dt`.
///
/// Accepts infinities (mapping to ±1); absolute error well below 1e-14 on
/// the whole real line.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    if ax <= 1.0 {
        return x * cheb_eval(&ERF_SMALL_CHEB, 2.0 * x * x - 1.0);
    }
    let tail = if ax < 6.0 {
        (-ax * ax).exp() * cheb_eval(&ERFCX_MID_CHEB, (2.0 * ax - 7.0) / 5.0)
    } else {
        // erfc(6) < 3e-17: indistinguishable from 0 at f64 resolution.
        0.0
    };
    if x > 0.0 {
        1.0 - tail
    } else {
        tail - 1.0
    }
}

/// The complementary error function `erfc(x) = 1 - erf(x)`, with full
/// relative accuracy kept in the right tail.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x <= 1.0 {
        return 1.0 - x * cheb_eval(&ERF_SMALL_CHEB, 2.0 * x * x - 1.0);
    }
    if x < 6.0 {
        return (-x * x).exp() * cheb_eval(&ERFCX_MID_CHEB, (2.0 * x - 7.0) / 5.0);
    }
    // exp underflows to 0 beyond x ~ 26.6, which is the true limit behavior.
    (-x * x).exp() * erfcx_cf(x)
}

/// Scaled complementary error function `erfcx(x) = e^{x^2} erfc(x)`.
///
/// For large `x` this stays O(1/x) while `erfc` underflows; the far-tail
/// gain evaluation relies on it.
pub fn erfcx(x: f64) -> f64 {
    if x >= 6.0 {
        return erfcx_cf(x);
    }
    if x > 1.0 {
        return cheb_eval(&ERFCX_MID_CHEB, (2.0 * x - 7.0) / 5.0);
    }
    // No overflow risk below 1.
    (x * x).exp() * erfc(x)
}

/// Laplace continued fraction for `erfcx`, evaluated by the modified Lentz
/// algorithm: `sqrt(pi) e^{x^2} erfc(x) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))`.
/// Rapidly convergent for `x >= 6`.
fn erfcx_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x.max(TINY);
    let mut c = f;
    let mut d = 0.0;
    let mut n = 0.5;
    for _ in 0..200 {
        d = x + n * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + n / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
        n += 0.5;
    }
    1.0 / (f * std::f64::consts::PI.sqrt())
}
