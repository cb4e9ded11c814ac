//! Scalar special functions: the gamma function with its first two
//! derivatives, digamma/trigamma, weighted moments of the standard
//! maximum-extreme-value distribution, and chi-square tail probabilities and
//! quantiles.
//!
//! Everything here is real-valued and double-precision. Γ′ and Γ″ are
//! assembled from the identities Γ′ = Γψ and Γ″ = Γ(ψ² + ψ′) rather than
//! differentiated numerically.

use crate::error::{Error, Result};

/// Euler–Mascheroni constant γ.
pub const EULER: f64 = 0.577_215_664_901_532_9;

/// Second derivative of the gamma function at 2, Γ″(2) = (1-γ)² + π²/6 − 1.
/// The factor (1 + Γ″(2)) scales the dispersion block of the expected
/// information.
pub const GAMMA_D2_AT_2: f64 = 0.823_680_660_852_879_4;

// Lanczos approximation, g = 10.900511, 11 terms (Pugh's optimal set; the
// same table is used by several numerics libraries). Relative error is a few
// ulps over the positive axis.
const LANCZOS_R: f64 = 10.900511;
const LANCZOS_DK: [f64; 11] = [
    2.4857408913875355e-5,
    1.0514237858172197,
    -3.4568709722201625,
    4.512277094668948,
    -2.9828522532357664,
    1.056397115771267,
    -1.9542877319164587e-1,
    1.709705434044412e-2,
    -5.719261174043057e-4,
    4.633994733599057e-6,
    -2.7199490848860772e-9,
];
const LN_PI: f64 = 1.1447298858494002;
const LN_2_SQRT_E_OVER_PI: f64 = 0.6207822376352452;

/// ln Γ(x) for x > 0. Returns NaN outside the domain.
pub fn ln_gamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x < 0.5 {
        // Reflection: ln Γ(x) = ln(π / sin(πx)) − ln Γ(1 − x).
        let s = LANCZOS_DK
            .iter()
            .enumerate()
            .skip(1)
            .fold(LANCZOS_DK[0], |s, (k, dk)| s + dk / (k as f64 - x));
        LN_PI
            - (std::f64::consts::PI * x).sin().ln()
            - s.ln()
            - LN_2_SQRT_E_OVER_PI
            - (0.5 - x) * ((0.5 - x + LANCZOS_R) / std::f64::consts::E).ln()
    } else {
        let s = LANCZOS_DK
            .iter()
            .enumerate()
            .skip(1)
            .fold(LANCZOS_DK[0], |s, (k, dk)| s + dk / (x + k as f64 - 1.0));
        s.ln() + LN_2_SQRT_E_OVER_PI + (x - 0.5) * ((x - 0.5 + LANCZOS_R) / std::f64::consts::E).ln()
    }
}

/// Γ(x) for x > 0.
pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

/// ψ(x) = d ln Γ(x) / dx for x > 0; recurrence shift to x ≥ 12, then the
/// asymptotic series in 1/x².
pub fn digamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let mut result = 0.0;
    let mut x = x;
    while x < 12.0 {
        result -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // ln x − 1/(2x) − Σ B_{2k} / (2k x^{2k}) through k = 6.
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))));
    result + x.ln() - 0.5 * inv - tail
}

/// ψ′(x) for x > 0; recurrence ψ′(x) = ψ′(x+1) + 1/x², asymptotic tail.
pub fn trigamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let mut result = 0.0;
    let mut x = x;
    while x < 12.0 {
        result += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/x + 1/(2x²) + Σ B_{2k} / x^{2k+1} through k = 6.
    let tail = inv
        * inv2
        * (1.0 / 6.0
            - inv2
                * (1.0 / 30.0
                    - inv2
                        * (1.0 / 42.0
                            - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0 - inv2 * (691.0 / 2730.0))))));
    result + inv + 0.5 * inv2 + tail
}

/// Γ(x) together with its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaDerivs {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// (Γ(x), Γ′(x), Γ″(x)) for x > 0. NaN components outside the domain.
pub fn gamma_derivs(x: f64) -> GammaDerivs {
    let g = gamma(x);
    let psi = digamma(x);
    let psi1 = trigamma(x);
    GammaDerivs {
        value: g,
        d1: g * psi,
        d2: g * (psi * psi + psi1),
    }
}

/// E(zⁿ e^{−cz}) for z standard maximum-extreme-value, which equals
/// (−1)ⁿ Γ⁽ⁿ⁾(1 + c). Defined for n ∈ {0, 1, 2} and 1 + c > 0.
pub fn gumbel_weighted_moment(n: u32, c: f64) -> Result<f64> {
    if n > 2 {
        return Err(Error::InvalidArgument(format!(
            "gumbel_weighted_moment supports n in 0..=2, got {n}"
        )));
    }
    if !(1.0 + c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gumbel_weighted_moment requires 1 + c > 0, got c = {c}"
        )));
    }
    let d = gamma_derivs(1.0 + c);
    Ok(match n {
        0 => d.value,
        1 => -d.d1,
        _ => d.d2,
    })
}

/// Survival function of a chi-square variable with `df` degrees of freedom:
/// P(X > x). Total in x: non-positive x yields 1.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    debug_assert!(df > 0.0, "chi2_sf needs df > 0");
    if x <= 0.0 {
        return 1.0;
    }
    reg_gamma_upper(0.5 * df, 0.5 * x)
}

/// Regularized upper incomplete gamma Q(a, x) = Γ(a, x)/Γ(a) for a > 0,
/// x ≥ 0; series for P below the crossover, Lentz continued fraction above.
fn reg_gamma_upper(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let ax = a * x.ln() - x - ln_gamma(a);
    if ax < -700.0 {
        return if x > a { 0.0 } else { 1.0 };
    }
    let prefactor = ax.exp();
    if x < a + 1.0 {
        // P(a,x) = prefactor * Σ_{k≥0} x^k / (a (a+1) ... (a+k)).
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut k = 1.0;
        while term.abs() > sum.abs() * 1e-17 && k < 10_000.0 {
            term *= x / (a + k);
            sum += term;
            k += 1.0;
        }
        1.0 - prefactor * sum
    } else {
        // Q(a,x) = prefactor * 1 / (x+1-a - 1(1-a)/(x+3-a - 2(2-a)/...)).
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        prefactor * h
    }
}

/// q with P(X ≤ q) = p for X chi-square with `df` degrees of freedom;
/// bracketing bisection on [`chi2_sf`], robust and cheap at the call rates
/// used here.
pub fn chi2_quantile(p: f64, df: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "chi2_quantile requires 0 < p < 1, got {p}"
        )));
    }
    if !(df > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "chi2_quantile requires df > 0, got {df}"
        )));
    }
    let sf_target = 1.0 - p;
    let mut hi = df.max(1.0);
    while chi2_sf(hi, df) > sf_target {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::InvalidArgument(format!(
                "chi2_quantile({p}, {df}) out of range"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_sf(mid, df) > sf_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
