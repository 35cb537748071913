//! Log-gamma based special functions.
//!
//! `log_beta` and `ln_beta_density` stay accurate when one or both shape
//! parameters are huge, which happens when a random-effects variance
//! shrinks towards zero.

use super::normal::LN_SQRT_2PI;
use crate::error::{check_finite, GrrrError, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Stirling remainder ln Γ(x) - [(x - 1/2) ln x - x + ln √(2π)], for x ≥ 10.
fn lgamma_correction(x: f64) -> f64 {
    let r = 1.0 / x;
    let r2 = r * r;
    let series = 1.0 / 12.0
        + r2 * (-1.0 / 360.0
            + r2 * (1.0 / 1260.0
                + r2 * (-1.0 / 1680.0
                    + r2 * (1.0 / 1188.0
                        + r2 * (-691.0 / 360_360.0
                            + r2 * (1.0 / 156.0 + r2 * (-3617.0 / 122_400.0)))))));
    series * r
}

/// ln B(a, b).
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    check_finite("a", a)?;
    check_finite("b", b)?;
    if a <= 0.0 || b <= 0.0 {
        return Err(GrrrError::Domain {
            name: if a <= 0.0 { "a" } else { "b" },
            value: if a <= 0.0 { a } else { b },
            domain: "(0, inf)",
        });
    }
    Ok(log_beta_unchecked(a, b))
}

pub(crate) fn log_beta_unchecked(a: f64, b: f64) -> f64 {
    let p = a.min(b);
    let q = a.max(b);
    let sum = p + q;
    if p >= 10.0 {
        let corr = lgamma_correction(p) + lgamma_correction(q) - lgamma_correction(sum);
        -0.5 * libm::log(q)
            + LN_SQRT_2PI
            + corr
            + (p - 0.5) * libm::log(p / sum)
            + q * libm::log1p(-p / sum)
    } else if q >= 10.0 {
        let corr = lgamma_correction(q) - lgamma_correction(sum);
        ln_gamma(p) + corr + p - p * libm::log(sum) + (q - 0.5) * libm::log1p(-p / sum)
    } else {
        ln_gamma(p) + ln_gamma(q) - ln_gamma(sum)
    }
}

/// ln Γ(n+1) - [(n + 1/2) ln n - n + ln √(2π)].
fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        return ln_gamma(n + 1.0) - (n + 0.5) * libm::log(n) + n - LN_SQRT_2PI;
    }
    let nn = n * n;
    if n > 500.0 {
        return (S0 - S1 / nn) / n;
    }
    if n > 80.0 {
        return (S0 - (S1 - S2 / nn) / nn) / n;
    }
    if n > 35.0 {
        return (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n;
    }
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
}

/// x ln(x / m) + m - x without cancellation when x ≈ m.
fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        return s;
    }
    x * libm::log(x / m) + m - x
}

/// Log of the saddle-point binomial density for real k in (0, n).
fn ln_binomial_density_raw(k: f64, n: f64, p: f64, q: f64) -> f64 {
    let lc = stirlerr(n) - stirlerr(k) - stirlerr(n - k) - bd0(k, n * p) - bd0(n - k, n * q);
    let lf = LN_2PI + libm::log(k) + libm::log1p(-k / n);
    lc - 0.5 * lf
}

/// ln of the Beta(a, b) density at x ∈ (0, 1); `one_minus_x` is passed
/// separately so callers can supply it without rounding loss.
pub fn ln_beta_density(x: f64, one_minus_x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 || one_minus_x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    // Fixed orientation: mirrored arguments give identical bits.
    let (x, one_minus_x, a, b) = if x > one_minus_x || (x == one_minus_x && a > b) {
        (one_minus_x, x, b, a)
    } else {
        (x, one_minus_x, a, b)
    };
    if a <= 2.0 || b <= 2.0 {
        return (a - 1.0) * libm::log(x) + (b - 1.0) * libm::log(one_minus_x)
            - log_beta_unchecked(a, b);
    }
    libm::log(a + b - 1.0) + ln_binomial_density_raw(a - 1.0, a + b - 2.0, x, one_minus_x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_beta_simple_values() {
        assert!(log_beta(1.0, 1.0).unwrap().abs() < 1e-15);
        assert!((log_beta(2.0, 2.0).unwrap() - (1.0f64 / 6.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn log_beta_against_high_precision_values() {
        let cases = [
            (50.5, 30.25, -53.952_986_745_691_73),
            (1e10, 0.5, -10.940_560_522_033_028),
            (1e-3, 2.5, 6.906_475_483_603_688),
            (1e6, 1e6, -1_386_300.003_362_921),
            (12.5, 1e4, -96.402_091_764_486_61),
        ];
        for (a, b, want) in cases {
            let got = log_beta(a, b).unwrap();
            let rel = ((got - want) / want).abs();
            assert!(rel < 1e-13, "B({a},{b}): {got} vs {want}, rel {rel:e}");
            assert_eq!(got, log_beta(b, a).unwrap());
        }
    }

    #[test]
    fn log_beta_rejects_nonpositive() {
        assert!(log_beta(0.0, 1.0).is_err());
        assert!(log_beta(1.0, -2.0).is_err());
        assert!(log_beta(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn beta_density_agrees_with_direct_formula() {
        for &(a, b) in &[(2.5, 3.0), (7.0, 40.0), (120.0, 80.0), (3.5, 2.2)] {
            for k in 1..20 {
                let x = k as f64 / 20.0;
                let direct = (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln()
                    - (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b));
                let got = ln_beta_density(x, 1.0 - x, a, b);
                assert!(
                    (got - direct).abs() < 1e-10 * direct.abs().max(1.0),
                    "{a},{b},{x}"
                );
            }
        }
    }

    #[test]
    fn beta_density_stays_finite_for_huge_shapes() {
        // mean 0.3, variance 1e-14 / 4: the density peaks near 1/sd
        let psi: f64 = 0.3;
        let var = 0.25e-14;
        let c = psi * (1.0 - psi) / var - 1.0;
        let (a, b) = (psi * c, (1.0 - psi) * c);
        let sd = var.sqrt();
        let at_mean = ln_beta_density(psi, 1.0 - psi, a, b);
        let expected = -(sd.ln()) - LN_SQRT_2PI;
        assert!((at_mean - expected).abs() < 1e-4, "{at_mean} vs {expected}");
    }
}
