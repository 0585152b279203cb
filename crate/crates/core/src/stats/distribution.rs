use statrs::function::beta::beta_reg;
use libm::erfc;

use crate::error::{domain, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Φ(z) without input checks.
#[inline]
pub(crate) fn phi(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// 1 − Φ(z) without input checks; keeps relative precision deep in the upper tail.
#[inline]
pub(crate) fn phi_upper(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(domain(format!("normal_cdf: non-finite argument {z}")));
    }
    Ok(phi(z))
}

/// Standard normal survival function `1 − Φ(z)`.
pub fn normal_sf(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(domain(format!("normal_sf: non-finite argument {z}")));
    }
    Ok(phi_upper(z))
}

/// Inverse of the standard normal CDF.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("normal_quantile: p = {p} outside (0, 1)")));
    }
    Ok(if p <= 0.5 {
        lower_tail_quantile(p)
    } else {
        -lower_tail_quantile(1.0 - p)
    })
}

/// `Φ⁻¹(1 − q)` computed from `q` directly, so tiny tail levels such as
/// `α / M` keep full precision.
pub fn normal_upper_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(domain(format!("normal_upper_quantile: q = {q} outside (0, 1)")));
    }
    Ok(if q <= 0.5 {
        -lower_tail_quantile(q)
    } else {
        lower_tail_quantile(1.0 - q)
    })
}

// Acklam's rational approximation (relative error ~1e-9) followed by two
// Halley steps against the erfc-based CDF.
fn lower_tail_quantile(q: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_690e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let mut x = if q < P_LOW {
        let t = (-2.0 * q.ln()).sqrt();
        (((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    } else {
        let r = q - 0.5;
        let s = r * r;
        (((((A[0] * s + A[1]) * s + A[2]) * s + A[3]) * s + A[4]) * s + A[5]) * r
            / (((((B[0] * s + B[1]) * s + B[2]) * s + B[3]) * s + B[4]) * s + 1.0)
    };
    for _ in 0..2 {
        let e = phi(x) - q;
        let u = e * SQRT_2PI * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

fn check_f_args(x: f64, d1: u32, d2: u32) -> Result<()> {
    if d1 == 0 || d2 == 0 {
        return Err(domain(format!(
            "F distribution: degrees of freedom must be positive, got ({d1}, {d2})"
        )));
    }
    if x.is_nan() || x < 0.0 {
        return Err(domain(format!("F distribution: argument {x} must be >= 0")));
    }
    Ok(())
}

/// CDF of the Fisher F(d1, d2) distribution.
pub fn f_cdf(x: f64, d1: u32, d2: u32) -> Result<f64> {
    check_f_args(x, d1, d2)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let (a, b) = (f64::from(d1), f64::from(d2));
    Ok(beta_reg(a / 2.0, b / 2.0, a * x / (a * x + b)))
}

/// Upper tail `1 − F(x; d1, d2)`, evaluated through the complementary beta
/// so small p-values are not lost to cancellation.
pub fn f_sf(x: f64, d1: u32, d2: u32) -> Result<f64> {
    check_f_args(x, d1, d2)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let (a, b) = (f64::from(d1), f64::from(d2));
    Ok(beta_reg(b / 2.0, a / 2.0, b / (b + a * x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_at_zero_is_half() {
        assert_eq!(normal_cdf(0.0).unwrap(), 0.5);
    }

    #[test]
    fn cdf_rejects_non_finite() {
        assert!(normal_cdf(f64::NAN).is_err());
        assert!(normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn example_critical_value_level() {
        // 1 - 0.05/64
        let c = normal_upper_quantile(0.05 / 64.0).unwrap();
        assert!((c - 3.16).abs() < 0.005, "{c}");
        assert!((normal_cdf(3.16).unwrap() - (1.0 - 0.05 / 64.0)).abs() < 2e-5);
    }

    #[test]
    fn quantile_rejects_boundary() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(normal_quantile(p).is_err());
            assert!(normal_upper_quantile(p).is_err());
        }
    }

    #[test]
    fn quantile_of_half_is_zero() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
    }

    #[test]
    fn upper_quantile_matches_quantile() {
        for q in [1e-12, 1e-6, 0.01, 0.2, 0.5, 0.7, 0.99] {
            let a = normal_upper_quantile(q).unwrap();
            let b = normal_quantile(1.0 - q).unwrap();
            assert!((a - b).abs() < 1e-6 * (1.0 + a.abs()), "{q}: {a} vs {b}");
        }
    }

    #[test]
    fn tail_survival_is_relative_accurate() {
        // 1 - Φ(10) = 7.6198530241605e-24
        let s = normal_sf(10.0).unwrap();
        assert!((s / 7.619_853_024_160_5e-24 - 1.0).abs() < 1e-10, "{s}");
    }

    #[test]
    fn f_support_and_errors() {
        assert_eq!(f_cdf(0.0, 2, 27).unwrap(), 0.0);
        assert_eq!(f_sf(0.0, 2, 27).unwrap(), 1.0);
        assert!(f_cdf(-1.0, 2, 27).is_err());
        assert!(f_cdf(1.0, 0, 27).is_err());
        assert!(f_cdf(1.0, 2, 0).is_err());
    }

    #[test]
    fn f_two_numerator_df_closed_form() {
        // With d1 = 2 the CDF is 1 - (1 + 2x/d2)^(-d2/2).
        for x in [0.1, 1.0, 3.354, 10.0] {
            let want = 1.0 - (1.0 + 2.0 * x / 27.0_f64).powf(-13.5);
            assert!((f_cdf(x, 2, 27).unwrap() - want).abs() < 1e-13);
            assert!((f_sf(x, 2, 27).unwrap() - (1.0 - want)).abs() < 1e-13);
        }
    }
}
