//! Standard-normal functions and the half-line Gaussian moment family
//! `M_d(alpha) = (2 pi)^(-1/2) * integral_0^inf u^d exp(-(u - alpha)^2 / 2) du`.
//!
//! `M_d` obeys `M_0 = Phi`, `M_1 = alpha Phi + phi`,
//! `M_k = alpha M_{k-1} + (k - 1) M_{k-2}` and `M_d' = d M_{d-1}`.
//! The forward recursion is stable for `alpha` above [`BACKWARD_THRESHOLD`];
//! below it `M_d` is the minimal solution of the recurrence and the ratios
//! `M_k / M_{k-1}` are obtained by running it backwards instead.

use crate::error::{Error, Result};
use crate::quadrature::integrate_adaptive;
use crate::scalar::Real;

/// Below this `alpha` the forward recurrence loses digits; ratios are
/// computed backwards.
pub const BACKWARD_THRESHOLD: f64 = -2.0;

/// Below `-MILLS_SWITCH` the lower normal tail uses a continued fraction.
const MILLS_SWITCH: f64 = 6.0;

/// Depth of the Mills-ratio continued fraction. At `t >= 6` fifty terms are
/// well past double-precision convergence.
const MILLS_DEPTH: usize = 50;

/// Extra orders the backward recurrence starts above the requested one.
const BACKWARD_EXTRA: usize = 60;

/// Standard normal density.
#[inline]
pub fn std_normal_pdf<T: Real>(x: T) -> T {
    (-(x * x) / T::lit(2.0)).exp() / T::TAU().sqrt()
}

/// `log` of the standard normal density.
#[inline]
pub fn log_std_normal_pdf<T: Real>(x: T) -> T {
    -(x * x) / T::lit(2.0) - T::lit(0.5) * T::TAU().ln()
}

/// Standard normal CDF, `Phi(x) = erfc(-x / sqrt 2) / 2`.
#[inline]
pub fn std_normal_cdf<T: Real>(x: T) -> T {
    T::lit(0.5) * (-x / T::SQRT_2()).erfc()
}

/// Mills ratio `R(t) = (1 - Phi(t)) / phi(t)` for `t >= MILLS_SWITCH`, by the
/// continued fraction `1 / (t + 1 / (t + 2 / (t + 3 / ...)))`.
fn mills_ratio_upper<T: Real>(t: T) -> T {
    let mut f = t;
    for k in (1..=MILLS_DEPTH).rev() {
        f = t + T::from_usize_lossy(k) / f;
    }
    f.recip()
}

/// `log Phi(x)`, finite for every finite `x` (no underflow in the left tail).
pub fn log_std_normal_cdf<T: Real>(x: T) -> T {
    let switch = T::lit(MILLS_SWITCH);
    if x < -switch {
        log_std_normal_pdf(x) + mills_ratio_upper(-x).ln()
    } else if x > T::zero() {
        // 1 - Phi(x) is small here; ln_1p keeps the digits.
        (-std_normal_cdf(-x)).ln_1p()
    } else {
        std_normal_cdf(x).ln()
    }
}

/// Inverse Mills ratio `phi(x) / Phi(x)`, stable in the left tail where both
/// numerator and denominator underflow.
pub fn inv_mills<T: Real>(x: T) -> T {
    if x < -T::lit(MILLS_SWITCH) {
        mills_ratio_upper(-x).recip()
    } else {
        std_normal_pdf(x) / std_normal_cdf(x)
    }
}

/// `M_d(alpha)` by the three-term recurrence.
///
/// Fails with [`Error::Overflow`] when the value is not representable.
pub fn m_function<T: Real>(d: usize, alpha: T) -> Result<T> {
    let phi_cdf = std_normal_cdf(alpha);
    if d == 0 {
        return Ok(phi_cdf);
    }
    let value = if alpha >= T::lit(BACKWARD_THRESHOLD) {
        let mut prev = phi_cdf;
        let mut cur = alpha * phi_cdf + std_normal_pdf(alpha);
        for k in 2..=d {
            let next = alpha * cur + T::from_usize_lossy(k - 1) * prev;
            prev = cur;
            cur = next;
            if !cur.is_finite() {
                return Err(overflow(k, alpha));
            }
        }
        cur
    } else {
        ratios(d, alpha)
            .into_iter()
            .fold(phi_cdf, |acc, r| acc * r)
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(overflow(d, alpha))
    }
}

/// `log M_d(alpha)`, finite wherever `m_function` would under- or overflow.
pub fn log_m_function<T: Real>(d: usize, alpha: T) -> T {
    let base = log_std_normal_cdf(alpha);
    if d == 0 {
        return base;
    }
    ratios(d, alpha)
        .into_iter()
        .fold(base, |acc, r| acc + r.ln())
}

/// `M_{d-1}'(alpha) / M_{d-1}(alpha)`: equal to `phi / Phi` for `d = 1` and
/// `(d - 1) M_{d-2} / M_{d-1}` for `d >= 2`.
///
/// This is the constant factor in the angular-Gaussian score.
pub fn m_ratio<T: Real>(d: usize, alpha: T) -> Result<T> {
    match d {
        0 => Err(crate::error::invalid("d", "m_ratio requires d >= 1")),
        1 => Ok(inv_mills(alpha)),
        _ => {
            let r = ratios(d - 1, alpha);
            Ok(T::from_usize_lossy(d - 1) / r[d - 2])
        }
    }
}

/// Successive ratios `r_k = M_k / M_{k-1}` for `k = 1..=d`.
fn ratios<T: Real>(d: usize, alpha: T) -> Vec<T> {
    let mut out = vec![T::zero(); d];
    if d == 0 {
        return out;
    }
    if alpha >= T::lit(BACKWARD_THRESHOLD) {
        // r_1 = alpha + phi/Phi, r_k = alpha + (k - 1) / r_{k-1}
        let mut r = alpha + inv_mills(alpha);
        out[0] = r;
        for k in 2..=d {
            r = alpha + T::from_usize_lossy(k - 1) / r;
            out[k - 1] = r;
        }
    } else {
        // r_{k-1} = (k - 1) / (r_k - alpha), seeded at the fixed point of the
        // forward map so the start error is already small.
        let top = d + BACKWARD_EXTRA;
        let kf = T::from_usize_lossy(top - 1);
        let mut r = (alpha + (alpha * alpha + T::lit(4.0) * kf).sqrt()) / T::lit(2.0);
        for k in (2..=top).rev() {
            if k <= d {
                out[k - 1] = r;
            }
            r = T::from_usize_lossy(k - 1) / (r - alpha);
        }
        out[0] = r;
    }
    out
}

fn overflow<T: Real>(order: usize, alpha: T) -> Error {
    Error::Overflow {
        order,
        alpha: alpha.to_f64().unwrap_or(f64::NAN),
    }
}

/// `M_d(alpha)` by adaptive Gauss-Kronrod quadrature of its defining
/// integral over `[0, max(alpha, 0) + 40]`. Independent of the recurrence.
pub fn m_function_quadrature<T: Real>(d: usize, alpha: T, rel_tol: T) -> Result<T> {
    if !(rel_tol > T::lit(1e-14) && rel_tol < T::lit(1e-2)) {
        return Err(crate::error::invalid(
            "rel_tol",
            format!("{rel_tol} not in (1e-14, 1e-2)"),
        ));
    }
    let upper = alpha.max(T::zero()) + T::lit(40.0);
    let norm = T::TAU().sqrt().recip();
    let integrand = |u: T| {
        let du = u - alpha;
        u.powi(d as i32) * (-(du * du) / T::lit(2.0)).exp()
    };
    let est = integrate_adaptive(integrand, T::zero(), upper, rel_tol, 4000)?;
    Ok(est * norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn pdf_values() {
        assert!(close(std_normal_pdf(0.0), 0.398_942_280_401_432_7, 1e-15));
        assert!(close(std_normal_pdf(1.0), 0.241_970_724_519_143_37, 1e-15));
        assert_eq!(std_normal_pdf(2.5_f64), std_normal_pdf(-2.5_f64));
    }

    #[test]
    fn cdf_values() {
        assert_eq!(std_normal_cdf(0.0_f64), 0.5);
        // erf(1/sqrt 2) = 0.682689492137085897...
        assert!(close(std_normal_cdf(1.0), 0.841_344_746_068_542_9, 1e-15));
        assert!(close(std_normal_cdf(-1.0), 0.158_655_253_931_457_05, 1e-15));
    }

    #[test]
    fn log_cdf_is_continuous_at_switch() {
        let below: f64 = log_std_normal_cdf(-6.0 - 1e-9);
        let above: f64 = log_std_normal_cdf(-6.0 + 1e-9);
        assert!((below - above).abs() < 1e-7);
        let direct = std_normal_cdf(-6.0_f64 - 1e-9).ln();
        assert!((below - direct).abs() < 1e-12);
    }

    #[test]
    fn log_cdf_far_tail_is_finite() {
        // log Phi(-40) ~ -800 - log(40 sqrt(2 pi))
        let v: f64 = log_std_normal_cdf(-40.0);
        let asymptotic = -800.0 - (40.0 * std::f64::consts::TAU.sqrt()).ln();
        assert!(v.is_finite());
        assert!((v - asymptotic).abs() < 1e-3);
        assert!(inv_mills(-40.0_f64) > 40.0 && inv_mills(-40.0_f64) < 40.03);
    }

    #[test]
    fn m_function_examples() {
        assert!(close(m_function(0, 0.0).unwrap(), 0.5, 1e-15));
        assert!(close(m_function(1, 0.0).unwrap(), 0.398_942_280_401_432_7, 1e-15));
        // M_2(1) = 1 * M_1(1) + 1 * M_0(1)
        assert!(close(m_function(2, 1.0).unwrap(), 1.924_660_2, 1e-6));
    }

    #[test]
    fn m_ratio_examples() {
        let sqrt_half_pi = (std::f64::consts::PI / 2.0).sqrt();
        assert!(close(m_ratio(2, 0.0).unwrap(), sqrt_half_pi, 1e-14));
        assert!(close(m_ratio(1, 0.0).unwrap(), 0.797_884_560_802_865_4, 1e-14));
        assert!(m_ratio::<f64>(0, 0.0).is_err());
    }

    #[test]
    fn m_ratio_finite_on_wide_range() {
        for d in 1..=6 {
            for i in -80..=80 {
                let alpha = i as f64 * 0.5;
                let r = m_ratio(d, alpha).unwrap();
                assert!(r.is_finite() && r >= 0.0, "d={d} alpha={alpha} r={r}");
            }
        }
    }

    #[test]
    fn overflow_is_signalled() {
        assert!(matches!(m_function(200, 1e6_f64), Err(Error::Overflow { .. })));
    }

    #[test]
    fn quadrature_rejects_bad_tolerance() {
        assert!(m_function_quadrature(1, 0.0, 0.5).is_err());
        assert!(m_function_quadrature(1, 0.0, 1e-16).is_err());
    }

    #[test]
    fn quadrature_examples() {
        let q0 = m_function_quadrature(0, 0.0, 1e-10).unwrap();
        assert!(close(q0, 0.5, 1e-10));
        let q1 = m_function_quadrature(1, 0.0, 1e-10).unwrap();
        assert!(close(q1, 0.398_942_3, 1e-7));
        let q: f64 = m_function_quadrature(5, 2.0, 1e-10).unwrap();
        let r = m_function(5, 2.0).unwrap();
        assert!(((q - r) / q).abs() < 1e-8);
    }

    #[test]
    fn derivative_identity() {
        for d in 1..=8 {
            for &alpha in &[-4.0, -1.5, 0.0, 0.7, 3.0] {
                let h = 1e-5;
                let fd = (m_function(d, alpha + h).unwrap() - m_function(d, alpha - h).unwrap())
                    / (2.0 * h);
                let exact = d as f64 * m_function(d - 1, alpha).unwrap();
                assert!(((fd - exact) / exact).abs() < 1e-6, "d={d} alpha={alpha}");
            }
        }
    }

    #[test]
    fn log_m_matches_m() {
        for d in 0..=10 {
            for i in -10..=10 {
                let alpha = i as f64 * 0.5;
                let a = log_m_function(d, alpha);
                let b = m_function(d, alpha).unwrap().ln();
                assert!((a - b).abs() < 1e-12, "d={d} alpha={alpha}");
            }
        }
    }

    #[test]
    fn single_precision_is_usable() {
        let v: f32 = m_function(3, 0.5_f32).unwrap();
        let w: f64 = m_function(3, 0.5_f64).unwrap();
        assert!(((v as f64 - w) / w).abs() < 1e-5);
    }
}
