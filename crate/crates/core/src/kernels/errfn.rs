//! The normalised error function `errfn(z) = (1/sqrt(pi)) * int_{-inf}^z exp(-s^2) ds`
//! and cancellation-safe differences of it.

use std::f64::consts::PI;

use crate::quadrature::rules::{G10_NODES, G10_WEIGHTS};

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Relative agreement below which `errfn(a) - errfn(b)` is integrated directly.
const NEAR_EQUAL_REL: f64 = 1e-3;

/// `exp(-s^2)` is below the smallest subnormal beyond this.
const UNDERFLOW_ARG: f64 = 27.3;

/// `errfn(z) = erfc(-z) / 2`, values in `(0, 1)`.
///
/// Both tails go through `erfc`, so `errfn(-z)` keeps full relative accuracy
/// for large `z` and `1 - errfn(z)` can be recovered as `errfn(-z)`.
#[inline]
pub fn errfn(z: f64) -> f64 {
    0.5 * libm::erfc(-z)
}

/// Derivative `errfn'(z) = exp(-z^2) / sqrt(pi)`.
#[inline]
pub fn errfn_prime(z: f64) -> f64 {
    FRAC_1_SQRT_PI * (-z * z).exp()
}

/// `errfn(a) - errfn(b)` without subtracting two near-equal values.
///
/// Same-sign arguments are differenced on the complementary side, where both
/// terms are small; arguments that agree to three significant digits are
/// handled by integrating `exp(-s^2)` over the short interval between them.
pub fn errfn_diff(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let scale = a.abs().max(b.abs());
    if (a - b).abs() <= NEAR_EQUAL_REL * scale {
        if a.signum() == b.signum() && a.abs().min(b.abs()) > UNDERFLOW_ARG {
            return 0.0;
        }
        return if b < a {
            short_interval(b, a)
        } else {
            -short_interval(a, b)
        };
    }
    if a >= 0.0 && b >= 0.0 {
        0.5 * (libm::erfc(b) - libm::erfc(a))
    } else if a <= 0.0 && b <= 0.0 {
        0.5 * (libm::erfc(-a) - libm::erfc(-b))
    } else {
        errfn(a) - errfn(b)
    }
}

/// `(1/sqrt(pi)) * int_lo^hi exp(-s^2) ds` by composite 10-point Gauss–Legendre,
/// with panels short enough that `exp(-s^2)` is resolved on each.
fn short_interval(lo: f64, hi: f64) -> f64 {
    let len = hi - lo;
    let scale = lo.abs().max(hi.abs()).max(1.0);
    let panels = ((len.abs() * scale / 0.5).ceil() as usize).clamp(1, 4096);
    let h = len / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let mid = lo + (k as f64 + 0.5) * h;
        let half = 0.5 * h;
        let mut panel = 0.0;
        for (node, w) in G10_NODES.iter().zip(G10_WEIGHTS.iter()) {
            let s1 = mid + half * node;
            let s2 = mid - half * node;
            panel += w * ((-s1 * s1).exp() + (-s2 * s2).exp());
        }
        total += panel * half;
    }
    total / PI.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson on [0, z] with a fine fixed step, independent of libm.
    fn simpson_oracle(z: f64) -> f64 {
        let n = 200_000;
        let h = z / n as f64;
        let f = |s: f64| (-s * s).exp();
        let mut sum = f(0.0) + f(z);
        for i in 1..n {
            let s = i as f64 * h;
            sum += if i % 2 == 1 { 4.0 * f(s) } else { 2.0 * f(s) };
        }
        0.5 + sum * h / 3.0 / PI.sqrt()
    }

    #[test]
    fn errfn_at_zero_is_half() {
        assert_eq!(errfn(0.0), 0.5);
    }

    #[test]
    fn errfn_at_two_matches_quadrature_oracle() {
        let oracle = simpson_oracle(2.0);
        assert!((oracle - 0.997_661_13).abs() < 1e-8, "oracle {oracle}");
        assert!((errfn(2.0) - oracle).abs() < 1e-12);
    }

    #[test]
    fn reflection_identity() {
        for &z in &[-40.0, -7.5, -1.0, -1e-3, 0.3, 2.0, 6.5, 38.0] {
            assert!((errfn(z) + errfn(-z) - 1.0).abs() < 1e-15, "z = {z}");
        }
    }

    #[test]
    fn far_left_tail_keeps_relative_accuracy() {
        // erfc(x) ~ exp(-x^2)/(x sqrt(pi)) (1 - 1/(2x^2) + 3/(4x^4))
        let x: f64 = 25.0;
        let asym = (-x * x).exp() / (x * PI.sqrt())
            * (1.0 - 1.0 / (2.0 * x * x) + 3.0 / (4.0 * x.powi(4)) - 15.0 / (8.0 * x.powi(6)));
        let rel = (errfn(-x) - 0.5 * asym).abs() / (0.5 * asym);
        assert!(rel < 1e-9, "rel = {rel}");
    }

    #[test]
    fn diff_near_equal_large_arguments() {
        // errfn(a) - errfn(b) with a, b ~ 10 and |a - b| = 1e-4.
        let (a, b) = (10.0001_f64, 10.0_f64);
        let got = errfn_diff(a, b);
        // exp(-s^2) is nearly exponential over the interval: integrate exp(-b^2 - 2 b u - u^2).
        let n = 100_000;
        let h = (a - b) / n as f64;
        let mut sum = 0.0;
        for i in 0..n {
            let s = b + (i as f64 + 0.5) * h;
            sum += (-s * s).exp();
        }
        let oracle = sum * h / PI.sqrt();
        assert!(((got - oracle) / oracle).abs() < 1e-9, "{got} vs {oracle}");
    }

    #[test]
    fn diff_same_sign_tails() {
        let got = errfn_diff(-9.0, -9.5);
        let direct = 0.5 * (libm::erfc(9.0) - libm::erfc(9.5));
        assert!(((got - direct) / direct).abs() < 1e-14);
        assert!(got > 0.0);
    }

    #[test]
    fn diff_antisymmetric() {
        for &(a, b) in &[(0.3, -0.2), (5.0, 5.001), (-3.0, 2.0), (12.0, 11.0)] {
            assert_eq!(errfn_diff(a, b), -errfn_diff(b, a));
        }
    }

    #[test]
    fn strictly_increasing_on_a_sweep() {
        // errfn rounds to 1 beyond z ~ 5.5
        let mut prev = errfn(-8.0);
        for i in 1..=1300 {
            let z = -8.0 + i as f64 * 0.01;
            let cur = errfn(z);
            assert!(cur > prev, "z = {z}");
            prev = cur;
        }
    }
}
