//! Logarithms of kernel magnitudes that stay finite where the kernels
//! themselves underflow. Used by the bound checks, whose ratios can exceed
//! the range of `f64`.

use std::f64::consts::PI;

use super::errfn::errfn_diff;
use super::ModelParams;
use crate::error::Result;

/// `ln erfc(z)`; asymptotic series once `erfc` underflows.
pub fn ln_erfc(z: f64) -> f64 {
    if z < 26.0 {
        return libm::erfc(z).ln();
    }
    let w = 1.0 / (z * z);
    let series = 1.0 - 0.5 * w + 0.75 * w * w - 1.875 * w * w * w + 6.5625 * w.powi(4);
    -z * z - (z * PI.sqrt()).ln() + series.ln()
}

/// Logarithm and sign of `errfn(a) - errfn(b)`.
pub fn ln_errfn_diff(a: f64, b: f64) -> (f64, f64) {
    if a == b {
        return (0.0, f64::NEG_INFINITY);
    }
    let d = errfn_diff(a, b);
    if d.abs() > 1e-280 {
        return (d.signum(), d.abs().ln());
    }
    let sign = if a > b { 1.0 } else { -1.0 };
    // Same side, far tail: 1/2 |erfc(u) - erfc(w)| with u < w on the far side.
    let (u, w) = if a > 0.0 && b > 0.0 {
        (a.min(b), a.max(b))
    } else {
        (-a.max(b), -a.min(b))
    };
    let lu = ln_erfc(u);
    let lw = ln_erfc(w);
    (sign, 0.5f64.ln() + lu + (-(lw - lu).exp_m1()).ln())
}

/// `ln |sum_i s_i e^{l_i}|` for signed log-magnitudes `(s_i, l_i)`.
pub fn signed_log_sum(terms: &[(f64, f64)]) -> f64 {
    let m = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let sum: f64 = terms.iter().map(|&(s, l)| s * (l - m).exp()).sum();
    if sum == 0.0 {
        f64::NEG_INFINITY
    } else {
        m + sum.abs().ln()
    }
}

#[inline]
fn ln_heat(z: f64, t: f64) -> f64 {
    -z * z / (4.0 * t) - 0.5 * (4.0 * PI * t).ln()
}

/// `ln(1/(1+e^{-z}))`.
#[inline]
fn ln_logistic(z: f64) -> f64 {
    -((-z).max(0.0) + (-z.abs()).exp().ln_1p())
}

impl ModelParams {
    /// `ln psi(y)`.
    pub fn ln_adjoint_eigenfunction(&self, y: f64) -> f64 {
        let a = self.c() * y.abs();
        4f64.ln() - a - 2.0 * (-a).exp().ln_1p()
    }

    /// `ln |G~(x,y,t)|` from the same four-term form as `greens_tilde`.
    pub fn greens_tilde_ln_abs(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        let direct = self.greens_tilde(x, y, t)?;
        if direct.abs() > 1e-280 {
            return Ok(direct.abs().ln());
        }
        let c = self.c();
        let s = (4.0 * t).sqrt();
        let ct = c * t;
        let (sp, lp) = ln_errfn_diff((y - x + ct) / s, (-x + ct) / s);
        let (sm, lm) = ln_errfn_diff((y - x - ct) / s, (-x - ct) / s);
        let base = (0.25 * c).ln() + self.ln_adjoint_eigenfunction(y);
        let terms = [
            (1.0, ln_heat(x - y + ct, t) + ln_logistic(-c * y)),
            (1.0, ln_heat(x - y - ct, t) + ln_logistic(c * y)),
            (sp, base + lp),
            (-sm, base + lm),
        ];
        Ok(signed_log_sum(&terms))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_erfc_series_matches_libm_past_the_switch() {
        // erfc is still a normal double up to z ~ 26.5
        for &z in &[25.5_f64, 26.0, 26.3] {
            assert!((ln_erfc(z) - libm::erfc(z).ln()).abs() < 1e-10, "z = {z}");
        }
    }

    #[test]
    fn ln_erfc_far_tail_matches_continued_fraction() {
        // erfc(z) = e^{-z^2}/sqrt(pi) * 1/(z + 1/2/(z + 1/(z + 3/2/(z + ...))))
        let z: f64 = 40.0;
        let mut cf = z;
        for k in (1..60).rev() {
            cf = z + 0.5 * k as f64 / cf;
        }
        let oracle = -z * z - PI.sqrt().ln() - cf.ln();
        assert!((ln_erfc(z) - oracle).abs() < 1e-12);
    }

    #[test]
    fn ln_errfn_diff_agrees_where_representable() {
        for &(a, b) in &[(0.3, -1.0), (3.0, 2.0), (-4.0, -5.5), (9.0, 9.5)] {
            let (s, l) = ln_errfn_diff(a, b);
            let d = errfn_diff(a, b);
            assert_eq!(s, d.signum());
            assert!((l - d.abs().ln()).abs() < 1e-12);
        }
        let (s, l) = ln_errfn_diff(-40.0, -41.0);
        assert_eq!(s, 1.0);
        assert!((l - (0.5f64.ln() + ln_erfc(40.0))).abs() < 1e-12);
    }

    #[test]
    fn signed_sum_handles_cancellation_and_empty() {
        assert_eq!(signed_log_sum(&[]), f64::NEG_INFINITY);
        let l = signed_log_sum(&[(1.0, -1000.0), (-1.0, -1001.0)]);
        assert!((l - (-1000.0 + (1.0 - (-1.0f64).exp()).ln())).abs() < 1e-12);
    }

    #[test]
    fn greens_tilde_log_matches_direct_value() {
        let p = ModelParams::new(1.0).unwrap();
        for &(x, y, t) in &[(1.0, 2.0, 3.0), (-4.0, 1.0, 0.5), (10.0, -3.0, 2.0)] {
            let g = p.greens_tilde(x, y, t).unwrap().abs().ln();
            assert!((p.greens_tilde_ln_abs(x, y, t).unwrap() - g).abs() < 1e-12);
        }
        assert!(
            (p.ln_adjoint_eigenfunction(3.0) - p.adjoint_eigenfunction(3.0).ln()).abs() < 1e-14
        );
    }

    #[test]
    fn greens_tilde_log_beyond_underflow() {
        // The subtracted plateau e(x,t) psi(y) dominates; its size is
        // (c/4) psi(y) erfc((20 - 0.1)/sqrt(0.4)) / 2.
        let p = ModelParams::new(1.0).unwrap();
        let l = p.greens_tilde_ln_abs(-20.0, 20.0, 0.1).unwrap();
        let expected = 0.25f64.ln()
            + p.ln_adjoint_eigenfunction(20.0)
            + 0.5f64.ln()
            + ln_erfc(19.9 / 0.4f64.sqrt());
        assert!((l - expected).abs() < 1e-6, "{l} vs {expected}");
    }
}
