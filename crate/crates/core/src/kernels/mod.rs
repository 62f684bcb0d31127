//! Closed-form kernels of the linearised equation
//!
//! ```text
//! phi_t = phi_xx - c tanh(c x / 2) phi_x
//! ```
//!
//! The Green's function is two Gaussians moving with speeds `±c` plus an
//! error-function plateau of height `c/4` weighted by the adjoint
//! eigenfunction `psi(y) = sech^2(c y / 2)`:
//!
//! ```text
//! G(x,y,t) = K(x-y+ct, t)/(1+e^{cy}) + K(x-y-ct, t)/(1+e^{-cy}) + e(x-y, t) psi(y)
//! e(z,t)   = (c/4) [errfn((z+ct)/sqrt(4t)) - errfn((z-ct)/sqrt(4t))]
//! K(z,t)   = exp(-z^2/4t) / sqrt(4 pi t)
//! ```
//!
//! All kernels are pure functions of their arguments. Public entry points
//! validate `t > 0`; the `*_unchecked` variants are used in inner loops.

mod errfn;
mod logspace;

pub use errfn::{errfn, errfn_diff, errfn_prime};
pub use logspace::{ln_erfc, ln_errfn_diff, signed_log_sum};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wave speed `c > 0` of the advection term `c tanh(c x / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    c: f64,
}

impl ModelParams {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid(
                "c",
                format!("wave speed must be > 0, got {c}"),
            ));
        }
        Ok(ModelParams { c })
    }

    #[inline]
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Advection coefficient `c tanh(c x / 2)`.
    #[inline]
    pub fn advection(&self, x: f64) -> f64 {
        self.c * (0.5 * self.c * x).tanh()
    }

    /// `psi(y) = sech^2(c y / 2)`, evaluated as `4u/(1+u)^2` with `u = e^{-c|y|}`.
    #[inline]
    pub fn adjoint_eigenfunction(&self, y: f64) -> f64 {
        let u = (-self.c * y.abs()).exp();
        4.0 * u / ((1.0 + u) * (1.0 + u))
    }

    pub fn plateau(&self, x: f64, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.plateau_unchecked(x, t))
    }

    pub fn plateau_x(&self, x: f64, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.plateau_x_unchecked(x, t))
    }

    /// `c/4 - e(x,t)`, computed from the two error-function tails so that it
    /// keeps relative accuracy deep inside the plateau.
    pub fn plateau_deficit(&self, x: f64, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.plateau_deficit_unchecked(x, t))
    }

    pub fn greens(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.greens_unchecked(x, y, t))
    }

    pub fn greens_x(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.greens_x_unchecked(x, y, t))
    }

    pub fn greens_xx(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.greens_xx_unchecked(x, y, t))
    }

    /// `G~(x,y,t) = G(x,y,t) - e(x,t) psi(y)`.
    pub fn greens_tilde(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.greens_tilde_unchecked(x, y, t))
    }

    pub fn greens_tilde_x(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.greens_tilde_x_unchecked(x, y, t))
    }

    /// `B(x,t) = G(x,0,t+1)`.
    pub fn bfield(&self, x: f64, t: f64) -> Result<f64> {
        check_nonnegative_time(t)?;
        Ok(self.bfield_unchecked(x, t))
    }

    pub fn bfield_x(&self, x: f64, t: f64) -> Result<f64> {
        check_nonnegative_time(t)?;
        Ok(self.greens_x_unchecked(x, 0.0, t + 1.0))
    }

    /// `B_t`, from the linear equation: `B_t = B_xx - c tanh(cx/2) B_x`.
    pub fn bfield_t(&self, x: f64, t: f64) -> Result<f64> {
        check_nonnegative_time(t)?;
        Ok(self.bfield_t_unchecked(x, t))
    }

    /// `c/4 - B(x,t)` without cancellation inside the plateau.
    pub fn bfield_deficit(&self, x: f64, t: f64) -> Result<f64> {
        check_nonnegative_time(t)?;
        Ok(self.bfield_deficit_unchecked(x, t))
    }

    // ---- unchecked evaluations -------------------------------------------------

    #[inline]
    pub(crate) fn plateau_unchecked(&self, x: f64, t: f64) -> f64 {
        // even in x; evaluate on one side so the symmetry is exact
        let x = x.abs();
        let s = (4.0 * t).sqrt();
        let ct = self.c * t;
        0.25 * self.c * errfn_diff((x + ct) / s, (x - ct) / s)
    }

    #[inline]
    pub(crate) fn plateau_x_unchecked(&self, x: f64, t: f64) -> f64 {
        let ct = self.c * t;
        0.25 * self.c * (heat(x + ct, t) - heat(x - ct, t))
    }

    #[inline]
    pub(crate) fn plateau_xx_unchecked(&self, x: f64, t: f64) -> f64 {
        let ct = self.c * t;
        0.25 * self.c * (heat_z(x + ct, t) - heat_z(x - ct, t))
    }

    #[inline]
    pub(crate) fn plateau_deficit_unchecked(&self, x: f64, t: f64) -> f64 {
        let x = x.abs();
        let s = (4.0 * t).sqrt();
        let ct = self.c * t;
        0.25 * self.c * (errfn(-(x + ct) / s) + errfn((x - ct) / s))
    }

    #[inline]
    pub(crate) fn greens_unchecked(&self, x: f64, y: f64, t: f64) -> f64 {
        let ct = self.c * t;
        heat(x - y + ct, t) * logistic(-self.c * y)
            + heat(x - y - ct, t) * logistic(self.c * y)
            + self.plateau_unchecked(x - y, t) * self.adjoint_eigenfunction(y)
    }

    #[inline]
    pub(crate) fn greens_x_unchecked(&self, x: f64, y: f64, t: f64) -> f64 {
        let ct = self.c * t;
        heat_z(x - y + ct, t) * logistic(-self.c * y)
            + heat_z(x - y - ct, t) * logistic(self.c * y)
            + self.plateau_x_unchecked(x - y, t) * self.adjoint_eigenfunction(y)
    }

    #[inline]
    pub(crate) fn greens_xx_unchecked(&self, x: f64, y: f64, t: f64) -> f64 {
        let ct = self.c * t;
        heat_zz(x - y + ct, t) * logistic(-self.c * y)
            + heat_zz(x - y - ct, t) * logistic(self.c * y)
            + self.plateau_xx_unchecked(x - y, t) * self.adjoint_eigenfunction(y)
    }

    /// Four-term form: the plateau difference `e(x-y,t) - e(x,t)` is split into
    /// two error-function differences whose arguments differ by `y/sqrt(4t)`.
    #[inline]
    pub(crate) fn greens_tilde_unchecked(&self, x: f64, y: f64, t: f64) -> f64 {
        let s = (4.0 * t).sqrt();
        let ct = self.c * t;
        let plus = errfn_diff((y - x + ct) / s, (-x + ct) / s);
        let minus = errfn_diff((y - x - ct) / s, (-x - ct) / s);
        heat(x - y + ct, t) * logistic(-self.c * y)
            + heat(x - y - ct, t) * logistic(self.c * y)
            + 0.25 * self.c * (plus - minus) * self.adjoint_eigenfunction(y)
    }

    #[inline]
    pub(crate) fn greens_tilde_x_unchecked(&self, x: f64, y: f64, t: f64) -> f64 {
        let ct = self.c * t;
        let plateau = heat(x - y + ct, t) - heat(x - y - ct, t) - heat(x + ct, t) + heat(x - ct, t);
        heat_z(x - y + ct, t) * logistic(-self.c * y)
            + heat_z(x - y - ct, t) * logistic(self.c * y)
            + 0.25 * self.c * plateau * self.adjoint_eigenfunction(y)
    }

    #[inline]
    pub(crate) fn bfield_unchecked(&self, x: f64, t: f64) -> f64 {
        self.greens_unchecked(x, 0.0, t + 1.0)
    }

    #[inline]
    pub(crate) fn bfield_x_unchecked(&self, x: f64, t: f64) -> f64 {
        self.greens_x_unchecked(x, 0.0, t + 1.0)
    }

    #[inline]
    pub(crate) fn bfield_t_unchecked(&self, x: f64, t: f64) -> f64 {
        let tau = t + 1.0;
        self.greens_xx_unchecked(x, 0.0, tau)
            - self.advection(x) * self.greens_x_unchecked(x, 0.0, tau)
    }

    /// With `y = 0`, `G(x,0,tau) = e(x,tau) + (K(x+c tau) + K(x-c tau))/2`.
    #[inline]
    pub(crate) fn bfield_deficit_unchecked(&self, x: f64, t: f64) -> f64 {
        let tau = t + 1.0;
        let ct = self.c * tau;
        self.plateau_deficit_unchecked(x, tau) - 0.5 * (heat(x + ct, tau) + heat(x - ct, tau))
    }
}

#[inline]
fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveTime(t))
    }
}

#[inline]
fn check_nonnegative_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveTime(t))
    }
}

/// Heat kernel `exp(-z^2/4t)/sqrt(4 pi t)`.
#[inline]
pub fn heat(z: f64, t: f64) -> f64 {
    (-z * z / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

#[inline]
fn heat_z(z: f64, t: f64) -> f64 {
    -z / (2.0 * t) * heat(z, t)
}

#[inline]
fn heat_zz(z: f64, t: f64) -> f64 {
    (z * z / (4.0 * t * t) - 0.5 / t) * heat(z, t)
}

/// `1/(1+e^{-z})` without overflow.
#[inline]
fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(e^a + e^b)`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}
