//! Exact solutions through the Cole–Hopf substitution `phi~ = e^phi - 1`,
//! which maps the nonlinear equation to the linear one solved by `G`:
//!
//! ```text
//! phi(x,t) = log(1 + int G(x,y,t) (e^{phi0(y)} - 1) dy)
//! ```
//!
//! and the plateau family `phi*(x,t,p) = log(1 + p B(x,t))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::ModelParams;
use crate::quadrature::{integrate_line, QuadratureSpec, Window};

/// Initial data families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `a exp(-(x/w)^2)`.
    Gaussian {
        amplitude: f64,
        width: f64,
    },
    /// `a sech^2(x/w)`; exponentially rather than Gaussian localised.
    SechBump {
        amplitude: f64,
        width: f64,
    },
    Zero,
    Constant {
        k: f64,
    },
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InitialCondition::Gaussian { amplitude, width }
            | InitialCondition::SechBump { amplitude, width } => {
                if !amplitude.is_finite() {
                    return Err(Error::invalid(
                        "amplitude",
                        format!("must be finite, got {amplitude}"),
                    ));
                }
                if !(width.is_finite() && width > 0.0) {
                    return Err(Error::invalid("width", format!("must be > 0, got {width}")));
                }
            }
            InitialCondition::Constant { k } if !k.is_finite() => {
                return Err(Error::invalid("k", format!("must be finite, got {k}")));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            InitialCondition::Gaussian { amplitude, width } => {
                amplitude * (-(x / width).powi(2)).exp()
            }
            InitialCondition::SechBump { amplitude, width } => amplitude * sech2(x / width),
            InitialCondition::Zero => 0.0,
            InitialCondition::Constant { k } => k,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            InitialCondition::Gaussian { amplitude, width } => {
                let s = x / width;
                -2.0 * s / width * amplitude * (-s * s).exp()
            }
            InitialCondition::SechBump { amplitude, width } => {
                let s = x / width;
                -2.0 * amplitude / width * sech2(s) * s.tanh()
            }
            InitialCondition::Zero | InitialCondition::Constant { .. } => 0.0,
        }
    }

    pub fn sup_abs(&self) -> f64 {
        match *self {
            InitialCondition::Gaussian { amplitude, .. }
            | InitialCondition::SechBump { amplitude, .. } => amplitude.abs(),
            InitialCondition::Zero => 0.0,
            InitialCondition::Constant { k } => k.abs(),
        }
    }

    /// Same family with the amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            InitialCondition::Gaussian { amplitude, width } => InitialCondition::Gaussian {
                amplitude: amplitude * factor,
                width,
            },
            InitialCondition::SechBump { amplitude, width } => InitialCondition::SechBump {
                amplitude: amplitude * factor,
                width,
            },
            InitialCondition::Zero => InitialCondition::Zero,
            InitialCondition::Constant { k } => InitialCondition::Constant { k: k * factor },
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sup_abs() == 0.0
    }

    /// Window outside which `phi0` (and `e^phi0 - 1`) is below `e^-64` of its
    /// peak; `None` for data that is not localised.
    pub fn window(&self) -> Option<Window> {
        match *self {
            InitialCondition::Gaussian { width, .. } => Some(Window::new(0.0, width)),
            // sech^2(s) ~ 4 e^{-2|s|}: 8 sigmas of 4w reach e^{-64}.
            InitialCondition::SechBump { width, .. } => Some(Window::new(0.0, 4.0 * width)),
            InitialCondition::Zero | InitialCondition::Constant { .. } => None,
        }
    }

    /// `||e^{x^2/m} phi0||_{C^1}` (sup of the function plus sup of its
    /// derivative). Finite only for zero data and Gaussians with `w^2 < m`.
    pub fn localization_norm(&self, m: f64) -> Result<f64> {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::invalid("m", format!("must be > 0, got {m}")));
        }
        match *self {
            InitialCondition::Zero => Ok(0.0),
            InitialCondition::Constant { k: 0.0 } => Ok(0.0),
            InitialCondition::Gaussian { amplitude, width } => {
                // e^{x^2/m} a e^{-x^2/w^2} = a e^{-beta x^2}
                let beta = 1.0 / (width * width) - 1.0 / m;
                if beta <= 0.0 {
                    return Err(Error::invalid(
                        "width",
                        format!("Gaussian width^2 = {} must be below M = {m}", width * width),
                    ));
                }
                // sup |d/dx a e^{-beta x^2}| = |a| sqrt(2 beta / e), at x = 1/sqrt(2 beta)
                Ok(amplitude.abs() * (1.0 + (2.0 * beta / std::f64::consts::E).sqrt()))
            }
            _ => Err(Error::invalid(
                "initial",
                "data is not Gaussian-localised, so the weighted C^1 norm is infinite",
            )),
        }
    }
}

#[inline]
fn sech2(s: f64) -> f64 {
    let u = (-2.0 * s.abs()).exp();
    4.0 * u / ((1.0 + u) * (1.0 + u))
}

/// Truncation windows for `y -> G(x,y,t)`: the two moving Gaussians and the
/// exponential profile of `psi`.
pub(crate) fn greens_windows(params: &ModelParams, x: f64, t: f64) -> Vec<Window> {
    let c = params.c();
    let s = (4.0 * t).sqrt();
    vec![
        Window::new(x + c * t, s),
        Window::new(x - c * t, s),
        Window::new(0.0, 8.0 / c),
    ]
}

/// `int G(x,y,t) (e^{phi0(y)} - 1) dy`.
pub fn cole_hopf_integral(
    phi0: &InitialCondition,
    x: f64,
    t: f64,
    params: &ModelParams,
    quad: &QuadratureSpec,
) -> Result<f64> {
    phi0.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::NonPositiveTime(t));
    }
    if phi0.is_zero() {
        return Ok(0.0);
    }
    let mut windows = greens_windows(params, x, t);
    if let Some(w) = phi0.window() {
        // Localised data cuts off the integrand; keep only the moving
        // Gaussians that overlap it, to seed panels where G is narrow.
        let (lo, hi) = (w.lo(), w.hi());
        windows.truncate(2);
        windows.retain(|g| g.hi() > lo && g.lo() < hi);
        windows.push(w);
    }
    let f = |y: f64| params.greens_unchecked(x, y, t) * phi0.value(y).exp_m1();
    integrate_line(f, &quad.with_windows(windows))
}

/// Exact solution of the nonlinear equation from `phi0`.
pub fn cole_hopf_solution(
    phi0: &InitialCondition,
    x: f64,
    t: f64,
    params: &ModelParams,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let i = cole_hopf_integral(phi0, x, t, params, quad)?;
    log1p_checked(i, "1 + int G (e^phi0 - 1) dy")
}

/// Pointwise `t -> inf` limit `log(1 + (c/4) int psi (e^{phi0} - 1) dy)`,
/// the plateau `G -> (c/4) psi(y)` applied to the transformed data.
pub fn asymptotic_constant(
    phi0: &InitialCondition,
    params: &ModelParams,
    quad: &QuadratureSpec,
) -> Result<f64> {
    phi0.validate()?;
    if phi0.is_zero() {
        return Ok(0.0);
    }
    let c = params.c();
    let mut windows = vec![Window::new(0.0, 8.0 / c)];
    windows.extend(phi0.window());
    let f = |y: f64| params.adjoint_eigenfunction(y) * phi0.value(y).exp_m1();
    let i = integrate_line(f, &quad.with_windows(windows))?;
    log1p_checked(0.25 * c * i, "1 + (c/4) int psi (e^phi0 - 1) dy")
}

fn log1p_checked(i: f64, context: &'static str) -> Result<f64> {
    if !(1.0 + i > 0.0) {
        return Err(Error::LogDomain {
            argument: 1.0 + i,
            context,
        });
    }
    Ok(i.ln_1p())
}

fn plateau_argument(p: f64, b: f64) -> Result<f64> {
    let arg = 1.0 + p * b;
    if !(arg > 0.0) {
        return Err(Error::LogDomain {
            argument: arg,
            context: "1 + p B(x,t)",
        });
    }
    Ok(arg)
}

/// `phi*(x,t,p) = log(1 + p B(x,t))`.
pub fn phi_star(x: f64, t: f64, p: f64, params: &ModelParams) -> Result<f64> {
    let b = params.bfield(x, t)?;
    plateau_argument(p, b)?;
    Ok((p * b).ln_1p())
}

pub fn phi_star_x(x: f64, t: f64, p: f64, params: &ModelParams) -> Result<f64> {
    let b = params.bfield(x, t)?;
    let arg = plateau_argument(p, b)?;
    Ok(p * params.bfield_x_unchecked(x, t) / arg)
}

/// `phi*_t`, with `B_t` taken from the linear equation.
pub fn phi_star_t(x: f64, t: f64, p: f64, params: &ModelParams) -> Result<f64> {
    let b = params.bfield(x, t)?;
    let arg = plateau_argument(p, b)?;
    Ok(p * params.bfield_t_unchecked(x, t) / arg)
}
