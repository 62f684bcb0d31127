//! Decomposition `phi(x,t) = log(1 + p(t) B(x,t)) + v(x,t)` of a solver
//! trajectory, the scalar ODE for `p` and the template norms `h1`, `h2`.
//!
//! `p(0)` is fixed by `int psi v(.,0) = 0`. Afterwards
//!
//! ```text
//! p' = (1 + c p/4) int psi (v_y^2 + N) dy,   N = N0 + p' N1,
//! ```
//!
//! which is affine in `p'` and is solved in closed form at every evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::InitialCondition;
use crate::kernels::{log_add_exp, ModelParams};
use crate::quadrature::{integrate_line, trapezoid, QuadratureSpec, Window};
use crate::solver::{Field, Grid};

/// Template exponent `gamma` and Gaussian width parameter `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemplateParams {
    gamma: f64,
    m: f64,
}

impl TemplateParams {
    pub fn new(gamma: f64, m: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 0.5) {
            return Err(Error::invalid(
                "gamma",
                format!("must lie in (0, 1/2), got {gamma}"),
            ));
        }
        if !(m.is_finite() && m >= 8.0) {
            return Err(Error::invalid("M", format!("must be >= 8, got {m}")));
        }
        Ok(TemplateParams { gamma, m })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// `ln theta1`, finite wherever `theta1` underflows.
    pub fn ln_theta1(&self, params: &ModelParams, x: f64, t: f64) -> f64 {
        let c = params.c();
        let w = self.m * (t + 1.0);
        -self.gamma * t.ln_1p() + log_add_exp(-(x - c * t).powi(2) / w, -(x + c * t).powi(2) / w)
    }

    pub fn ln_theta2(&self, params: &ModelParams, x: f64, t: f64) -> f64 {
        self.ln_theta1(params, x, t) - 0.5 * t.ln_1p()
    }

    /// `(1+t)^-gamma (e^{-(x-ct)^2/M(t+1)} + e^{-(x+ct)^2/M(t+1)})`.
    pub fn theta1(&self, params: &ModelParams, x: f64, t: f64) -> f64 {
        let c = params.c();
        let w = self.m * (t + 1.0);
        ((-(x - c * t).powi(2) / w).exp() + (-(x + c * t).powi(2) / w).exp())
            * (1.0 + t).powf(-self.gamma)
    }

    pub fn theta2(&self, params: &ModelParams, x: f64, t: f64) -> f64 {
        self.theta1(params, x, t) / (1.0 + t).sqrt()
    }
}

/// Half-width beyond which `psi` is below `1e-30` of its peak.
pub(crate) fn psi_cutoff(params: &ModelParams) -> f64 {
    72.0 / params.c()
}

fn p0_spec(params: &ModelParams, phi0: &InitialCondition, quad: &QuadratureSpec) -> QuadratureSpec {
    let c = params.c();
    let mut windows = vec![
        Window::new(0.0, 8.0 / c),
        Window::new(c, 2.0),
        Window::new(-c, 2.0),
    ];
    windows.extend(phi0.window());
    let mut spec = quad.with_windows(windows);
    spec.abs_tol = spec.abs_tol.min(1e-15);
    spec.rel_tol = spec.rel_tol.min(1e-13);
    spec
}

/// `F(p) = int psi(y) [phi0(y) - log(1 + p B(y,0))] dy`.
pub fn normalization_residual(
    phi0: &InitialCondition,
    p: f64,
    params: &ModelParams,
    quad: &QuadratureSpec,
) -> Result<f64> {
    phi0.validate()?;
    let spec = p0_spec(params, phi0, quad);
    integrate_line(
        |y| {
            params.adjoint_eigenfunction(y)
                * (phi0.value(y) - (p * params.bfield_unchecked(y, 0.0)).ln_1p())
        },
        &spec,
    )
}

fn normalization_slope(
    phi0: &InitialCondition,
    p: f64,
    params: &ModelParams,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let spec = p0_spec(params, phi0, quad);
    integrate_line(
        |y| {
            let b = params.bfield_unchecked(y, 0.0);
            -params.adjoint_eigenfunction(y) * b / (1.0 + p * b)
        },
        &spec,
    )
}

/// `max_y B(y, 0)`, by sampling; the peak sits within `|y| <= c + 2`.
fn max_bfield_at_zero(params: &ModelParams) -> f64 {
    let reach = params.c() + 10.0;
    (0..=4000)
        .map(|i| params.bfield_unchecked(-reach + 2.0 * reach * i as f64 / 4000.0, 0.0))
        .fold(0.0, f64::max)
}

/// Bracket `[lo, hi]` on which `1 + p B(y,0) >= 0.01` and `1 + c p / 4 > 0`.
pub fn p0_bracket(params: &ModelParams) -> (f64, f64) {
    let bmax = max_bfield_at_zero(params);
    (-0.99 / bmax, 4.0 / (params.c() * bmax))
}

/// Solves `F(p0) = 0` by Newton's method, falling back to bisection.
pub fn solve_p0(
    phi0: &InitialCondition,
    params: &ModelParams,
    quad: &QuadratureSpec,
) -> Result<f64> {
    phi0.validate()?;
    if phi0.is_zero() {
        return Ok(0.0);
    }
    let (lo, hi) = p0_bracket(params);
    let f_lo = normalization_residual(phi0, lo, params, quad)?;
    let f_hi = normalization_residual(phi0, hi, params, quad)?;
    // F is decreasing in p.
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::SmallAmplitudeRegime { lo, hi });
    }
    let projection = normalization_slope(phi0, 0.0, params, quad)?;
    let mut p = -normalization_residual(phi0, 0.0, params, quad)? / projection;
    for _ in 0..50 {
        if !(p > lo && p < hi) {
            break;
        }
        let f = normalization_residual(phi0, p, params, quad)?;
        let df = normalization_slope(phi0, p, params, quad)?;
        let step = f / df;
        p -= step;
        if step.abs() <= 1e-15 * p.abs().max(1e-300) || f == 0.0 {
            if p > lo && p < hi {
                return Ok(p);
            }
            break;
        }
    }
    bisect_p0(phi0, params, quad, lo, hi)
}

fn bisect_p0(
    phi0: &InitialCondition,
    params: &ModelParams,
    quad: &QuadratureSpec,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if normalization_residual(phi0, mid, params, quad)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `(N0, N1)` with `N = N0 + p' N1`:
///
/// ```text
/// N0 = 2 p v_x B_x / (1 + p B)
/// N1 = B/(1 + cp/4) - B/(1 + pB) = p B (B - c/4) / ((1 + cp/4)(1 + pB))
/// ```
pub fn nonlinearity_parts(
    x: f64,
    t: f64,
    p: f64,
    vx: f64,
    params: &ModelParams,
) -> Result<(f64, f64)> {
    let b = params.bfield(x, t)?;
    let bx = params.bfield_x_unchecked(x, t);
    let deficit = params.bfield_deficit_unchecked(x, t);
    nonlinearity_from_field(b, bx, deficit, p, vx, params)
}

#[inline]
fn nonlinearity_from_field(
    b: f64,
    bx: f64,
    deficit: f64,
    p: f64,
    vx: f64,
    params: &ModelParams,
) -> Result<(f64, f64)> {
    let d1 = 1.0 + p * b;
    let d2 = 1.0 + 0.25 * params.c() * p;
    if !(d1 > 0.0) {
        return Err(Error::LogDomain {
            argument: d1,
            context: "1 + p B(x,t)",
        });
    }
    if !(d2 > 0.0) {
        return Err(Error::LogDomain {
            argument: d2,
            context: "1 + c p / 4",
        });
    }
    Ok((2.0 * p * vx * bx / d1, -p * b * deficit / (d1 * d2)))
}

pub fn nonlinearity_n(
    x: f64,
    t: f64,
    p: f64,
    pdot: f64,
    vx: f64,
    params: &ModelParams,
) -> Result<f64> {
    let (n0, n1) = nonlinearity_parts(x, t, p, vx, params)?;
    Ok(n0 + pdot * n1)
}

/// `p'` from the affine relation `p' = A + K p'` over the psi-window of the
/// grid (trapezoid rule):
///
/// ```text
/// A = (1 + cp/4) int psi (v_y^2 + N0),   K = (1 + cp/4) int psi N1
/// ```
pub fn pdot_solve(p: f64, vx: &Field, t: f64, params: &ModelParams) -> Result<f64> {
    let grid = vx.grid();
    let (lo, hi) = psi_range(grid, params);
    let xs: Vec<f64> = (lo..=hi).map(|i| grid.x(i)).collect();
    pdot_from_slices(p, &xs, &vx.values()[lo..=hi], grid.dx(), t, params).map(|(pd, _)| pd)
}

/// Returns `(p', int psi (v_y^2 + N))`.
fn pdot_from_slices(
    p: f64,
    xs: &[f64],
    vx: &[f64],
    dx: f64,
    t: f64,
    params: &ModelParams,
) -> Result<(f64, f64)> {
    let mut a_terms = Vec::with_capacity(xs.len());
    let mut k_terms = Vec::with_capacity(xs.len());
    for (&x, &w) in xs.iter().zip(vx) {
        let b = params.bfield_unchecked(x, t);
        let bx = params.bfield_x_unchecked(x, t);
        let deficit = params.bfield_deficit_unchecked(x, t);
        let (n0, n1) = nonlinearity_from_field(b, bx, deficit, p, w, params)?;
        let psi = params.adjoint_eigenfunction(x);
        a_terms.push(psi * (w * w + n0));
        k_terms.push(psi * n1);
    }
    let scale = 1.0 + 0.25 * params.c() * p;
    let a = scale * trapezoid(&a_terms, dx);
    let k = scale * trapezoid(&k_terms, dx);
    if (1.0 - k).abs() < 0.5 {
        return Err(Error::IllConditioned((1.0 - k).abs()));
    }
    let pdot = a / (1.0 - k);
    Ok((pdot, (a + k * pdot) / scale))
}

/// Grid indices covering `|x| <= psi_cutoff`.
pub(crate) fn psi_range(grid: &Grid, params: &ModelParams) -> (usize, usize) {
    let r = psi_cutoff(params).min(grid.half_width());
    let lo = grid.nearest_index(-r);
    let hi = grid.nearest_index(r);
    (lo, hi)
}

/// Fourth-order first derivative with one-sided closures at both ends.
pub fn derivative_4th(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 5, "fourth-order differences need at least 5 points");
    let s = 1.0 / (12.0 * dx);
    let mut d = vec![0.0; n];
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) * s;
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) * s;
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) * s;
    }
    d[n - 2] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) * s;
    d[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4]
        + 3.0 * f[n - 5])
        * s;
    d
}

/// Fourth-order second derivative, second order in the two end cells.
fn second_derivative_4th(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    let s = 1.0 / (12.0 * dx * dx);
    let mut d = vec![0.0; n];
    for i in 2..n - 2 {
        d[i] = (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) * s;
    }
    for i in [1, n - 2] {
        d[i] = (f[i - 1] - 2.0 * f[i] + f[i + 1]) / (dx * dx);
    }
    d[0] = d[1];
    d[n - 1] = d[n - 2];
    d
}

/// How `phi` is reconstructed between snapshots when integrating `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeInterpolation {
    Linear,
    /// Cubic Hermite with `phi_t` from the right-hand side of the equation.
    Hermite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionState {
    pub grid: Grid,
    pub params: ModelParams,
    pub tparams: TemplateParams,
    pub p0: f64,
    /// `||e^{x^2/M} phi0||_{C^1}`; infinite for data without Gaussian decay.
    pub epsilon: f64,
    pub times: Vec<f64>,
    pub p: Vec<f64>,
    pub pdot: Vec<f64>,
    pub v_fields: Vec<Field>,
    pub vx_fields: Vec<Field>,
    /// Running sup of `|v|/theta1 + |v_x|/theta2`.
    pub h1: Vec<f64>,
    /// Running sup of `|p'| e^{c^2 t/M}`.
    pub h2: Vec<f64>,
    /// Per-snapshot `sup |v|/theta1`.
    pub sup_v_ratio: Vec<f64>,
    /// Per-snapshot `sup |v_x|/theta2`.
    pub sup_vx_ratio: Vec<f64>,
    /// Diagnostic `int psi v(., t)`.
    pub psi_projection: Vec<f64>,
    /// `int psi (v_y^2 + N)` at each snapshot, equal to `p'/(1 + cp/4)`.
    pub forcing_projection: Vec<f64>,
}

impl DecompositionState {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `h(t_i) = h1(t_i) + h2(t_i)`.
    pub fn h(&self, i: usize) -> f64 {
        self.h1[i] + self.h2[i]
    }

    /// `v_y^2 + N(y, t_i, p, p', v_y)` on the grid.
    pub fn forcing_field(&self, i: usize) -> Result<Vec<f64>> {
        let grid = &self.grid;
        let (t, p, pdot) = (self.times[i], self.p[i], self.pdot[i]);
        let vx = self.vx_fields[i].values();
        (0..grid.len())
            .into_par_iter()
            .map(|j| {
                let x = grid.x(j);
                let (n0, n1) = nonlinearity_parts(x, t, p, vx[j], &self.params)?;
                Ok(vx[j] * vx[j] + n0 + pdot * n1)
            })
            .collect()
    }

    /// Index of the stored time closest to `t`.
    pub fn nearest_time_index(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, &s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = i;
            }
        }
        best
    }
}

/// Maximal snapshot spacing accepted for the `p` integration.
pub const MAX_SNAPSHOT_SPACING: f64 = 0.1;

pub fn evolve_decomposition(
    trajectory: &[(f64, Field)],
    phi0: &InitialCondition,
    params: &ModelParams,
    tparams: &TemplateParams,
    quad: &QuadratureSpec,
) -> Result<DecompositionState> {
    evolve_decomposition_with(
        trajectory,
        phi0,
        params,
        tparams,
        quad,
        TimeInterpolation::Hermite,
    )
}

pub fn evolve_decomposition_with(
    trajectory: &[(f64, Field)],
    phi0: &InitialCondition,
    params: &ModelParams,
    tparams: &TemplateParams,
    quad: &QuadratureSpec,
    interpolation: TimeInterpolation,
) -> Result<DecompositionState> {
    let Some((t_first, first)) = trajectory.first() else {
        return Err(Error::EmptySample);
    };
    if *t_first != 0.0 {
        return Err(Error::invalid(
            "trajectory",
            format!("must start at t = 0, got {t_first}"),
        ));
    }
    let grid = first.grid().clone();
    if grid.len() < 5 {
        return Err(Error::invalid("trajectory", "grid needs at least 5 points"));
    }
    for w in trajectory.windows(2) {
        let gap = w[1].0 - w[0].0;
        if !(gap > 0.0 && gap <= MAX_SNAPSHOT_SPACING * (1.0 + 1e-9)) {
            return Err(Error::invalid(
                "trajectory",
                format!(
                    "snapshot spacing {gap} at t = {} outside (0, {MAX_SNAPSHOT_SPACING}]",
                    w[0].0
                ),
            ));
        }
        if w[1].1.grid() != &grid {
            return Err(Error::invalid(
                "trajectory",
                "snapshots live on different grids",
            ));
        }
    }

    let p0 = solve_p0(phi0, params, quad)?;
    let dx = grid.dx();
    let (lo, hi) = psi_range(&grid, params);
    // psi-window plus two cells for the difference stencil
    let (wlo, whi) = (lo.saturating_sub(2), (hi + 2).min(grid.len() - 1));
    let wx: Vec<f64> = (wlo..=whi).map(|i| grid.x(i)).collect();
    let inner = (lo - wlo)..(lo - wlo + hi - lo + 1);

    let rates: Vec<Vec<f64>> = match interpolation {
        TimeInterpolation::Hermite => trajectory
            .iter()
            .map(|(_, phi)| time_derivative(&phi.values()[wlo..=whi], &wx, dx, params))
            .collect(),
        TimeInterpolation::Linear => Vec::new(),
    };

    let stage_pdot = |t: f64, p: f64, phi_w: &[f64]| -> Result<f64> {
        let v: Vec<f64> = wx
            .iter()
            .zip(phi_w)
            .map(|(&x, &f)| Ok(f - plateau_profile(x, t, p, params)?))
            .collect::<Result<_>>()?;
        let vx = derivative_4th(&v, dx);
        pdot_from_slices(p, &wx[inner.clone()], &vx[inner.clone()], dx, t, params).map(|r| r.0)
    };

    let n = trajectory.len();
    let mut state = DecompositionState {
        grid: grid.clone(),
        params: *params,
        tparams: *tparams,
        p0,
        epsilon: phi0.localization_norm(tparams.m()).unwrap_or(f64::INFINITY),
        times: Vec::with_capacity(n),
        p: Vec::with_capacity(n),
        pdot: Vec::with_capacity(n),
        v_fields: Vec::with_capacity(n),
        vx_fields: Vec::with_capacity(n),
        h1: Vec::with_capacity(n),
        h2: Vec::with_capacity(n),
        sup_v_ratio: Vec::with_capacity(n),
        sup_vx_ratio: Vec::with_capacity(n),
        psi_projection: Vec::with_capacity(n),
        forcing_projection: Vec::with_capacity(n),
    };

    let mut p = p0;
    let mut h1_run: f64 = 0.0;
    let mut h2_run: f64 = 0.0;
    for i in 0..n {
        let (t, phi) = (&trajectory[i].0, &trajectory[i].1);
        let t = *t;
        let phis = phi.values();
        let v: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|j| Ok(phis[j] - plateau_profile(grid.x(j), t, p, params)?))
            .collect::<Result<_>>()?;
        let vx = derivative_4th(&v, dx);
        let (pdot, forcing) = pdot_from_slices(
            p,
            &(lo..=hi).map(|j| grid.x(j)).collect::<Vec<_>>(),
            &vx[lo..=hi],
            dx,
            t,
            params,
        )?;
        let (sv, svx, sum) = template_ratios(&grid, &v, &vx, t, params, tparams);
        h1_run = h1_run.max(sum);
        h2_run = h2_run.max(pdot.abs() * (params.c() * params.c() * t / tparams.m()).exp());
        let psi_v: Vec<f64> = (lo..=hi)
            .map(|j| params.adjoint_eigenfunction(grid.x(j)) * v[j])
            .collect();

        state.times.push(t);
        state.p.push(p);
        state.pdot.push(pdot);
        state.h1.push(h1_run);
        state.h2.push(h2_run);
        state.sup_v_ratio.push(sv);
        state.sup_vx_ratio.push(svx);
        state.psi_projection.push(trapezoid(&psi_v, dx));
        state.forcing_projection.push(forcing);
        state.v_fields.push(Field::from_parts(grid.clone(), v));
        state.vx_fields.push(Field::from_parts(grid.clone(), vx));

        if i + 1 == n {
            break;
        }
        // Classical RK4 across [t_i, t_{i+1}] with phi reconstructed in time.
        let t1 = trajectory[i + 1].0;
        let h = t1 - t;
        let a = &phis[wlo..=whi];
        let b = &trajectory[i + 1].1.values()[wlo..=whi];
        let mid: Vec<f64> = match interpolation {
            TimeInterpolation::Linear => a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect(),
            TimeInterpolation::Hermite => {
                let (ra, rb) = (&rates[i], &rates[i + 1]);
                (0..a.len())
                    .map(|j| 0.5 * (a[j] + b[j]) + 0.125 * h * (ra[j] - rb[j]))
                    .collect()
            }
        };
        let k1 = pdot;
        let k2 = stage_pdot(t + 0.5 * h, p + 0.5 * h * k1, &mid)?;
        let k3 = stage_pdot(t + 0.5 * h, p + 0.5 * h * k2, &mid)?;
        let k4 = stage_pdot(t1, p + h * k3, b)?;
        p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Ok(state)
}

#[inline]
fn plateau_profile(x: f64, t: f64, p: f64, params: &ModelParams) -> Result<f64> {
    let pb = p * params.bfield_unchecked(x, t);
    if !(1.0 + pb > 0.0) {
        return Err(Error::LogDomain {
            argument: 1.0 + pb,
            context: "1 + p B(x,t)",
        });
    }
    Ok(pb.ln_1p())
}

/// `phi_t = phi_xx + phi_x^2 - c tanh(cx/2) phi_x` on a window.
fn time_derivative(phi: &[f64], xs: &[f64], dx: f64, params: &ModelParams) -> Vec<f64> {
    let fx = derivative_4th(phi, dx);
    let fxx = second_derivative_4th(phi, dx);
    (0..phi.len())
        .map(|j| fxx[j] + fx[j] * fx[j] - params.advection(xs[j]) * fx[j])
        .collect()
}

/// `(sup |v|/theta1, sup |v_x|/theta2, sup (|v|/theta1 + |v_x|/theta2))`,
/// each ratio formed in log space.
///
/// Points where `theta2` is not a normal double are skipped: there the
/// computed `v` is subnormal round-off spread by the implicit solve, and its
/// ratio to a weight below `1e-308` carries no information.
fn template_ratios(
    grid: &Grid,
    v: &[f64],
    vx: &[f64],
    t: f64,
    params: &ModelParams,
    tparams: &TemplateParams,
) -> (f64, f64, f64) {
    let per_point: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|j| {
            let x = grid.x(j);
            let l1 = tparams.ln_theta1(params, x, t);
            let l2 = l1 - 0.5 * t.ln_1p();
            if l2 < MIN_LN_WEIGHT {
                return (0.0, 0.0);
            }
            (log_ratio(v[j], l1), log_ratio(vx[j], l2))
        })
        .collect();
    per_point
        .iter()
        .fold((0.0, 0.0, 0.0), |(a, b, s), &(r1, r2)| {
            (a.max(r1), b.max(r2), s.max(r1 + r2))
        })
}

/// `ln f64::MIN_POSITIVE`.
const MIN_LN_WEIGHT: f64 = -708.396_418_532_264;

#[inline]
fn log_ratio(value: f64, ln_weight: f64) -> f64 {
    if value == 0.0 {
        0.0
    } else {
        (value.abs().ln() - ln_weight).exp()
    }
}
