//! Numerical checks of the identities and pointwise estimates behind the
//! decay theory, reported as sup-ratios or residuals over sample sets.
//!
//! Bounds whose constants are only known to exist are checked for
//! finiteness, for stability under 2x sample refinement, and for the absence
//! of growth in time. Ratios are formed in log space so that a bound failing
//! by hundreds of orders of magnitude is reported as such instead of
//! underflowing to `0/0`.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::f64::consts::LN_10;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::{nonlinearity_parts, psi_range, DecompositionState, TemplateParams};
use crate::error::{Error, Result};
use crate::exact::{greens_windows, phi_star};
use crate::kernels::{log_add_exp, ModelParams};
use crate::quadrature::{integrate_breakpoints, integrate_line, trapezoid, QuadratureSpec, Window};
use crate::solver::Grid;

/// Largest relative change of a sup under 2x refinement still called stable.
pub const REFINEMENT_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub samples: usize,
    /// Sup-ratio or maximal residual; `inf` once it leaves the `f64` range.
    pub value: f64,
    /// `log10(value)`, finite even when `value` overflows.
    pub log10_value: f64,
    /// `(x, y, t)` or `(x, t)` of the maximiser.
    pub argmax: Vec<f64>,
    pub tolerance: Option<f64>,
    /// The same statistic on the twice denser sample set.
    pub refined_value: Option<f64>,
    pub refined_log10_value: Option<f64>,
    pub extras: BTreeMap<String, f64>,
    /// Failed side conditions beyond the value itself.
    pub violations: Vec<String>,
    pub note: String,
}

impl BoundReport {
    /// Sup over `(ln value, location)` pairs.
    pub fn from_log_samples(name: &str, samples: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        let n = samples.len();
        let Some((ln_max, argmax)) = samples.into_iter().max_by(|a, b| a.0.total_cmp(&b.0)) else {
            return Err(Error::EmptySample);
        };
        Ok(BoundReport {
            name: name.to_string(),
            samples: n,
            value: ln_max.exp(),
            log10_value: ln_max / LN_10,
            argmax,
            tolerance: None,
            refined_value: None,
            refined_log10_value: None,
            extras: BTreeMap::new(),
            violations: Vec::new(),
            note: String::new(),
        })
    }

    /// Sup over nonnegative `(value, location)` pairs.
    pub fn from_samples(name: &str, samples: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        let logs = samples
            .into_iter()
            .map(|(v, loc)| (if v.is_nan() { f64::NAN } else { v.abs().ln() }, loc))
            .collect();
        let mut r = Self::from_log_samples(name, logs)?;
        if r.log10_value.is_nan() {
            r.value = f64::NAN;
        }
        Ok(r)
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = Some(tol);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn with_extra(mut self, key: &str, value: f64) -> Self {
        self.extras.insert(key.to_string(), value);
        self
    }

    /// Attaches the statistic of the same check on a refined sample set.
    pub fn with_refinement(mut self, finer: &BoundReport) -> Self {
        self.refined_value = Some(finer.value);
        self.refined_log10_value = Some(finer.log10_value);
        self.extras
            .insert("refined_samples".into(), finer.samples as f64);
        self
    }

    /// `|refined/value - 1|`, from the logarithms so it survives overflow.
    pub fn refinement_change(&self) -> Option<f64> {
        let lf = self.refined_log10_value?;
        let l = self.log10_value;
        if l == f64::NEG_INFINITY && lf == f64::NEG_INFINITY {
            return Some(0.0);
        }
        Some(((lf - l) * LN_10).exp_m1().abs())
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }

    pub fn within_tolerance(&self) -> bool {
        self.tolerance.is_none_or(|tol| self.value <= tol)
    }

    pub fn refinement_stable(&self) -> bool {
        self.refinement_change().is_none_or(|d| d < REFINEMENT_TOL)
    }

    pub fn passed(&self) -> bool {
        self.is_finite()
            && self.within_tolerance()
            && self.refinement_stable()
            && self.violations.is_empty()
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{}: value {:.6e} (log10 {:.3}) over {} samples",
            self.name, self.value, self.log10_value, self.samples
        );
        if let Some(tol) = self.tolerance {
            s.push_str(&format!(", tolerance {tol:.1e}"));
        }
        if let Some(d) = self.refinement_change() {
            s.push_str(&format!(", refinement change {:.2}%", 100.0 * d));
        }
        for v in &self.violations {
            s.push_str(&format!(", {v}"));
        }
        if !self.note.is_empty() {
            s.push_str(&format!(" [{}]", self.note));
        }
        s
    }
}

/// `n` equispaced points on `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Integrates a fallible integrand, surfacing the first inner error.
fn integrate_nested<F>(f: F, pts: &[f64], spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let failure = RefCell::new(None);
    let out = integrate_breakpoints(
        |u| match f(u) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        pts,
        spec,
    );
    match failure.into_inner() {
        Some(e) => Err(e),
        None => out,
    }
}

fn ln_ratio(num: f64, ln_den: f64) -> f64 {
    if num == 0.0 {
        f64::NEG_INFINITY
    } else {
        num.abs().ln() - ln_den
    }
}

// ---- Green's function ------------------------------------------------------

/// `max |int G(x,y,t) dy - 1|`.
pub fn check_mass(
    params: &ModelParams,
    xs: &[f64],
    ts: &[f64],
    quad: &QuadratureSpec,
) -> Result<BoundReport> {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .flat_map(|&t| xs.iter().map(move |&x| (x, t)))
        .collect();
    let samples = pts
        .par_iter()
        .map(|&(x, t)| {
            if !(t > 0.0) {
                return Err(Error::NonPositiveTime(t));
            }
            let spec = quad.with_windows(greens_windows(params, x, t));
            let m = integrate_line(|y| params.greens_unchecked(x, y, t), &spec)?;
            Ok(((m - 1.0).abs(), vec![x, t]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::from_samples("mass", samples)?.with_tolerance(1e-8))
}

/// `n` deterministic `(x, y, t)` samples with `t` in `[t_lo, t_hi]`.
pub fn pde_samples(n: usize, t_lo: f64, t_hi: f64) -> Vec<(f64, f64, f64)> {
    // Weyl sequences with irrational steps cover the box without clustering.
    let frac = |k: usize, a: f64| (k as f64 * a).fract();
    (1..=n)
        .map(|k| {
            let x = -8.0 + 16.0 * frac(k, 0.618_033_988_749_895);
            let y = -3.0 + 6.0 * frac(k, 0.414_213_562_373_095);
            let t = t_lo + (t_hi - t_lo) * frac(k, 0.732_050_807_568_877);
            (x, y, t)
        })
        .collect()
}

/// Finite-difference residual of `G_t - G_xx + c tanh(cx/2) G_x` in `(x, t)`.
pub fn check_pde_residual(
    params: &ModelParams,
    samples: &[(f64, f64, f64)],
) -> Result<BoundReport> {
    let h = 1e-3;
    let samples = samples
        .iter()
        .map(|&(x, y, t)| {
            let g = |x: f64, t: f64| params.greens(x, y, t);
            let gt = (g(x, t + h)? - g(x, t - h)?) / (2.0 * h);
            let gx = (g(x + h, t)? - g(x - h, t)?) / (2.0 * h);
            let gxx = (g(x + h, t)? - 2.0 * g(x, t)? + g(x - h, t)?) / (h * h);
            Ok(((gt - gxx + params.advection(x) * gx).abs(), vec![x, y, t]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::from_samples("pde_residual", samples)?.with_tolerance(1e-4))
}

/// Finite-difference residual of the nonlinear equation on `phi*(., ., p)`.
pub fn check_phi_star_residual(
    params: &ModelParams,
    p: f64,
    samples: &[(f64, f64)],
) -> Result<BoundReport> {
    let h = 1e-3;
    let samples = samples
        .iter()
        .map(|&(x, t)| {
            let f = |x: f64, t: f64| phi_star(x, t, p, params);
            let ft = (f(x, t + h)? - f(x, t - h)?) / (2.0 * h);
            let fx = (f(x + h, t)? - f(x - h, t)?) / (2.0 * h);
            let fxx = (f(x + h, t)? - 2.0 * f(x, t)? + f(x - h, t)?) / (h * h);
            Ok((
                (ft + params.advection(x) * fx - fxx - fx * fx).abs(),
                vec![x, t],
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::from_samples("phi_star_residual", samples)?.with_tolerance(1e-4))
}

/// `max_x |int G(x,y,t-s) G(y,0,s+1) dy - G(x,0,t+1)|`.
pub fn check_semigroup(
    params: &ModelParams,
    t: f64,
    s: f64,
    xs: &[f64],
    quad: &QuadratureSpec,
) -> Result<BoundReport> {
    if !(s > 0.0 && s < t) {
        return Err(Error::invalid(
            "s",
            format!("need 0 < s < t, got s = {s}, t = {t}"),
        ));
    }
    let c = params.c();
    let (tau, sigma) = (t - s, s + 1.0);
    let samples = xs
        .par_iter()
        .map(|&x| {
            let mut windows = greens_windows(params, x, tau);
            windows.push(Window::new(c * sigma, (4.0 * sigma).sqrt()));
            windows.push(Window::new(-c * sigma, (4.0 * sigma).sqrt()));
            let spec = quad.with_windows(windows);
            let lhs = integrate_line(
                |y| params.greens_unchecked(x, y, tau) * params.greens_unchecked(y, 0.0, sigma),
                &spec,
            )?;
            let rhs = params.greens(x, 0.0, t + 1.0)?;
            Ok(((lhs - rhs).abs(), vec![x, t, s]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::from_samples("semigroup", samples)?.with_tolerance(1e-6))
}

/// Sample grid for the `G~` bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtildeSamples {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub ts: Vec<f64>,
}

impl GtildeSamples {
    /// `x, y` in `[-20, 20]` with the given step, `t` in `{0.1, 1, 10, 100}`.
    pub fn standard(step: f64) -> Self {
        let n = (40.0 / step).round() as usize + 1;
        GtildeSamples {
            xs: linspace(-20.0, 20.0, n),
            ys: linspace(-20.0, 20.0, n),
            ts: vec![0.1, 1.0, 10.0, 100.0],
        }
    }

    pub fn len(&self) -> usize {
        self.xs.len() * self.ys.len() * self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `sup |G~(x,y,t)| t^{1/2} / (e^{-(x-y+ct)^2/4t} + e^{-(x-y-ct)^2/4t})`.
pub fn check_gtilde_bound(params: &ModelParams, grid: &GtildeSamples) -> Result<BoundReport> {
    let c = params.c();
    for &t in &grid.ts {
        if !(t > 0.0) {
            return Err(Error::NonPositiveTime(t));
        }
    }
    let rows: Vec<(f64, f64)> = grid
        .ts
        .iter()
        .flat_map(|&t| grid.xs.iter().map(move |&x| (x, t)))
        .collect();
    let samples: Vec<(f64, Vec<f64>)> = rows
        .par_iter()
        .map(|&(x, t)| {
            grid.ys
                .iter()
                .map(|&y| {
                    let ln_g = params.greens_tilde_ln_abs(x, y, t)?;
                    let ln_w = log_add_exp(
                        -(x - y + c * t).powi(2) / (4.0 * t),
                        -(x - y - c * t).powi(2) / (4.0 * t),
                    );
                    Ok((ln_g + 0.5 * t.ln() - ln_w, vec![x, y, t]))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let report = BoundReport::from_log_samples("gtilde_bound", samples)?;
    let note = if report.is_finite() {
        String::new()
    } else {
        format!("ratio exceeds f64 range: 10^{:.1}", report.log10_value)
    };
    Ok(report.with_note(note))
}

// ---- B and N ---------------------------------------------------------------

fn wide_pair(params: &ModelParams, x: f64, t: f64) -> f64 {
    let c = params.c();
    let w = 8.0 * (t + 1.0);
    (-(x + c * t).powi(2) / w).exp() + (-(x - c * t).powi(2) / w).exp()
}

fn bound_n_points(params: &ModelParams, density: usize) -> Vec<(f64, f64)> {
    let c = params.c();
    [0.0, 1.0, 10.0, 100.0]
        .iter()
        .flat_map(|&t| {
            let reach = c * (t + 1.0) + 10.0 * (8.0 * (t + 1.0)).sqrt();
            linspace(-reach, reach, density)
                .into_iter()
                .map(move |x| (x, t))
        })
        .collect()
}

/// `sup |N| / (((1+t)^{-1/2}|p||v_x| + |p p'|)(e^{-(x+ct)^2/8(t+1)} + e^{-(x-ct)^2/8(t+1)}))`
/// over small `p`, `p'` and `v_x`.
pub fn check_bound_n(params: &ModelParams, density: usize) -> Result<BoundReport> {
    const PS: [f64; 4] = [-0.05, -0.01, 0.01, 0.05];
    const VXS: [f64; 4] = [-0.1, -1e-3, 1e-3, 0.1];
    const PDOTS: [f64; 4] = [-0.01, 0.0, 1e-3, 0.01];
    let pts = bound_n_points(params, density);
    let samples: Vec<(f64, Vec<f64>)> = pts
        .par_iter()
        .map(|&(x, t)| {
            let mut best = (f64::NEG_INFINITY, vec![x, t]);
            let w = wide_pair(params, x, t);
            for &p in &PS {
                for &vx in &VXS {
                    let (n0, n1) = nonlinearity_parts(x, t, p, vx, params)?;
                    for &pd in &PDOTS {
                        let den = ((1.0 + t).powf(-0.5) * (p * vx).abs() + (p * pd).abs()) * w;
                        let r = ln_ratio(n0 + pd * n1, den.ln());
                        if r > best.0 {
                            best = (r, vec![x, t, p, vx, pd]);
                        }
                    }
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(
        BoundReport::from_log_samples("bound_n", samples)?
            .with_note("argmax is (x, t, p, v_x, p')"),
    )
}

/// `sup B (c/4 - B) / (e^{-(x+ct)^2/8(t+1)} + e^{-(x-ct)^2/8(t+1)})`.
pub fn check_bfield_bound(params: &ModelParams, density: usize) -> Result<BoundReport> {
    let samples = bound_n_points(params, density)
        .par_iter()
        .map(|&(x, t)| {
            let b = params.bfield(x, t)?;
            let d = params.bfield_deficit(x, t)?;
            Ok((ln_ratio(b * d, wide_pair(params, x, t).ln()), vec![x, t]))
        })
        .collect::<Result<Vec<_>>>()?;
    BoundReport::from_log_samples("bfield_bound", samples)
}

// ---- convolution lemmas ----------------------------------------------------

/// `(x, t)` samples on `x in [0, ct + 2 sqrt(M(t+1))]`; the kernels are
/// jointly even, so `x >= 0` suffices.
pub fn lemma_tg_samples(
    params: &ModelParams,
    tparams: &TemplateParams,
    ts: &[f64],
    n_x: usize,
) -> Vec<(f64, f64)> {
    ts.iter()
        .flat_map(|&t| {
            let reach = params.c() * t + 2.0 * (tparams.m() * (t + 1.0)).sqrt();
            linspace(0.0, reach, n_x).into_iter().map(move |x| (x, t))
        })
        .collect()
}

/// Template weight `theta2^2 + (1+s)^{gamma-1/2} theta1 theta2 + (1+s)^gamma theta1 e^{-c^2 s/M}`.
fn lemma_weight(params: &ModelParams, tparams: &TemplateParams, y: f64, s: f64) -> f64 {
    let th1 = tparams.theta1(params, y, s);
    let th2 = th1 / (1.0 + s).sqrt();
    let g = tparams.gamma();
    let c = params.c();
    th2 * th2
        + (1.0 + s).powf(g - 0.5) * th1 * th2
        + (1.0 + s).powf(g) * th1 * (-c * c * s / tparams.m()).exp()
}

/// `int_0^t int |K(x,y,t-s)| W(y,s) dy ds` with `s = t - u^2`.
fn lemma_tg_integral<K>(
    params: &ModelParams,
    tparams: &TemplateParams,
    x: f64,
    t: f64,
    quad: &QuadratureSpec,
    kernel: K,
) -> Result<f64>
where
    K: Fn(f64, f64) -> f64,
{
    let c = params.c();
    let m = tparams.m();
    let inner = |u: f64| -> Result<f64> {
        let tau = u * u;
        let s = t - tau;
        if tau <= 0.0 {
            return Ok(0.0);
        }
        let mut windows = greens_windows(params, x, tau);
        let width = (m * (1.0 + s)).sqrt();
        windows.push(Window::new(c * s, width));
        windows.push(Window::new(-c * s, width));
        let spec = quad.with_windows(windows);
        let j = integrate_line(
            |y| kernel(y, tau).abs() * lemma_weight(params, tparams, y, s),
            &spec,
        )?;
        Ok(2.0 * u * j)
    };
    integrate_nested(inner, &linspace(0.0, t.sqrt(), 9), quad)
}

/// Ratio of the `G~` convolution with the template weight to `theta1(x,t)`,
/// and of the `G~_x` convolution to `theta2(x,t)`.
pub fn check_lemma_tg(
    params: &ModelParams,
    tparams: &TemplateParams,
    samples: &[(f64, f64)],
    quad: &QuadratureSpec,
) -> Result<[BoundReport; 2]> {
    let values = samples
        .par_iter()
        .map(|&(x, t)| {
            if !(t > 0.0) {
                return Err(Error::NonPositiveTime(t));
            }
            let i0 = lemma_tg_integral(params, tparams, x, t, quad, |y, tau| {
                params.greens_tilde_unchecked(x, y, tau)
            })?;
            let i1 = lemma_tg_integral(params, tparams, x, t, quad, |y, tau| {
                params.greens_tilde_x_unchecked(x, y, tau)
            })?;
            let l1 = tparams.ln_theta1(params, x, t);
            let l2 = tparams.ln_theta2(params, x, t);
            Ok((
                (ln_ratio(i0, l1), vec![x, t]),
                (ln_ratio(i1, l2), vec![x, t]),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (a, b): (Vec<_>, Vec<_>) = values.into_iter().unzip();
    Ok([
        BoundReport::from_log_samples("lemma_tg", a)?,
        BoundReport::from_log_samples("lemma_tg_x", b)?,
    ])
}

/// `(x, time index)` samples for the e-difference lemma: symmetric `x` on
/// `[-X, X]` with `X = ct + 2 sqrt(M(t+1))`, plus fixed points far outside the
/// light cone at `ct + 10 sqrt(Mt)` and 1.5 times that.
pub fn lemma_ediff_samples(
    decomp: &DecompositionState,
    ts: &[f64],
    n_x: usize,
) -> Vec<(f64, usize)> {
    let c = decomp.params.c();
    let m = decomp.tparams.m();
    let t_end = decomp.times.last().copied().unwrap_or(0.0);
    let mut out = Vec::new();
    for &t in ts.iter().filter(|&&t| t > 0.0 && t <= t_end + 1e-9) {
        let i = decomp.nearest_time_index(t);
        let t = decomp.times[i];
        let reach = c * t + 2.0 * (m * (t + 1.0)).sqrt();
        out.extend(linspace(-reach, reach, n_x).into_iter().map(|x| (x, i)));
        let far = c * t + 10.0 * (m * t).sqrt();
        out.extend(
            [far, -far, 1.5 * far, -1.5 * far]
                .into_iter()
                .map(|x| (x, i)),
        );
    }
    out
}

/// `v_y^2 + N` on the psi-window at snapshot `k`, integrated against `psi`
/// in absolute value.
fn psi_forcing_abs(decomp: &DecompositionState, k: usize) -> Result<f64> {
    let grid = &decomp.grid;
    let params = &decomp.params;
    let (lo, hi) = psi_range(grid, params);
    let (t, p, pdot) = (decomp.times[k], decomp.p[k], decomp.pdot[k]);
    let vx = decomp.vx_fields[k].values();
    let terms = (lo..=hi)
        .map(|j| {
            let x = grid.x(j);
            let (n0, n1) = nonlinearity_parts(x, t, p, vx[j], params)?;
            Ok(params.adjoint_eigenfunction(x) * (vx[j] * vx[j] + n0 + pdot * n1).abs())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(trapezoid(&terms, grid.dx()))
}

fn interp_linear(times: &[f64], values: &[f64], s: f64) -> f64 {
    let k = times.partition_point(|&t| t <= s).clamp(1, times.len() - 1);
    let (t0, t1) = (times[k - 1], times[k]);
    let w = ((s - t0) / (t1 - t0)).clamp(0.0, 1.0);
    (1.0 - w) * values[k - 1] + w * values[k]
}

/// `int_0^t int |e(x,t-s+1) - e(x,t+1)| psi(y) |v_y^2 + N|(y,s) dy ds` against
/// `(eps + h(t)^2) theta1(x,t)`, and the `e_x` analogue against `theta2`.
pub fn check_lemma_ediff(
    decomp: &DecompositionState,
    params: &ModelParams,
    tparams: &TemplateParams,
    quad: &QuadratureSpec,
    samples: &[(f64, usize)],
) -> Result<[BoundReport; 2]> {
    if decomp.is_empty() {
        return Err(Error::EmptySample);
    }
    let last = samples
        .iter()
        .map(|s| s.1)
        .max()
        .ok_or(Error::EmptySample)?;
    if last >= decomp.len() {
        return Err(Error::invalid(
            "samples",
            "time index beyond the stored trajectory",
        ));
    }
    let phi: Vec<f64> = (0..=last)
        .into_par_iter()
        .map(|k| psi_forcing_abs(decomp, k))
        .collect::<Result<_>>()?;
    let times = &decomp.times[..=last];
    let eps = decomp.epsilon;
    let values = samples
        .par_iter()
        .map(|&(x, n)| {
            let t = times[n];
            let top = params.plateau(x, t + 1.0)?;
            let top_x = params.plateau_x(x, t + 1.0)?;
            let (i0, i1) = if n == 0 {
                (0.0, 0.0)
            } else {
                let pts = &times[..=n];
                let forcing = |s: f64| interp_linear(pts, &phi[..=n], s);
                let i0 = integrate_breakpoints(
                    |s| (params.plateau_unchecked(x, t - s + 1.0) - top).abs() * forcing(s),
                    pts,
                    quad,
                )?;
                let i1 = integrate_breakpoints(
                    |s| (params.plateau_x_unchecked(x, t - s + 1.0) - top_x).abs() * forcing(s),
                    pts,
                    quad,
                )?;
                (i0, i1)
            };
            let scale = (eps + decomp.h(n).powi(2)).ln();
            let l1 = tparams.ln_theta1(params, x, t) + scale;
            let l2 = tparams.ln_theta2(params, x, t) + scale;
            Ok((
                (ln_ratio(i0, l1), vec![x, t]),
                (ln_ratio(i1, l2), vec![x, t]),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (a, b): (Vec<_>, Vec<_>) = values.into_iter().unzip();
    let note = if eps.is_finite() {
        format!("eps = {eps:.6e}")
    } else {
        "eps infinite: data lacks Gaussian localisation, ratios are vacuous".to_string()
    };
    Ok([
        BoundReport::from_log_samples("lemma_ediff", a)?.with_note(note.clone()),
        BoundReport::from_log_samples("lemma_ediff_x", b)?.with_note(note),
    ])
}

// ---- trajectory checks -----------------------------------------------------

/// Below this `|p(t) - p(T)|` the fit is skipped.
pub const FIT_FLOOR: f64 = 1e-13;

/// Exponential fit of `|p(t) - p(T)|` on `[2, T/2]` and the tail-to-head
/// ratio of `h1`. The report value is the tail-to-head ratio.
pub fn check_theorem_decay(
    decomp: &DecompositionState,
    _tparams: &TemplateParams,
) -> Result<BoundReport> {
    let Some(&t_end) = decomp.times.last() else {
        return Err(Error::EmptySample);
    };
    if t_end < 20.0 - 1e-9 {
        return Err(Error::invalid(
            "t_final",
            format!("decay check needs T >= 20, got {t_end}"),
        ));
    }
    let p_inf = *decomp.p.last().unwrap();
    let half = 0.5 * t_end;
    let head = decomp
        .times
        .iter()
        .zip(&decomp.h1)
        .filter(|(t, _)| **t <= half)
        .fold(0.0_f64, |m, (_, h)| m.max(*h));
    let tail = decomp
        .times
        .iter()
        .zip(&decomp.h1)
        .filter(|(t, _)| **t >= half)
        .fold(0.0_f64, |m, (_, h)| m.max(*h));
    let ratio = if tail == 0.0 { 0.0 } else { tail / head };
    let sup_h1 = decomp.h1.iter().fold(0.0_f64, |m, h| m.max(*h));
    let sup_h2 = decomp.h2.iter().fold(0.0_f64, |m, h| m.max(*h));

    let fit: Vec<(f64, f64)> = decomp
        .times
        .iter()
        .zip(&decomp.p)
        .filter(|(t, _)| **t >= 2.0 - 1e-9 && **t <= half + 1e-9)
        .map(|(t, p)| (*t, (p - p_inf).abs()))
        .collect();
    let mut report = BoundReport::from_samples("theorem_decay", vec![(ratio, vec![half, t_end])])?
        .with_tolerance(1.1)
        .with_extra("p_inf", p_inf)
        .with_extra("sup_h1", sup_h1)
        .with_extra("sup_h2", sup_h2)
        .with_extra("tail_to_head", ratio);
    report.samples = decomp.len();
    if fit.first().is_none_or(|f| f.1 < FIT_FLOOR) {
        let note = if decomp.p.iter().all(|&p| p == 0.0) {
            "zero trajectory, fit skipped"
        } else {
            "converged too fast to fit"
        };
        return Ok(report.with_note(note));
    }
    let pts: Vec<(f64, f64)> = fit
        .iter()
        .filter(|f| f.1 >= FIT_FLOOR)
        .map(|&(t, d)| (t, d.ln()))
        .collect();
    let (slope, r2) = least_squares(&pts);
    let eta = -slope;
    report = report
        .with_extra("eta", eta)
        .with_extra("r_squared", r2)
        .with_extra("fit_points", pts.len() as f64);
    if !(eta > 0.0) {
        report
            .violations
            .push(format!("fitted rate eta = {eta:.3e} is not positive"));
    }
    if !(r2 >= 0.9) {
        report.violations.push(format!("R^2 = {r2:.3} below 0.9"));
    }
    Ok(report)
}

/// Slope and coefficient of determination of the least-squares line.
pub fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { slope * sxy / syy };
    (slope, r2)
}

/// Cumulative integral of samples `f` at `times`, exact for quadratics:
/// Simpson pairs, with the trailing odd interval taken from the parabola
/// through its three last points.
pub fn cumulative_simpson(times: &[f64], f: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut out = vec![0.0; n];
    // parabola through (k-1, k, k+1), integrated over [t_{k+a}, t_{k+b}] with
    // offsets relative to t_k
    let piece = |k: usize, lo: f64, hi: f64| -> f64 {
        let (h0, h1) = (times[k] - times[k - 1], times[k + 1] - times[k]);
        let a = ((f[k + 1] - f[k]) / h1 + (f[k - 1] - f[k]) / h0) / (h0 + h1);
        let b = (f[k + 1] - f[k]) / h1 - a * h1;
        let prim = |s: f64| f[k] * s + 0.5 * b * s * s + a * s * s * s / 3.0;
        prim(hi) - prim(lo)
    };
    for i in 1..n {
        out[i] = if n == 2 {
            0.5 * (times[1] - times[0]) * (f[0] + f[1])
        } else if i % 2 == 0 {
            out[i - 2] + piece(i - 1, times[i - 2] - times[i - 1], times[i] - times[i - 1])
        } else if i + 1 < n {
            out[i - 1] + piece(i, times[i - 1] - times[i], 0.0)
        } else {
            out[i - 1] + piece(i - 1, 0.0, times[i] - times[i - 1])
        };
    }
    out
}

/// `log(1 + c p(t)/4) - log(1 + c p0/4) = (c/4) int_0^t int psi (v_y^2 + N)`,
/// with the right side integrated in time by Simpson's rule.
pub fn check_p_identity(decomp: &DecompositionState) -> Result<BoundReport> {
    if decomp.is_empty() {
        return Err(Error::EmptySample);
    }
    let c = decomp.params.c();
    let rhs = cumulative_simpson(&decomp.times, &decomp.forcing_projection);
    let lp0 = (0.25 * c * decomp.p0).ln_1p();
    let samples = (0..decomp.len())
        .map(|i| {
            let lhs = (0.25 * c * decomp.p[i]).ln_1p() - lp0;
            ((lhs - 0.25 * c * rhs[i]).abs(), vec![decomp.times[i]])
        })
        .collect();
    Ok(BoundReport::from_samples("p_identity", samples)?.with_tolerance(1e-6))
}

/// Four-point Lagrange interpolation on the grid; zero outside it.
fn interp_cubic(grid: &Grid, values: &[f64], y: f64) -> f64 {
    let l = grid.half_width();
    if !(y >= -l && y <= l) {
        return 0.0;
    }
    let dx = grid.dx();
    let n = grid.len();
    let pos = (y + l) / dx;
    let i = (pos.floor() as usize).clamp(1, n - 3);
    let r = pos - i as f64;
    let w0 = -r * (r - 1.0) * (r - 2.0) / 6.0;
    let w1 = (r + 1.0) * (r - 1.0) * (r - 2.0) / 2.0;
    let w2 = -(r + 1.0) * r * (r - 2.0) / 2.0;
    let w3 = (r + 1.0) * r * (r - 1.0) / 6.0;
    w0 * values[i - 1] + w1 * values[i] + w2 * values[i + 1] + w3 * values[i + 2]
}

/// Coarse `(x, time index)` sample set: `t` near 1, 2.5 and 5, `x` in
/// `{0, ct/2, ct, ct + 2, -ct}`.
pub fn integral_equation_samples(decomp: &DecompositionState) -> Vec<(f64, usize)> {
    let c = decomp.params.c();
    let t_end = decomp.times.last().copied().unwrap_or(0.0);
    let grid = &decomp.grid;
    let mut out = Vec::new();
    for t in [1.0, 2.5, 5.0].into_iter().filter(|&t| t <= t_end + 1e-9) {
        let i = decomp.nearest_time_index(t);
        let t = decomp.times[i];
        for x in [0.0, 0.5 * c * t, c * t, c * t + 2.0, -c * t] {
            out.push((grid.x(grid.nearest_index(x)), i));
        }
    }
    out
}

/// Relative residual of the variation-of-constants representation of `v`:
///
/// ```text
/// v(x,t) = -(4/c) G~(x,0,t+1) [log(1 + c p(t)/4) - log(1 + c p0/4)]
///        + int G~(x,y,t) v(y,0) dy
///        + int_0^t int [G~(x,y,t-s) + (e(x,t-s) - e(x,t+1)) psi(y)] (v_y^2 + N)(y,s) dy ds
/// ```
///
/// The value is `max |lhs - rhs| / max |lhs|` over the samples.
pub fn check_integral_equation_residual(
    decomp: &DecompositionState,
    params: &ModelParams,
    _tparams: &TemplateParams,
    quad: &QuadratureSpec,
    samples: &[(f64, usize)],
) -> Result<BoundReport> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let last = samples.iter().map(|s| s.1).max().unwrap();
    if last >= decomp.len() {
        return Err(Error::invalid(
            "samples",
            "time index beyond the stored trajectory",
        ));
    }
    let c = params.c();
    let grid = &decomp.grid;
    let forcing: Vec<Vec<f64>> = (0..=last)
        .map(|k| decomp.forcing_field(k))
        .collect::<Result<_>>()?;
    let v0 = decomp.v_fields[0].values();
    let lp0 = (0.25 * c * decomp.p0).ln_1p();

    let rows = samples
        .par_iter()
        .map(|&(x, n)| {
            let t = decomp.times[n];
            let lhs = interp_cubic(grid, decomp.v_fields[n].values(), x);
            let log_term = -(4.0 / c)
                * params.greens_tilde(x, 0.0, t + 1.0)?
                * ((0.25 * c * decomp.p[n]).ln_1p() - lp0);
            let mut windows = greens_windows(params, x, t);
            windows.push(Window::new(c, 2.0));
            windows.push(Window::new(-c, 2.0));
            let initial = integrate_line(
                |y| params.greens_tilde_unchecked(x, y, t) * interp_cubic(grid, v0, y),
                &quad.with_windows(windows),
            )?;
            let history = if n == 0 {
                0.0
            } else {
                let e_top = params.plateau(x, t + 1.0)?;
                let times = &decomp.times[..=n];
                let inner = |u: f64| -> Result<f64> {
                    let tau = u * u;
                    if tau <= 0.0 {
                        return Ok(0.0);
                    }
                    let s = t - tau;
                    let k = times.partition_point(|&r| r <= s).clamp(1, n);
                    let w = ((s - times[k - 1]) / (times[k] - times[k - 1])).clamp(0.0, 1.0);
                    let (fa, fb) = (&forcing[k - 1], &forcing[k]);
                    let shift = params.plateau_unchecked(x, tau) - e_top;
                    let spec = quad.with_windows(greens_windows(params, x, tau));
                    let j = integrate_line(
                        |y| {
                            let f = (1.0 - w) * interp_cubic(grid, fa, y)
                                + w * interp_cubic(grid, fb, y);
                            (params.greens_tilde_unchecked(x, y, tau)
                                + shift * params.adjoint_eigenfunction(y))
                                * f
                        },
                        &spec,
                    )?;
                    Ok(2.0 * u * j)
                };
                let mut pts: Vec<f64> = times.iter().map(|&s| (t - s).max(0.0).sqrt()).collect();
                pts.reverse();
                integrate_nested(inner, &pts, quad)?
            };
            let rhs = log_term + initial + history;
            Ok((lhs, rhs, x, t))
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = rows.iter().fold(0.0_f64, |m, r| m.max(r.0.abs()));
    let max_abs = rows.iter().fold(0.0_f64, |m, r| m.max((r.0 - r.1).abs()));
    let per_sample = rows
        .iter()
        .map(|&(l, r, x, t)| {
            (
                if scale == 0.0 {
                    (l - r).abs()
                } else {
                    (l - r).abs() / scale
                },
                vec![x, t],
            )
        })
        .collect();
    Ok(BoundReport::from_samples("integral_equation", per_sample)?
        .with_tolerance(0.05)
        .with_extra("max_abs_residual", max_abs)
        .with_extra("max_abs_v", scale))
}

// ---- plateau phenomenology -----------------------------------------------

/// `errfn((-z+ct)/sqrt(4t)) - errfn((-z-ct)/sqrt(4t)) = (4/c) e(-z, t)`.
pub fn plateau_profile(params: &ModelParams, z: f64, t: f64) -> Result<f64> {
    Ok(4.0 / params.c() * params.plateau(-z, t)?)
}

/// `max |profile - 1|` over `|z| <= ct - 4 sqrt(t)`.
pub fn check_plateau(params: &ModelParams, ts: &[f64], n: usize) -> Result<BoundReport> {
    let c = params.c();
    let mut samples = Vec::new();
    for &t in ts {
        let reach = c * t - 4.0 * t.sqrt();
        if reach <= 0.0 {
            return Err(Error::invalid(
                "t",
                format!("no plateau region yet at t = {t}"),
            ));
        }
        for z in linspace(-reach, reach, n) {
            samples.push(((plateau_profile(params, z, t)? - 1.0).abs(), vec![z, t]));
        }
    }
    Ok(BoundReport::from_samples("plateau", samples)?.with_tolerance(0.01))
}
