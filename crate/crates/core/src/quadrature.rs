//! Integration over the real line of integrands built from moving Gaussians,
//! and trapezoid integration of sampled fields.
//!
//! The caller declares where the integrand lives through one or more
//! [`Window`]s (a center and a Gaussian width). The integral is taken over the
//! hull of `center ± n_sigmas * width` for all windows, seeded with panels of
//! size about `width` inside each window, and refined by global adaptive
//! Gauss–Kronrod (G10/K21) bisection of the panel with the largest error.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::Field;

pub mod rules {
    //! Gauss–Kronrod 10/21 abscissae and weights on `[-1, 1]`.
    #![allow(clippy::excessive_precision)]

    /// Positive Kronrod abscissae, descending, followed by the center node.
    pub const K21_NODES: [f64; 11] = [
        0.995_657_163_025_808_080_735_527_280_689_003,
        0.973_906_528_517_171_720_077_964_012_084_452,
        0.930_157_491_355_708_226_001_207_180_059_508,
        0.865_063_366_688_984_510_732_096_688_423_493,
        0.780_817_726_586_416_897_063_717_578_345_042,
        0.679_409_568_299_024_406_234_327_365_114_874,
        0.562_757_134_668_604_683_339_000_099_272_694,
        0.433_395_394_129_247_190_799_265_943_165_784,
        0.294_392_862_701_460_198_131_126_603_103_866,
        0.148_874_338_981_631_210_884_826_001_129_720,
        0.0,
    ];

    pub const K21_WEIGHTS: [f64; 11] = [
        0.011_694_638_867_371_874_278_064_396_062_192,
        0.032_558_162_307_964_727_478_818_972_459_390,
        0.054_755_896_574_351_996_031_381_300_244_580,
        0.075_039_674_810_919_952_767_043_140_916_190,
        0.093_125_454_583_697_605_535_065_465_083_366,
        0.109_387_158_802_297_641_899_210_590_325_805,
        0.123_491_976_262_065_851_077_600_525_452_242,
        0.134_709_217_311_473_325_928_054_001_771_707,
        0.142_775_938_577_060_080_797_094_273_138_717,
        0.147_739_104_901_338_491_374_841_515_972_068,
        0.149_445_554_002_916_905_664_936_468_389_821,
    ];

    /// Positive 10-point Gauss–Legendre nodes (the odd-indexed Kronrod nodes).
    pub const G10_NODES: [f64; 5] = [
        K21_NODES[1],
        K21_NODES[3],
        K21_NODES[5],
        K21_NODES[7],
        K21_NODES[9],
    ];

    pub const G10_WEIGHTS: [f64; 5] = [
        0.066_671_344_308_688_137_593_568_809_893_332,
        0.149_451_349_150_580_593_145_776_339_657_697,
        0.219_086_362_515_982_043_995_534_934_228_163,
        0.269_266_719_309_996_355_091_226_921_569_469,
        0.295_524_224_714_752_870_173_892_994_651_338,
    ];
}

use rules::{G10_WEIGHTS, K21_NODES, K21_WEIGHTS};

/// Support declaration for one Gaussian-like piece of an integrand: the
/// integrand is assumed to decay at least like `exp(-((y - center)/width)^2)`
/// outside `center ± n_sigmas * width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: f64,
    pub width: f64,
    pub n_sigmas: f64,
}

impl Window {
    pub const DEFAULT_SIGMAS: f64 = 8.0;

    pub fn new(center: f64, width: f64) -> Self {
        Window {
            center,
            width,
            n_sigmas: Self::DEFAULT_SIGMAS,
        }
    }

    pub fn lo(&self) -> f64 {
        self.center - self.n_sigmas * self.width
    }

    pub fn hi(&self) -> f64 {
        self.center + self.n_sigmas * self.width
    }

    fn validate(&self) -> Result<()> {
        if !self.center.is_finite() {
            return Err(Error::invalid(
                "window.center",
                format!("must be finite, got {}", self.center),
            ));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::invalid(
                "window.width",
                format!("must be > 0, got {}", self.width),
            ));
        }
        if !(self.n_sigmas.is_finite() && self.n_sigmas >= 8.0) {
            return Err(Error::invalid(
                "window.n_sigmas",
                format!("must be >= 8, got {}", self.n_sigmas),
            ));
        }
        Ok(())
    }
}

/// Rule used by [`integrate_line`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    /// Adaptive G10/K21. On well-seeded panels it usually lands at round-off
    /// whatever the tolerance.
    #[default]
    GaussKronrod,
    /// Adaptive Simpson, whose error tracks the requested tolerance.
    Simpson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub windows: Vec<Window>,
    /// Refinement budget: maximal number of panels.
    pub max_panels: usize,
    #[serde(default)]
    pub rule: QuadratureRule,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            windows: Vec::new(),
            max_panels: 4000,
            rule: QuadratureRule::GaussKronrod,
        }
    }
}

impl QuadratureSpec {
    /// Tolerances for the iterated integrals of the lemma checks.
    pub fn double_layer() -> Self {
        QuadratureSpec {
            abs_tol: 1e-7,
            rel_tol: 1e-7,
            ..Self::default()
        }
    }

    pub fn new(abs_tol: f64, rel_tol: f64) -> Result<Self> {
        let spec = QuadratureSpec {
            abs_tol,
            rel_tol,
            ..Self::default()
        };
        spec.validate_tolerances()?;
        Ok(spec)
    }

    /// Same tolerances, the given windows.
    pub fn with_windows(&self, windows: Vec<Window>) -> Self {
        QuadratureSpec {
            windows,
            ..self.clone()
        }
    }

    pub fn with_window(&self, center: f64, width: f64) -> Self {
        self.with_windows(vec![Window::new(center, width)])
    }

    fn validate_tolerances(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::invalid(
                "abs_tol",
                format!("must be > 0, got {}", self.abs_tol),
            ));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::invalid(
                "rel_tol",
                format!("must be > 0, got {}", self.rel_tol),
            ));
        }
        if self.max_panels == 0 {
            return Err(Error::invalid("max_panels", "must be positive"));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_tolerances()?;
        if self.windows.is_empty() {
            return Err(Error::invalid(
                "windows",
                "at least one truncation window is required",
            ));
        }
        self.windows.iter().try_for_each(Window::validate)
    }

    fn tolerance(&self, estimate: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * estimate.abs())
    }

    /// Panel breakpoints: every window cut into pieces of about one width,
    /// merged over the hull.
    fn breakpoints(&self) -> Vec<f64> {
        let mut pts = Vec::new();
        for w in &self.windows {
            let n = (2.0 * w.n_sigmas).ceil() as usize;
            let (lo, hi) = (w.lo(), w.hi());
            for i in 0..=n {
                pts.push(lo + (hi - lo) * i as f64 / n as f64);
            }
        }
        pts.sort_by(f64::total_cmp);
        let min_gap = 1e-12 * pts.iter().fold(1.0_f64, |m, p| m.max(p.abs()));
        let mut merged: Vec<f64> = Vec::with_capacity(pts.len());
        for p in pts {
            match merged.last() {
                Some(&last) if p - last <= min_gap => {}
                _ => merged.push(p),
            }
        }
        merged
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    // Largest error first; ties broken by position so the order is total.
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kron = K21_WEIGHTS[10] * fc;
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = half * K21_NODES[j];
        let pair = f(mid - dx) + f(mid + dx);
        kron += K21_WEIGHTS[j] * pair;
        if j % 2 == 1 {
            gauss += G10_WEIGHTS[j / 2] * pair;
        }
    }
    let value = kron * half;
    let error = ((kron - gauss) * half).abs();
    Panel { a, b, value, error }
}

fn adaptive_gk<F: Fn(f64) -> f64>(
    f: &F,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64> {
    let mut heap: BinaryHeap<Panel> = breakpoints
        .windows(2)
        .map(|w| gauss_kronrod(f, w[0], w[1]))
        .collect();
    let total = |heap: &BinaryHeap<Panel>| -> (f64, f64) {
        let mut panels: Vec<&Panel> = heap.iter().collect();
        panels.sort_by(|p, q| p.a.total_cmp(&q.a));
        panels
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error))
    };
    let (mut value, mut error) = total(&heap);
    let mut previous = f64::NAN;
    while error > spec.tolerance(value) {
        if !value.is_finite() {
            return Err(Error::QuadratureNonConvergence {
                last: value,
                previous,
            });
        }
        if heap.len() >= spec.max_panels {
            return Err(Error::QuadratureNonConvergence {
                last: value,
                previous,
            });
        }
        let worst = heap.pop().expect("at least one panel");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // The panel cannot be split further in floating point.
            return Err(Error::QuadratureNonConvergence {
                last: value,
                previous,
            });
        }
        let left = gauss_kronrod(f, worst.a, m);
        let right = gauss_kronrod(f, m, worst.b);
        previous = value;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // Refresh the running sums now and then to avoid drift.
        if heap.len().is_multiple_of(64) {
            (value, error) = total(&heap);
        }
    }
    Ok(total(&heap).0)
}

/// `int f` over the hull of the declared windows.
pub fn integrate_line<F: Fn(f64) -> f64>(f: F, spec: &QuadratureSpec) -> Result<f64> {
    match spec.rule {
        QuadratureRule::GaussKronrod => {
            spec.validate()?;
            adaptive_gk(&f, &spec.breakpoints(), spec)
        }
        QuadratureRule::Simpson => integrate_line_simpson(f, spec),
    }
}

/// `int_a^b f`, seeded with the windows' breakpoints that fall inside `(a, b)`.
/// `spec.windows` may be empty, in which case `[a, b]` is cut into 16 panels.
pub fn integrate_interval<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    spec.validate_tolerances()?;
    spec.windows.iter().try_for_each(Window::validate)?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid(
            "interval",
            format!("endpoints must be finite, got [{a}, {b}]"),
        ));
    }
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate_interval(f, b, a, spec).map(|v| -v);
    }
    let mut pts = vec![a, b];
    if spec.windows.is_empty() {
        pts.extend((1..16).map(|i| a + (b - a) * i as f64 / 16.0));
    } else {
        pts.extend(spec.breakpoints().into_iter().filter(|&p| p > a && p < b));
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    adaptive_gk(&f, &pts, spec)
}

/// `int f` over `[pts[0], pts[last]]` with the given panel breakpoints, for
/// integrands that are only piecewise smooth (kinks at the breakpoints).
pub fn integrate_breakpoints<F: Fn(f64) -> f64>(
    f: F,
    pts: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64> {
    spec.validate_tolerances()?;
    let mut pts: Vec<f64> = pts.to_vec();
    if pts.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("breakpoints", "must be finite"));
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    if pts.len() < 2 {
        return Ok(0.0);
    }
    let spec = QuadratureSpec {
        max_panels: spec.max_panels.max(4 * pts.len()),
        ..spec.clone()
    };
    adaptive_gk(&f, &pts, &spec)
}

/// Independent rule: adaptive Simpson with Richardson correction on the same
/// truncated domain. Used to cross-check the Gauss–Kronrod results.
pub fn integrate_line_simpson<F: Fn(f64) -> f64>(f: F, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    let pts = spec.breakpoints();
    let n_panels = (pts.len() - 1) as f64;
    let mut evals = 0usize;
    let budget = 2_000_000usize;
    let mut sum = 0.0;
    let mut rough = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        rough += (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    }
    let tol = spec.tolerance(rough) / n_panels / 4.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        sum += simpson_rec(&f, a, b, fa, fm, fb, whole, tol, 48, &mut evals);
        if evals > budget {
            return Err(Error::QuadratureNonConvergence {
                last: sum,
                previous: rough,
            });
        }
    }
    Ok(sum)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    evals: &mut usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    *evals += 2;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, evals)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, evals)
}

/// Trapezoid rule for uniformly spaced samples.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            dx * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Trapezoid integral of a field over its grid.
pub fn integrate_grid(field: &Field) -> f64 {
    trapezoid(field.values(), field.grid().dx())
}
