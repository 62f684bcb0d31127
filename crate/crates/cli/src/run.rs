//! The four experiment workflows. Each writes its artifacts through an
//! [`OutputWriter`] and finishes with `summary.json` holding the manifest.

use std::path::Path;

use mburgers_core::decomposition::evolve_decomposition;
use mburgers_core::exact::{asymptotic_constant, cole_hopf_solution};
use mburgers_core::export::OutputWriter;
use mburgers_core::solver::solve;
use mburgers_core::verify::{
    check_bfield_bound, check_bound_n, check_gtilde_bound, check_integral_equation_residual,
    check_lemma_ediff, check_lemma_tg, check_mass, check_p_identity, check_pde_residual,
    check_plateau, check_semigroup, check_theorem_decay, integral_equation_samples,
    lemma_ediff_samples, lemma_tg_samples, linspace, pde_samples, GtildeSamples,
};
use mburgers_core::{BoundReport, DecompositionState, Field, Grid, QuadratureSpec};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, Setup};
use crate::CliError;

pub const CHECK_NAMES: [&str; 12] = [
    "semigroup",
    "gtilde_bound",
    "bound_n",
    "bfield_bound",
    "lemma_tg",
    "lemma_ediff",
    "theorem_decay",
    "integral_equation",
    "p_identity",
    "plateau",
    "mass",
    "pde_residual",
];

/// Allowed band for the observed spatial order.
pub const ORDER_BAND: (f64, f64) = (1.7, 2.3);

fn time_label(t: f64) -> String {
    format!("{t}")
}

fn summary_base(config: &ExperimentConfig, command: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("c".into(), json!(config.model.c));
    m.insert("gamma".into(), json!(config.template.gamma));
    m.insert("M".into(), json!(config.template.m));
    m.insert("L".into(), json!(config.grid.half_width));
    m.insert("nx".into(), json!(config.grid.nx));
    m.insert("dt".into(), json!(config.solver.dt));
    m.insert("T".into(), json!(config.solver.t_final));
    m
}

/// Sup error against Cole–Hopf at time `t` on every `stride`-th grid point.
fn cole_hopf_column(
    field: &Field,
    t: f64,
    setup: &Setup,
    stride: usize,
) -> Result<Vec<(usize, f64)>, CliError> {
    let grid = field.grid();
    let idx: Vec<usize> = (0..grid.len()).step_by(stride).collect();
    let exact = idx
        .par_iter()
        .map(|&i| {
            if t == 0.0 {
                Ok(setup.initial.value(grid.x(i)))
            } else {
                cole_hopf_solution(&setup.initial, grid.x(i), t, &setup.params, &setup.quad)
            }
        })
        .collect::<mburgers_core::Result<Vec<f64>>>()?;
    Ok(idx.into_iter().zip(exact).collect())
}

/// Solver run at the export times, snapshot CSVs, and the Cole–Hopf comparison.
pub fn run_simulate(config: &ExperimentConfig, out: &Path) -> Result<Map<String, Value>, CliError> {
    let setup = config.validate()?;
    let times = config.export_schedule();
    let solver = config.solver_config(&setup.grid, times);
    let traj = solve(&setup.initial, &solver, &setup.params)?;
    let mut writer = OutputWriter::new(out)?;
    let mut errors = Vec::new();
    for (t, field) in &traj {
        let label = time_label(*t);
        let rows: Vec<Vec<f64>> = field
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| vec![setup.grid.x(i), v])
            .collect();
        writer.write_csv(&format!("snapshot_t{label}.csv"), &["x", "phi"], &rows)?;
        let exact = cole_hopf_column(field, *t, &setup, 1)?;
        let rows: Vec<Vec<f64>> = exact
            .iter()
            .map(|&(i, e)| {
                let num = field.values()[i];
                vec![setup.grid.x(i), num, e, (num - e).abs()]
            })
            .collect();
        let err = rows.iter().map(|r| r[3]).fold(0.0, f64::max);
        errors.push(err);
        writer.write_csv(
            &format!("cole_hopf_t{label}.csv"),
            &["x", "phi_numeric", "phi_exact", "abs_err"],
            &rows,
        )?;
    }
    let mut summary = summary_base(config, "simulate");
    summary.insert(
        "snapshot_times".into(),
        json!(traj.iter().map(|s| s.0).collect::<Vec<_>>()),
    );
    summary.insert("max_abs_err_per_snapshot".into(), json!(errors));
    summary.insert(
        "max_abs_err".into(),
        json!(errors.iter().copied().fold(0.0, f64::max)),
    );
    summary.insert("status".into(), json!("ok"));
    finish(writer, summary)
}

fn finish(
    writer: OutputWriter,
    mut summary: Map<String, Value>,
) -> Result<Map<String, Value>, CliError> {
    let manifest = writer.finish("summary.json", summary.clone())?;
    summary.insert("manifest".into(), json!(manifest));
    Ok(summary)
}

/// Solver trajectory on the uniform snapshot schedule plus its decomposition.
fn decomposition(
    config: &ExperimentConfig,
    setup: &Setup,
) -> Result<(Vec<(f64, Field)>, DecompositionState), CliError> {
    let solver = config.uniform_snapshots(&setup.grid);
    let traj = solve(&setup.initial, &solver, &setup.params)?;
    let decomp = evolve_decomposition(
        &traj,
        &setup.initial,
        &setup.params,
        &setup.tparams,
        &setup.quad,
    )?;
    Ok((traj, decomp))
}

/// Decomposition time series, summary scalars and remainder fields.
pub fn run_decompose(
    config: &ExperimentConfig,
    out: &Path,
) -> Result<Map<String, Value>, CliError> {
    let setup = config.validate()?;
    let (traj, d) = decomposition(config, &setup)?;
    let mut writer = OutputWriter::new(out)?;
    let series: Vec<Vec<f64>> = (0..d.len())
        .map(|i| {
            vec![
                d.times[i],
                d.p[i],
                d.pdot[i],
                d.h1[i],
                d.h2[i],
                d.sup_v_ratio[i],
                d.sup_vx_ratio[i],
                d.psi_projection[i],
                d.forcing_projection[i],
            ]
        })
        .collect();
    writer.write_csv(
        "series.csv",
        &[
            "t",
            "p",
            "pdot",
            "h1",
            "h2",
            "sup_v_ratio",
            "sup_vx_ratio",
            "psi_projection",
            "forcing_projection",
        ],
        &series,
    )?;
    for t in config.export_schedule() {
        let i = d.nearest_time_index(t);
        let rows: Vec<Vec<f64>> = (0..d.grid.len())
            .map(|j| {
                vec![
                    d.grid.x(j),
                    traj[i].1.values()[j],
                    d.v_fields[i].values()[j],
                    d.vx_fields[i].values()[j],
                ]
            })
            .collect();
        writer.write_csv(
            &format!("v_t{}.csv", time_label(d.times[i])),
            &["x", "phi", "v", "v_x"],
            &rows,
        )?;
    }
    let c = setup.params.c();
    let p_inf = d.p.last().copied().unwrap_or(0.0);
    let mut summary = summary_base(config, "decompose");
    summary.insert("p0".into(), json!(d.p0));
    summary.insert("p_infinity".into(), json!(p_inf));
    summary.insert(
        "phi_infinity_from_p".into(),
        json!((0.25 * c * p_inf).ln_1p()),
    );
    summary.insert(
        "phi_infinity_exact".into(),
        json!(asymptotic_constant(
            &setup.initial,
            &setup.params,
            &setup.quad
        )?),
    );
    summary.insert("epsilon".into(), float_or_null(d.epsilon));
    summary.insert(
        "sup_h1".into(),
        float_or_null(d.h1.last().copied().unwrap_or(0.0)),
    );
    summary.insert(
        "sup_h2".into(),
        float_or_null(d.h2.last().copied().unwrap_or(0.0)),
    );
    // the rate fit needs a trajectory reaching t = 20
    match check_theorem_decay(&d, &setup.tparams) {
        Ok(r) => {
            summary.insert(
                "eta".into(),
                float_or_null(r.extras.get("eta").copied().unwrap_or(f64::NAN)),
            );
            summary.insert(
                "r_squared".into(),
                float_or_null(r.extras.get("r_squared").copied().unwrap_or(f64::NAN)),
            );
            summary.insert("h1_tail_to_head".into(), float_or_null(r.value));
        }
        Err(e) => {
            summary.insert("eta".into(), Value::Null);
            summary.insert("eta_note".into(), json!(e.to_string()));
        }
    }
    summary.insert("status".into(), json!("ok"));
    finish(writer, summary)
}

fn float_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// Lazily computed decomposition shared by the trajectory-based checks.
struct Context<'a> {
    config: &'a ExperimentConfig,
    setup: Setup,
    decomp: Option<DecompositionState>,
}

impl Context<'_> {
    fn decomp(&mut self) -> Result<&DecompositionState, CliError> {
        if self.decomp.is_none() {
            self.decomp = Some(decomposition(self.config, &self.setup)?.1);
        }
        Ok(self.decomp.as_ref().expect("just computed"))
    }
}

fn refined(coarse: BoundReport, fine: &BoundReport) -> BoundReport {
    coarse.with_refinement(fine)
}

fn run_check(name: &str, ctx: &mut Context) -> Result<Vec<BoundReport>, CliError> {
    let params = ctx.setup.params;
    let tparams = ctx.setup.tparams;
    let quad = ctx.setup.quad.clone();
    let lemma_quad = QuadratureSpec::double_layer();
    let t_final = ctx.config.solver.t_final;
    let reports = match name {
        "semigroup" => {
            let xs = linspace(-10.0, 10.0, 21);
            let a = check_semigroup(&params, 2.0, 0.5, &xs, &quad)?;
            let b = check_semigroup(&params, 8.0, 3.0, &xs, &quad)?;
            let (va, vb) = (a.value, b.value);
            let worst = if vb > va { b } else { a };
            vec![worst
                .with_extra("residual_t2_s0.5", va)
                .with_extra("residual_t8_s3", vb)]
        }
        "gtilde_bound" => {
            let coarse = check_gtilde_bound(&params, &GtildeSamples::standard(0.5))?;
            vec![refined(
                coarse,
                &check_gtilde_bound(&params, &GtildeSamples::standard(0.25))?,
            )]
        }
        "bound_n" => vec![refined(
            check_bound_n(&params, 201)?,
            &check_bound_n(&params, 401)?,
        )],
        "bfield_bound" => vec![refined(
            check_bfield_bound(&params, 201)?,
            &check_bfield_bound(&params, 401)?,
        )],
        "lemma_tg" => {
            let ts = [1.0, 4.0, 16.0, 64.0];
            let coarse = check_lemma_tg(
                &params,
                &tparams,
                &lemma_tg_samples(&params, &tparams, &ts, 17),
                &lemma_quad,
            )?;
            let fine = check_lemma_tg(
                &params,
                &tparams,
                &lemma_tg_samples(&params, &tparams, &ts, 33),
                &lemma_quad,
            )?;
            coarse
                .into_iter()
                .zip(fine.iter())
                .map(|(a, b)| refined(a, b))
                .collect()
        }
        "lemma_ediff" => {
            let ts: Vec<f64> = [1.0, 2.0, 5.0, 10.0, 20.0]
                .into_iter()
                .filter(|&t| t <= t_final)
                .collect();
            let d = ctx.decomp()?;
            let coarse = check_lemma_ediff(
                d,
                &params,
                &tparams,
                &lemma_quad,
                &lemma_ediff_samples(d, &ts, 65),
            )?;
            let fine = check_lemma_ediff(
                d,
                &params,
                &tparams,
                &lemma_quad,
                &lemma_ediff_samples(d, &ts, 129),
            )?;
            coarse
                .into_iter()
                .zip(fine.iter())
                .map(|(a, b)| refined(a, b))
                .collect()
        }
        "theorem_decay" => vec![check_theorem_decay(ctx.decomp()?, &tparams)?],
        "integral_equation" => {
            let d = ctx.decomp()?;
            vec![check_integral_equation_residual(
                d,
                &params,
                &tparams,
                &quad,
                &integral_equation_samples(d),
            )?]
        }
        "p_identity" => vec![check_p_identity(ctx.decomp()?)?],
        "plateau" => vec![check_plateau(&params, &[25.0, 100.0], 2001)?],
        "mass" => vec![check_mass(
            &params,
            &[-5.0, 0.0, 5.0],
            &[0.5, 1.0, 10.0],
            &quad,
        )?],
        "pde_residual" => vec![check_pde_residual(&params, &pde_samples(100, 0.5, 5.0))?],
        other => return Err(unknown_check(other)),
    };
    Ok(reports)
}

fn unknown_check(name: &str) -> CliError {
    CliError::Validation(format!(
        "unknown check `{name}`; available: {}, all",
        CHECK_NAMES.join(", ")
    ))
}

/// Expands `all` and rejects empty or unknown names before any work is done.
pub fn resolve_checks(names: &[String]) -> Result<Vec<&'static str>, CliError> {
    if names.is_empty() {
        return Err(CliError::Validation(format!(
            "no checks given; usage: mburgers verify --config <path> --checks <name,...> (available: {}, all)",
            CHECK_NAMES.join(", ")
        )));
    }
    let mut out: Vec<&'static str> = Vec::new();
    for name in names {
        if name == "all" {
            out.extend(CHECK_NAMES);
        } else if let Some(&known) = CHECK_NAMES.iter().find(|&&n| n == name) {
            out.push(known);
        } else {
            return Err(unknown_check(name));
        }
    }
    let mut seen = Vec::new();
    out.retain(|n| {
        let fresh = !seen.contains(n);
        seen.push(n);
        fresh
    });
    Ok(out)
}

/// Runs the named checks, writing one JSON report per bound. Fails with a
/// tolerance error if any report misses its criterion.
pub fn run_verify(
    config: &ExperimentConfig,
    names: &[String],
    out: &Path,
) -> Result<Map<String, Value>, CliError> {
    let checks = resolve_checks(names)?;
    let setup = config.validate()?;
    let mut ctx = Context {
        config,
        setup,
        decomp: None,
    };
    let mut writer = OutputWriter::new(out)?;
    let parameters = json!({
        "c": config.model.c,
        "gamma": config.template.gamma,
        "M": config.template.m,
    });
    let mut summary = summary_base(config, "verify");
    let mut failed = Vec::new();
    let mut errored = Vec::new();
    for name in checks {
        match run_check(name, &mut ctx) {
            Ok(reports) => {
                for r in reports {
                    let passed = r.passed();
                    let mut object = serde_json::to_value(&r)
                        .map_err(|e| CliError::Numerical(e.to_string()))?
                        .as_object()
                        .cloned()
                        .unwrap_or_default();
                    object.insert("parameters".into(), parameters.clone());
                    object.insert("passed".into(), json!(passed));
                    writer.write_json(&format!("{}.json", r.name), &Value::Object(object))?;
                    summary.insert(format!("{}_passed", r.name), json!(passed));
                    summary.insert(
                        format!("{}_log10_value", r.name),
                        float_or_null(r.log10_value),
                    );
                    eprintln!("{} {}", if passed { "ok  " } else { "FAIL" }, r.summary());
                    if !passed {
                        failed.push(r.name.clone());
                    }
                }
            }
            Err(e @ CliError::Validation(_)) => return Err(e),
            Err(e) => {
                let message = e.to_string();
                eprintln!("ERR  {name}: {message}");
                writer.write_json(
                    &format!("{name}.json"),
                    &json!({ "name": name, "parameters": parameters, "error": message, "passed": false }),
                )?;
                summary.insert(format!("{name}_passed"), json!(false));
                errored.push(name.to_string());
            }
        }
    }
    summary.insert("failed".into(), json!(failed));
    summary.insert("errored".into(), json!(errored));
    let status = if !errored.is_empty() {
        "numerical_error"
    } else if !failed.is_empty() {
        "tolerance_failure"
    } else {
        "ok"
    };
    summary.insert("status".into(), json!(status));
    let summary = finish(writer, summary)?;
    if !errored.is_empty() {
        return Err(CliError::Numerical(format!(
            "checks failed to evaluate: {}",
            errored.join(", ")
        )));
    }
    if !failed.is_empty() {
        return Err(CliError::Tolerance(format!(
            "checks outside tolerance: {}",
            failed.join(", ")
        )));
    }
    Ok(summary)
}

/// Observed orders between successive refinements; `None` when an error is
/// zero and the ratio is meaningless.
pub fn observed_orders(errors: &[f64]) -> Option<Vec<f64>> {
    if errors.contains(&0.0) {
        return None;
    }
    Some(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

/// Solves at `dx`, `dx/2`, `dx/4` with `dt` halved alongside and compares
/// with Cole–Hopf at `T` on the coarse grid points.
pub fn run_convergence(
    config: &ExperimentConfig,
    out: &Path,
) -> Result<Map<String, Value>, CliError> {
    let setup = config.validate()?;
    let l = setup.grid.half_width();
    let t_final = config.solver.t_final;
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for level in 0..3u32 {
        let factor = 1usize << level;
        let grid = Grid::new(l, factor * (setup.grid.len() - 1) + 1)?;
        let mut solver = config.solver_config(&grid, vec![t_final]);
        solver.dt = config.solver.dt / factor as f64;
        let traj = solve(&setup.initial, &solver, &setup.params)?;
        let (_, field) = traj.last().expect("final snapshot");
        let err = cole_hopf_column(field, t_final, &setup, factor)?
            .into_iter()
            .map(|(i, e)| (field.values()[i] - e).abs())
            .fold(0.0, f64::max);
        errors.push(err);
        rows.push(vec![grid.dx(), solver.dt, err]);
    }
    let orders = observed_orders(&errors);
    for (k, row) in rows.iter_mut().enumerate() {
        let order = match (&orders, k) {
            (Some(o), k) if k > 0 => o[k - 1],
            _ => f64::NAN,
        };
        row.push(order);
    }
    let mut writer = OutputWriter::new(out)?;
    writer.write_csv(
        "convergence.csv",
        &["dx", "dt", "max_abs_err", "order"],
        &rows,
    )?;
    let mut summary = summary_base(config, "convergence");
    summary.insert("errors".into(), json!(errors));
    let verdict = match &orders {
        None => {
            eprintln!("order undefined: errors {errors:?}");
            summary.insert("orders".into(), Value::Null);
            summary.insert("status".into(), json!("order undefined"));
            Ok(())
        }
        Some(o) => {
            summary.insert("orders".into(), json!(o));
            let (lo, hi) = ORDER_BAND;
            if o.iter().all(|&v| (lo..=hi).contains(&v)) {
                summary.insert("status".into(), json!("ok"));
                Ok(())
            } else {
                summary.insert("status".into(), json!("order outside band"));
                Err(CliError::Tolerance(format!(
                    "observed orders {o:?} outside [{lo}, {hi}]"
                )))
            }
        }
    };
    let summary = finish(writer, summary)?;
    verdict.map(|_| summary)
}
