//! Experiment configuration: one TOML file with a section per component.

use std::path::{Path, PathBuf};

use mburgers_core::{
    BoundaryCondition, Grid, InitialCondition, ModelParams, QuadratureRule, QuadratureSpec, Scheme,
    SolverConfig, TemplateParams,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub c: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { c: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateSection {
    pub gamma: f64,
    #[serde(rename = "M")]
    pub m: f64,
}

impl Default for TemplateSection {
    fn default() -> Self {
        TemplateSection {
            gamma: 0.45,
            m: 64.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Half-width `L` of the domain `[-L, L]`.
    #[serde(rename = "L")]
    pub half_width: f64,
    pub nx: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            half_width: 320.0,
            nx: 12801,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub scheme: Scheme,
    pub bc: BoundaryCondition,
    /// Spacing of the stored trajectory used by `decompose` and `verify`.
    pub snapshot_interval: f64,
    /// Times at which fields are written out.
    pub export_times: Vec<f64>,
    /// Optional runtime monitor on the outer 5% of the grid.
    pub boundary_guard_tol: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            dt: 0.01,
            t_final: 20.0,
            scheme: Scheme::ImexCn,
            bc: BoundaryCondition::DirichletZero,
            snapshot_interval: 0.05,
            export_times: vec![0.0, 1.0, 2.0, 5.0, 10.0, 20.0],
            boundary_guard_tol: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSection {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
    pub rule: QuadratureRule,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        let q = QuadratureSpec::default();
        QuadratureSection {
            abs_tol: q.abs_tol,
            rel_tol: q.rel_tol,
            max_panels: q.max_panels,
            rule: q.rule,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub template: TemplateSection,
    pub initial: InitialCondition,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub quadrature: QuadratureSection,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelSection::default(),
            template: TemplateSection::default(),
            initial: InitialCondition::Gaussian {
                amplitude: 0.05,
                width: 1.0,
            },
            grid: GridSection::default(),
            solver: SolverSection::default(),
            quadrature: QuadratureSection::default(),
            output: OutputSection::default(),
        }
    }
}

/// Validated objects built from a configuration.
#[derive(Debug, Clone)]
pub struct Setup {
    pub params: ModelParams,
    pub tparams: TemplateParams,
    pub initial: InitialCondition,
    pub grid: Grid,
    pub quad: QuadratureSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    /// Re-validates every component and the domain guard
    /// `L >= cT + 8 sqrt(M(T+1))`.
    pub fn validate(&self) -> Result<Setup, CliError> {
        let params = ModelParams::new(self.model.c)?;
        let tparams = TemplateParams::new(self.template.gamma, self.template.m)?;
        self.initial.validate()?;
        let grid = Grid::new(self.grid.half_width, self.grid.nx)?;
        let mut quad = QuadratureSpec::new(self.quadrature.abs_tol, self.quadrature.rel_tol)?;
        quad.max_panels = self.quadrature.max_panels;
        quad.rule = self.quadrature.rule;
        if quad.max_panels == 0 {
            return Err(CliError::Validation(
                "quadrature.max_panels must be positive".into(),
            ));
        }
        let s = &self.solver;
        if !(s.snapshot_interval > 0.0 && s.snapshot_interval.is_finite()) {
            return Err(CliError::Validation(format!(
                "solver.snapshot_interval must be > 0, got {}",
                s.snapshot_interval
            )));
        }
        if let Some(&t) = s
            .export_times
            .iter()
            .find(|&&t| !(0.0..=s.t_final).contains(&t))
        {
            return Err(CliError::Validation(format!(
                "solver.export_times: {t} lies outside [0, T = {}]",
                s.t_final
            )));
        }
        let (c, m, t) = (self.model.c, self.template.m, s.t_final);
        let need = c * t + 8.0 * (m * (t + 1.0)).sqrt();
        if self.grid.half_width < need {
            return Err(CliError::Validation(format!(
                "domain guard L >= cT + 8 sqrt(M(T+1)) violated: L = {} < {need:.6}",
                self.grid.half_width
            )));
        }
        let setup = Setup {
            params,
            tparams,
            initial: self.initial,
            grid,
            quad,
        };
        self.solver_config(&setup.grid, Vec::new())
            .validate(&setup.params)?;
        Ok(setup)
    }

    pub fn solver_config(&self, grid: &Grid, snapshot_times: Vec<f64>) -> SolverConfig {
        let s = &self.solver;
        let mut config = SolverConfig::new(grid.clone(), s.dt, s.t_final);
        config.scheme = s.scheme;
        config.bc = s.bc;
        config.snapshot_times = snapshot_times;
        config.boundary_guard_tol = s.boundary_guard_tol;
        config
    }

    /// Snapshot schedule `0, interval, ..., T`.
    pub fn uniform_snapshots(&self, grid: &Grid) -> SolverConfig {
        self.solver_config(grid, Vec::new())
            .with_uniform_snapshots(self.solver.snapshot_interval)
    }

    /// Export times plus `T`, sorted and deduplicated.
    pub fn export_schedule(&self) -> Vec<f64> {
        let mut times = self.solver.export_times.clone();
        times.push(self.solver.t_final);
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let d = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&d.to_toml()).unwrap();
        assert_eq!(back, d);
        d.validate().unwrap();
    }

    #[test]
    fn partial_files_take_defaults() {
        let cfg = ExperimentConfig::from_toml("[model]\nc = 0.5\n").unwrap();
        assert_eq!(cfg.model.c, 0.5);
        assert_eq!(cfg.grid, GridSection::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("[model]\nspeed = 1.0\n").is_err());
    }

    #[test]
    fn guard_inequality_names_itself() {
        let mut cfg = ExperimentConfig::default();
        cfg.grid.half_width = 100.0;
        cfg.grid.nx = 4001;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("L >= cT + 8 sqrt(M(T+1))"), "{err}");
    }

    #[test]
    fn component_invariants_are_rechecked() {
        let mut cfg = ExperimentConfig::default();
        cfg.template.gamma = 0.6;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.solver.dt = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.solver.export_times = vec![30.0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn initial_condition_kinds_parse() {
        let cfg = ExperimentConfig::from_toml(
            "[initial]\nkind = \"sech_bump\"\namplitude = 0.1\nwidth = 2.0\n",
        )
        .unwrap();
        assert_eq!(
            cfg.initial,
            InitialCondition::SechBump {
                amplitude: 0.1,
                width: 2.0
            }
        );
        let cfg = ExperimentConfig::from_toml("[initial]\nkind = \"zero\"\n").unwrap();
        assert!(cfg.initial.is_zero());
    }
}
