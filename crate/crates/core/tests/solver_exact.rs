use mburgers_core::decomposition::solve_p0;
use mburgers_core::exact::cole_hopf_solution;
use mburgers_core::solver::solve;
use mburgers_core::{Grid, InitialCondition, ModelParams, QuadratureSpec, SolverConfig};

fn final_error(phi0: &InitialCondition, params: &ModelParams, dx: f64) -> f64 {
    let grid = Grid::with_spacing(60.0, dx).unwrap();
    let config = SolverConfig::new(grid.clone(), dx / 4.0, 4.0);
    let traj = solve(phi0, &config, params).unwrap();
    let (t, field) = traj.last().unwrap();
    let quad = QuadratureSpec::default();
    // common points of the coarsest grid
    let stride = (0.1 / dx).round() as usize;
    (0..grid.len())
        .step_by(stride)
        .map(|i| {
            (field.values()[i] - cole_hopf_solution(phi0, grid.x(i), *t, params, &quad).unwrap())
                .abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn sech_data_at_slow_speed_converges_at_second_order() {
    let params = ModelParams::new(0.5).unwrap();
    let phi0 = InitialCondition::SechBump {
        amplitude: 0.2,
        width: 2.0,
    };
    let coarse = final_error(&phi0, &params, 0.1);
    let fine = final_error(&phi0, &params, 0.05);
    assert!(coarse <= 5e-3, "{coarse:e}");
    let order = (coarse / fine).log2();
    assert!(
        (order - 2.0).abs() <= 0.3,
        "order {order}: {coarse:e} -> {fine:e}"
    );
}

#[test]
fn p0_is_linear_in_small_amplitudes_for_sech_data() {
    let params = ModelParams::new(2.0).unwrap();
    let quad = QuadratureSpec::default();
    let base = InitialCondition::SechBump {
        amplitude: 0.05,
        width: 1.0,
    };
    let a = solve_p0(&base, &params, &quad).unwrap();
    let b = solve_p0(&base.scaled(0.5), &params, &quad).unwrap();
    assert!(a > 0.0);
    assert!((a / b - 2.0).abs() <= 0.2, "ratio {}", a / b);
    let neg = solve_p0(&base.scaled(-1.0), &params, &quad).unwrap();
    assert!(neg < 0.0);
}
