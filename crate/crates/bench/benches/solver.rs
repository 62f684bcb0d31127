use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mburgers_core::decomposition::pdot_solve;
use mburgers_core::solver::{solve, Stepper};
use mburgers_core::{Field, Grid, InitialCondition, ModelParams, SolverConfig};

fn solver(c: &mut Criterion) {
    let params = ModelParams::new(1.0).unwrap();
    let grid = Grid::new(320.0, 12801).unwrap();
    let config = SolverConfig::new(grid.clone(), 0.01, 1.0);
    let stepper = Stepper::new(&config, &params).unwrap();
    let phi = Field::from_fn(grid.clone(), |x| 0.05 * (-x * x).exp());
    c.bench_function("imex step, 12801 points", |b| {
        b.iter(|| stepper.step(black_box(&phi), 0.5).unwrap())
    });

    let small = SolverConfig::new(Grid::new(40.0, 801).unwrap(), 0.02, 1.0);
    let phi0 = InitialCondition::Gaussian {
        amplitude: 0.1,
        width: 1.0,
    };
    c.bench_function("solve to t = 1, 801 points", |b| {
        b.iter(|| solve(black_box(&phi0), &small, &params).unwrap())
    });

    let vx = Field::from_fn(grid, |x| -0.1 * x * (-x * x).exp());
    c.bench_function("pdot_solve", |b| {
        b.iter(|| pdot_solve(black_box(0.08), &vx, 2.0, &params).unwrap())
    });
}

criterion_group!(benches, solver);
criterion_main!(benches);
