use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nslimit::domain::ChannelGrid;
use nslimit::exec::Execution;
use nslimit::reference::{shear_flow, Profile};
use nslimit::solver::{initialize, BoundaryCondition, InitSpec, Model, Perturbation, Solver};
use nslimit::tensor::ViscosityParams;
use nslimit::thermo::GasLaw;

fn step(c: &mut Criterion) {
    let law = GasLaw::new(5.0 / 3.0).unwrap();
    let visc = ViscosityParams::new(1.0, 0.0, 1e-3, 0.0).unwrap();
    let model = Model::new(law, visc, BoundaryCondition::no_slip()).unwrap();
    let reference = shear_flow(Profile::from_name("sine").unwrap());
    let mut group = c.benchmark_group("ssp_rk2_step");
    for (nx, ny) in [(64, 128), (128, 256)] {
        let grid = ChannelGrid::build(1.0, nx, ny, 3.0).unwrap();
        let init = InitSpec {
            delta: 0.03,
            perturbation: Perturbation::default(),
        };
        let state0 = initialize(&init, &reference, &grid).unwrap();
        for exec in [Execution::Sequential, Execution::Parallel] {
            let mut solver = Solver::new(grid.clone(), model, exec).unwrap();
            let dt = solver.stable_dt(&state0);
            let id = BenchmarkId::new(format!("{exec:?}"), format!("{nx}x{ny}"));
            group.bench_with_input(id, &dt, |b, &dt| {
                let mut state = state0.clone();
                b.iter(|| solver.step(&mut state, 0.0, dt).unwrap());
            });
        }
    }
    group.finish();
}

criterion_group!(benches, step);
criterion_main!(benches);
