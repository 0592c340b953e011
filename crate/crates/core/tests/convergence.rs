use nslimit::exec::Execution;
use nslimit::harness::spatial_order_study;
use nslimit::solver::{BoundaryCondition, Model};
use nslimit::tensor::ViscosityParams;
use nslimit::thermo::GasLaw;

#[test]
fn manufactured_viscous_solution_converges_at_second_order() {
    let law = GasLaw::new(5.0 / 3.0).unwrap();
    let visc = ViscosityParams::new(1.0, 0.0, 1e-2, 0.0).unwrap();
    let model = Model::new(law, visc, BoundaryCondition::no_slip()).unwrap();
    let study = spatial_order_study(model, &[32, 64, 128], 0.1, Execution::Parallel).unwrap();
    assert!(study.errors.windows(2).all(|w| w[1] < w[0]), "{study:?}");
    assert!(study.order >= 1.8, "{study:?}");
}

#[test]
fn spatial_study_needs_three_grids() {
    let law = GasLaw::new(1.4).unwrap();
    let visc = ViscosityParams::new(1.0, 0.0, 1e-2, 0.0).unwrap();
    let model = Model::new(law, visc, BoundaryCondition::no_slip()).unwrap();
    assert!(spatial_order_study(model, &[16, 32], 0.1, Execution::Sequential).is_err());
}
