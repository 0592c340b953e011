use nslimit::diagnostics::relative_energy;
use nslimit::domain::{resolve_strip, ChannelGrid, VectorField};
use nslimit::exec::Execution;
use nslimit::harness::{fit_order, Config};
use nslimit::layer::CutoffProfile;
use nslimit::solver::{BoundaryCondition, FluidField, Model, Solver};
use nslimit::tensor::{stress, stress_contraction, Tensor, ViscosityParams};
use nslimit::thermo::{relative_entropy, GasLaw};
use proptest::prelude::*;

fn smooth_state(g: &ChannelGrid, a: f64, b: f64, k: f64) -> FluidField {
    let mut u = VectorField::zeros(g);
    let mut rho = vec![0.0; g.cells()];
    for (c, r) in rho.iter_mut().enumerate() {
        let (x, y) = (g.x_center(c % g.nx()), g.y_center(g.row_of(c)));
        let s = (2.0 * std::f64::consts::PI * k * x).sin();
        *r = 1.0 + a * s * (std::f64::consts::PI * y).cos();
        u.x[c] = b * (std::f64::consts::PI * y).sin();
        u.y[c] = 0.5 * b * s * (std::f64::consts::PI * y).sin();
    }
    FluidField::from_primitive(rho, &u)
}

fn model(gamma: f64, eps: f64, beta: Option<f64>) -> Model {
    let bc = match beta {
        Some(b) => BoundaryCondition::navier(b).unwrap(),
        None => BoundaryCondition::no_slip(),
    };
    let visc = ViscosityParams::new(1.0, 0.2, eps, bc.beta).unwrap();
    Model::new(GasLaw::new(gamma).unwrap(), visc, bc).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn relative_entropy_is_nonnegative(gamma in 1.05f64..4.0, rho in 0.0f64..10.0, r in 0.01f64..10.0) {
        let law = GasLaw::new(gamma).unwrap();
        let h = relative_entropy(rho, r, law).unwrap();
        prop_assert!(h >= 0.0);
        prop_assert!(relative_entropy(r, r, law).unwrap().abs() <= 1e-12 * r.powf(gamma).max(1.0));
    }

    #[test]
    fn stress_pairing_is_nonnegative(
        mu in 0.001f64..10.0,
        eta in 0.0f64..10.0,
        g in proptest::array::uniform3(proptest::array::uniform3(-5.0f64..5.0)),
    ) {
        let visc = ViscosityParams::new(mu, eta, 1.0, 0.0).unwrap();
        let t = Tensor(g);
        let s = stress_contraction(&t, &visc);
        prop_assert!(s >= -1e-12 * mu * t.norm_sq());
        let pairing = stress(&t, &visc).dot(&t);
        prop_assert!((s - pairing).abs() <= 1e-12 * (mu + eta) * t.norm_sq().max(1.0));
    }

    #[test]
    fn relative_energy_vanishes_only_on_the_diagonal(a in 0.0f64..0.5, b in -1.0f64..1.0, shift in 0.01f64..0.3) {
        let g = ChannelGrid::uniform(1.0, 8, 8).unwrap();
        let law = GasLaw::new(1.4).unwrap();
        let s = smooth_state(&g, a, b, 1.0);
        let u = s.velocity();
        prop_assert!(relative_energy(&s, &s.rho, &u, &g, law).unwrap().abs() <= 1e-14);
        let r: Vec<f64> = s.rho.iter().map(|v| v + shift).collect();
        prop_assert!(relative_energy(&s, &r, &u, &g, law).unwrap() > 0.0);
    }

    #[test]
    fn steps_conserve_mass(a in 0.0f64..0.3, b in -0.5f64..0.5, k in 1u32..3, beta in proptest::option::of(0.0f64..2.0)) {
        let g = ChannelGrid::build(1.0, 8, 16, 2.0).unwrap();
        let m = model(5.0 / 3.0, 0.01, beta);
        let mut s = smooth_state(&g, a, b, k as f64);
        let mut solver = Solver::new(g.clone(), m, Execution::Sequential).unwrap();
        let m0 = s.mass(&g);
        for n in 0..20 {
            let dt = solver.stable_dt(&s);
            solver.step(&mut s, n as f64 * dt, dt).unwrap();
        }
        prop_assert!((s.mass(&g) - m0).abs() <= 1e-12 * m0);
        prop_assert!(s.rho.iter().all(|r| *r > 0.0));
    }

    #[test]
    fn sequential_and_parallel_steps_agree(a in 0.0f64..0.3, b in -0.5f64..0.5) {
        let g = ChannelGrid::build(1.0, 8, 16, 2.0).unwrap();
        let m = model(1.4, 0.01, None);
        let s0 = smooth_state(&g, a, b, 1.0);
        let mut out = Vec::new();
        for exec in [Execution::Sequential, Execution::Parallel] {
            let mut s = s0.clone();
            let mut solver = Solver::new(g.clone(), m, exec).unwrap();
            for _ in 0..5 {
                let dt = solver.stable_dt(&s);
                solver.step(&mut s, 0.0, dt).unwrap();
            }
            out.push(s);
        }
        prop_assert_eq!(&out[0], &out[1]);
    }

    #[test]
    fn resolved_strips_meet_the_rule(eps in 5e-4f64..1e-2, c in 1.0f64..8.0, cells in 4usize..12) {
        let width = c * eps;
        let g = resolve_strip(1.0, 4, 128, width, cells).unwrap();
        prop_assert!(g.check_resolves(width, cells).is_ok());
        prop_assert!(g.wall_height() <= width / cells as f64 * (1.0 + 1e-9));
    }

    #[test]
    fn cutoff_profiles_stay_in_range(r in 0.0f64..2.0) {
        for p in [CutoffProfile::Quintic, CutoffProfile::Cosine] {
            let v = p.xi(r);
            prop_assert!((0.0..=1.0).contains(&v));
            if r >= 1.0 {
                prop_assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn fit_recovers_power_laws(slope in -2.0f64..2.0, coef in 0.01f64..100.0) {
        let pts: Vec<(f64, f64)> = (0..5).map(|k| {
            let e = 1e-2 / 2f64.powi(k);
            (e, coef * e.powf(slope))
        }).collect();
        let fit = fit_order(&pts).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
    }

    #[test]
    fn config_round_trips(n in 1usize..6, start in 1e-3f64..1e-1, ratio in 1.1f64..3.0, nx in 1usize..200) {
        let mut cfg = Config::new(nslimit::diagnostics::Mode::Navier);
        cfg.sweep.eps_list = (0..n).map(|k| start / ratio.powi(k as i32)).collect();
        cfg.grid.nx = nx;
        let text = cfg.to_toml().unwrap();
        prop_assert_eq!(Config::from_toml(&text).unwrap(), cfg);
    }
}
