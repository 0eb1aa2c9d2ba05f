use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use structune::delay::wave_plant;
use structune::norms::{pole_region_violation, PoleGoal};
use structune::program::{evaluate, solve, Class, Program, Requirement, SolveOptions, SynthStatus};
use structune::ss::{lft_lower, Spectrum};
use structune::structure::{assemble, StructureSpec};
use structune::PartitionedPlant64;

const NOMINAL: [f64; 3] = [-1.049, -1.049, -0.05402];

fn wave_nominal() -> Program<f64> {
    let goal = PoleGoal::new(0.9, 0.9, 4.0).unwrap();
    let sched = PoleGoal::new(0.7, 0.9, 2.0).unwrap();
    Program::new(
        vec![wave_plant(3.0).unwrap()],
        StructureSpec::StaticGain { nu: 1, ny: 3 },
        vec![
            Requirement::poles(0, goal, Class::Soft),
            Requirement::poles(0, sched, Class::Soft),
            Requirement::poles(0, goal, Class::Hard),
        ],
    )
    .unwrap()
}

fn wave_scheduled(base: &[f64]) -> Program<f64> {
    let goal = PoleGoal::new(0.7, 0.9, 2.0).unwrap();
    let samples = vec![2.0, 2.5, 3.0, 3.5, 4.0];
    let models: Vec<PartitionedPlant64> = samples.iter().map(|&q| wave_plant(q).unwrap()).collect();
    let reqs = (0..models.len())
        .flat_map(|i| {
            [
                Requirement::poles(i, goal, Class::Soft),
                Requirement::poles(i, goal, Class::Hard),
            ]
        })
        .collect();
    Program::new(
        models,
        StructureSpec::PolynomialScheduled {
            base: DMatrix::from_row_slice(1, 3, base),
            degree: 2,
            q0: 3.0,
        },
        reqs,
    )
    .unwrap()
    .with_schedule(samples)
    .unwrap()
}

#[test]
fn wave_nominal_design_meets_goal() {
    let t0 = Instant::now();
    let prog = wave_nominal();
    let res = solve(&prog, &SolveOptions::default()).unwrap();
    eprintln!(
        "nominal: {:?} x={:?} f={} g={} cert={} in {:?}",
        res.status,
        res.x_star.x.as_slice(),
        res.f_star,
        res.g_star,
        res.certificate,
        t0.elapsed()
    );
    assert!(matches!(
        res.status,
        SynthStatus::LocalOptimum | SynthStatus::Feasible
    ));
    let k = assemble(&prog.structure, &res.x_star, None).unwrap();
    let clp = lft_lower(&prog.models[0], &k).unwrap();
    let (v, _) = pole_region_violation(
        &Spectrum::of_matrix(&clp.a).unwrap(),
        &PoleGoal::new(0.9, 0.9, 4.0).unwrap(),
    );
    assert!(v <= 0.0, "violation {v}");
    let sched = wave_scheduled(res.x_star.x.as_slice());
    let r2 = solve(&sched, &SolveOptions::default()).unwrap();
    eprintln!(
        "chained: {:?} x={:?} f={} g={}",
        r2.status,
        r2.x_star.x.as_slice(),
        r2.f_star,
        r2.g_star
    );
    assert!(r2.g_star <= 1.0);
}

#[test]
fn wave_scheduled_design_meets_goal() {
    let t0 = Instant::now();
    let prog = wave_scheduled(&NOMINAL);
    let res = solve(&prog, &SolveOptions::default()).unwrap();
    eprintln!(
        "scheduled: {:?} x={:?} f={} g={} cert={} in {:?}",
        res.status,
        res.x_star.x.as_slice(),
        res.f_star,
        res.g_star,
        res.certificate,
        t0.elapsed()
    );
    assert!(matches!(
        res.status,
        SynthStatus::LocalOptimum | SynthStatus::Feasible
    ));
    let goal = PoleGoal::new(0.7, 0.9, 2.0).unwrap();
    for (i, q) in [2.0, 2.5, 3.0, 3.5, 4.0].into_iter().enumerate() {
        let k = assemble(&prog.structure, &res.x_star, Some(q)).unwrap();
        let clp = lft_lower(&prog.models[i], &k).unwrap();
        let (v, _) = pole_region_violation(&Spectrum::of_matrix(&clp.a).unwrap(), &goal);
        assert!(v <= 0.0, "q={q} violation {v}");
    }
}

#[test]
fn published_gains_evaluate_feasible() {
    let prog = wave_nominal();
    let e = evaluate(
        &prog,
        &prog.params(DVector::from_row_slice(&NOMINAL)).unwrap(),
    )
    .unwrap();
    assert!(e.stable);
    assert!((e.g - 0.89219).abs() < 1e-3, "{}", e.g);
}
