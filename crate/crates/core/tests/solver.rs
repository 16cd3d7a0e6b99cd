use std::path::PathBuf;
use std::sync::Arc;

use monosim::config::{parse_config, serialize_config};
use monosim::dmdr::{dmdr_step, iterate, residual, splitting_step};
use monosim::init::{SeededUniform, SingleHarmonic};
use monosim::lossless::Interconnect;
use monosim::netbuild::Discretization;
use monosim::reference::{backward_euler_integrate, steady_state_extract};
use monosim::resistive::{MixedMonotoneResistive, ScalarChannel};
use monosim::signal::{circular_align, PeriodicSignal};
use monosim::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MATCHED_STEP: f64 = 0.099_696_829_909;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn harmonic(max_iterations: usize) -> DmdrConfig {
    DmdrConfig {
        alpha: 0.1,
        max_iterations,
        tolerance: 1e-6,
        init: Arc::new(SingleHarmonic { amplitude: 1.0 }),
    }
}

fn random(rng: &mut ChaCha8Rng, p: &Problem) -> StackedTrajectory {
    let data = (0..p.channels() * p.num_samples())
        .map(|_| rng.gen_range(-3.0..3.0))
        .collect();
    StackedTrajectory::from_data(p.channels(), p.num_samples(), p.sample_step(), data).unwrap()
}

/// Two resistively loaded cells with `M2 = 0`: a plain monotone inclusion.
fn monotone_problem(n: usize) -> Problem {
    let lossless = LosslessOperator::new(vec![1.0, 2.0], vec![5.0, 3.0], Interconnect::identity(2)).unwrap();
    let resistive = MixedMonotoneResistive::new(
        vec![
            ScalarChannel::CubicPlusLinear { conductance: 0.5 },
            ScalarChannel::CubicPlusLinear { conductance: 0.0 },
            ScalarChannel::Linear { resistance: 1.0 },
            ScalarChannel::Linear { resistance: 0.2 },
        ],
        DMatrix::zeros(4, 4),
    )
    .unwrap();
    Problem::new(lossless, resistive, n, 0.1).unwrap()
}

#[test]
fn douglas_rachford_is_nonexpansive_for_monotone_problems() {
    let p = monotone_problem(32);
    assert!(p.m2_is_monotone());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for alpha in [0.05, 0.5, 2.0] {
        let f = p.setup_resolvent(alpha).unwrap();
        for _ in 0..20 {
            let (a, b) = (random(&mut rng, &p), random(&mut rng, &p));
            let (_, ta) = dmdr_step(&p, &f, &a, alpha).unwrap();
            let (_, tb) = dmdr_step(&p, &f, &b, alpha).unwrap();
            assert!(ta.distance(&tb) <= a.distance(&b) * (1.0 + 1e-12));
        }
    }
}

#[test]
fn monotone_problem_converges_to_zero() {
    let p = monotone_problem(64);
    let cfg = DmdrConfig { alpha: 1.0, ..harmonic(5000) };
    let (x, rep) = solve(&p, &cfg).unwrap();
    assert!(rep.converged);
    assert!(x.norm() < 1e-3, "{}", x.norm());
}

#[test]
fn zero_is_a_fixed_point_of_the_fhn_step() {
    let p = build_fhn_cell(CellParams::NOMINAL, 64, 0.1).unwrap();
    let f = p.setup_resolvent(0.1).unwrap();
    let (x, z) = dmdr_step(&p, &f, &p.zeros(), 0.1).unwrap();
    assert_eq!(x.norm(), 0.0);
    assert_eq!(z.norm(), 0.0);
    assert_eq!(residual(&p, &p.zeros()).unwrap(), 0.0);
}

#[test]
fn single_iteration_is_reported() {
    let p = build_fhn_cell(CellParams::NOMINAL, 64, 0.1).unwrap();
    let (_, rep) = solve(&p, &harmonic(1)).unwrap();
    assert_eq!(rep.iterations, 1);
    assert!(!rep.converged);
    assert_eq!(rep.residual_history.len(), 1);
    assert!(!rep.warnings.is_empty());
}

#[test]
fn iterate_agrees_with_repeated_steps() {
    let p = build_fhn_cell(CellParams::NOMINAL, 40, 0.1).unwrap();
    let f = p.setup_resolvent(0.1).unwrap();
    let z0 = random(&mut ChaCha8Rng::seed_from_u64(1), &p);
    let out = iterate(&f, p.resistive(), z0.clone(), 0.1, 0.0, 7).unwrap();
    let mut z = z0;
    for _ in 0..7 {
        z = splitting_step(&f, p.resistive(), &z, 0.1).unwrap().1;
    }
    assert_eq!(out.iterations, 7);
    assert_eq!(out.z, z);
}

#[test]
fn solves_are_bit_identical() {
    let p = build_fhn_cell(CellParams::NOMINAL, 128, 0.1).unwrap();
    let cfg = DmdrConfig {
        max_iterations: 200,
        init: Arc::new(SeededUniform { seed: 9, amplitude: 1.0 }),
        ..harmonic(0)
    };
    let (a, ra) = solve(&p, &cfg).unwrap();
    let (b, rb) = solve(&p, &cfg).unwrap();
    assert_eq!(a.as_slice(), b.as_slice());
    assert_eq!(ra.residual_history, rb.residual_history);
}

#[test]
fn matched_cell_converges_to_the_backward_euler_orbit() {
    let p = build_fhn_cell(CellParams::NOMINAL, 556, MATCHED_STEP).unwrap();
    let (x, rep) = solve(&p, &harmonic(20_000)).unwrap();
    assert!(rep.converged, "{:?}", rep.residual_history.last());
    assert!(rep.final_residual <= 100.0 * rep.tolerance, "{}", rep.final_residual);
    let v = x.signal(0).unwrap();
    assert!(v.peak_to_peak() >= 1.0);

    let spec = NetworkSpec::single(CellParams::NOMINAL, Discretization::new(556, MATCHED_STEP));
    let run = backward_euler_integrate(&spec, MATCHED_STEP, 8.0 * 556.0 * MATCHED_STEP, &[1.0, 0.0]).unwrap();
    let ss = steady_state_extract(&run, 556, MATCHED_STEP).unwrap();
    let reference = PeriodicSignal::new(ss.channels[0].samples().to_vec(), MATCHED_STEP).unwrap();
    let (_, err) = circular_align(&reference, &v).unwrap();
    assert!(err <= 0.05, "{err}");
}

#[test]
fn shipped_single_config_is_the_nominal_cell() {
    let text = std::fs::read_to_string(configs().join("fhn_single.json")).unwrap();
    let cfg = parse_config(&text).unwrap();
    assert_eq!(cfg.spec.cells, vec![CellParams::NOMINAL]);
    assert_eq!(cfg.spec.discretization.num_samples, 556);
    assert_eq!(cfg.spec.discretization.sample_step, 0.1);
    let solver = cfg.dmdr_config(None).unwrap();
    assert_eq!((solver.alpha, solver.tolerance, solver.max_iterations), (0.1, 1e-6, 20_000));
    let again = parse_config(&serialize_config(&cfg.document)).unwrap();
    assert_eq!(again.document, cfg.document);
}

#[test]
fn shipped_network_config_samples_within_range() {
    let text = std::fs::read_to_string(configs().join("fhn_network_100.json")).unwrap();
    let cfg = parse_config(&text).unwrap();
    let spec = &cfg.spec;
    assert_eq!(spec.len(), 100);
    for c in &spec.cells {
        assert!((0.8..=1.2).contains(&c.capacitance));
        assert!((16.0..=24.0).contains(&c.inductance));
        assert!((0.8..=1.2).contains(&c.resistance));
    }
    for i in 0..100 {
        assert_eq!(spec.coupling_resistance(i, i), 0.0);
        for j in 0..100 {
            if i != j {
                let r = spec.coupling_resistance(i, j);
                assert!((4.0..=6.0).contains(&r), "{r}");
                assert_eq!(r, spec.coupling_resistance(j, i));
            }
        }
    }
    let p = build_network(spec).unwrap();
    assert_eq!(p.channels(), 200);
    assert!(p.m2_is_monotone());
    let again = parse_config(&serialize_config(&cfg.document)).unwrap();
    assert_eq!(again.spec, cfg.spec);
}

#[test]
fn built_operators_annihilate_the_backward_euler_orbit() {
    // A converged backward-Euler trajectory on the matched grid satisfies
    // the discrete inclusion, so the residual of the extracted period is
    // small up to interpolation error.
    let spec = NetworkSpec::single(CellParams::NOMINAL, Discretization::new(556, MATCHED_STEP));
    let run = backward_euler_integrate(&spec, MATCHED_STEP, 8.0 * 556.0 * MATCHED_STEP, &[1.0, 0.0]).unwrap();
    let ss = steady_state_extract(&run, 556, MATCHED_STEP).unwrap();
    let x = StackedTrajectory::from_channels(
        ss.channels.iter().map(|c| c.samples().to_vec()).collect(),
        MATCHED_STEP,
    )
    .unwrap();
    let p = build_network(&spec).unwrap();
    let r = residual(&p, &x).unwrap();
    assert!(r <= 1e-2, "{r}");
    assert!(residual(&p, &x.scaled(0.5)).unwrap() > 10.0 * r);
}
