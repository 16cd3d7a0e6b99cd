use std::sync::Arc;

use approx::assert_relative_eq;
use monosim::derivative::{CirculantBackwardEuler, DerivativeModel, Spectral};
use monosim::lossless::Interconnect;
use monosim::reference::{dense_lossless_matrix, dense_resolvent_oracle, prox_bisection_oracle};
use monosim::resistive::{prox_channel, MixedMonotoneResistive, ScalarChannel};
use monosim::signal::{circular_align, from_spectrum, inner_product, to_spectrum, PeriodicSignal};
use monosim::{LosslessOperator, Resolvent, StackedTrajectory};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn model(spectral: bool) -> Arc<dyn DerivativeModel> {
    if spectral {
        Arc::new(Spectral)
    } else {
        Arc::new(CirculantBackwardEuler)
    }
}

/// Random lossless operator: `nv` capacitors, `ni` inductors, a signed
/// incidence pattern and either derivative model.
fn lossless_strategy() -> impl Strategy<Value = LosslessOperator> {
    (1usize..4, 1usize..4, any::<bool>()).prop_flat_map(|(nv, ni, spectral)| {
        (
            prop::collection::vec(0.2f64..5.0, nv),
            prop::collection::vec(0.2f64..30.0, ni),
            prop::collection::vec(-1i8..=1, nv * ni),
        )
            .prop_map(move |(cap, ind, entries)| {
                let ic = Interconnect::new(ni, nv, entries).unwrap();
                LosslessOperator::new(cap, ind, ic)
                    .unwrap()
                    .with_derivative(model(spectral))
            })
    })
}

fn trajectory(channels: usize, n: usize, h: f64, seed: &[f64]) -> StackedTrajectory {
    let data = (0..channels * n)
        .map(|k| seed[k % seed.len()] * ((k as f64 * 0.37).sin() + 0.3))
        .collect();
    StackedTrajectory::from_data(channels, n, h, data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn signal_round_trip(samples in prop::collection::vec(-100.0f64..100.0, 2..300), h in 0.001f64..2.0) {
        let s = PeriodicSignal::new(samples.clone(), h).unwrap();
        let back = from_spectrum(&to_spectrum(&s)).unwrap();
        let scale = samples.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in back.samples().iter().zip(&samples) {
            prop_assert!((a - b).abs() <= 1e-12 * scale * (samples.len() as f64).log2().max(1.0));
        }
    }

    #[test]
    fn parseval(samples in prop::collection::vec(-10.0f64..10.0, 2..200), h in 0.01f64..1.0) {
        let s = PeriodicSignal::new(samples.clone(), h).unwrap();
        let n = samples.len() as f64;
        let spec_energy: f64 = to_spectrum(&s).bins().iter().map(|c| c.norm_sqr()).sum::<f64>() / n;
        let time_energy: f64 = samples.iter().map(|v| v * v).sum();
        prop_assert!((spec_energy - time_energy).abs() <= 1e-10 * time_energy.max(1.0));
        let ip = inner_product(&s, &s).unwrap();
        prop_assert!((ip - time_energy * h).abs() <= 1e-10 * ip.max(1.0));
    }

    #[test]
    fn alignment_recovers_shift(samples in prop::collection::vec(-10.0f64..10.0, 8..128), shift in 0usize..1000) {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        prop_assume!(samples.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max) > 1e-3);
        let a = PeriodicSignal::new(samples, 0.1).unwrap();
        let b = a.rotated(shift % n);
        let (lag, err) = circular_align(&a, &b).unwrap();
        prop_assert!(err <= 1e-9, "lag {lag} err {err}");
    }

    #[test]
    fn resolvent_matches_dense_oracle(
        op in lossless_strategy(),
        n in 2usize..24,
        h in 0.01f64..1.0,
        alpha in 0.0f64..3.0,
        seed in prop::collection::vec(-5.0f64..5.0, 1..16),
    ) {
        let dense = dense_resolvent_oracle(&op, alpha, n, h).unwrap();
        let f = op.setup_resolvent(alpha, n, h).unwrap();
        let x = trajectory(op.channels(), n, h, &seed);
        let y = f.apply_resolvent(&x).unwrap();
        let yd = &dense * DVector::from_column_slice(x.as_slice());
        let scale = x.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in y.as_slice().iter().zip(yd.iter()) {
            prop_assert!((a - b).abs() <= 1e-9 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn forward_matches_dense_matrix(
        op in lossless_strategy(),
        n in 2usize..24,
        h in 0.01f64..1.0,
        seed in prop::collection::vec(-5.0f64..5.0, 1..16),
    ) {
        let x = trajectory(op.channels(), n, h, &seed);
        let y = op.apply_forward(&x).unwrap();
        let yd = dense_lossless_matrix(&op, n, h) * DVector::from_column_slice(x.as_slice());
        let scale = yd.amax().max(1.0);
        for (a, b) in y.as_slice().iter().zip(yd.iter()) {
            prop_assert!((a - b).abs() <= 1e-9 * scale, "{a} vs {b}");
        }
    }

    /// Spectral differentiation is skew: `<x, S x> = 0`. Backward Euler is
    /// monotone: `<x, S x> >= 0`.
    #[test]
    fn lossless_energy_sign(
        op in lossless_strategy(),
        n in 2usize..24,
        h in 0.01f64..1.0,
        seed in prop::collection::vec(-5.0f64..5.0, 1..16),
    ) {
        let x = trajectory(op.channels(), n, h, &seed);
        let sx = op.apply_forward(&x).unwrap();
        let e = x.dot(&sx);
        let scale = x.norm() * sx.norm() + 1e-300;
        if op.derivative().name() == "spectral" {
            prop_assert!(e.abs() <= 1e-10 * scale, "{e}");
        } else {
            prop_assert!(e >= -1e-10 * scale, "{e}");
        }
    }

    /// `J` of a monotone operator is firmly nonexpansive:
    /// `||Ju - Jv||^2 <= <Ju - Jv, u - v>`.
    #[test]
    fn resolvent_firmly_nonexpansive(
        op in lossless_strategy(),
        n in 2usize..24,
        alpha in 0.001f64..3.0,
        su in prop::collection::vec(-5.0f64..5.0, 1..16),
        sv in prop::collection::vec(-5.0f64..5.0, 1..16),
    ) {
        let h = 0.1;
        let f = op.setup_resolvent(alpha, n, h).unwrap();
        let u = trajectory(op.channels(), n, h, &su);
        let v = trajectory(op.channels(), n, h, &sv).scaled(-0.7);
        let d = f.apply_resolvent(&u).unwrap().lincomb(1.0, &f.apply_resolvent(&v).unwrap(), -1.0);
        let diff = u.lincomb(1.0, &v, -1.0);
        let lhs = d.dot(&d);
        prop_assert!(lhs <= d.dot(&diff) + 1e-9 * diff.dot(&diff).max(1.0));
    }

    #[test]
    fn prox_matches_bisection(
        cubic in any::<bool>(),
        coeff in 0.0f64..20.0,
        alpha in 0.001f64..2.0,
        z in -50.0f64..50.0,
    ) {
        let kind = if cubic {
            ScalarChannel::CubicPlusLinear { conductance: coeff }
        } else {
            ScalarChannel::Linear { resistance: coeff }
        };
        let x = prox_channel(kind, alpha, z).unwrap();
        let oracle = prox_bisection_oracle(kind, alpha, z).unwrap();
        prop_assert!((x - oracle).abs() <= 1e-10 * (1.0 + z.abs()), "{x} vs {oracle}");
        prop_assert!((x + alpha * kind.eval(x) - z).abs() <= 1e-9 * (1.0 + z.abs()));
    }

    #[test]
    fn prox_is_monotone_and_nonexpansive(
        coeff in 0.0f64..5.0,
        alpha in 0.01f64..2.0,
        a in -20.0f64..20.0,
        b in -20.0f64..20.0,
    ) {
        let kind = ScalarChannel::CubicPlusLinear { conductance: coeff };
        let pa = prox_channel(kind, alpha, a).unwrap();
        let pb = prox_channel(kind, alpha, b).unwrap();
        prop_assert!((pa - pb) * (a - b) >= -1e-12);
        prop_assert!((pa - pb).abs() <= (a - b).abs() + 1e-12);
    }
}

#[test]
fn negative_m2_eigenvalue_is_reported() {
    let m2 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let r = MixedMonotoneResistive::new(
        vec![
            ScalarChannel::Linear { resistance: 1.0 },
            ScalarChannel::Linear { resistance: 1.0 },
        ],
        m2,
    )
    .unwrap();
    assert_relative_eq!(r.check_m2_monotone().unwrap(), -1.0, epsilon = 1e-12);
}

#[test]
fn single_sample_signal_is_rejected() {
    assert!(PeriodicSignal::new(vec![1.0], 0.1).is_err());
}
