//! End-to-end oracle suites: dense resolvent equivalence, prox bisection
//! equivalence, and the AB2 order check.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lossless::{LosslessOperator, Resolvent};
use crate::netbuild::{build_network, sample_heterogeneous, CellParams, Discretization, NetworkSpec, NominalValues};
use crate::reference::{ab2, dense_resolvent_oracle, prox_bisection_oracle};
use crate::resistive::{prox_channel, ScalarChannel};
use crate::trajectory::StackedTrajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    /// Largest observed deviation; for the order check, the distance of
    /// the ratio from 4.
    pub max_error: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ValidationOptions {
    /// Negates the interconnect on the frequency path only.
    pub inject_sign_flip: bool,
    pub seed: u64,
}

/// The single cell and a seeded heterogeneous 3-cell network.
pub fn oracle_operators(seed: u64) -> Result<Vec<(String, LosslessOperator)>> {
    let cell = build_network(&NetworkSpec::single(CellParams::NOMINAL, Discretization::new(8, 0.1)))?;
    let spec = sample_heterogeneous(NominalValues::STANDARD, 0.2, 3, seed, Discretization::new(8, 0.1))?;
    let net = build_network(&spec)?;
    Ok(vec![
        ("fhn-cell".into(), cell.lossless().clone()),
        ("3-cell network".into(), net.lossless().clone()),
    ])
}

/// Max abs difference between the frequency-path resolvent and the dense
/// oracle over `N in {8, 16, 32}`, `alpha in {0.05, 0.1, 0.5}`.
pub fn resolvent_suite(inputs: usize, opts: ValidationOptions) -> Result<SuiteResult> {
    const TOL: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let h = 0.1;
    for (_, op) in oracle_operators(opts.seed)? {
        let fast_op = if opts.inject_sign_flip {
            op.clone().with_interconnect(op.interconnect().negated())?
        } else {
            op.clone()
        };
        for n in [8usize, 16, 32] {
            for alpha in [0.05, 0.1, 0.5] {
                let dense = dense_resolvent_oracle(&op, alpha, n, h)?;
                let f = fast_op.setup_resolvent(alpha, n, h)?;
                for _ in 0..inputs {
                    let data: Vec<f64> = (0..op.channels() * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let x = StackedTrajectory::from_data(op.channels(), n, h, data.clone())?;
                    let y = f.apply_resolvent(&x)?;
                    let yd = &dense * DVector::from_vec(data);
                    let err = y
                        .as_slice()
                        .iter()
                        .zip(yd.iter())
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    worst = worst.max(err);
                    cases += 1;
                }
            }
        }
    }
    Ok(SuiteResult {
        name: "dense-resolvent".into(),
        passed: worst <= TOL,
        cases,
        max_error: worst,
        tolerance: TOL,
        detail: "frequency-path resolvent vs dense time-domain inverse".into(),
    })
}

/// Random channel kinds with `g, r` up to 20, `alpha in [0.01, 1]`,
/// `z in [-10, 10]`.
pub fn random_channel(rng: &mut ChaCha8Rng) -> ScalarChannel {
    if rng.gen_bool(0.7) {
        ScalarChannel::CubicPlusLinear {
            conductance: rng.gen_range(0.0..=20.0),
        }
    } else {
        ScalarChannel::Linear {
            resistance: rng.gen_range(0.0..=20.0),
        }
    }
}

pub fn prox_suite(cases: usize, opts: ValidationOptions) -> Result<SuiteResult> {
    const TOL: f64 = 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let kind = random_channel(&mut rng);
        let alpha = rng.gen_range(0.01..=1.0);
        let z = rng.gen_range(-10.0..=10.0);
        let fast = prox_channel(kind, alpha, z)?;
        let slow = prox_bisection_oracle(kind, alpha, z)?;
        worst = worst.max((fast - slow).abs());
    }
    Ok(SuiteResult {
        name: "prox-bisection".into(),
        passed: worst <= TOL,
        cases,
        max_error: worst,
        tolerance: TOL,
        detail: "guarded Newton prox vs bisection".into(),
    })
}

/// Error at `t = 1` of AB2 on `y' = -y`, `y(0) = 1`.
pub fn ab2_decay_error(h: f64) -> Result<f64> {
    let out = ab2(|_, y, dy| dy[0] = -y[0], &[1.0], h, 1.0)?;
    Ok((out[0][out[0].len() - 1] - (-1.0f64).exp()).abs())
}

pub fn ab2_order_suite() -> Result<SuiteResult> {
    let ratio = ab2_decay_error(0.01)? / ab2_decay_error(0.005)?;
    Ok(SuiteResult {
        name: "ab2-order".into(),
        passed: (3.5..=4.5).contains(&ratio),
        cases: 2,
        max_error: (ratio - 4.0).abs(),
        tolerance: 0.5,
        detail: format!("error ratio under step halving = {ratio:.4}"),
    })
}

pub fn run_all(opts: ValidationOptions) -> Result<Vec<SuiteResult>> {
    Ok(vec![
        resolvent_suite(10, opts)?,
        prox_suite(200, opts)?,
        ab2_order_suite()?,
    ])
}
