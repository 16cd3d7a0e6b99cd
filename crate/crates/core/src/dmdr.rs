//! Difference-of-monotone Douglas-Rachford iteration for
//! `S(x) + M1(x) - M2(x) = 0`:
//!
//! ```text
//! x+ = J_{aS}(z)
//! z+ = z - x+ + J_{aM1}(2 x+ - z + a M2(x+))
//! ```
//!
//! `J_{aS}` runs in the frequency domain, `J_{aM1}` and `M2` in the time
//! domain.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::init::{Initializer, SeededUniform};
use crate::lossless::{FactorizedResolvent, LosslessOperator, Resolvent};
use crate::resistive::MixedMonotoneResistive;
use crate::trajectory::StackedTrajectory;

pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// A discretized periodic steady-state problem.
#[derive(Debug, Clone)]
pub struct Problem {
    lossless: LosslessOperator,
    resistive: MixedMonotoneResistive,
    num_samples: usize,
    sample_step: f64,
    m2_min_eigenvalue: f64,
}

impl Problem {
    pub fn new(
        lossless: LosslessOperator,
        resistive: MixedMonotoneResistive,
        num_samples: usize,
        sample_step: f64,
    ) -> Result<Self> {
        if lossless.channels() != resistive.channels() {
            return Err(Error::DimensionMismatch(format!(
                "lossless part has {} channels, resistive part has {}",
                lossless.channels(),
                resistive.channels()
            )));
        }
        if num_samples < 2 {
            return Err(invalid("num_samples", "must be at least 2"));
        }
        if !(sample_step > 0.0 && sample_step.is_finite()) {
            return Err(invalid("sample_step", "must be positive and finite"));
        }
        let m2_min_eigenvalue = resistive.check_m2_monotone()?;
        Ok(Self {
            lossless,
            resistive,
            num_samples,
            sample_step,
            m2_min_eigenvalue,
        })
    }

    pub fn lossless(&self) -> &LosslessOperator {
        &self.lossless
    }

    pub fn resistive(&self) -> &MixedMonotoneResistive {
        &self.resistive
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn sample_step(&self) -> f64 {
        self.sample_step
    }

    pub fn channels(&self) -> usize {
        self.lossless.channels()
    }

    pub fn period(&self) -> f64 {
        self.num_samples as f64 * self.sample_step
    }

    /// Smallest eigenvalue of `M2` on its support, measured at construction.
    pub fn m2_min_eigenvalue(&self) -> f64 {
        self.m2_min_eigenvalue
    }

    pub fn m2_is_monotone(&self) -> bool {
        self.m2_min_eigenvalue >= -1e-9
    }

    pub fn setup_resolvent(&self, alpha: f64) -> Result<FactorizedResolvent> {
        self.lossless
            .setup_resolvent(alpha, self.num_samples, self.sample_step)
    }

    pub fn zeros(&self) -> StackedTrajectory {
        StackedTrajectory::zeros(self.channels(), self.num_samples, self.sample_step)
    }
}

#[derive(Clone)]
pub struct DmdrConfig {
    pub alpha: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub init: Arc<dyn Initializer>,
}

impl fmt::Debug for DmdrConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DmdrConfig")
            .field("alpha", &self.alpha)
            .field("max_iterations", &self.max_iterations)
            .field("tolerance", &self.tolerance)
            .field("init", &self.init)
            .finish()
    }
}

impl DmdrConfig {
    /// Step size 0.1, tolerance 1e-6, 20 000 iterations, seeded-uniform
    /// init of amplitude 1.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            alpha: 0.1,
            max_iterations: 20_000,
            tolerance: DEFAULT_TOLERANCE,
            init: Arc::new(SeededUniform {
                seed,
                amplitude: 1.0,
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid("solver.alpha", "must be positive and finite"));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(invalid("solver.tolerance", "must be positive and finite"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("solver.max_iterations", "must be at least 1"));
        }
        Ok(())
    }
}

/// Structured caveats attached to a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolveWarning {
    /// `M2` has a negative eigenvalue on its support.
    NonMonotoneM2 { min_eigenvalue: f64 },
    /// The stopping rule never fired.
    NotConverged {
        iterations: usize,
        last_relative_change: f64,
    },
    /// The iterate left the finite range; the solve stopped early.
    NonFinite { iteration: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    /// Relative change `||z+ - z|| / max(||z||, 1e-12)` per iteration.
    pub residual_history: Vec<f64>,
    /// Inclusion residual of the returned trajectory, computed once.
    pub final_residual: f64,
    pub tolerance: f64,
    pub alpha: f64,
    pub m2_min_eigenvalue: f64,
    pub warnings: Vec<SolveWarning>,
    pub setup_seconds: f64,
    pub iterate_seconds: f64,
}

pub fn initialize(p: &Problem, cfg: &DmdrConfig) -> Result<StackedTrajectory> {
    cfg.init
        .initialize(p.channels(), p.num_samples, p.sample_step)
}

/// One DMDR step against an arbitrary linear resolvent for `S`.
pub fn splitting_step(
    resolvent: &dyn Resolvent,
    resistive: &MixedMonotoneResistive,
    z: &StackedTrajectory,
    alpha: f64,
) -> Result<(StackedTrajectory, StackedTrajectory)> {
    let x = resolvent.apply_resolvent(z)?;
    let cx = resistive.apply_m2(&x)?;
    let mut arg = x.lincomb(2.0, z, -1.0);
    for (a, c) in arg.as_mut_slice().iter_mut().zip(cx.as_slice()) {
        *a += alpha * c;
    }
    let bx = resistive.apply_m1_resolvent(alpha, &arg)?;
    let mut z_next = z.lincomb(1.0, &x, -1.0);
    for (zn, b) in z_next.as_mut_slice().iter_mut().zip(bx.as_slice()) {
        *zn += b;
    }
    Ok((x, z_next))
}

/// One DMDR step on `p` with its pre-factorized lossless resolvent.
pub fn dmdr_step(
    p: &Problem,
    f: &FactorizedResolvent,
    z: &StackedTrajectory,
    alpha: f64,
) -> Result<(StackedTrajectory, StackedTrajectory)> {
    splitting_step(f, &p.resistive, z, alpha)
}

/// `||S x + M1 x - M2 x|| / sqrt(entries)`.
pub fn residual(p: &Problem, x: &StackedTrajectory) -> Result<f64> {
    x.ensure_shape(p.channels(), p.num_samples)?;
    let s = p.lossless.apply_forward(x)?;
    let m1 = p.resistive.apply_m1(x)?;
    let m2 = p.resistive.apply_m2(x)?;
    let sum: f64 = s
        .as_slice()
        .iter()
        .zip(m1.as_slice())
        .zip(m2.as_slice())
        .map(|((a, b), c)| {
            let r = a + b - c;
            r * r
        })
        .sum();
    Ok((sum / x.len() as f64).sqrt())
}

/// Outcome of the bare fixed-point loop.
#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub x: StackedTrajectory,
    pub z: StackedTrajectory,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
    pub non_finite_at: Option<usize>,
}

/// Runs the DMDR loop from `z0` until the relative change of `z` drops below
/// `tolerance` or `max_iterations` steps have run.
pub fn iterate(
    resolvent: &dyn Resolvent,
    resistive: &MixedMonotoneResistive,
    z0: StackedTrajectory,
    alpha: f64,
    tolerance: f64,
    max_iterations: usize,
) -> Result<IterationOutcome> {
    let mut z = z0;
    let mut x = z.clone();
    let mut history = Vec::with_capacity(max_iterations.min(1 << 16));
    let mut converged = false;
    let mut non_finite_at = None;
    for j in 1..=max_iterations {
        let (x_next, z_next) = splitting_step(resolvent, resistive, &z, alpha)?;
        let change = z_next.distance(&z) / z.norm().max(1e-12);
        history.push(change);
        x = x_next;
        z = z_next;
        if !z.is_finite() || !change.is_finite() {
            non_finite_at = Some(j);
            break;
        }
        if change < tolerance {
            converged = true;
            break;
        }
    }
    Ok(IterationOutcome {
        x,
        z,
        iterations: history.len(),
        converged,
        history,
        non_finite_at,
    })
}

/// Factorizes the lossless resolvent once and iterates from the configured
/// initialization. Non-convergence is reported, not raised.
pub fn solve(p: &Problem, cfg: &DmdrConfig) -> Result<(StackedTrajectory, SolveReport)> {
    cfg.validate()?;
    let setup_start = Instant::now();
    let factorized = p.setup_resolvent(cfg.alpha)?;
    let z0 = initialize(p, cfg)?;
    let setup_seconds = setup_start.elapsed().as_secs_f64();

    let iter_start = Instant::now();
    let out = iterate(
        &factorized,
        &p.resistive,
        z0,
        cfg.alpha,
        cfg.tolerance,
        cfg.max_iterations,
    )?;
    let iterate_seconds = iter_start.elapsed().as_secs_f64();

    let mut warnings = Vec::new();
    if !p.m2_is_monotone() {
        warnings.push(SolveWarning::NonMonotoneM2 {
            min_eigenvalue: p.m2_min_eigenvalue,
        });
    }
    if let Some(iteration) = out.non_finite_at {
        warnings.push(SolveWarning::NonFinite { iteration });
    }
    if !out.converged {
        warnings.push(SolveWarning::NotConverged {
            iterations: out.iterations,
            last_relative_change: out.history.last().copied().unwrap_or(f64::NAN),
        });
    }
    let final_residual = if out.x.is_finite() {
        residual(p, &out.x)?
    } else {
        f64::NAN
    };
    let report = SolveReport {
        iterations: out.iterations,
        converged: out.converged,
        residual_history: out.history,
        final_residual,
        tolerance: cfg.tolerance,
        alpha: cfg.alpha,
        m2_min_eigenvalue: p.m2_min_eigenvalue,
        warnings,
        setup_seconds,
        iterate_seconds,
    };
    Ok((out.x, report))
}
