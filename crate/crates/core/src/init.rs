//! Starting points `z0` for the DMDR iteration.
//!
//! The origin is a fixed point of every FitzHugh-Nagumo problem, so the
//! iteration must start away from it. Strategies are registered by name.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::registry::Registry;
use crate::trajectory::StackedTrajectory;

pub const SEEDED_UNIFORM: &str = "seeded-uniform";
pub const SINGLE_HARMONIC: &str = "single-harmonic";

pub trait Initializer: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn initialize(
        &self,
        channels: usize,
        num_samples: usize,
        sample_step: f64,
    ) -> Result<StackedTrajectory>;

    /// Seed used for randomness, if any.
    fn seed(&self) -> Option<u64> {
        None
    }

    /// Amplitude parameter, if any.
    fn amplitude(&self) -> Option<f64> {
        None
    }
}

/// I.i.d. uniform entries on `[-amplitude, amplitude]`, drawn channel-major
/// from ChaCha8 seeded with `seed_from_u64(seed)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeededUniform {
    pub seed: u64,
    pub amplitude: f64,
}

impl Initializer for SeededUniform {
    fn name(&self) -> &'static str {
        SEEDED_UNIFORM
    }

    fn initialize(&self, channels: usize, num_samples: usize, h: f64) -> Result<StackedTrajectory> {
        check_amplitude(self.amplitude)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let dist = Uniform::new_inclusive(-self.amplitude, self.amplitude);
        let data = (0..channels * num_samples)
            .map(|_| dist.sample(&mut rng))
            .collect();
        StackedTrajectory::from_data(channels, num_samples, h, data)
    }

    fn seed(&self) -> Option<u64> {
        Some(self.seed)
    }

    fn amplitude(&self) -> Option<f64> {
        Some(self.amplitude)
    }
}

/// `amplitude * sin(2 pi t / T + phase_c)`, with phase `c * pi / 2` on
/// channel `c` so that paired voltage/current channels start in quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleHarmonic {
    pub amplitude: f64,
}

impl Initializer for SingleHarmonic {
    fn name(&self) -> &'static str {
        SINGLE_HARMONIC
    }

    fn initialize(&self, channels: usize, num_samples: usize, h: f64) -> Result<StackedTrajectory> {
        check_amplitude(self.amplitude)?;
        let mut data = Vec::with_capacity(channels * num_samples);
        for c in 0..channels {
            let phase = (c % 4) as f64 * 0.5 * PI;
            data.extend((0..num_samples).map(|t| {
                self.amplitude * (2.0 * PI * t as f64 / num_samples as f64 + phase).sin()
            }));
        }
        StackedTrajectory::from_data(channels, num_samples, h, data)
    }

    fn amplitude(&self) -> Option<f64> {
        Some(self.amplitude)
    }
}

/// A caller-supplied trajectory, copied verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct Given(pub StackedTrajectory);

impl Initializer for Given {
    fn name(&self) -> &'static str {
        "given"
    }

    fn initialize(&self, channels: usize, num_samples: usize, _h: f64) -> Result<StackedTrajectory> {
        self.0.ensure_shape(channels, num_samples)?;
        Ok(self.0.clone())
    }
}

fn check_amplitude(a: f64) -> Result<()> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(invalid("init.amplitude", "must be non-negative and finite"));
    }
    Ok(())
}

/// Parameters shared by the registered initializer factories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitParams {
    pub seed: u64,
    pub amplitude: f64,
}

pub type InitFactory = fn(InitParams) -> Arc<dyn Initializer>;

pub fn registry() -> Registry<InitFactory> {
    let mut reg: Registry<InitFactory> = Registry::new("initializer");
    reg.register(SEEDED_UNIFORM, |p| {
        Arc::new(SeededUniform {
            seed: p.seed,
            amplitude: p.amplitude,
        })
    })
    .register(SINGLE_HARMONIC, |p| {
        Arc::new(SingleHarmonic {
            amplitude: p.amplitude,
        })
    });
    reg
}

pub fn by_name(name: &str, params: InitParams) -> Result<Arc<dyn Initializer>> {
    Ok(registry().get(name)?(params))
}
