use crate::error::{invalid, Error, Result};
use crate::signal::{self, PeriodicSignal};

/// Per-channel periodic signals stacked channel-major: entry `(c, t)` lives
/// at `c * num_samples + t`. Voltage channels come first, then currents.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedTrajectory {
    channels: usize,
    num_samples: usize,
    sample_step: f64,
    data: Vec<f64>,
}

impl StackedTrajectory {
    pub fn zeros(channels: usize, num_samples: usize, sample_step: f64) -> Self {
        Self {
            channels,
            num_samples,
            sample_step,
            data: vec![0.0; channels * num_samples],
        }
    }

    pub fn from_data(
        channels: usize,
        num_samples: usize,
        sample_step: f64,
        data: Vec<f64>,
    ) -> Result<Self> {
        if data.len() != channels * num_samples {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for {channels} channels x {num_samples} samples",
                data.len()
            )));
        }
        if !(sample_step > 0.0 && sample_step.is_finite()) {
            return Err(invalid("sample_step", "must be positive and finite"));
        }
        Ok(Self {
            channels,
            num_samples,
            sample_step,
            data,
        })
    }

    pub fn from_channels(channels: Vec<Vec<f64>>, sample_step: f64) -> Result<Self> {
        let n = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != n) {
            return Err(Error::DimensionMismatch("ragged channels".into()));
        }
        let count = channels.len();
        Self::from_data(count, n, sample_step, channels.concat())
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn sample_step(&self) -> f64 {
        self.sample_step
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.num_samples..(c + 1) * self.num_samples]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.num_samples..(c + 1) * self.num_samples]
    }

    pub fn channel_chunks(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.num_samples.max(1))
    }

    pub fn channel_chunks_mut(&mut self) -> std::slice::ChunksExactMut<'_, f64> {
        self.data.chunks_exact_mut(self.num_samples.max(1))
    }

    pub fn signal(&self, c: usize) -> Result<PeriodicSignal> {
        PeriodicSignal::new(self.channel(c).to_vec(), self.sample_step)
    }

    pub fn norm(&self) -> f64 {
        signal::norm(&self.data)
    }

    /// Euclidean dot product over all entries (no `h` weighting).
    pub fn dot(&self, other: &Self) -> f64 {
        signal::dot(&self.data, &other.data)
    }

    /// Riemann inner product `h * sum_{c,t} x[c,t] y[c,t]`.
    pub fn inner_product(&self, other: &Self) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self.sample_step * self.dot(other))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.channels != other.channels || self.num_samples != other.num_samples {
            return Err(Error::DimensionMismatch(format!(
                "trajectory {}x{} vs {}x{}",
                self.channels, self.num_samples, other.channels, other.num_samples
            )));
        }
        Ok(())
    }

    pub fn ensure_shape(&self, channels: usize, num_samples: usize) -> Result<()> {
        if self.channels != channels || self.num_samples != num_samples {
            return Err(Error::DimensionMismatch(format!(
                "trajectory {}x{}, expected {channels}x{num_samples}",
                self.channels, self.num_samples
            )));
        }
        Ok(())
    }

    /// `a * self + b * other`, elementwise.
    pub fn lincomb(&self, a: f64, other: &Self, b: f64) -> Self {
        debug_assert_eq!(self.data.len(), other.data.len());
        Self {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            ..*self
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            data: self.data.iter().map(|x| a * x).collect(),
            ..*self
        }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}
