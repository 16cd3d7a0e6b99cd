//! Periodic signals on a uniform grid and their discrete Fourier representation.
//!
//! Transform convention, fixed project-wide: the forward transform is
//! unnormalized, `X[k] = sum_t x[t] exp(-2 pi i k t / N)`, and the inverse
//! carries the `1/N`. Under this convention Parseval reads
//! `h * sum_t x[t]^2 = (h / N) * sum_k |X[k]|^2`.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};

/// Relative imaginary residue tolerated when returning to the time domain.
pub const IMAG_RESIDUE_TOL: f64 = 1e-6;

/// One period of a T-periodic sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSignal {
    samples: Vec<f64>,
    sample_step: f64,
}

impl PeriodicSignal {
    pub fn new(samples: Vec<f64>, sample_step: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(invalid("num_samples", "must be at least 2"));
        }
        if !(sample_step > 0.0 && sample_step.is_finite()) {
            return Err(invalid("sample_step", "must be positive and finite"));
        }
        Ok(Self {
            samples,
            sample_step,
        })
    }

    /// Samples `f(t)` at `t = k * h` for `k in 0..num_samples`.
    pub fn from_fn(num_samples: usize, sample_step: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let samples = (0..num_samples)
            .map(|k| f(k as f64 * sample_step))
            .collect();
        Self::new(samples, sample_step)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_step(&self) -> f64 {
        self.sample_step
    }

    pub fn period(&self) -> f64 {
        self.samples.len() as f64 * self.sample_step
    }

    /// Circular shift: `out[t] = self[(t - shift) mod N]`.
    pub fn rotated(&self, shift: usize) -> Self {
        Self {
            samples: rotate(&self.samples, shift),
            sample_step: self.sample_step,
        }
    }

    pub fn peak_to_peak(&self) -> f64 {
        let (lo, hi) = self
            .samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        hi - lo
    }
}

/// Full complex spectrum of a periodic signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    bins: Vec<Complex64>,
    sample_step: f64,
}

impl Spectrum {
    pub fn new(bins: Vec<Complex64>, sample_step: f64) -> Result<Self> {
        if bins.len() < 2 {
            return Err(invalid("num_samples", "must be at least 2"));
        }
        if !(sample_step > 0.0 && sample_step.is_finite()) {
            return Err(invalid("sample_step", "must be positive and finite"));
        }
        Ok(Self { bins, sample_step })
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn bins_mut(&mut self) -> &mut [Complex64] {
        &mut self.bins
    }

    pub fn sample_step(&self) -> f64 {
        self.sample_step
    }

    /// Largest violation of `bins[k] = conj(bins[(N - k) mod N])`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.bins.len();
        (0..n)
            .map(|k| (self.bins[k] - self.bins[(n - k) % n].conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// Planned forward/inverse transforms of a fixed length.
#[derive(Clone)]
pub struct Transform {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transform").field("len", &self.len).finish()
    }
}

impl Transform {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized forward transform of a real sequence.
    pub fn forward_real(&self, x: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(x.len(), self.len);
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse transform including the `1/N` factor, in place.
    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inverse.process(buf);
        let scale = 1.0 / self.len as f64;
        for b in buf.iter_mut() {
            *b *= scale;
        }
    }
}

/// Splits a complex time-domain buffer into its real part after checking the
/// imaginary residue against `IMAG_RESIDUE_TOL` relative to the full norm.
pub(crate) fn checked_real_parts(bufs: &[&[Complex64]]) -> Result<Vec<Vec<f64>>> {
    let (mut re2, mut im2) = (0.0, 0.0);
    for buf in bufs {
        for c in buf.iter() {
            re2 += c.re * c.re;
            im2 += c.im * c.im;
        }
    }
    let residue = im2.sqrt();
    let limit = IMAG_RESIDUE_TOL * (re2 + im2).sqrt();
    if residue > limit {
        return Err(Error::ImaginaryResidue { residue, limit });
    }
    Ok(bufs
        .iter()
        .map(|buf| buf.iter().map(|c| c.re).collect())
        .collect())
}

fn ensure_compatible(u: &PeriodicSignal, y: &PeriodicSignal) -> Result<()> {
    if u.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "signal lengths {} and {}",
            u.len(),
            y.len()
        )));
    }
    if u.sample_step != y.sample_step {
        return Err(Error::DimensionMismatch(format!(
            "sample steps {} and {}",
            u.sample_step, y.sample_step
        )));
    }
    Ok(())
}

/// Riemann inner product over one period, `h * sum_t u[t] y[t]`.
pub fn inner_product(u: &PeriodicSignal, y: &PeriodicSignal) -> Result<f64> {
    ensure_compatible(u, y)?;
    Ok(u.sample_step * dot(&u.samples, &y.samples))
}

pub fn to_spectrum(s: &PeriodicSignal) -> Spectrum {
    let bins = Transform::new(s.len()).forward_real(&s.samples);
    Spectrum {
        bins,
        sample_step: s.sample_step,
    }
}

pub fn from_spectrum(sp: &Spectrum) -> Result<PeriodicSignal> {
    let mut buf = sp.bins.clone();
    Transform::new(buf.len()).inverse_in_place(&mut buf);
    let mut parts = checked_real_parts(&[&buf])?;
    Ok(PeriodicSignal {
        samples: parts.pop().expect("one channel"),
        sample_step: sp.sample_step,
    })
}

/// Circular shift of `b` that best matches `a`.
///
/// Returns `(shift, error)` where `b.rotated(shift)` maximizes the circular
/// cross-correlation with `a`, and `error` is the relative L2 distance
/// `||a - b.rotated(shift)|| / ||a||` (absolute when `a` is zero).
pub fn circular_align(a: &PeriodicSignal, b: &PeriodicSignal) -> Result<(usize, f64)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "signal lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let shift = best_shift(&a.samples, &b.samples);
    let rotated = rotate(&b.samples, shift);
    let diff: f64 = a
        .samples
        .iter()
        .zip(&rotated)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale = norm(&a.samples);
    let error = if scale > 0.0 { diff / scale } else { diff };
    Ok((shift, error))
}

/// argmax over `s` of `sum_t a[t] b[t - s]`, evaluated through the FFT.
pub(crate) fn best_shift(a: &[f64], b: &[f64]) -> usize {
    let n = a.len();
    let plan = Transform::new(n);
    let fa = plan.forward_real(a);
    let fb = plan.forward_real(b);
    let mut corr: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y.conj()).collect();
    plan.inverse_in_place(&mut corr);
    let mut best = 0;
    for s in 1..n {
        if corr[s].re > corr[best].re {
            best = s;
        }
    }
    best
}

/// `out[t] = x[(t - shift) mod N]`.
pub fn rotate(x: &[f64], shift: usize) -> Vec<f64> {
    let n = x.len();
    let shift = shift % n;
    (0..n).map(|t| x[(t + n - shift) % n]).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Trajectory CSV: header `time,<name_1>,...,<name_m>`, one row per sample,
/// time column `k * h`. Floats use the shortest representation that
/// round-trips exactly.
pub fn write_csv(names: &[String], columns: &[&[f64]], sample_step: f64) -> Result<String> {
    if names.len() != columns.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} names for {} columns",
            names.len(),
            columns.len()
        )));
    }
    let rows = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != rows) {
        return Err(Error::DimensionMismatch("ragged CSV columns".into()));
    }
    let mut out = String::from("time");
    for name in names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for k in 0..rows {
        write!(out, "{:?}", k as f64 * sample_step).expect("string write");
        for col in columns {
            write!(out, ",{:?}", col[k]).expect("string write");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses the trajectory CSV written by [`write_csv`]. Returns the column
/// names (without `time`), the columns, and the time step read from the
/// second row.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>, f64)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| invalid("csv", "empty document"))?;
    let mut fields = header.split(',');
    if fields.next() != Some("time") {
        return Err(invalid("csv", "first column must be `time`"));
    }
    let names: Vec<String> = fields.map(str::to_owned).collect();
    let mut columns = vec![Vec::new(); names.len()];
    let mut times = Vec::new();
    for (row, line) in lines.enumerate() {
        let values: Vec<&str> = line.split(',').collect();
        if values.len() != names.len() + 1 {
            return Err(invalid(format!("csv row {}", row + 1), "wrong field count"));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| invalid(format!("csv row {}", row + 1), e.to_string()))
        };
        times.push(parse(values[0])?);
        for (col, v) in columns.iter_mut().zip(&values[1..]) {
            col.push(parse(v)?);
        }
    }
    let step = if times.len() >= 2 {
        times[1] - times[0]
    } else {
        0.0
    };
    Ok((names, columns, step))
}
