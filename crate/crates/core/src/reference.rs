//! Independent oracles: an Adams-Bashforth time stepper, a dense
//! time-domain resolvent, and a bisection prox.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::derivative;
use crate::error::{invalid, Error, Result};
use crate::lossless::LosslessOperator;
use crate::netbuild::NetworkSpec;
use crate::resistive::ScalarChannel;
use crate::signal::{self, PeriodicSignal};

/// Largest `channels * num_samples` accepted by [`dense_resolvent_oracle`].
pub const DENSE_ORACLE_LIMIT: usize = 4096;

pub const DEFAULT_TRANSIENT_FRACTION: f64 = 0.8;

/// Sampled states of a time-stepping run, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationRun {
    names: Vec<String>,
    channels: Vec<Vec<f64>>,
    step: f64,
    total_time: f64,
}

impl IntegrationRun {
    pub fn new(names: Vec<String>, channels: Vec<Vec<f64>>, step: f64, total_time: f64) -> Result<Self> {
        if names.len() != channels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} channels",
                names.len(),
                channels.len()
            )));
        }
        let len = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::DimensionMismatch("ragged channels".into()));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid("step", "must be positive and finite"));
        }
        Ok(Self {
            names,
            channels,
            step,
            total_time,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    /// Final state, one entry per channel.
    pub fn last_state(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c[c.len() - 1]).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let cols: Vec<&[f64]> = self.channels.iter().map(Vec::as_slice).collect();
        signal::write_csv(&self.names, &cols, self.step)
    }
}

/// Number of stored states, `ceil(t_end / h) + 1`.
pub fn sample_count(h: f64, t_end: f64) -> usize {
    let ratio = t_end / h;
    // Absorb the rounding in ratios like 1.0 / 0.01.
    let steps = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
        ratio.round()
    } else {
        ratio.ceil()
    };
    steps as usize + 1
}

/// Two-step Adams-Bashforth for `y' = f(t, y)`, bootstrapped by one forward
/// Euler step. Returns the states channel-major.
pub fn ab2<F>(rhs: F, y0: &[f64], h: f64, t_end: f64) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid("h_int", "must be positive and finite"));
    }
    if !(t_end > h && t_end.is_finite()) {
        return Err(invalid("t_end", "must exceed h_int"));
    }
    let m = y0.len();
    let count = sample_count(h, t_end);
    let mut out: Vec<Vec<f64>> = (0..m).map(|_| Vec::with_capacity(count)).collect();
    let mut y = y0.to_vec();
    let mut f_prev = vec![0.0; m];
    let mut f_cur = vec![0.0; m];
    for (c, v) in y.iter().enumerate() {
        out[c].push(*v);
    }
    rhs(0.0, &y, &mut f_prev);
    for c in 0..m {
        y[c] += h * f_prev[c];
    }
    for step in 1..count {
        if step > 1 {
            let t = (step - 1) as f64 * h;
            rhs(t, &y, &mut f_cur);
            for c in 0..m {
                y[c] += h * (1.5 * f_cur[c] - 0.5 * f_prev[c]);
            }
            std::mem::swap(&mut f_prev, &mut f_cur);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                time: step as f64 * h,
            });
        }
        for (c, v) in y.iter().enumerate() {
            out[c].push(*v);
        }
    }
    Ok(out)
}

/// Integrates the cell/network ODE
/// `C_k v_k' = v_k - v_k^3/3 - i_k + sum_j (v_j - v_k)/Rc_kj`,
/// `L_k i_k' = v_k - R_k i_k` with [`ab2`]. `init_state` is `n` voltages
/// then `n` currents.
pub fn ab2_integrate(spec: &NetworkSpec, h_int: f64, t_end: f64, init_state: &[f64]) -> Result<IntegrationRun> {
    spec.validate()?;
    let n = spec.len();
    if init_state.len() != 2 * n {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} entries for {n} cells",
            init_state.len()
        )));
    }
    let g: Vec<f64> = (0..n).map(|k| spec.coupling_conductance(k)).collect();
    let conductances: Vec<f64> = spec
        .coupling
        .iter()
        .enumerate()
        .map(|(idx, &r)| if idx / n == idx % n { 0.0 } else { 1.0 / r })
        .collect();
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let (v, i) = y.split_at(n);
        for k in 0..n {
            let cell = &spec.cells[k];
            let row = &conductances[k * n..(k + 1) * n];
            let inflow: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() - g[k] * v[k];
            dy[k] = (v[k] - v[k].powi(3) / 3.0 - i[k] + inflow) / cell.capacitance;
            dy[n + k] = (v[k] - cell.resistance * i[k]) / cell.inductance;
        }
    };
    let channels = ab2(rhs, init_state, h_int, t_end)?;
    let names = state_names(n);
    IntegrationRun::new(names, channels, h_int, t_end)
}

/// `v`, `i` for one cell, `v0..v{n-1}, i0..i{n-1}` otherwise.
pub fn state_names(n: usize) -> Vec<String> {
    if n == 1 {
        return vec!["v".into(), "i".into()];
    }
    (0..n)
        .map(|k| format!("v{k}"))
        .chain((0..n).map(|k| format!("i{k}")))
        .collect()
}

/// Implicit (backward) Euler on the same ODE as [`ab2_integrate`]. Each
/// step eliminates the currents and solves the voltage equations by Newton.
/// Its periodic orbits are exactly the fixed points of the backward-Euler
/// periodic discretization when the period is a whole number of steps.
pub fn backward_euler_integrate(
    spec: &NetworkSpec,
    h: f64,
    t_end: f64,
    init_state: &[f64],
) -> Result<IntegrationRun> {
    spec.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid("h", "must be positive and finite"));
    }
    if !(t_end > h && t_end.is_finite()) {
        return Err(invalid("t_end", "must exceed h"));
    }
    let n = spec.len();
    if init_state.len() != 2 * n {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} entries for {n} cells",
            init_state.len()
        )));
    }
    // Coupling Laplacian: g_k on the diagonal, -1/Rc off it.
    let lap = DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            spec.coupling_conductance(r)
        } else {
            -1.0 / spec.coupling_resistance(r, c)
        }
    });
    let count = sample_count(h, t_end);
    let mut out: Vec<Vec<f64>> = (0..2 * n).map(|_| Vec::with_capacity(count)).collect();
    let (mut v, mut i) = (init_state[..n].to_vec(), init_state[n..].to_vec());
    let push = |out: &mut Vec<Vec<f64>>, v: &[f64], i: &[f64]| {
        for (c, x) in v.iter().chain(i).enumerate() {
            out[c].push(*x);
        }
    };
    push(&mut out, &v, &i);
    for step in 1..count {
        // i+ = a_k i_k + b_k v+_k with a = L/(L + hR), b = h/(L + hR).
        let (a, b): (Vec<f64>, Vec<f64>) = spec
            .cells
            .iter()
            .map(|c| {
                let d = c.inductance + h * c.resistance;
                (c.inductance / d, h / d)
            })
            .unzip();
        let mut x = v.clone();
        let mut done = false;
        for _ in 0..50 {
            let lx = &lap * nalgebra::DVector::from_column_slice(&x);
            let f = nalgebra::DVector::from_fn(n, |k, _| {
                let cell = &spec.cells[k];
                cell.capacitance * (x[k] - v[k]) / h - x[k] + x[k].powi(3) / 3.0
                    + a[k] * i[k]
                    + b[k] * x[k]
                    + lx[k]
            });
            let mut jac = lap.clone();
            for k in 0..n {
                jac[(k, k)] += spec.cells[k].capacitance / h - 1.0 + x[k] * x[k] + b[k];
            }
            let dx = jac.lu().solve(&f).ok_or(Error::StepNotConverged {
                time: step as f64 * h,
            })?;
            for (xk, d) in x.iter_mut().zip(dx.iter()) {
                *xk -= d;
            }
            let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            if dx.amax() <= 1e-14 * scale {
                done = true;
                break;
            }
        }
        if !done || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::StepNotConverged {
                time: step as f64 * h,
            });
        }
        for k in 0..n {
            i[k] = a[k] * i[k] + b[k] * x[k];
        }
        v = x;
        push(&mut out, &v, &i);
    }
    IntegrationRun::new(state_names(n), out, h, t_end)
}

/// Sample step `h` for which `num_samples * h` equals the period of the
/// backward-Euler orbit at step `h`, found by the fixed-point iteration
/// `h <- P(h) / num_samples` from `initial_step`. Each round integrates
/// `periods` nominal periods from `init_state`.
pub fn matched_sample_step(
    spec: &NetworkSpec,
    num_samples: usize,
    initial_step: f64,
    init_state: &[f64],
    periods: usize,
    rounds: usize,
) -> Result<f64> {
    let mut h = initial_step;
    for _ in 0..rounds {
        let t_end = periods as f64 * num_samples as f64 * h;
        let run = backward_euler_integrate(spec, h, t_end, init_state)?;
        let ss = steady_state_extract(&run, num_samples, h)?;
        let next = ss.period / num_samples as f64;
        let settled = (next - h).abs() <= 1e-12 * h;
        h = next;
        if settled {
            break;
        }
    }
    Ok(h)
}

/// One steady-state period of a run, resampled onto `num_samples` points.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub channels: Vec<PeriodicSignal>,
    /// Mean-crossing period of the first channel.
    pub period: f64,
    /// Spread of the individual cycle lengths around `period`, relative.
    pub period_spread: f64,
    pub cycles: usize,
}

/// [`steady_state_extract_with`] with the default 80% transient cutoff.
pub fn steady_state_extract(run: &IntegrationRun, num_samples: usize, h: f64) -> Result<SteadyState> {
    steady_state_extract_with(run, num_samples, h, DEFAULT_TRANSIENT_FRACTION)
}

/// Drops the leading `transient_fraction` of the run, estimates the period
/// from upward crossings of the tail mean in channel 0, and samples every
/// channel at `t0 + k P / num_samples`, `t0` the first crossing, by linear
/// interpolation. The samples are stored with step `h`.
pub fn steady_state_extract_with(
    run: &IntegrationRun,
    num_samples: usize,
    h: f64,
    transient_fraction: f64,
) -> Result<SteadyState> {
    if !(0.0..1.0).contains(&transient_fraction) {
        return Err(invalid("transient_fraction", "must lie in [0, 1)"));
    }
    if num_samples < 2 {
        return Err(invalid("num_samples", "must be at least 2"));
    }
    let start = (transient_fraction * run.len() as f64).floor() as usize;
    let lead = run.channel(0);
    let tail = &lead[start..];
    let crossings = upward_crossings(tail);
    if crossings.len() < 2 {
        return Err(Error::NoOscillation);
    }
    let cycles = crossings.len() - 1;
    let period = (crossings[cycles] - crossings[0]) / cycles as f64 * run.step;
    let spread = crossings
        .windows(2)
        .map(|w| ((w[1] - w[0]) * run.step - period).abs())
        .fold(0.0, f64::max)
        / period;
    let t0 = start as f64 + crossings[0];
    let channels = (0..run.num_channels())
        .map(|c| {
            let x = run.channel(c);
            let samples = (0..num_samples)
                .map(|k| interpolate(x, t0 + k as f64 * period / (num_samples as f64 * run.step)))
                .collect();
            PeriodicSignal::new(samples, h)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SteadyState {
        channels,
        period,
        period_spread: spread,
        cycles,
    })
}

/// Fractional indices where `x` crosses its mean upwards. Signals whose
/// swing is below `1e-6 * (1 + |mean|)` count as constant.
fn upward_crossings(x: &[f64]) -> Vec<f64> {
    if x.len() < 2 {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo <= 1e-6 * (1.0 + mean.abs()) {
        return Vec::new();
    }
    x.windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] < mean && w[1] >= mean)
        .map(|(t, w)| t as f64 + (mean - w[0]) / (w[1] - w[0]))
        .collect()
}

/// Linear interpolation at fractional index `pos`, clamped to the last
/// sample.
fn interpolate(x: &[f64], pos: f64) -> f64 {
    let last = x.len() - 1;
    if pos >= last as f64 {
        return x[last];
    }
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    x[i] + frac * (x[i + 1] - x[i])
}

/// Dense `N x N` derivative matrix. Backward Euler is built from its
/// stencil `(x[t] - x[t-1]) / h`; other models from the inverse DFT sum
/// `D[t][s] = (1/N) sum_k lambda_k e^{2 pi i k (t - s) / N}`.
pub fn dense_derivative(model: &dyn derivative::DerivativeModel, n: usize, h: f64) -> DMatrix<f64> {
    if model.name() == derivative::BACKWARD_EULER {
        return DMatrix::from_fn(n, n, |t, s| {
            if t == s {
                1.0 / h
            } else if s == (t + n - 1) % n {
                -1.0 / h
            } else {
                0.0
            }
        });
    }
    let lams: Vec<_> = (0..n).map(|k| model.eigenvalue(k, n, h)).collect();
    DMatrix::from_fn(n, n, |t, s| {
        let d = (t + n - s) % n;
        lams.iter()
            .enumerate()
            .map(|(k, lam)| {
                let theta = 2.0 * PI * (k * d % n) as f64 / n as f64;
                lam.re * theta.cos() - lam.im * theta.sin()
            })
            .sum::<f64>()
            / n as f64
    })
}

/// Time-domain matrix of the lossless operator on the stacked
/// channel-major trajectory space.
pub fn dense_lossless_matrix(s: &LosslessOperator, num_samples: usize, h: f64) -> DMatrix<f64> {
    let n = num_samples;
    let nv = s.voltage_channels();
    let size = s.channels() * n;
    let d = dense_derivative(s.derivative(), n, h);
    let mut m = DMatrix::zeros(size, size);
    let scales = s.cap().iter().chain(s.ind());
    for (c, &scale) in scales.enumerate() {
        let mut block = m.view_mut((c * n, c * n), (n, n));
        block += &d * scale;
    }
    for (r, c, sign) in s.interconnect().nonzeros() {
        // Voltage row c picks up +sign * i_r; current row r picks up -sign * v_c.
        for t in 0..n {
            m[(c * n + t, (nv + r) * n + t)] += sign;
            m[((nv + r) * n + t, c * n + t)] -= sign;
        }
    }
    m
}

/// Dense inverse of `I + alpha S` built from [`dense_lossless_matrix`].
pub fn dense_resolvent_oracle(s: &LosslessOperator, alpha: f64, num_samples: usize, h: f64) -> Result<DMatrix<f64>> {
    let size = s.channels() * num_samples;
    if size > DENSE_ORACLE_LIMIT {
        return Err(Error::SizeLimit {
            size,
            limit: DENSE_ORACLE_LIMIT,
        });
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(invalid("alpha", "must be non-negative and finite"));
    }
    let mut a = dense_lossless_matrix(s, num_samples, h) * alpha;
    for k in 0..size {
        a[(k, k)] += 1.0;
    }
    a.try_inverse().ok_or(Error::SingularBin { bin: 0 })
}

/// Resolvent of one scalar channel by bisection on
/// `x + alpha f(x) = z` over `[-|z| - 2, |z| + 2]`, stopped at
/// `|x + alpha f(x) - z| <= 1e-13` or when the bracket stops shrinking.
pub fn prox_bisection_oracle(kind: ScalarChannel, alpha: f64, z: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid("alpha", "must be positive and finite"));
    }
    let f = |x: f64| x + alpha * kind.eval(x) - z;
    let (mut lo, mut hi) = (-z.abs() - 2.0, z.abs() + 2.0);
    loop {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() <= 1e-13 || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}
