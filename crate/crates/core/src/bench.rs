//! Timing of the frequency-domain resolvent against a dense matrix-vector
//! product with the same operator.

use std::hint::black_box;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lossless::{FactorizedResolvent, Interconnect, LosslessOperator, Resolvent};
use crate::reference::{dense_resolvent_oracle, DENSE_ORACLE_LIMIT};
use crate::trajectory::StackedTrajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub size: usize,
    pub freq_ns: f64,
    /// Absent when the dense matrix would exceed the row cap.
    pub dense_ns: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchOptions {
    pub alpha: f64,
    pub sample_step: f64,
    /// Minimum wall time per timing batch.
    pub min_batch: Duration,
    pub batches: usize,
    /// Largest dense matrix (rows) that is materialized.
    pub max_dense_rows: usize,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            sample_step: 0.1,
            min_batch: Duration::from_millis(20),
            batches: 3,
            max_dense_rows: 8192,
            seed: 0,
        }
    }
}

/// The single FHN cell's lossless part: `C = 1`, `L = 20`.
pub fn bench_operator() -> LosslessOperator {
    LosslessOperator::new(vec![1.0], vec![20.0], Interconnect::identity(1))
        .expect("fixed parameters are valid")
}

/// Dense `(I + alpha S)^{-1}`. Small sizes come from the dense oracle;
/// larger ones are assembled from the frequency path's impulse responses,
/// one per channel, shifted along the diagonal (the operator is
/// time-invariant).
pub fn dense_resolvent(s: &LosslessOperator, f: &FactorizedResolvent) -> Result<DMatrix<f64>> {
    let (ch, n) = (f.channels(), f.num_samples());
    if ch * n <= DENSE_ORACLE_LIMIT / 4 {
        return dense_resolvent_oracle(s, f.alpha(), n, f.sample_step());
    }
    let size = ch * n;
    let mut m = DMatrix::zeros(size, size);
    for c in 0..ch {
        let mut e = StackedTrajectory::zeros(ch, n, f.sample_step());
        e.channel_mut(c)[0] = 1.0;
        let y = f.apply_resolvent(&e)?;
        for r in 0..ch {
            let resp = y.channel(r);
            for s in 0..n {
                for t in 0..n {
                    m[(r * n + t, c * n + s)] = resp[(t + n - s) % n];
                }
            }
        }
    }
    Ok(m)
}

/// Best-of-`batches` mean nanoseconds per call.
fn time_ns(opts: &BenchOptions, mut call: impl FnMut()) -> f64 {
    call();
    let mut best = f64::INFINITY;
    for _ in 0..opts.batches.max(1) {
        let start = Instant::now();
        let mut reps = 0u32;
        while reps < 3 || start.elapsed() < opts.min_batch {
            call();
            reps += 1;
        }
        let per = start.elapsed().as_nanos() as f64 / reps as f64;
        best = best.min(per);
    }
    best
}

pub fn bench_resolvent(sizes: &[usize], opts: &BenchOptions) -> Result<Vec<BenchRow>> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("sizes", "must be strictly ascending"));
    }
    let s = bench_operator();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let dist = Uniform::new_inclusive(-1.0, 1.0);
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let f = s.setup_resolvent(opts.alpha, n, opts.sample_step)?;
        let data: Vec<f64> = (0..f.channels() * n).map(|_| dist.sample(&mut rng)).collect();
        let x = StackedTrajectory::from_data(f.channels(), n, opts.sample_step, data.clone())?;
        let freq_ns = time_ns(opts, || {
            black_box(f.apply_resolvent(black_box(&x)).expect("shape matches"));
        });
        let dense_ns = if f.channels() * n <= opts.max_dense_rows {
            let m = dense_resolvent(&s, &f)?;
            let v = DVector::from_vec(data);
            Some(time_ns(opts, || {
                black_box(black_box(&m) * black_box(&v));
            }))
        } else {
            None
        };
        rows.push(BenchRow {
            size: n,
            freq_ns,
            dense_ns,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// `size,freq_ns,dense_ns` with an empty dense cell when absent.
pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("size,freq_ns,dense_ns\n");
    for r in rows {
        let dense = r.dense_ns.map(|v| format!("{v:.0}")).unwrap_or_default();
        out.push_str(&format!("{},{:.0},{}\n", r.size, r.freq_ns, dense));
    }
    out
}
