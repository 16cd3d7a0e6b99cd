//! Orbit summaries: peak-to-peak swings and pairwise synchrony.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Transform;
use crate::trajectory::StackedTrajectory;

/// Worst pairwise lag between voltage orbits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Synchrony {
    /// Largest lag over all pairs, as a fraction of the period.
    pub max_lag_fraction: f64,
    /// Pair attaining it.
    pub worst_pair: (usize, usize),
    pub pairs: usize,
}

impl Synchrony {
    pub fn within(&self, fraction: f64) -> bool {
        self.max_lag_fraction <= fraction
    }
}

/// For every pair of the first `cells` channels, the circular
/// cross-correlation peak of the mean-removed orbits, folded to
/// `min(s, N - s)` samples and divided by `N`.
pub fn synchrony(x: &StackedTrajectory, cells: usize) -> Result<Synchrony> {
    if cells > x.channels() {
        return Err(Error::DimensionMismatch(format!(
            "{cells} cells requested from {} channels",
            x.channels()
        )));
    }
    let n = x.num_samples();
    let plan = Transform::new(n);
    let spectra: Vec<Vec<Complex64>> = (0..cells)
        .map(|c| {
            let ch = x.channel(c);
            let mean = ch.iter().sum::<f64>() / n as f64;
            let centered: Vec<f64> = ch.iter().map(|v| v - mean).collect();
            plan.forward_real(&centered)
        })
        .collect();
    let mut worst = (0.0, (0, 0));
    let mut pairs = 0;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for a in 0..cells {
        for b in (a + 1)..cells {
            for (o, (p, q)) in buf.iter_mut().zip(spectra[a].iter().zip(&spectra[b])) {
                *o = p * q.conj();
            }
            plan.inverse_in_place(&mut buf);
            let shift = (0..n).fold(0, |best, s| if buf[s].re > buf[best].re { s } else { best });
            let lag = shift.min(n - shift) as f64 / n as f64;
            if lag > worst.0 {
                worst = (lag, (a, b));
            }
            pairs += 1;
        }
    }
    Ok(Synchrony {
        max_lag_fraction: worst.0,
        worst_pair: worst.1,
        pairs,
    })
}

/// `max - min` of each of the first `cells` channels.
pub fn peak_to_peak(x: &StackedTrajectory, cells: usize) -> Vec<f64> {
    x.channel_chunks()
        .take(cells)
        .map(|ch| {
            let (lo, hi) = ch
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            hi - lo
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn waves(shifts: &[usize], n: usize) -> StackedTrajectory {
        let chans = shifts
            .iter()
            .map(|&s| {
                (0..n)
                    .map(|t| 3.0 + (2.0 * PI * ((t + n - s) % n) as f64 / n as f64).sin())
                    .collect()
            })
            .collect();
        StackedTrajectory::from_channels(chans, 0.1).unwrap()
    }

    #[test]
    fn identical_orbits_have_zero_lag() {
        let s = synchrony(&waves(&[0, 0, 0], 100), 3).unwrap();
        assert_eq!(s.max_lag_fraction, 0.0);
        assert_eq!(s.pairs, 3);
    }

    #[test]
    fn lag_is_folded() {
        let s = synchrony(&waves(&[0, 3, 97], 100), 3).unwrap();
        assert!((s.max_lag_fraction - 0.06).abs() < 1e-12);
        assert_eq!(s.worst_pair, (1, 2));
        assert!(!s.within(0.05));
        assert!(synchrony(&waves(&[0, 2], 100), 2).unwrap().within(0.05));
    }

    #[test]
    fn swing() {
        let p = peak_to_peak(&waves(&[0, 5], 100), 2);
        assert!(p.iter().all(|v| (v - 2.0).abs() < 1e-3));
    }

    #[test]
    fn too_many_cells() {
        assert!(synchrony(&waves(&[0], 10), 2).is_err());
    }
}
