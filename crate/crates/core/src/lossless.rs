//! The lossless LTI part of the circuit: capacitors, inductors and the ±1/0
//! interconnection, with its resolvent evaluated bin by bin in the frequency
//! domain.
//!
//! Channel ordering is fixed: all voltage channels first (one per
//! capacitor), then all current channels (one per inductor). At DFT bin `k`
//! with derivative eigenvalue `lam_k` the operator acts as
//!
//! ```text
//! [ diag(C * lam_k)    N^T            ] [ V ]
//! [ -N                 diag(L * lam_k)] [ I ]
//! ```
//!
//! where `N` has one row per current channel and one column per voltage
//! channel. The FitzHugh-Nagumo cell `C v' = I_g(v) - i`, `L i' = v - R i`
//! therefore has `N = [[+1]]`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::derivative::{self, DerivativeModel};
use crate::error::{invalid, Error, Result};
use crate::signal::{checked_real_parts, Transform};
use crate::trajectory::StackedTrajectory;

/// Signed incidence between current channels (rows) and voltage channels
/// (columns), entries restricted to -1, 0, +1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interconnect {
    rows: usize,
    cols: usize,
    entries: Vec<i8>,
}

impl Interconnect {
    pub fn new(rows: usize, cols: usize, entries: Vec<i8>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} interconnect entries for {rows}x{cols}",
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|e| !(-1..=1).contains(*e)) {
            return Err(invalid(
                "interconnect",
                format!("entry {bad} is not in {{-1, 0, +1}}"),
            ));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged interconnect rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0; n * n];
        for k in 0..n {
            entries[k * n + k] = 1;
        }
        Self {
            rows: n,
            cols: n,
            entries,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.entries[row * self.cols + col]
    }

    pub fn negated(&self) -> Self {
        Self {
            entries: self.entries.iter().map(|e| -e).collect(),
            ..self.clone()
        }
    }

    /// Nonzero entries as `(current row, voltage column, sign)`.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, &e)| e != 0)
            .map(move |(idx, &e)| (idx / self.cols, idx % self.cols, e as f64))
    }
}

/// Capacitors, inductors and their interconnection.
#[derive(Clone)]
pub struct LosslessOperator {
    cap: Vec<f64>,
    ind: Vec<f64>,
    interconnect: Interconnect,
    derivative: Arc<dyn DerivativeModel>,
}

impl fmt::Debug for LosslessOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LosslessOperator")
            .field("cap", &self.cap)
            .field("ind", &self.ind)
            .field("interconnect", &self.interconnect)
            .field("derivative", &self.derivative.name())
            .finish()
    }
}

impl LosslessOperator {
    /// Builds the operator with the default backward-Euler derivative.
    pub fn new(cap: Vec<f64>, ind: Vec<f64>, interconnect: Interconnect) -> Result<Self> {
        for (k, c) in cap.iter().enumerate() {
            if !(*c > 0.0 && c.is_finite()) {
                return Err(invalid(format!("cap[{k}]"), "must be positive and finite"));
            }
        }
        for (k, l) in ind.iter().enumerate() {
            if !(*l > 0.0 && l.is_finite()) {
                return Err(invalid(format!("ind[{k}]"), "must be positive and finite"));
            }
        }
        if interconnect.rows != ind.len() || interconnect.cols != cap.len() {
            return Err(Error::DimensionMismatch(format!(
                "interconnect is {}x{}, expected {}x{} (currents x voltages)",
                interconnect.rows,
                interconnect.cols,
                ind.len(),
                cap.len()
            )));
        }
        Ok(Self {
            cap,
            ind,
            interconnect,
            derivative: derivative::default_model(),
        })
    }

    pub fn with_derivative(mut self, model: Arc<dyn DerivativeModel>) -> Self {
        self.derivative = model;
        self
    }

    pub fn with_interconnect(mut self, interconnect: Interconnect) -> Result<Self> {
        if interconnect.rows != self.interconnect.rows || interconnect.cols != self.interconnect.cols
        {
            return Err(Error::DimensionMismatch("replacement interconnect shape".into()));
        }
        self.interconnect = interconnect;
        Ok(self)
    }

    pub fn cap(&self) -> &[f64] {
        &self.cap
    }

    pub fn ind(&self) -> &[f64] {
        &self.ind
    }

    pub fn interconnect(&self) -> &Interconnect {
        &self.interconnect
    }

    pub fn derivative(&self) -> &dyn DerivativeModel {
        self.derivative.as_ref()
    }

    pub fn voltage_channels(&self) -> usize {
        self.cap.len()
    }

    pub fn current_channels(&self) -> usize {
        self.ind.len()
    }

    pub fn channels(&self) -> usize {
        self.cap.len() + self.ind.len()
    }

    /// Entry `(row, col)` of the bin-`k` operator matrix for eigenvalue `lam`.
    fn entry(&self, row: usize, col: usize, lam: Complex64) -> Complex64 {
        let nv = self.cap.len();
        match (row < nv, col < nv) {
            (true, true) if row == col => lam * self.cap[row],
            (false, false) if row == col => lam * self.ind[row - nv],
            (true, false) => Complex64::new(self.interconnect.get(col - nv, row) as f64, 0.0),
            (false, true) => Complex64::new(-(self.interconnect.get(row - nv, col) as f64), 0.0),
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// Groups channels into the connected components of the interconnect
    /// graph. Each component yields an independent block per frequency bin.
    fn components(&self) -> Vec<Vec<usize>> {
        let nv = self.cap.len();
        let mut parent: Vec<usize> = (0..self.channels()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (r, c, _) in self.interconnect.nonzeros() {
            let (a, b) = (find(&mut parent, c), find(&mut parent, nv + r));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; self.channels()];
        for ch in 0..self.channels() {
            let root = find(&mut parent, ch);
            if slot[root] == usize::MAX {
                slot[root] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot[root]].push(ch);
        }
        groups
    }

    /// `S x`, evaluated per frequency bin.
    pub fn apply_forward(&self, x: &StackedTrajectory) -> Result<StackedTrajectory> {
        if x.channels() != self.channels() {
            return Err(Error::DimensionMismatch(format!(
                "trajectory has {} channels, operator has {}",
                x.channels(),
                self.channels()
            )));
        }
        let n = x.num_samples();
        let h = x.sample_step();
        let nv = self.cap.len();
        let plan = Transform::new(n);
        let lams = derivative::derivative_eigenvalues(n, h, self.derivative.as_ref());
        let mut spectra: Vec<Vec<Complex64>> = (0..self.channels())
            .into_par_iter()
            .map(|c| {
                let gain = if c < nv {
                    self.cap[c]
                } else {
                    self.ind[c - nv]
                };
                let mut spec = plan.forward_real(x.channel(c));
                for (s, lam) in spec.iter_mut().zip(&lams) {
                    *s *= lam * gain;
                }
                plan.inverse_in_place(&mut spec);
                spec
            })
            .collect();
        let views: Vec<&[Complex64]> = spectra.iter_mut().map(|s| &s[..]).collect();
        let parts = checked_real_parts(&views)?;
        let mut out = StackedTrajectory::from_channels(parts, h)?;
        // Static interconnect: (N^T i) into voltages, (-N v) into currents.
        for (r, c, sign) in self.interconnect.nonzeros() {
            let i_r = x.channel(nv + r).to_vec();
            for (o, i) in out.channel_mut(c).iter_mut().zip(&i_r) {
                *o += sign * i;
            }
            let v_c = x.channel(c).to_vec();
            for (o, v) in out.channel_mut(nv + r).iter_mut().zip(&v_c) {
                *o -= sign * v;
            }
        }
        Ok(out)
    }

    /// Factorizes `I + alpha * S(j omega_k)` for every bin of an
    /// `num_samples`-point grid with step `h`.
    pub fn setup_resolvent(
        &self,
        alpha: f64,
        num_samples: usize,
        h: f64,
    ) -> Result<FactorizedResolvent> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(invalid("alpha", "must be non-negative and finite"));
        }
        if num_samples < 2 {
            return Err(invalid("num_samples", "must be at least 2"));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid("sample_step", "must be positive and finite"));
        }
        let lams = derivative::derivative_eigenvalues(num_samples, h, self.derivative.as_ref());
        let one = Complex64::new(1.0, 0.0);
        let bin_matrix = |chs: &[usize], lam: Complex64| {
            DMatrix::from_fn(chs.len(), chs.len(), |r, c| {
                let delta = if r == c { one } else { Complex64::new(0.0, 0.0) };
                delta + self.entry(chs[r], chs[c], lam) * alpha
            })
        };
        let mut blocks = Vec::new();
        for chs in self.components() {
            let factors = match chs.len() {
                1 => {
                    let mut inv = Vec::with_capacity(num_samples);
                    for (k, &lam) in lams.iter().enumerate() {
                        let d = one + self.entry(chs[0], chs[0], lam) * alpha;
                        if !d.is_finite() || d.norm() <= f64::MIN_POSITIVE {
                            return Err(Error::SingularBin { bin: k });
                        }
                        inv.push(one / d);
                    }
                    Factors::Scalar(inv)
                }
                2 => {
                    let mut inv = Vec::with_capacity(num_samples);
                    for (k, &lam) in lams.iter().enumerate() {
                        let m = bin_matrix(&chs, lam);
                        let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
                        let det = a * d - b * c;
                        if !det.is_finite() || det.norm() <= f64::MIN_POSITIVE {
                            return Err(Error::SingularBin { bin: k });
                        }
                        inv.push([d / det, -b / det, -c / det, a / det]);
                    }
                    Factors::Pair(inv)
                }
                _ => {
                    let mut lus = Vec::with_capacity(num_samples);
                    for (k, &lam) in lams.iter().enumerate() {
                        let lu = bin_matrix(&chs, lam).lu();
                        if !lu.is_invertible() {
                            return Err(Error::SingularBin { bin: k });
                        }
                        lus.push(lu);
                    }
                    Factors::Dense(lus)
                }
            };
            blocks.push(Block {
                channels: chs,
                factors,
            });
        }
        Ok(FactorizedResolvent {
            alpha,
            num_samples,
            sample_step: h,
            channels: self.channels(),
            blocks,
            transform: Transform::new(num_samples),
        })
    }
}

enum Factors {
    /// Per-bin reciprocal of an isolated channel.
    Scalar(Vec<Complex64>),
    /// Per-bin closed-form 2x2 inverse, row-major.
    Pair(Vec<[Complex64; 4]>),
    /// Per-bin dense LU for larger coupled components.
    Dense(Vec<LU<Complex64, Dyn, Dyn>>),
}

struct Block {
    channels: Vec<usize>,
    factors: Factors,
}

impl Block {
    fn solve(&self, spectra: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        let n = spectra[0].len();
        match &self.factors {
            Factors::Scalar(inv) => {
                vec![spectra[self.channels[0]]
                    .iter()
                    .zip(inv)
                    .map(|(s, i)| s * i)
                    .collect()]
            }
            Factors::Pair(inv) => {
                let (a, b) = (&spectra[self.channels[0]], &spectra[self.channels[1]]);
                let mut out0 = Vec::with_capacity(n);
                let mut out1 = Vec::with_capacity(n);
                for k in 0..n {
                    let m = &inv[k];
                    out0.push(m[0] * a[k] + m[1] * b[k]);
                    out1.push(m[2] * a[k] + m[3] * b[k]);
                }
                vec![out0, out1]
            }
            Factors::Dense(lus) => {
                let mut out = vec![Vec::with_capacity(n); self.channels.len()];
                for (k, lu) in lus.iter().enumerate() {
                    let rhs = DVector::from_iterator(
                        self.channels.len(),
                        self.channels.iter().map(|&c| spectra[c][k]),
                    );
                    let sol = lu.solve(&rhs).expect("factorization checked at setup");
                    for (o, s) in out.iter_mut().zip(sol.iter()) {
                        o.push(*s);
                    }
                }
                out
            }
        }
    }
}

/// Per-frequency factorizations of `I + alpha * S`, immutable after setup.
pub struct FactorizedResolvent {
    alpha: f64,
    num_samples: usize,
    sample_step: f64,
    channels: usize,
    blocks: Vec<Block>,
    transform: Transform,
}

impl fmt::Debug for FactorizedResolvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FactorizedResolvent")
            .field("alpha", &self.alpha)
            .field("num_samples", &self.num_samples)
            .field("sample_step", &self.sample_step)
            .field("block_sizes", &self.block_sizes())
            .finish()
    }
}

/// A linear map `z -> (I + alpha A)^{-1} z` on stacked trajectories.
pub trait Resolvent: Send + Sync {
    fn alpha(&self) -> f64;
    fn apply_resolvent(&self, z: &StackedTrajectory) -> Result<StackedTrajectory>;
}

impl FactorizedResolvent {
    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn sample_step(&self) -> f64 {
        self.sample_step
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Sizes of the independent per-bin blocks, e.g. `[2]` for one FHN cell.
    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.channels.len()).collect()
    }

    /// Number of stored per-bin factorizations (blocks x bins).
    pub fn factorization_count(&self) -> usize {
        self.blocks.len() * self.num_samples
    }

    /// The full `channels x channels` inverse at bin `k`, assembled from the
    /// stored block factors.
    pub fn bin_inverse(&self, k: usize) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.channels, self.channels);
        for block in &self.blocks {
            let chs = &block.channels;
            match &block.factors {
                Factors::Scalar(inv) => out[(chs[0], chs[0])] = inv[k],
                Factors::Pair(inv) => {
                    let m = inv[k];
                    out[(chs[0], chs[0])] = m[0];
                    out[(chs[0], chs[1])] = m[1];
                    out[(chs[1], chs[0])] = m[2];
                    out[(chs[1], chs[1])] = m[3];
                }
                Factors::Dense(lus) => {
                    let inv = lus[k].try_inverse().expect("factorization checked at setup");
                    for (r, &cr) in chs.iter().enumerate() {
                        for (c, &cc) in chs.iter().enumerate() {
                            out[(cr, cc)] = inv[(r, c)];
                        }
                    }
                }
            }
        }
        out
    }
}

impl Resolvent for FactorizedResolvent {
    fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Transforms every channel, solves the per-bin blocks, and transforms
    /// back; the result is validated to be real.
    fn apply_resolvent(&self, z: &StackedTrajectory) -> Result<StackedTrajectory> {
        z.ensure_shape(self.channels, self.num_samples)?;
        let plan = &self.transform;
        let spectra: Vec<Vec<Complex64>> = (0..self.channels)
            .into_par_iter()
            .map(|c| plan.forward_real(z.channel(c)))
            .collect();
        let solved: Vec<Vec<Vec<Complex64>>> =
            self.blocks.par_iter().map(|b| b.solve(&spectra)).collect();
        let mut out: Vec<Vec<Complex64>> = vec![Vec::new(); self.channels];
        for (block, cols) in self.blocks.iter().zip(solved) {
            for (&ch, col) in block.channels.iter().zip(cols) {
                out[ch] = col;
            }
        }
        out.par_iter_mut().for_each(|s| plan.inverse_in_place(s));
        let views: Vec<&[Complex64]> = out.iter().map(|s| &s[..]).collect();
        let parts = checked_real_parts(&views)?;
        StackedTrajectory::from_data(
            self.channels,
            self.num_samples,
            self.sample_step,
            parts.concat(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivative::Spectral;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fhn_cell() -> LosslessOperator {
        LosslessOperator::new(vec![1.0], vec![20.0], Interconnect::identity(1)).unwrap()
    }

    fn random_traj(rng: &mut ChaCha8Rng, channels: usize, n: usize, h: f64) -> StackedTrajectory {
        StackedTrajectory::from_data(
            channels,
            n,
            h,
            (0..channels * n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_invalid_operators() {
        assert!(LosslessOperator::new(vec![0.0], vec![1.0], Interconnect::identity(1)).is_err());
        assert!(LosslessOperator::new(vec![1.0], vec![-1.0], Interconnect::identity(1)).is_err());
        assert!(LosslessOperator::new(vec![1.0], vec![1.0], Interconnect::identity(2)).is_err());
        assert!(Interconnect::new(1, 1, vec![2]).is_err());
    }

    #[test]
    fn fhn_cell_factorizes_into_2x2_blocks() {
        let f = fhn_cell().setup_resolvent(0.1, 16, 0.1).unwrap();
        assert_eq!(f.block_sizes(), [2]);
        assert_eq!(f.factorization_count(), 16);
    }

    #[test]
    fn zero_alpha_is_identity() {
        let op = fhn_cell();
        let f = op.setup_resolvent(0.0, 16, 0.1).unwrap();
        for k in 0..16 {
            let inv = f.bin_inverse(k);
            assert_eq!(inv, DMatrix::identity(2, 2));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = random_traj(&mut rng, 2, 16, 0.1);
        let x = f.apply_resolvent(&z).unwrap();
        assert!(x.distance(&z) < 1e-14);
    }

    #[test]
    fn zero_in_zero_out() {
        let f = fhn_cell().setup_resolvent(0.1, 16, 0.1).unwrap();
        let z = StackedTrajectory::zeros(2, 16, 0.1);
        assert_eq!(f.apply_resolvent(&z).unwrap(), z);
    }

    #[test]
    fn resolvent_rejects_wrong_shape() {
        let f = fhn_cell().setup_resolvent(0.1, 16, 0.1).unwrap();
        assert!(f
            .apply_resolvent(&StackedTrajectory::zeros(2, 8, 0.1))
            .is_err());
        assert!(fhn_cell()
            .apply_forward(&StackedTrajectory::zeros(3, 8, 0.1))
            .is_err());
    }

    #[test]
    fn forward_annihilates_constants() {
        let op = LosslessOperator::new(vec![2.0], vec![3.0], Interconnect::zeros(1, 1)).unwrap();
        let x = StackedTrajectory::from_data(2, 10, 0.1, vec![1.5; 20]).unwrap();
        let y = op.apply_forward(&x).unwrap();
        assert!(y.norm() < 1e-12);
    }

    #[test]
    fn forward_static_part_is_exact() {
        // Constants are annihilated by D, leaving exactly (N^T i, -N v).
        let nmat = Interconnect::from_rows(&[vec![1, -1], vec![0, 1]]).unwrap();
        let op = LosslessOperator::new(vec![1.0, 1.0], vec![1.0, 1.0], nmat).unwrap();
        let (v0, v1, i0, i1) = (0.5, -2.0, 1.25, 3.0);
        let mut data = Vec::new();
        for val in [v0, v1, i0, i1] {
            data.extend(std::iter::repeat_n(val, 8));
        }
        let x = StackedTrajectory::from_data(4, 8, 0.1, data).unwrap();
        let y = op.apply_forward(&x).unwrap();
        let expect = [i0, -i0 + i1, -(v0 - v1), -v1];
        for (c, e) in expect.iter().enumerate() {
            for &val in y.channel(c) {
                assert!((val - e).abs() < 1e-12, "channel {c}: {val} vs {e}");
            }
        }
    }

    #[test]
    fn general_interconnect_uses_dense_blocks() {
        let nmat = Interconnect::from_rows(&[vec![1, -1, 0], vec![0, 1, 1]]).unwrap();
        let op = LosslessOperator::new(vec![1.0, 2.0, 0.5], vec![3.0, 1.5], nmat).unwrap();
        let f = op.setup_resolvent(0.3, 12, 0.2).unwrap();
        assert_eq!(f.block_sizes(), [5]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z = random_traj(&mut rng, 5, 12, 0.2);
        let x = f.apply_resolvent(&z).unwrap();
        let back = x.lincomb(1.0, &op.apply_forward(&x).unwrap(), 0.3);
        assert!(back.distance(&z) <= 1e-10 * z.norm());
    }

    #[test]
    fn isolated_channels_get_scalar_blocks() {
        let nmat = Interconnect::from_rows(&[vec![0, 1]]).unwrap();
        let op = LosslessOperator::new(vec![1.0, 1.0], vec![4.0], nmat).unwrap();
        let f = op.setup_resolvent(0.2, 8, 0.1).unwrap();
        let mut sizes = f.block_sizes();
        sizes.sort();
        assert_eq!(sizes, [1, 2]);
    }

    #[test]
    fn spectral_model_is_skew() {
        let op = fhn_cell().with_derivative(Arc::new(Spectral));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [15usize, 16] {
            let x = random_traj(&mut rng, 2, n, 0.1);
            let sx = op.apply_forward(&x).unwrap();
            assert!(x.inner_product(&sx).unwrap().abs() < 1e-9);
        }
    }
}
