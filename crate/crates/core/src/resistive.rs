//! Static resistive operators split as `M1 - M2`: `M1` is channelwise and
//! dissipative (used through its resolvent), `M2` is a symmetric PSD matrix
//! applied sample by sample (used forward).

use nalgebra::{DMatrix, DMatrixView, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::trajectory::StackedTrajectory;

pub const PROX_MAX_ITERATIONS: usize = 200;

/// A monotone odd scalar map applied pointwise in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarChannel {
    /// `x -> x^3 / 3 + g x`
    CubicPlusLinear { conductance: f64 },
    /// `x -> r x`
    Linear { resistance: f64 },
}

impl ScalarChannel {
    pub fn validate(&self) -> Result<()> {
        let (name, value) = match *self {
            Self::CubicPlusLinear { conductance } => ("conductance", conductance),
            Self::Linear { resistance } => ("resistance", resistance),
        };
        if !(value >= 0.0 && value.is_finite()) {
            return Err(invalid(name, "must be non-negative and finite"));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::CubicPlusLinear { conductance } => x * x * x / 3.0 + conductance * x,
            Self::Linear { resistance } => resistance * x,
        }
    }

    pub fn slope(&self, x: f64) -> f64 {
        match *self {
            Self::CubicPlusLinear { conductance } => x * x + conductance,
            Self::Linear { resistance } => resistance,
        }
    }
}

/// Solves `x + alpha f(x) = z` for the channel map `f`.
///
/// Linear channels use the closed form. Cubic channels run Newton from
/// `x = z` inside the sign-change bracket `[-|z| - 1, |z| + 1]`, falling back
/// to bisection whenever a step leaves the bracket.
pub fn prox_channel(kind: ScalarChannel, alpha: f64, z: f64) -> Result<f64> {
    match kind {
        ScalarChannel::Linear { resistance } => Ok(z / (1.0 + alpha * resistance)),
        ScalarChannel::CubicPlusLinear { .. } => {
            let tol = 1e-12 * z.abs().max(1.0);
            let (mut lo, mut hi) = (-z.abs() - 1.0, z.abs() + 1.0);
            let mut x = z;
            for _ in 0..PROX_MAX_ITERATIONS {
                let phi = x + alpha * kind.eval(x) - z;
                if phi.abs() <= tol {
                    return Ok(x);
                }
                if phi < 0.0 {
                    lo = x;
                } else {
                    hi = x;
                }
                let step = x - phi / (1.0 + alpha * kind.slope(x));
                x = if step > lo && step < hi {
                    step
                } else {
                    0.5 * (lo + hi)
                };
            }
            Err(Error::ProxNotConverged {
                iterations: PROX_MAX_ITERATIONS,
                z,
                x,
            })
        }
    }
}

/// `M1` (diagonal channel maps) together with the linear `M2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedMonotoneResistive {
    m1_channels: Vec<ScalarChannel>,
    m2: DMatrix<f64>,
}

impl MixedMonotoneResistive {
    /// Validates channel kinds and the symmetry of `m2`. Definiteness is
    /// measured separately by [`check_m2_monotone`](Self::check_m2_monotone).
    pub fn new(m1_channels: Vec<ScalarChannel>, m2: DMatrix<f64>) -> Result<Self> {
        for (k, ch) in m1_channels.iter().enumerate() {
            ch.validate().map_err(|e| match e {
                Error::InvalidParameter { field, reason } => Error::InvalidParameter {
                    field: format!("m1_channels[{k}].{field}"),
                    reason,
                },
                other => other,
            })?;
        }
        let n = m1_channels.len();
        if m2.nrows() != n || m2.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "m2 is {}x{}, expected {n}x{n}",
                m2.nrows(),
                m2.ncols()
            )));
        }
        if m2.iter().any(|v| !v.is_finite()) {
            return Err(invalid("m2", "entries must be finite"));
        }
        check_symmetric(&m2)?;
        Ok(Self { m1_channels, m2 })
    }

    pub fn channels(&self) -> usize {
        self.m1_channels.len()
    }

    pub fn m1_channels(&self) -> &[ScalarChannel] {
        &self.m1_channels
    }

    pub fn m2_matrix(&self) -> &DMatrix<f64> {
        &self.m2
    }

    fn ensure_channels(&self, x: &StackedTrajectory) -> Result<()> {
        if x.channels() != self.channels() {
            return Err(Error::DimensionMismatch(format!(
                "trajectory has {} channels, resistive part has {}",
                x.channels(),
                self.channels()
            )));
        }
        Ok(())
    }

    /// `J_{alpha M1}`, one scalar prox per (channel, sample).
    pub fn apply_m1_resolvent(
        &self,
        alpha: f64,
        z: &StackedTrajectory,
    ) -> Result<StackedTrajectory> {
        self.ensure_channels(z)?;
        let mut out = z.clone();
        out.channel_chunks_mut()
            .zip(&self.m1_channels)
            .par_bridge()
            .try_for_each(|(chunk, &kind)| -> Result<()> {
                for v in chunk.iter_mut() {
                    *v = prox_channel(kind, alpha, *v)?;
                }
                Ok(())
            })?;
        Ok(out)
    }

    /// `M1 x`, the forward channel maps.
    pub fn apply_m1(&self, x: &StackedTrajectory) -> Result<StackedTrajectory> {
        self.ensure_channels(x)?;
        let mut out = x.clone();
        for (chunk, kind) in out.channel_chunks_mut().zip(&self.m1_channels) {
            for v in chunk.iter_mut() {
                *v = kind.eval(*v);
            }
        }
        Ok(out)
    }

    /// `y[., t] = M2 x[., t]` for every sample. The channel-major data is an
    /// `N x channels` column-major matrix, so this is one product `X M2^T`.
    pub fn apply_m2(&self, x: &StackedTrajectory) -> Result<StackedTrajectory> {
        self.ensure_channels(x)?;
        let (n, ch) = (x.num_samples(), self.channels());
        let xs = DMatrixView::from_slice(x.as_slice(), n, ch);
        let y = xs * self.m2.transpose();
        StackedTrajectory::from_data(ch, n, x.sample_step(), y.data.into())
    }

    /// Smallest eigenvalue of `M2` on its support (the channels with a
    /// nonzero row). Zero rows only add zero eigenvalues, which never break
    /// monotonicity; an all-zero `M2` reports 0.
    pub fn check_m2_monotone(&self) -> Result<f64> {
        smallest_support_eigenvalue(&self.m2)
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    for r in 0..m.nrows() {
        for c in (r + 1)..m.ncols() {
            let gap = (m[(r, c)] - m[(c, r)]).abs();
            if gap > 1e-12 {
                return Err(Error::Asymmetric { row: r, col: c, gap });
            }
        }
    }
    Ok(())
}

/// Smallest eigenvalue of the principal submatrix of `m` on the rows that
/// carry a nonzero entry.
pub fn smallest_support_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch("m2 must be square".into()));
    }
    check_symmetric(m)?;
    let support: Vec<usize> = (0..m.nrows())
        .filter(|&r| m.row(r).iter().any(|&v| v != 0.0))
        .collect();
    if support.is_empty() {
        return Ok(0.0);
    }
    let sub = DMatrix::from_fn(support.len(), support.len(), |r, c| {
        m[(support[r], support[c])]
    });
    let eig = SymmetricEigen::new(sub);
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const CUBIC: ScalarChannel = ScalarChannel::CubicPlusLinear { conductance: 0.0 };

    fn bisect(kind: ScalarChannel, alpha: f64, z: f64) -> f64 {
        let (mut lo, mut hi) = (-z.abs() - 2.0, z.abs() + 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid + alpha * kind.eval(mid) < z {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn zero_maps_to_zero() {
        for kind in [CUBIC, ScalarChannel::Linear { resistance: 3.0 }] {
            assert_eq!(prox_channel(kind, 0.4, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn linear_closed_form() {
        let x = prox_channel(ScalarChannel::Linear { resistance: 1.0 }, 0.1, 1.0).unwrap();
        assert_relative_eq!(x, 1.0 / 1.1, epsilon = 1e-15);
    }

    #[test]
    fn cubic_matches_bisection() {
        // Frozen from the bisection oracle on x + (0.1/3) x^3 = 1.
        let expected = bisect(CUBIC, 0.1, 1.0);
        assert!((expected - 0.969_613_882_045_48).abs() < 1e-12);
        assert!((expected - 0.9695).abs() < 2e-4);
        let x = prox_channel(CUBIC, 0.1, 1.0).unwrap();
        assert!((x - expected).abs() < 1e-12);
    }

    #[test]
    fn stiff_cases_converge() {
        let kind = ScalarChannel::CubicPlusLinear { conductance: 20.0 };
        for z in [-1e6, -10.0, 1e-9, 10.0, 1e6] {
            for alpha in [1e-3, 1.0, 100.0] {
                let x = prox_channel(kind, alpha, z).unwrap();
                let resid = x + alpha * kind.eval(x) - z;
                assert!(resid.abs() <= 1e-12 * z.abs().max(1.0), "z={z} alpha={alpha}");
            }
        }
    }

    #[test]
    fn invalid_channels_rejected() {
        assert!(ScalarChannel::Linear { resistance: -1.0 }.validate().is_err());
        let err = MixedMonotoneResistive::new(
            vec![ScalarChannel::CubicPlusLinear {
                conductance: f64::NAN,
            }],
            DMatrix::zeros(1, 1),
        )
        .unwrap_err();
        assert!(err.to_string().contains("m1_channels[0].conductance"));
    }

    #[test]
    fn m1_resolvent_uniform_linear() {
        let r = MixedMonotoneResistive::new(
            vec![ScalarChannel::Linear { resistance: 1.0 }; 2],
            DMatrix::zeros(2, 2),
        )
        .unwrap();
        let z = StackedTrajectory::from_data(2, 5, 0.1, vec![1.0; 10]).unwrap();
        let x = r.apply_m1_resolvent(0.1, &z).unwrap();
        assert!(x.as_slice().iter().all(|&v| v == 1.0 / 1.1));
        let zero = StackedTrajectory::zeros(2, 5, 0.1);
        assert_eq!(r.apply_m1_resolvent(0.1, &zero).unwrap(), zero);
    }

    #[test]
    fn m2_single_cell_selects_voltage() {
        let m2 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let r = MixedMonotoneResistive::new(
            vec![CUBIC, ScalarChannel::Linear { resistance: 1.0 }],
            m2,
        )
        .unwrap();
        let x = StackedTrajectory::from_channels(vec![vec![1.0, -2.0], vec![3.0, 4.0]], 0.1)
            .unwrap();
        let y = r.apply_m2(&x).unwrap();
        assert_eq!(y.channel(0), [1.0, -2.0]);
        assert_eq!(y.channel(1), [0.0, 0.0]);
    }

    #[test]
    fn m2_coupling_matches_dense_multiply() {
        let c = 0.2;
        let m2 = DMatrix::from_fn(3, 3, |r, k| if r == k { 1.0 } else { c });
        let r = MixedMonotoneResistive::new(vec![CUBIC; 3], m2.clone()).unwrap();
        let mut x = StackedTrajectory::zeros(3, 4, 0.1);
        x.channel_mut(1)[2] = 1.0;
        let y = r.apply_m2(&x).unwrap();
        for t in 0..4 {
            let col = nalgebra::DVector::from_fn(3, |ch, _| x.channel(ch)[t]);
            let dense = &m2 * col;
            for ch in 0..3 {
                assert_eq!(y.channel(ch)[t], dense[ch]);
            }
        }
        assert_eq!(y.channel(0)[2], 0.2);
        assert_eq!(y.channel(2)[2], 0.2);
    }

    #[test]
    fn m2_eigenvalue_checks() {
        assert_relative_eq!(
            smallest_support_eigenvalue(&DMatrix::identity(3, 3)).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_relative_eq!(
            smallest_support_eigenvalue(&indefinite).unwrap(),
            -1.0,
            epsilon = 1e-12
        );
        assert_eq!(smallest_support_eigenvalue(&DMatrix::zeros(4, 4)).unwrap(), 0.0);
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            smallest_support_eigenvalue(&asym),
            Err(Error::Asymmetric { .. })
        ));
        assert!(MixedMonotoneResistive::new(vec![CUBIC; 2], asym).is_err());
    }

    #[test]
    fn homogeneous_network_eigenvalue() {
        // (1 - c) I + c J with c = 0.2 on 100 voltage channels, zero currents.
        let n = 100;
        let m2 = DMatrix::from_fn(2 * n, 2 * n, |r, c| match (r < n, c < n) {
            (true, true) if r == c => 1.0,
            (true, true) => 0.2,
            _ => 0.0,
        });
        assert_relative_eq!(smallest_support_eigenvalue(&m2).unwrap(), 0.8, epsilon = 1e-10);
    }

    fn channel_strategy() -> impl Strategy<Value = ScalarChannel> {
        prop_oneof![
            (0.0..20.0f64).prop_map(|g| ScalarChannel::CubicPlusLinear { conductance: g }),
            (0.0..20.0f64).prop_map(|r| ScalarChannel::Linear { resistance: r }),
        ]
    }

    proptest! {
        #[test]
        fn prox_is_monotone(kind in channel_strategy(), alpha in 0.01..1.0f64,
                            a in -10.0..10.0f64, b in -10.0..10.0f64) {
            let (z1, z2) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(prox_channel(kind, alpha, z1)? <= prox_channel(kind, alpha, z2)?);
        }

        #[test]
        fn prox_is_odd(kind in channel_strategy(), alpha in 0.01..1.0f64, z in -10.0..10.0f64) {
            prop_assert_eq!(prox_channel(kind, alpha, -z)?, -prox_channel(kind, alpha, z)?);
        }

        #[test]
        fn prox_agrees_with_bisection(kind in channel_strategy(), alpha in 0.01..1.0f64,
                                      z in -10.0..10.0f64) {
            prop_assert!((prox_channel(kind, alpha, z)? - bisect(kind, alpha, z)).abs() <= 1e-10);
        }

        #[test]
        fn m2_is_linear(a in -3.0..3.0f64, b in -3.0..3.0f64, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
            let m2 = (&m + m.transpose()) * 0.5;
            let r = MixedMonotoneResistive::new(vec![CUBIC; 3], m2).unwrap();
            let mut draw = || StackedTrajectory::from_data(3, 6, 0.1,
                (0..18).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let (x, y) = (draw(), draw());
            let lhs = r.apply_m2(&x.lincomb(a, &y, b))?;
            let rhs = r.apply_m2(&x)?.lincomb(a, &r.apply_m2(&y)?, b);
            prop_assert!(lhs.distance(&rhs) <= 1e-12 * (1.0 + rhs.norm()));
        }
    }
}
