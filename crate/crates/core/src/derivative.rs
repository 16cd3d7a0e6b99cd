//! Discrete differentiation operators on the periodic grid, described by
//! their eigenvalues under the DFT.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::Result;
use crate::registry::Registry;

pub const BACKWARD_EULER: &str = "backward-euler";
pub const SPECTRAL: &str = "spectral";

/// A periodic LTI differentiation operator, diagonal in the DFT basis.
pub trait DerivativeModel: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Eigenvalue attached to DFT bin `k` of an `n`-point grid with step `h`.
    fn eigenvalue(&self, k: usize, n: usize, h: f64) -> Complex64;
}

/// The circulant backward-difference matrix `(x[t] - x[t-1]) / h` with the
/// wrap-around entry enforcing periodicity. Its DFT eigenvalues are
/// `(1 - exp(-2 pi i k / N)) / h`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CirculantBackwardEuler;

impl DerivativeModel for CirculantBackwardEuler {
    fn name(&self) -> &'static str {
        BACKWARD_EULER
    }

    fn eigenvalue(&self, k: usize, n: usize, h: f64) -> Complex64 {
        let theta = -2.0 * PI * k as f64 / n as f64;
        (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, theta)) / h
    }
}

/// Exact differentiation of the trigonometric interpolant: `i * omega_k`,
/// negative frequencies above `N/2`. The Nyquist bin of an even grid maps to
/// zero so that real signals stay real.
#[derive(Debug, Clone, Copy, Default)]
pub struct Spectral;

impl DerivativeModel for Spectral {
    fn name(&self) -> &'static str {
        SPECTRAL
    }

    fn eigenvalue(&self, k: usize, n: usize, h: f64) -> Complex64 {
        if 2 * k == n {
            return Complex64::new(0.0, 0.0);
        }
        let signed = if 2 * k < n {
            k as f64
        } else {
            k as f64 - n as f64
        };
        Complex64::new(0.0, 2.0 * PI * signed / (n as f64 * h))
    }
}

pub type DerivativeFactory = fn() -> Arc<dyn DerivativeModel>;

pub fn registry() -> Registry<DerivativeFactory> {
    let mut reg: Registry<DerivativeFactory> = Registry::new("derivative model");
    reg.register(BACKWARD_EULER, || Arc::new(CirculantBackwardEuler))
        .register(SPECTRAL, || Arc::new(Spectral));
    reg
}

/// Resolves a derivative model by registered name.
pub fn by_name(name: &str) -> Result<Arc<dyn DerivativeModel>> {
    Ok(registry().get(name)?())
}

pub fn default_model() -> Arc<dyn DerivativeModel> {
    Arc::new(CirculantBackwardEuler)
}

/// All `num_samples` eigenvalues of `model`.
pub fn derivative_eigenvalues(
    num_samples: usize,
    h: f64,
    model: &dyn DerivativeModel,
) -> Vec<Complex64> {
    (0..num_samples)
        .map(|k| model.eigenvalue(k, num_samples, h))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dc_bin_is_zero() {
        for model in [by_name(BACKWARD_EULER).unwrap(), by_name(SPECTRAL).unwrap()] {
            assert_eq!(model.eigenvalue(0, 10, 0.3), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn backward_euler_nyquist_value() {
        let lam = CirculantBackwardEuler.eigenvalue(2, 4, 1.0);
        assert!((lam - Complex64::new(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn matches_dense_circulant_on_dft_basis() {
        // D e_k = lambda_k e_k with e_k[t] = exp(2 pi i k t / N) and
        // (D x)[t] = (x[t] - x[t-1]) / h.
        let (n, h) = (8usize, 0.5);
        let mut d = vec![vec![0.0; n]; n];
        for t in 0..n {
            d[t][t] += 1.0 / h;
            d[t][(t + n - 1) % n] -= 1.0 / h;
        }
        let lams = derivative_eigenvalues(n, h, &CirculantBackwardEuler);
        for (k, lam) in lams.iter().enumerate() {
            let e: Vec<Complex64> = (0..n)
                .map(|t| Complex64::from_polar(1.0, 2.0 * PI * (k * t) as f64 / n as f64))
                .collect();
            for t in 0..n {
                let de: Complex64 = (0..n).map(|s| e[s] * d[t][s]).sum();
                assert!((de - lam * e[t]).norm() < 1e-12, "k = {k}, t = {t}");
            }
        }
    }

    #[test]
    fn eigenvalues_are_conjugate_symmetric() {
        for model in [by_name(BACKWARD_EULER).unwrap(), by_name(SPECTRAL).unwrap()] {
            for n in [5usize, 8] {
                let lams = derivative_eigenvalues(n, 0.1, model.as_ref());
                for k in 0..n {
                    assert!((lams[k] - lams[(n - k) % n].conj()).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn spectral_uses_signed_frequencies() {
        let (n, h) = (6usize, 0.5);
        let w = 2.0 * PI / (n as f64 * h);
        assert!((Spectral.eigenvalue(1, n, h) - Complex64::new(0.0, w)).norm() < 1e-15);
        assert!((Spectral.eigenvalue(5, n, h) - Complex64::new(0.0, -w)).norm() < 1e-15);
        assert_eq!(Spectral.eigenvalue(3, n, h), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn unknown_model_name() {
        assert!(by_name("forward-euler").is_err());
        assert_eq!(registry().names(), [BACKWARD_EULER, SPECTRAL]);
    }
}
