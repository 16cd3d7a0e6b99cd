//! Problem builders for the FitzHugh-Nagumo cell and diffusively coupled
//! networks of such cells.
//!
//! Per cell: `C v' = v - v^3/3 - i + sum_j (v_j - v)/Rc_j` and
//! `L i' = v - R i`. The split puts `C D`, `L D` and the ±1 interconnect in
//! the lossless part, `v^3/3 + sum_j 1/Rc_j * v` and `R i` in `M1`, and the
//! voltage block with ones on the diagonal and `1/Rc` off-diagonal in `M2`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::derivative::{self, DerivativeModel};
use crate::dmdr::Problem;
use crate::error::{invalid, Error, Result};
use crate::lossless::{Interconnect, LosslessOperator};
use crate::resistive::{MixedMonotoneResistive, ScalarChannel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellParams {
    pub capacitance: f64,
    pub inductance: f64,
    pub resistance: f64,
}

impl CellParams {
    /// Nominal cell: `C = R = 1`, `L = 20`.
    pub const NOMINAL: CellParams = CellParams {
        capacitance: 1.0,
        inductance: 20.0,
        resistance: 1.0,
    };

    pub fn validate(&self, path: &str) -> Result<()> {
        for (name, v) in [
            ("capacitance", self.capacitance),
            ("inductance", self.inductance),
            ("resistance", self.resistance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(
                    format!("{path}.{name}"),
                    "must be strictly positive and finite",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    pub num_samples: usize,
    pub sample_step: f64,
    #[serde(default = "default_derivative_model")]
    pub derivative_model: String,
}

fn default_derivative_model() -> String {
    derivative::BACKWARD_EULER.to_owned()
}

impl Discretization {
    pub fn new(num_samples: usize, sample_step: f64) -> Self {
        Self {
            num_samples,
            sample_step,
            derivative_model: default_derivative_model(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_samples < 2 {
            return Err(invalid("discretization.num_samples", "must be at least 2"));
        }
        if !(self.sample_step > 0.0 && self.sample_step.is_finite()) {
            return Err(invalid(
                "discretization.sample_step",
                "must be strictly positive and finite",
            ));
        }
        derivative::registry()
            .get(&self.derivative_model)
            .map_err(|e| invalid("discretization.derivative_model", e.to_string()))?;
        Ok(())
    }

    pub fn model(&self) -> Result<Arc<dyn DerivativeModel>> {
        derivative::by_name(&self.derivative_model)
    }
}

/// Nominal values for heterogeneous sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NominalValues {
    pub capacitance: f64,
    pub inductance: f64,
    pub resistance: f64,
    pub coupling_resistance: f64,
}

impl NominalValues {
    /// `C = 1`, `L = 20`, `R = 1`, `Rc = 5`.
    pub const STANDARD: NominalValues = NominalValues {
        capacitance: 1.0,
        inductance: 20.0,
        resistance: 1.0,
        coupling_resistance: 5.0,
    };
}

/// Cells, symmetric coupling resistances and the time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub cells: Vec<CellParams>,
    /// Row-major `n x n` coupling resistances; the diagonal is ignored and
    /// stored as 0.
    pub coupling: Vec<f64>,
    pub discretization: Discretization,
}

impl NetworkSpec {
    pub fn single(cell: CellParams, discretization: Discretization) -> Self {
        Self {
            cells: vec![cell],
            coupling: vec![0.0],
            discretization,
        }
    }

    /// All-to-all network with a uniform coupling resistance.
    pub fn homogeneous(
        n: usize,
        cell: CellParams,
        coupling_resistance: f64,
        discretization: Discretization,
    ) -> Self {
        let coupling = (0..n * n)
            .map(|idx| {
                if idx / n == idx % n {
                    0.0
                } else {
                    coupling_resistance
                }
            })
            .collect();
        Self {
            cells: vec![cell; n],
            coupling,
            discretization,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn coupling_resistance(&self, i: usize, j: usize) -> f64 {
        self.coupling[i * self.cells.len() + j]
    }

    /// Sum of coupling conductances seen by cell `k`.
    pub fn coupling_conductance(&self, k: usize) -> f64 {
        (0..self.cells.len())
            .filter(|&j| j != k)
            .map(|j| 1.0 / self.coupling_resistance(k, j))
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.cells.len();
        if n == 0 {
            return Err(invalid("cells", "at least one cell is required"));
        }
        for (k, cell) in self.cells.iter().enumerate() {
            cell.validate(&format!("cells[{k}]"))?;
        }
        if self.coupling.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "coupling has {} entries for {n} cells",
                self.coupling.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let r = self.coupling_resistance(i, j);
                if !(r > 0.0 && r.is_finite()) {
                    return Err(invalid(
                        format!("coupling[{i}][{j}]"),
                        "must be strictly positive and finite",
                    ));
                }
                let gap = (r - self.coupling_resistance(j, i)).abs();
                if gap > 1e-12 * r.abs() {
                    return Err(Error::Asymmetric { row: i, col: j, gap });
                }
            }
        }
        self.discretization.validate()
    }
}

/// The two-channel `(v, i)` FitzHugh-Nagumo problem.
pub fn build_fhn_cell(params: CellParams, num_samples: usize, h: f64) -> Result<Problem> {
    build_network(&NetworkSpec::single(
        params,
        Discretization::new(num_samples, h),
    ))
}

/// `2n`-channel problem: `n` voltages then `n` currents.
pub fn build_network(spec: &NetworkSpec) -> Result<Problem> {
    spec.validate()?;
    let n = spec.cells.len();
    let lossless = LosslessOperator::new(
        spec.cells.iter().map(|c| c.capacitance).collect(),
        spec.cells.iter().map(|c| c.inductance).collect(),
        Interconnect::identity(n),
    )?
    .with_derivative(spec.discretization.model()?);

    let mut m1 = Vec::with_capacity(2 * n);
    for k in 0..n {
        m1.push(ScalarChannel::CubicPlusLinear {
            conductance: spec.coupling_conductance(k),
        });
    }
    for cell in &spec.cells {
        m1.push(ScalarChannel::Linear {
            resistance: cell.resistance,
        });
    }
    let m2 = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        if r >= n || c >= n {
            0.0
        } else if r == c {
            1.0
        } else {
            1.0 / spec.coupling_resistance(r, c)
        }
    });
    let resistive = MixedMonotoneResistive::new(m1, m2)?;
    Problem::new(
        lossless,
        resistive,
        spec.discretization.num_samples,
        spec.discretization.sample_step,
    )
}

/// Draws every cell parameter and every upper-triangle coupling resistance
/// as `nominal * (1 + u)`, `u ~ U[-deviation, deviation]`, from ChaCha8
/// seeded with `seed_from_u64(seed)`. Draw order: `C, L, R` for cell 0, 1,
/// ..., then couplings `(0,1), (0,2), ..., (n-2,n-1)`. The lower triangle is
/// mirrored.
pub fn sample_heterogeneous(
    nominal: NominalValues,
    deviation: f64,
    n: usize,
    seed: u64,
    discretization: Discretization,
) -> Result<NetworkSpec> {
    if !((0.0..1.0).contains(&deviation)) {
        return Err(invalid("generator.deviation", "must lie in [0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(-deviation, deviation);
    let mut draw = |nominal: f64| {
        let u = dist.sample(&mut rng);
        if deviation == 0.0 {
            nominal
        } else {
            nominal * (1.0 + u)
        }
    };
    let cells: Vec<CellParams> = (0..n)
        .map(|_| CellParams {
            capacitance: draw(nominal.capacitance),
            inductance: draw(nominal.inductance),
            resistance: draw(nominal.resistance),
        })
        .collect();
    let mut coupling = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let r = draw(nominal.coupling_resistance);
            coupling[i * n + j] = r;
            coupling[j * n + i] = r;
        }
    }
    Ok(NetworkSpec {
        cells,
        coupling,
        discretization,
    })
}
