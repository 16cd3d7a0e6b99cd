//! JSON run configuration.
//!
//! ```json
//! {
//!   "cells": [{ "capacitance": 1.0, "inductance": 20.0, "resistance": 1.0 }],
//!   "coupling": { "resistance": 5.0 },
//!   "discretization": { "num_samples": 556, "sample_step": 0.1 },
//!   "solver": { "alpha": 0.1, "tolerance": 1e-6, "max_iterations": 20000,
//!               "seed": 0, "init": { "kind": "seeded-uniform", "amplitude": 1.0 } },
//!   "reference": { "step": 0.01, "t_end": 1000.0 }
//! }
//! ```
//!
//! Exactly one of `cells` and `generator` must be present. `coupling` is a
//! full resistance matrix or a uniform `{ "resistance": r }`, and must be
//! absent with `generator`, which samples couplings itself. `solver` and
//! `reference` are optional; unknown keys are rejected everywhere.

use serde::{Deserialize, Serialize};

use crate::dmdr::DmdrConfig;
use crate::error::{invalid, Error, Result};
use crate::init;
use crate::netbuild::{sample_heterogeneous, CellParams, Discretization, NetworkSpec, NominalValues};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<CellParams>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingSection>,
    pub discretization: Discretization,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub reference: ReferenceSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    pub n: usize,
    #[serde(default = "default_nominal")]
    pub nominal: NominalValues,
    pub deviation: f64,
    pub seed: u64,
}

fn default_nominal() -> NominalValues {
    NominalValues::STANDARD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CouplingSection {
    Matrix(Vec<Vec<f64>>),
    Uniform(UniformCoupling),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformCoupling {
    pub resistance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub alpha: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub init: InitSection,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            tolerance: crate::dmdr::DEFAULT_TOLERANCE,
            max_iterations: 20_000,
            seed: 0,
            init: InitSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitSection {
    pub kind: String,
    pub amplitude: f64,
}

impl Default for InitSection {
    fn default() -> Self {
        Self {
            kind: init::SEEDED_UNIFORM.to_owned(),
            amplitude: 1.0,
        }
    }
}

/// Settings for the time-stepping comparison run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceSection {
    pub step: f64,
    pub t_end: f64,
    pub initial_voltage: f64,
    pub initial_current: f64,
    pub transient_fraction: f64,
}

impl Default for ReferenceSection {
    fn default() -> Self {
        Self {
            step: 0.01,
            t_end: 1000.0,
            initial_voltage: 1.0,
            initial_current: 0.0,
            transient_fraction: 0.8,
        }
    }
}

impl ReferenceSection {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid("reference.step", "must be positive and finite"));
        }
        if !(self.t_end > self.step && self.t_end.is_finite()) {
            return Err(invalid("reference.t_end", "must exceed reference.step"));
        }
        if !(self.initial_voltage.is_finite() && self.initial_current.is_finite()) {
            return Err(invalid("reference.initial_voltage", "must be finite"));
        }
        if !(self.transient_fraction >= 0.0 && self.transient_fraction < 1.0) {
            return Err(invalid("reference.transient_fraction", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub document: ConfigDocument,
    pub spec: NetworkSpec,
}

impl RunConfig {
    /// Solver settings, with an optional seed override.
    pub fn dmdr_config(&self, seed: Option<u64>) -> Result<DmdrConfig> {
        solver_config(&self.document.solver, seed)
    }

    pub fn seed(&self, seed: Option<u64>) -> u64 {
        seed.unwrap_or(self.document.solver.seed)
    }

    pub fn reference(&self) -> &ReferenceSection {
        &self.document.reference
    }
}

fn solver_config(s: &SolverSection, seed: Option<u64>) -> Result<DmdrConfig> {
    let params = init::InitParams {
        seed: seed.unwrap_or(s.seed),
        amplitude: s.init.amplitude,
    };
    let initializer = init::by_name(&s.init.kind, params)
        .map_err(|e| invalid("solver.init.kind", e.to_string()))?;
    if !(s.init.amplitude > 0.0 && s.init.amplitude.is_finite()) {
        return Err(invalid("solver.init.amplitude", "must be positive and finite"));
    }
    let cfg = DmdrConfig {
        alpha: s.alpha,
        max_iterations: s.max_iterations,
        tolerance: s.tolerance,
        init: initializer,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let document: ConfigDocument =
        serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
    let spec = network_spec(&document)?;
    solver_config(&document.solver, None)?;
    document.reference.validate()?;
    Ok(RunConfig { document, spec })
}

/// Parses into the network spec and the solver settings.
pub fn parse_parts(text: &str) -> Result<(NetworkSpec, DmdrConfig)> {
    let run = parse_config(text)?;
    let cfg = run.dmdr_config(None)?;
    Ok((run.spec, cfg))
}

pub fn serialize_config(doc: &ConfigDocument) -> String {
    serde_json::to_string_pretty(doc).expect("config documents always serialize")
}

fn network_spec(doc: &ConfigDocument) -> Result<NetworkSpec> {
    let spec = match (&doc.cells, &doc.generator) {
        (Some(_), Some(_)) => {
            return Err(invalid("generator", "`cells` and `generator` are exclusive"))
        }
        (None, None) => return Err(invalid("cells", "one of `cells` or `generator` is required")),
        (None, Some(g)) => {
            if doc.coupling.is_some() {
                return Err(invalid("coupling", "not allowed together with `generator`"));
            }
            if g.n == 0 {
                return Err(invalid("generator.n", "must be at least 1"));
            }
            sample_heterogeneous(g.nominal, g.deviation, g.n, g.seed, doc.discretization.clone())?
        }
        (Some(cells), None) => {
            let n = cells.len();
            let coupling = match &doc.coupling {
                None if n <= 1 => vec![0.0; n * n],
                None => return Err(invalid("coupling", "required for more than one cell")),
                Some(CouplingSection::Uniform(u)) => (0..n * n)
                    .map(|idx| if idx / n == idx % n { 0.0 } else { u.resistance })
                    .collect(),
                Some(CouplingSection::Matrix(rows)) => {
                    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                        return Err(Error::DimensionMismatch(format!(
                            "coupling must be a {n} x {n} matrix"
                        )));
                    }
                    let mut flat = rows.concat();
                    for k in 0..n {
                        flat[k * n + k] = 0.0;
                    }
                    flat
                }
            };
            NetworkSpec {
                cells: cells.clone(),
                coupling,
                discretization: doc.discretization.clone(),
            }
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn parse_error(text: &str, e: &serde_json::Error) -> Error {
    let (line, column) = (e.line(), e.column());
    let offset = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum::<usize>()
        + column.saturating_sub(1);
    Error::Parse {
        line,
        column,
        offset: offset.min(text.len()),
        message: e.to_string(),
    }
}
