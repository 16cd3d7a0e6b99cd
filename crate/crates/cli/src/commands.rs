use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use monosim::bench::{bench_resolvent, loglog_slope, to_csv, BenchOptions};
use monosim::config::{parse_config, RunConfig};
use monosim::dmdr::{solve, SolveReport};
use monosim::metrics::{peak_to_peak, synchrony, Synchrony};
use monosim::reference::{ab2_integrate, state_names, steady_state_extract_with, SteadyState};
use monosim::signal::{circular_align, rotate, write_csv};
use monosim::trajectory::StackedTrajectory;
use monosim::validation::{run_all, ValidationOptions};
use monosim::{build_network, Error};

use crate::output::{ensure_dir, write_atomic, write_json, Residuals, RunManifest, Timings};
use crate::svg::{line_plot, Panel};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: Error },
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Success,
    NotConverged { iterations: usize },
    NonOscillatory,
    ValidationFailed(Vec<String>),
}

impl Outcome {
    pub fn code(&self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::NotConverged { .. } => 2,
            Outcome::NonOscillatory => 3,
            Outcome::ValidationFailed(_) => 1,
        }
    }

    pub fn message(&self) -> Option<String> {
        match self {
            Outcome::Success => None,
            Outcome::NotConverged { iterations } => Some(format!(
                "solver did not converge after {iterations} iterations; outputs written"
            )),
            Outcome::NonOscillatory => Some("AB2 reference run is not oscillatory".into()),
            Outcome::ValidationFailed(names) => Some(format!("failed oracle(s): {}", names.join(", "))),
        }
    }
}

fn load(config: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(config).map_err(|source| CliError::Io {
        path: config.to_owned(),
        source,
    })?;
    parse_config(&text).map_err(|source| CliError::Config {
        path: config.to_owned(),
        source,
    })
}

struct Solved {
    run: RunConfig,
    x: StackedTrajectory,
    report: SolveReport,
    seed: u64,
}

fn solve_config(config: &Path, seed: Option<u64>) -> Result<Solved, CliError> {
    let run = load(config)?;
    let cfg = run.dmdr_config(seed).map_err(|source| CliError::Config {
        path: config.to_owned(),
        source,
    })?;
    let problem = build_network(&run.spec)?;
    let (x, report) = solve(&problem, &cfg)?;
    let seed = run.seed(seed);
    Ok(Solved { run, x, report, seed })
}

fn trajectory_csv(x: &StackedTrajectory, cells: usize) -> Result<String, CliError> {
    let cols: Vec<&[f64]> = x.channel_chunks().collect();
    Ok(write_csv(&state_names(cells), &cols, x.sample_step())?)
}

fn orbit_svg(x: &StackedTrajectory, cells: usize) -> String {
    let chans: Vec<&[f64]> = x.channel_chunks().collect();
    let (v, i) = chans.split_at(cells);
    line_plot(
        &[
            Panel {
                title: format!("voltage ({cells} cell(s), one period)"),
                series: v.to_vec(),
            },
            Panel {
                title: "current".into(),
                series: i.to_vec(),
            },
        ],
        x.sample_step(),
    )
}

fn manifest(
    command: &str,
    config: &Path,
    solved: &Solved,
    outputs: &[PathBuf],
    reference_seconds: Option<f64>,
) -> RunManifest {
    let r = &solved.report;
    RunManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        command: command.into(),
        config: config.to_owned(),
        seed: solved.seed,
        outputs: RunManifest::file_names(outputs),
        converged: r.converged,
        iterations: r.iterations,
        residuals: Residuals {
            final_inclusion: r.final_residual,
            last_relative_change: r.residual_history.last().copied(),
        },
        timings: Timings {
            setup_seconds: r.setup_seconds,
            iterate_seconds: r.iterate_seconds,
            reference_seconds,
        },
    }
}

fn convergence(report: &SolveReport) -> Outcome {
    if report.converged {
        Outcome::Success
    } else {
        Outcome::NotConverged {
            iterations: report.iterations,
        }
    }
}

pub fn simulate(config: &Path, out: &Path, seed: Option<u64>) -> Result<Outcome, CliError> {
    let solved = solve_config(config, seed)?;
    ensure_dir(out)?;
    let cells = solved.run.spec.len();
    let mut outputs = vec![
        write_atomic(out, "trajectory.csv", trajectory_csv(&solved.x, cells)?.as_bytes())?,
        write_json(out, "report.json", &solved.report)?,
        write_atomic(out, "orbit.svg", orbit_svg(&solved.x, cells).as_bytes())?,
    ];
    outputs.push(out.join("manifest.json"));
    write_json(out, "manifest.json", &manifest("simulate", config, &solved, &outputs, None))?;
    Ok(convergence(&solved.report))
}

#[derive(Debug, Serialize)]
struct Comparison {
    cells: usize,
    converged: bool,
    iterations: usize,
    final_residual: f64,
    /// `||a - shift(b)|| / ||a||` over all channels, `a` the AB2 orbit.
    relative_l2_error: Option<f64>,
    voltage_relative_l2_error: Option<f64>,
    shift_samples: Option<usize>,
    dmdr_period: f64,
    ab2_period: Option<f64>,
    period_relative_gap: Option<f64>,
    ab2_period_spread: Option<f64>,
    ab2_cycles: Option<usize>,
    dmdr_min_peak_to_peak: f64,
    ab2_min_peak_to_peak: Option<f64>,
    dmdr_synchrony: Option<Synchrony>,
    ab2_synchrony: Option<Synchrony>,
    ab2_step: f64,
    ab2_t_end: f64,
    dmdr_seconds: f64,
    ab2_seconds: f64,
    ab2_error: Option<String>,
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn compare(
    config: &Path,
    out: &Path,
    ab2_step: Option<f64>,
    t_end: Option<f64>,
    seed: Option<u64>,
) -> Result<Outcome, CliError> {
    let solved = solve_config(config, seed)?;
    ensure_dir(out)?;
    let spec = &solved.run.spec;
    let refcfg = solved.run.reference().clone();
    let (n, h, cells) = (spec.discretization.num_samples, spec.discretization.sample_step, spec.len());
    let step = ab2_step.unwrap_or(refcfg.step);
    let horizon = t_end.unwrap_or(refcfg.t_end);
    let init: Vec<f64> = std::iter::repeat_n(refcfg.initial_voltage, cells)
        .chain(std::iter::repeat_n(refcfg.initial_current, cells))
        .collect();

    let start = Instant::now();
    let steady: Result<SteadyState, Error> = ab2_integrate(spec, step, horizon, &init)
        .and_then(|run| steady_state_extract_with(&run, n, h, refcfg.transient_fraction));
    let ab2_seconds = start.elapsed().as_secs_f64();

    let x = &solved.x;
    let dmdr_period = n as f64 * h;
    let mut cmp = Comparison {
        cells,
        converged: solved.report.converged,
        iterations: solved.report.iterations,
        final_residual: solved.report.final_residual,
        relative_l2_error: None,
        voltage_relative_l2_error: None,
        shift_samples: None,
        dmdr_period,
        ab2_period: None,
        period_relative_gap: None,
        ab2_period_spread: None,
        ab2_cycles: None,
        dmdr_min_peak_to_peak: min_of(&peak_to_peak(x, cells)),
        ab2_min_peak_to_peak: None,
        dmdr_synchrony: if cells > 1 { Some(synchrony(x, cells)?) } else { None },
        ab2_synchrony: None,
        ab2_step: step,
        ab2_t_end: horizon,
        dmdr_seconds: solved.report.setup_seconds + solved.report.iterate_seconds,
        ab2_seconds,
        ab2_error: None,
    };

    let mut outputs = Vec::new();
    let outcome = match steady {
        Err(e @ (Error::NoOscillation | Error::NonFinite { .. })) => {
            cmp.ab2_error = Some(e.to_string());
            Outcome::NonOscillatory
        }
        Err(e) => return Err(e.into()),
        Ok(ss) => {
            let reference: Vec<Vec<f64>> = ss.channels.iter().map(|s| s.samples().to_vec()).collect();
            let ab2_traj = StackedTrajectory::from_channels(reference.clone(), h)?;
            let (shift, v_err) = circular_align(&ss.channels[0], &x.signal(0)?)?;
            let aligned: Vec<Vec<f64>> = x.channel_chunks().map(|c| rotate(c, shift)).collect();
            let (mut num, mut den) = (0.0, 0.0);
            for (a, b) in reference.iter().zip(&aligned) {
                num += a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
                den += a.iter().map(|p| p * p).sum::<f64>();
            }
            cmp.relative_l2_error = Some((num / den).sqrt());
            cmp.voltage_relative_l2_error = Some(v_err);
            cmp.shift_samples = Some(shift);
            cmp.ab2_period = Some(ss.period);
            cmp.period_relative_gap = Some((dmdr_period - ss.period).abs() / ss.period);
            cmp.ab2_period_spread = Some(ss.period_spread);
            cmp.ab2_cycles = Some(ss.cycles);
            cmp.ab2_min_peak_to_peak = Some(min_of(&peak_to_peak(&ab2_traj, cells)));
            if cells > 1 {
                cmp.ab2_synchrony = Some(synchrony(&ab2_traj, cells)?);
            }

            let names = state_names(cells);
            let mut header = Vec::with_capacity(2 * names.len());
            let mut cols: Vec<&[f64]> = Vec::with_capacity(2 * names.len());
            for (k, name) in names.iter().enumerate() {
                header.push(format!("dmdr_{name}"));
                cols.push(&aligned[k]);
                header.push(format!("ab2_{name}"));
                cols.push(&reference[k]);
            }
            outputs.push(write_atomic(out, "comparison.csv", write_csv(&header, &cols, h)?.as_bytes())?);
            convergence(&solved.report)
        }
    };
    outputs.push(write_json(out, "comparison.json", &cmp)?);
    outputs.push(out.join("manifest.json"));
    write_json(out, "manifest.json", &manifest("compare", config, &solved, &outputs, Some(ab2_seconds)))?;
    Ok(outcome)
}

pub fn bench(sizes: &[usize], out: &Path) -> Result<Outcome, CliError> {
    if sizes.is_empty() || sizes.iter().any(|&s| s < 2) {
        return Err(CliError::Usage("--sizes needs sample counts of at least 2".into()));
    }
    let rows = bench_resolvent(sizes, &BenchOptions::default())?;
    ensure_dir(out)?;
    write_atomic(out, "bench.csv", to_csv(&rows).as_bytes())?;
    if rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| r.size as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.freq_ns).collect();
        println!("frequency-path log-log slope: {:.3}", loglog_slope(&xs, &ys));
    }
    Ok(Outcome::Success)
}

#[derive(Debug, Serialize)]
struct ValidationSummary {
    passed: bool,
    suites: Vec<monosim::validation::SuiteResult>,
}

pub fn validate(out: &Path, inject_sign_flip: bool) -> Result<Outcome, CliError> {
    let suites = run_all(ValidationOptions {
        inject_sign_flip,
        seed: 0,
    })?;
    for s in &suites {
        println!(
            "{} {} (max error {:.3e}, tolerance {:.1e}, {} cases)",
            if s.passed { "PASS" } else { "FAIL" },
            s.name,
            s.max_error,
            s.tolerance,
            s.cases
        );
    }
    let failed: Vec<String> = suites.iter().filter(|s| !s.passed).map(|s| s.name.clone()).collect();
    ensure_dir(out)?;
    write_json(
        out,
        "validate.json",
        &ValidationSummary {
            passed: failed.is_empty(),
            suites,
        },
    )?;
    Ok(if failed.is_empty() {
        Outcome::Success
    } else {
        Outcome::ValidationFailed(failed)
    })
}
