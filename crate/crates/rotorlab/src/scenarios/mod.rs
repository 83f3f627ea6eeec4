//! The eight experiment scenarios.
//!
//! Each scenario computes its tests and tables in memory; nothing touches the
//! filesystem until [`RunReport::write`] is called on a finished report.

mod divergence;
mod ergodic;
mod example1;
mod gauss;
mod girsanov;
mod levy;
mod mixing;

use std::f64::consts::TAU;
use std::time::Instant;

use rotorlab_core::rotors::random_orthogonal;
use rotorlab_core::{CMVector, Rotor, RngStream, TimeGrid};
use thiserror::Error;

use crate::config::{Scenario, ScenarioConfig};
use crate::output::{RunReport, Table, TestResult};

/// A failed computation, tagged with the operation that failed.
#[derive(Debug, Error)]
#[error("{operation}: {source}")]
pub struct RunError {
    pub operation: String,
    #[source]
    pub source: rotorlab_core::Error,
}

pub type RunResult<T> = Result<T, RunError>;

pub(crate) trait Ctx<T> {
    fn ctx(self, operation: &str) -> RunResult<T>;
}

impl<T> Ctx<T> for rotorlab_core::Result<T> {
    fn ctx(self, operation: &str) -> RunResult<T> {
        self.map_err(|source| RunError {
            operation: operation.to_string(),
            source,
        })
    }
}

/// Accumulates tests, timings and tables while a scenario runs.
#[derive(Default)]
pub(crate) struct Run {
    tests: Vec<TestResult>,
    timings: Vec<(String, f64)>,
    tables: Vec<Table>,
}

impl Run {
    pub fn test(&mut self, t: TestResult) {
        self.tests.push(t);
    }

    pub fn table(&mut self, t: Table) {
        self.tables.push(t);
    }

    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> RunResult<T>) -> RunResult<T> {
        let start = Instant::now();
        let out = f()?;
        self.timings.push((stage.to_string(), start.elapsed().as_secs_f64()));
        Ok(out)
    }
}

/// Runs the configured scenario. Nothing is written to disk.
pub fn run_scenario(cfg: &ScenarioConfig) -> RunResult<RunReport> {
    let mut run = Run::default();
    let start = Instant::now();
    match cfg.scenario {
        Scenario::GaussLaw => gauss::run(cfg, &mut run)?,
        Scenario::Levy => levy::run(cfg, &mut run)?,
        Scenario::DivergenceIdentities => divergence::run(cfg, &mut run)?,
        Scenario::ErgodicDichotomy => ergodic::run_dichotomy(cfg, &mut run)?,
        Scenario::NecessaryConditions => ergodic::run_necessary(cfg, &mut run)?,
        Scenario::MixingSign => mixing::run(cfg, &mut run)?,
        Scenario::Girsanov => girsanov::run(cfg, &mut run)?,
        Scenario::Example1 => example1::run(cfg, &mut run)?,
    }
    run.timings.push(("total".into(), start.elapsed().as_secs_f64()));
    Ok(RunReport {
        config: cfg.clone(),
        tests: run.tests,
        timings: run.timings,
        tables: run.tables,
        artifacts: Vec::new(),
    })
}

pub(crate) fn grid(cfg: &ScenarioConfig) -> RunResult<TimeGrid> {
    TimeGrid::new(cfg.n_steps).ctx("building the time grid")
}

/// Stream for scenario-level randomness (fixed rotors, random bases), kept
/// far away from the per-path streams `0..2·paths`.
pub(crate) fn setup_stream(cfg: &ScenarioConfig, k: u64) -> RngStream {
    RngStream::new(cfg.seed, (1 << 62) + k)
}

/// Unit vector: `ḣ ≡ 1` for `d = 1`, `(cos 2πs, sin 2πs, 0, ...)` otherwise.
pub(crate) fn unit_h(grid: TimeGrid, dim: usize) -> RunResult<CMVector> {
    CMVector::from_fn(grid, dim, |i, c| {
        let s = grid.time(i);
        match (dim, c) {
            (1, _) => 1.0,
            (_, 0) => (TAU * s).cos(),
            (_, 1) => (TAU * s).sin(),
            _ => 0.0,
        }
    })
    .ctx("building the unit direction h")
}

/// Adapted rotor rotating coordinates 0 and 1 by
/// `rate · (W¹(s) − W²(s)/2) + s`; identity on the other coordinates.
pub(crate) fn adapted_rotor(dim: usize, rate: f64) -> RunResult<Rotor> {
    if dim < 2 {
        return Err(RunError {
            operation: "building the adapted rotor".into(),
            source: rotorlab_core::Error::InvalidArgument(
                "the adapted rotor needs dim >= 2".into(),
            ),
        });
    }
    Rotor::adapted_matrix(dim, move |p, out| {
        let a = rate * (p.position[0] - 0.5 * p.position[1]) + p.time();
        let (s, c) = a.sin_cos();
        out.fill(0.0);
        for j in 2..dim {
            out[j * dim + j] = 1.0;
        }
        out[0] = c;
        out[1] = -s;
        out[dim] = s;
        out[dim + 1] = c;
    })
    .ctx("building the adapted rotor")
}

/// Constant Haar-random orthogonal `d × d` matrix.
pub(crate) fn fixed_rotor(cfg: &ScenarioConfig, dim: usize) -> RunResult<Rotor> {
    let q = random_orthogonal(dim, &mut setup_stream(cfg, 0).rng());
    Rotor::constant_matrix(dim, q.transpose().as_slice().to_vec()).ctx("building the fixed rotor")
}
