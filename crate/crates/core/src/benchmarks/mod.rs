//! Benchmark problem definitions, reference values and the cost protocol.
//!
//! Problem constants live in the TOML files under `configs/`, compiled in
//! and checked against hard-coded values when loaded.

pub mod ic;
pub mod protocol;
pub mod reference;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::controller::{AdaptiveConfig, EstimatorKind};
use crate::error::{Error, Result};
use crate::field::{Grid2D, PeriodicField};
use crate::integrators::SchemeKind;
use crate::models::{FchParams, Model, PfcParams};
use crate::solvers::{SolverConfig, SolverKind, DEFAULT_ETA_SQUARES};

pub use ic::InitialCondition;
pub use reference::ReferencePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Problem {
    Fch1,
    Fch2,
    Fch3,
    Pfc1,
    Pfc2,
    /// Reduced FCH3: same spacing and parameters on a quarter-width box.
    DeskFch3,
    /// Reduced PFC1: four lattice periods instead of 32, same spacing.
    DeskPfc1,
}

impl Problem {
    pub const TABLE1: [Problem; 5] = [
        Problem::Fch1,
        Problem::Fch2,
        Problem::Fch3,
        Problem::Pfc1,
        Problem::Pfc2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Problem::Fch1 => "FCH1",
            Problem::Fch2 => "FCH2",
            Problem::Fch3 => "FCH3",
            Problem::Pfc1 => "PFC1",
            Problem::Pfc2 => "PFC2",
            Problem::DeskFch3 => "DESK-FCH3",
            Problem::DeskPfc1 => "DESK-PFC1",
        }
    }

    fn config_text(self) -> &'static str {
        match self {
            Problem::Fch1 => include_str!("../../configs/fch1.toml"),
            Problem::Fch2 => include_str!("../../configs/fch2.toml"),
            Problem::Fch3 => include_str!("../../configs/fch3.toml"),
            Problem::Pfc1 => include_str!("../../configs/pfc1.toml"),
            Problem::Pfc2 => include_str!("../../configs/pfc2.toml"),
            Problem::DeskFch3 => include_str!("../../configs/desk-fch3.toml"),
            Problem::DeskPfc1 => include_str!("../../configs/desk-pfc1.toml"),
        }
    }

    /// Shipped definition, validated against the hard-coded table.
    pub fn spec(self) -> Result<BenchmarkSpec> {
        let spec = BenchmarkSpec::from_toml(self.config_text())?;
        check_table1(self, &spec)?;
        Ok(spec)
    }

    /// Time scheme of the PGD/PAGD comparison runs.
    pub fn comparison_scheme(self) -> SchemeKind {
        match self {
            Problem::Pfc2 => SchemeKind::Mp,
            _ => SchemeKind::Bdf2,
        }
    }

    pub fn default_estimator(self, scheme: SchemeKind) -> EstimatorKind {
        match (self, scheme) {
            (_, SchemeKind::Mp) | (Problem::Pfc2, SchemeKind::Lmp) => EstimatorKind::Midab2,
            _ => EstimatorKind::Am3,
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Problem {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_uppercase().replace('_', "-").as_str() {
            "FCH1" => Ok(Problem::Fch1),
            "FCH2" => Ok(Problem::Fch2),
            "FCH3" => Ok(Problem::Fch3),
            "PFC1" => Ok(Problem::Pfc1),
            "PFC2" => Ok(Problem::Pfc2),
            "DESK-FCH3" => Ok(Problem::DeskFch3),
            "DESK-PFC1" => Ok(Problem::DeskPfc1),
            other => Err(format!("unknown problem '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Fch {
        epsilon: f64,
        eta1: f64,
        eta2: f64,
        tau: f64,
        mobility: f64,
        kappa0: Option<f64>,
        kappa2: Option<f64>,
    },
    Pfc {
        epsilon: f64,
        mobility: f64,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<Model> {
        match *self {
            ModelSpec::Fch {
                epsilon,
                eta1,
                eta2,
                tau,
                mobility,
                kappa0,
                kappa2,
            } => {
                let p = FchParams::new(epsilon, eta1, eta2, tau, mobility)?;
                let p = p.with_splitting(kappa0.unwrap_or(p.kappa0), kappa2.unwrap_or(p.kappa2));
                Ok(Model::fch(p))
            }
            ModelSpec::Pfc { epsilon, mobility } => Ok(Model::pfc(PfcParams::new(epsilon, mobility)?)),
        }
    }

    pub fn epsilon(&self) -> f64 {
        match *self {
            ModelSpec::Fch { epsilon, .. } | ModelSpec::Pfc { epsilon, .. } => epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub length: f64,
    pub n: usize,
    pub origin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub step_size: f64,
    pub tol_iter: f64,
    pub max_iter: usize,
    /// Squares of the swept momentum parameters.
    pub eta_squares: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteppingSpec {
    pub dt_min: f64,
    pub dt_max: f64,
    /// Stepping tolerance of the solver comparison runs.
    pub tol: f64,
    /// End time of the solver comparison runs.
    pub t_final: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    /// Point-value accuracy the cost protocol aims for.
    pub tol: f64,
    /// Tightest stepping tolerance tried.
    pub tol_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub name: String,
    pub model: ModelSpec,
    pub domain: DomainSpec,
    pub solver: SolverSpec,
    pub stepping: SteppingSpec,
    pub reference: ReferencePoint,
    pub objective: ObjectiveSpec,
    pub initial: InitialCondition,
}

impl BenchmarkSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.domain.length, self.domain.n, self.domain.origin)
    }

    pub fn model(&self) -> Result<Model> {
        self.model.build()
    }

    pub fn solver_config(&self, method: SolverKind) -> SolverConfig {
        SolverConfig {
            method,
            step_size: self.solver.step_size,
            eta_sweep: self.solver.eta_squares.iter().map(|e| e.sqrt()).collect(),
            tol_iter: self.solver.tol_iter,
            max_iter: self.solver.max_iter,
            trace: false,
        }
    }

    pub fn adaptive_config(
        &self,
        scheme: SchemeKind,
        estimator: EstimatorKind,
        tol: f64,
        t_final: f64,
    ) -> AdaptiveConfig {
        AdaptiveConfig {
            scheme,
            estimator,
            tol,
            dt_min: self.stepping.dt_min,
            dt_max: self.stepping.dt_max,
            t_final,
            snapshot_times: Vec::new(),
            max_steps: 10_000_000,
            record_energy: false,
        }
    }

    pub fn initial_field(&self, seed: Option<u64>) -> Result<PeriodicField> {
        self.initial.build(self.grid()?, self.model.epsilon(), seed)
    }
}

/// Constants of the parameter table, one row per problem.
#[derive(Debug, Clone, Copy)]
pub struct Table1Row {
    pub length: f64,
    pub n: usize,
    pub centered: bool,
    pub epsilon: f64,
    /// `(eta1, eta2, tau)` for the FCH problems.
    pub fch: Option<(f64, f64, f64)>,
    pub step_size: f64,
    pub dt_min: f64,
    pub reference: (f64, f64, f64),
}

pub const DT_MAX: f64 = 0.5;
pub const TOL_ITER: f64 = 1e-10;

pub fn table1_row(problem: Problem) -> Option<Table1Row> {
    let s3 = 3f64.sqrt();
    let row = match problem {
        Problem::Fch1 => Table1Row {
            length: 2.0 * PI,
            n: 128,
            centered: false,
            epsilon: 0.18,
            fch: Some((0.18 * 0.18, 0.18 * 0.18, 0.0)),
            step_size: 0.4,
            dt_min: 1e-5,
            reference: (4.71239, 4.71239, 10.0),
        },
        Problem::Fch2 => Table1Row {
            length: 12.8,
            n: 256,
            centered: false,
            epsilon: 0.1,
            fch: Some((0.2, 0.2, 0.0)),
            step_size: 0.9,
            dt_min: 1e-5,
            reference: (7.1, 8.85, 10.0),
        },
        Problem::Fch3 => Table1Row {
            length: 4.0 * PI,
            n: 256,
            centered: false,
            epsilon: 0.1,
            fch: Some((1.45 * 0.1, 2.0 * 0.1, 0.125)),
            step_size: 0.9,
            dt_min: 1e-5,
            reference: (6.92132, 10.7501, 10.0),
        },
        Problem::Pfc1 => Table1Row {
            length: 1.2 * 32.0 * 4.0 * PI / s3,
            n: 512,
            centered: true,
            epsilon: 1.0,
            fch: None,
            step_size: 0.9,
            dt_min: 1e-4,
            reference: (20.6773, 5.4414, 1000.0),
        },
        Problem::Pfc2 => Table1Row {
            length: 200.0,
            n: 512,
            centered: true,
            epsilon: 0.25,
            fch: None,
            step_size: 0.9,
            dt_min: 1e-4,
            reference: (43.3594, 14.4531, 300.0),
        },
        Problem::DeskFch3 | Problem::DeskPfc1 => return None,
    };
    Some(row)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

/// Compares a loaded spec with the hard-coded table. Desk variants only
/// check the shared solver constants.
pub fn check_table1(problem: Problem, spec: &BenchmarkSpec) -> Result<()> {
    let mut bad: Vec<String> = Vec::new();
    fn expect(bad: &mut Vec<String>, what: &str, got: f64, want: f64) {
        if !close(got, want) {
            bad.push(format!("{what}: config {got}, table {want}"));
        }
    }
    expect(&mut bad, "dt_max", spec.stepping.dt_max, DT_MAX);
    expect(&mut bad, "tol_iter", spec.solver.tol_iter, TOL_ITER);
    if spec.solver.eta_squares.len() != DEFAULT_ETA_SQUARES.len() {
        bad.push("eta sweep length".into());
    } else {
        for (g, w) in spec.solver.eta_squares.iter().zip(DEFAULT_ETA_SQUARES) {
            expect(&mut bad, "eta^2", *g, w);
        }
    }
    if let Some(row) = table1_row(problem) {
        expect(&mut bad, "L", spec.domain.length, row.length);
        expect(&mut bad, "N", spec.domain.n as f64, row.n as f64);
        let origin = if row.centered { -0.5 * row.length } else { 0.0 };
        expect(&mut bad, "origin", spec.domain.origin, origin);
        expect(&mut bad, "epsilon", spec.model.epsilon(), row.epsilon);
        expect(&mut bad, "s", spec.solver.step_size, row.step_size);
        expect(&mut bad, "dt_min", spec.stepping.dt_min, row.dt_min);
        expect(&mut bad, "reference x", spec.reference.x, row.reference.0);
        expect(&mut bad, "reference y", spec.reference.y, row.reference.1);
        expect(&mut bad, "reference t", spec.reference.t, row.reference.2);
        match (spec.model, row.fch) {
            (ModelSpec::Fch { eta1, eta2, tau, .. }, Some((e1, e2, t))) => {
                expect(&mut bad, "eta1", eta1, e1);
                expect(&mut bad, "eta2", eta2, e2);
                expect(&mut bad, "tau", tau, t);
            }
            (ModelSpec::Pfc { .. }, None) => {}
            _ => bad.push("model kind".into()),
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(format!("{problem} disagrees with the parameter table: {}", bad.join("; "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_shipped_configs_load() {
        for p in [
            Problem::Fch1,
            Problem::Fch2,
            Problem::Fch3,
            Problem::Pfc1,
            Problem::Pfc2,
            Problem::DeskFch3,
            Problem::DeskPfc1,
        ] {
            let spec = p.spec().unwrap_or_else(|e| panic!("{p}: {e}"));
            assert_eq!(spec.name, p.name());
            spec.model().unwrap();
            let grid = spec.grid().unwrap();
            spec.reference.node(&grid).unwrap_or_else(|e| panic!("{p}: {e}"));
            assert_eq!(p.name().parse::<Problem>().unwrap(), p);
        }
    }

    #[test]
    fn round_trip_through_toml() {
        let spec = Problem::Fch3.spec().unwrap();
        let again = BenchmarkSpec::from_toml(&spec.to_toml().unwrap()).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn altered_constant_is_caught() {
        let mut spec = Problem::Fch3.spec().unwrap();
        if let ModelSpec::Fch { eta1, .. } = &mut spec.model {
            *eta1 = 0.15;
        }
        let err = check_table1(Problem::Fch3, &spec).unwrap_err().to_string();
        assert!(err.contains("eta1"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = Problem::Fch1.config_text().replace("[domain]", "[domain]\nwidth = 3.0");
        assert!(matches!(BenchmarkSpec::from_toml(&text), Err(Error::Config(_))));
    }

    #[test]
    fn estimator_defaults() {
        assert_eq!(Problem::Fch1.default_estimator(SchemeKind::Bdf2), EstimatorKind::Am3);
        assert_eq!(Problem::Fch1.default_estimator(SchemeKind::Mp), EstimatorKind::Midab2);
        assert_eq!(Problem::Pfc2.default_estimator(SchemeKind::Lmp), EstimatorKind::Midab2);
        assert_eq!(Problem::Pfc1.default_estimator(SchemeKind::Lmp), EstimatorKind::Am3);
        assert_eq!(Problem::Pfc2.comparison_scheme(), SchemeKind::Mp);
    }
}
