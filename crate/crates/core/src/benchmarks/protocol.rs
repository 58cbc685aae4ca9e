//! Cost measurement: tighten the stepping tolerance by 10 until the point
//! value meets the objective, then report the cost of that last run.

use std::io::Write;

use serde::Serialize;

use crate::controller::{run, EstimatorKind};
use crate::error::{Error, Result};
use crate::field::PeriodicField;
use crate::integrators::SchemeKind;
use crate::models::Model;
use crate::solvers::SolverKind;
use crate::timing::Stopwatch;

use super::BenchmarkSpec;

pub const TABLE3_HEADER: &str = "Prob,Scheme,Step tol.,Point value,Obj. err.,FFT,Clock (sec),CPU (sec)";
pub const TABLE2_HEADER: &str = "Prob,Solver,Scheme,Step tol.,T,FFT,Clock (sec),CPU (sec)";

/// Cost of one run at one stepping tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostSample {
    pub point_value: f64,
    /// Raw transform tally (forward plus inverse).
    pub fft_tally: u64,
    pub wall_seconds: f64,
    pub cpu_seconds: f64,
}

/// One run of a scheme at a given stepping tolerance.
pub trait CostRunner {
    fn run(&mut self, tol: f64) -> Result<CostSample>;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostRow {
    pub problem: String,
    pub scheme: String,
    pub step_tol: f64,
    pub point_value: f64,
    pub objective_error: f64,
    pub fft_tally: u64,
    pub wall_seconds: f64,
    pub cpu_seconds: f64,
    /// False when the tolerance floor was reached without meeting the
    /// objective; the row then holds the tightest attempt.
    pub met: bool,
    /// Tolerances whose run failed outright.
    pub failed_tolerances: Vec<f64>,
}

/// Reported transform count: forward plus inverse, halved.
pub fn reported_fft(tally: u64) -> String {
    if tally.is_multiple_of(2) {
        format!("{}", tally / 2)
    } else {
        format!("{}.5", tally / 2)
    }
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

impl CostRow {
    pub fn csv_line(&self) -> String {
        [
            self.problem.clone(),
            self.scheme.clone(),
            float(self.step_tol),
            float(self.point_value),
            float(self.objective_error),
            reported_fft(self.fft_tally),
            float(self.wall_seconds),
            float(self.cpu_seconds),
        ]
        .join(",")
    }
}

pub fn write_table3(rows: &[CostRow], w: &mut impl Write) -> Result<()> {
    writeln!(w, "{TABLE3_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_line())?;
    }
    Ok(())
}

/// Tolerance sweep `1, 0.1, ...` down to `floor`. A run that fails is
/// logged and the sweep moves on to the next tolerance.
pub fn cost_protocol(
    problem: &str,
    scheme: &str,
    runner: &mut dyn CostRunner,
    reference_value: f64,
    objective_tol: f64,
    floor: f64,
) -> Result<CostRow> {
    let mut failed = Vec::new();
    let mut last: Option<(f64, CostSample)> = None;
    let mut k = 0;
    loop {
        let tol = 10f64.powi(-k);
        if tol < floor * (1.0 - 1e-9) {
            break;
        }
        k += 1;
        match runner.run(tol) {
            Ok(sample) => {
                let err = (sample.point_value - reference_value).abs();
                log::info!("{problem} {scheme} tol {tol:e}: point {:.16e}, error {err:.3e}", sample.point_value);
                if err < objective_tol {
                    return Ok(row(problem, scheme, tol, sample, reference_value, true, failed));
                }
                last = Some((tol, sample));
            }
            Err(e) => {
                log::warn!("{problem} {scheme} tol {tol:e} failed: {e}");
                failed.push(tol);
            }
        }
    }
    match last {
        Some((tol, sample)) => Ok(row(problem, scheme, tol, sample, reference_value, false, failed)),
        None => Err(Error::RunAborted {
            t: f64::NAN,
            reason: format!("{problem} {scheme}: every tolerance down to {floor:e} failed"),
        }),
    }
}

fn row(
    problem: &str,
    scheme: &str,
    tol: f64,
    s: CostSample,
    reference: f64,
    met: bool,
    failed_tolerances: Vec<f64>,
) -> CostRow {
    CostRow {
        problem: problem.to_string(),
        scheme: scheme.to_string(),
        step_tol: tol,
        point_value: s.point_value,
        objective_error: (s.point_value - reference).abs(),
        fft_tally: s.fft_tally,
        wall_seconds: s.wall_seconds,
        cpu_seconds: s.cpu_seconds,
        met,
        failed_tolerances,
    }
}

/// Adaptive run of a benchmark to its reference time.
pub struct FieldCostRunner {
    spec: BenchmarkSpec,
    model: Model,
    initial: PeriodicField,
    scheme: SchemeKind,
    estimator: EstimatorKind,
    solver: SolverKind,
}

impl FieldCostRunner {
    pub fn new(
        spec: &BenchmarkSpec,
        scheme: SchemeKind,
        estimator: EstimatorKind,
        solver: SolverKind,
        seed: Option<u64>,
    ) -> Result<Self> {
        let initial = spec.initial_field(seed)?;
        spec.reference.node(initial.grid())?;
        Ok(Self {
            model: spec.model()?,
            spec: spec.clone(),
            initial,
            scheme,
            estimator,
            solver,
        })
    }
}

impl CostRunner for FieldCostRunner {
    fn run(&mut self, tol: f64) -> Result<CostSample> {
        let cfg = self
            .spec
            .adaptive_config(self.scheme, self.estimator, tol, self.spec.reference.t);
        let clock = Stopwatch::start();
        let report = run(self.model.clone(), self.spec.solver_config(self.solver), cfg, self.initial.clone())?;
        let (wall_seconds, cpu_seconds) = (clock.wall_seconds(), clock.cpu_seconds());
        Ok(CostSample {
            point_value: self.spec.reference.sample(&report.final_field)?,
            fft_tally: report.fft_count,
            wall_seconds,
            cpu_seconds,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverCostRow {
    pub problem: String,
    pub solver: SolverKind,
    pub scheme: SchemeKind,
    pub step_tol: f64,
    pub t_final: f64,
    pub fft_tally: u64,
    pub wall_seconds: f64,
    pub cpu_seconds: f64,
}

impl SolverCostRow {
    pub fn csv_line(&self) -> String {
        [
            self.problem.clone(),
            self.solver.to_string(),
            self.scheme.to_string(),
            float(self.step_tol),
            float(self.t_final),
            reported_fft(self.fft_tally),
            float(self.wall_seconds),
            float(self.cpu_seconds),
        ]
        .join(",")
    }
}

pub fn write_table2(rows: &[SolverCostRow], w: &mut impl Write) -> Result<()> {
    writeln!(w, "{TABLE2_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_line())?;
    }
    Ok(())
}

/// Identical adaptive runs differing only in the nonlinear solver.
pub fn compare_pgd_pagd(
    spec: &BenchmarkSpec,
    scheme: SchemeKind,
    estimator: EstimatorKind,
    seed: Option<u64>,
) -> Result<[SolverCostRow; 2]> {
    let model = spec.model()?;
    let u0 = spec.initial_field(seed)?;
    let cfg = spec.adaptive_config(scheme, estimator, spec.stepping.tol, spec.stepping.t_final);
    let one = |solver: SolverKind| -> Result<SolverCostRow> {
        let clock = Stopwatch::start();
        let report = run(model.clone(), spec.solver_config(solver), cfg.clone(), u0.clone())?;
        Ok(SolverCostRow {
            problem: spec.name.clone(),
            solver,
            scheme,
            step_tol: cfg.tol,
            t_final: cfg.t_final,
            fft_tally: report.fft_count,
            wall_seconds: clock.wall_seconds(),
            cpu_seconds: clock.cpu_seconds(),
        })
    };
    Ok([one(SolverKind::Pgd)?, one(SolverKind::Pagd)?])
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Point value `reference + slope * tol`.
    struct Linear {
        reference: f64,
        slope: f64,
        calls: Vec<f64>,
    }

    impl CostRunner for Linear {
        fn run(&mut self, tol: f64) -> Result<CostSample> {
            self.calls.push(tol);
            Ok(CostSample {
                point_value: self.reference + self.slope * tol,
                fft_tally: 2 * self.calls.len() as u64 + 1,
                wall_seconds: 0.0,
                cpu_seconds: 0.0,
            })
        }
    }

    #[test]
    fn exact_first_run_stops_at_one() {
        let mut r = Linear {
            reference: 0.3,
            slope: 0.0,
            calls: vec![],
        };
        let row = cost_protocol("P", "BDF2", &mut r, 0.3, 1e-5, 1e-10).unwrap();
        assert_eq!(row.step_tol, 1.0);
        assert!(row.met);
        assert_eq!(r.calls, vec![1.0]);
    }

    #[test]
    fn linear_error_stops_where_predicted() {
        // error 3 tol < 1e-5 first holds at tol = 1e-6
        let mut r = Linear {
            reference: -0.1,
            slope: 3.0,
            calls: vec![],
        };
        let row = cost_protocol("P", "MP", &mut r, -0.1, 1e-5, 1e-10).unwrap();
        assert!((row.step_tol - 1e-6).abs() < 1e-20);
        assert_eq!(r.calls.len(), 7);
        assert_eq!(row.fft_tally, 15);
        let line = row.csv_line();
        assert_eq!(line.split(',').count(), TABLE3_HEADER.split(',').count());
        assert!(line.contains(",7.5,"), "{line}");
    }

    #[test]
    fn floor_reached_gives_failure_row() {
        let mut r = Linear {
            reference: 0.0,
            slope: 1e6,
            calls: vec![],
        };
        let row = cost_protocol("P", "MP", &mut r, 0.0, 1e-5, 1e-10).unwrap();
        assert!(!row.met);
        assert_eq!(r.calls.len(), 11);
        assert!((row.step_tol - 1e-10).abs() < 1e-24);
    }

    #[test]
    fn reported_fft_halves() {
        assert_eq!(reported_fft(279682), "139841");
        assert_eq!(reported_fft(7), "3.5");
    }
}
