//! Adaptive time stepping: explicit AM3 and midpoint/AB2 error estimators,
//! the step-size proposal and the accept/reject driver loop.

use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PeriodicField;
use crate::integrators::{take_step, History, SchemeKind};
use crate::models::Model;
use crate::snapshot::Snapshot;
use crate::solvers::SolverConfig;
use crate::spectral::SpectralOps;

const SAFETY: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Am3,
    Midab2,
}

impl FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "am3" => Ok(EstimatorKind::Am3),
            "midab2" => Ok(EstimatorKind::Midab2),
            other => Err(format!("unknown estimator '{other}' (expected am3 or midab2)")),
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EstimatorKind::Am3 => "am3",
            EstimatorKind::Midab2 => "midab2",
        })
    }
}

/// Weights `(w_new, w_cur, w_prev)` of the explicit AM3 predictor, scaled so
/// that `u_hat = u_n + dt/6 (w_new R(u~) + w_cur R(u_n) + w_prev R(u_{n-1}))`.
/// They always sum to 6.
pub fn am3_weights(rho: f64) -> (f64, f64, f64) {
    (
        (3.0 + 2.0 * rho) / (1.0 + rho),
        3.0 + rho,
        -rho * rho / (1.0 + rho),
    )
}

/// AM3 predictor from precomputed right-hand sides.
pub fn am3_combine(
    u_n: &PeriodicField,
    r_tilde: &PeriodicField,
    r_n: &PeriodicField,
    r_nm1: &PeriodicField,
    dt: f64,
    rho: f64,
) -> PeriodicField {
    let (a, b, c) = am3_weights(rho);
    let mut out = u_n.clone();
    out.axpy(dt * a / 6.0, r_tilde);
    out.axpy(dt * b / 6.0, r_n);
    if c != 0.0 {
        out.axpy(dt * c / 6.0, r_nm1);
    }
    out
}

/// AM3 predictor. `dt_n = None` (first step) uses `rho = 0`.
pub fn am3_predict(
    ops: &SpectralOps,
    model: &Model,
    u_n: &PeriodicField,
    u_nm1: Option<&PeriodicField>,
    u_tilde: &PeriodicField,
    dt: f64,
    dt_n: Option<f64>,
) -> PeriodicField {
    let rho = dt_n.map_or(0.0, |d| dt / d);
    let r_tilde = model.rhs(ops, u_tilde);
    let r_n = model.rhs(ops, u_n);
    let r_nm1 = match u_nm1 {
        Some(u) if rho != 0.0 => model.rhs(ops, u),
        _ => r_n.clone(),
    };
    am3_combine(u_n, &r_tilde, &r_n, &r_nm1, dt, rho)
}

/// Relative discrete L2 distance `|u~ - u^| / |u^|`.
pub fn relative_error(u_tilde: &PeriodicField, u_hat: &PeriodicField) -> Result<f64> {
    let denom = u_hat.l2_norm();
    if denom == 0.0 {
        return Err(Error::Precondition("reference solution has zero norm".into()));
    }
    Ok((u_tilde - u_hat).l2_norm() / denom)
}

pub fn am3_err(u_tilde: &PeriodicField, u_hat: &PeriodicField) -> Result<f64> {
    relative_error(u_tilde, u_hat)
}

/// Quadratic extrapolation weights on `(u_n, u_{n-1}, u_{n-2})` to
/// `t_n + dt`, given the last two accepted step sizes.
pub fn midab2_coefficients(dt: f64, dt_n: f64, dt_nm1: f64) -> (f64, f64, f64) {
    let s = dt_n + dt_nm1;
    (
        (dt + dt_n) * (dt + s) / (dt_n * s),
        -dt * (dt + s) / (dt_n * dt_nm1),
        dt * (dt + dt_n) / (dt_nm1 * s),
    )
}

pub fn midab2_predict(
    u_n: &PeriodicField,
    u_nm1: &PeriodicField,
    u_nm2: &PeriodicField,
    dt: f64,
    dt_n: f64,
    dt_nm1: f64,
) -> PeriodicField {
    let (a, b, c) = midab2_coefficients(dt, dt_n, dt_nm1);
    let mut out = u_n * a;
    out.axpy(b, u_nm1);
    out.axpy(c, u_nm2);
    out
}

/// `R_n` of the midpoint/AB2 error constant; equals 25/24 for uniform steps.
pub fn midab2_ratio(dt: f64, dt_n: f64, dt_nm1: f64) -> f64 {
    1.0 / 24.0 + 0.125 * (1.0 + dt_n / dt) * (1.0 + 2.0 * dt_n / dt + dt_nm1 / dt)
}

pub fn midab2_err(
    u_tilde: &PeriodicField,
    u_hat: &PeriodicField,
    dt: f64,
    dt_n: f64,
    dt_nm1: f64,
) -> Result<f64> {
    let r = midab2_ratio(dt, dt_n, dt_nm1);
    assert!(r > 1.0 / 24.0, "step sizes must be positive");
    Ok(relative_error(u_tilde, u_hat)? / (1.0 - 1.0 / (24.0 * r)))
}

/// `0.9 (TOL/ERR)^(1/3) dt_used`, clamped to `[dt_min, dt_max]`.
pub fn propose_dt(err: f64, dt_used: f64, tol: f64, dt_min: f64, dt_max: f64) -> f64 {
    if err == 0.0 {
        return dt_max;
    }
    let bar = SAFETY * (tol / err).cbrt() * dt_used;
    if bar.is_nan() {
        return dt_min;
    }
    bar.min(dt_max).max(dt_min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveConfig {
    pub scheme: SchemeKind,
    pub estimator: EstimatorKind,
    /// Stepping tolerance on ERR.
    pub tol: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_final: f64,
    /// Times the run lands on exactly and stores.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Cap on step attempts (accepted plus rejected).
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Evaluate the energy after every accepted step (uncounted transforms).
    #[serde(default = "default_true")]
    pub record_energy: bool,
}

fn default_max_steps() -> usize {
    10_000_000
}

fn default_true() -> bool {
    true
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_max) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < dt_min <= dt_max, got {} and {}",
                self.dt_min, self.dt_max
            )));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter("stepping tolerance must be non-negative".into()));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter("final time must be positive".into()));
        }
        if self.scheme == SchemeKind::Be || self.scheme == SchemeKind::Lbe {
            log::warn!("first-order scheme {} under a second-order controller", self.scheme);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    /// Attempt index, counting rejected attempts.
    pub step: usize,
    /// Time the attempt would reach.
    pub t: f64,
    pub dt: f64,
    pub err: f64,
    pub accepted: bool,
    pub estimator: EstimatorKind,
    /// Nonlinear solver updates (0 for the linearly implicit schemes).
    pub iterations: usize,
    /// Transform tally after the attempt.
    pub fft_cumulative: u64,
    /// Energy and mass of the accepted state (NaN on rejection).
    pub energy: f64,
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub records: Vec<StepRecord>,
    pub final_field: PeriodicField,
    pub final_time: f64,
    /// Transform tally of the run (estimators included, diagnostics excluded).
    pub fft_count: u64,
    pub snapshots: Vec<Snapshot>,
    pub initial_mass: f64,
}

impl RunReport {
    pub fn accepted(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(|r| r.accepted)
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted().count()
    }

    pub fn rejected_count(&self) -> usize {
        self.records.len() - self.accepted_count()
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "step,t,dt,ERR,accepted,iterations,fft_cumulative,energy,mass")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{},{},{},{:.16e},{:.16e}",
                r.step,
                r.t,
                r.dt,
                r.err,
                u8::from(r.accepted),
                r.iterations,
                r.fft_cumulative,
                r.energy,
                r.mass
            )?;
        }
        Ok(())
    }
}

struct Level {
    field: PeriodicField,
    /// Step that produced this level.
    dt: Option<f64>,
    rhs: Option<PeriodicField>,
}

/// Incremental form of the adaptive loop; [`run`] drives it to the end.
pub struct Stepper {
    ops: SpectralOps,
    diag_ops: SpectralOps,
    model: Model,
    solver: SolverConfig,
    cfg: AdaptiveConfig,
    t: f64,
    dt_tilde: f64,
    // newest first, at most three
    levels: Vec<Level>,
    accepted: usize,
    attempts: usize,
    targets: Vec<f64>,
    next_target: usize,
    records: Vec<StepRecord>,
    snapshots: Vec<Snapshot>,
    initial_mass: f64,
}

impl Stepper {
    pub fn new(model: Model, solver: SolverConfig, cfg: AdaptiveConfig, u0: PeriodicField) -> Result<Self> {
        cfg.validate()?;
        let grid = *u0.grid();
        let mut targets: Vec<f64> = cfg
            .snapshot_times
            .iter()
            .copied()
            .filter(|&s| s > 0.0 && s < cfg.t_final)
            .collect();
        targets.sort_by(f64::total_cmp);
        targets.dedup();
        targets.push(cfg.t_final);
        let mut snapshots = Vec::new();
        if cfg.snapshot_times.contains(&0.0) {
            snapshots.push(Snapshot::new(0.0, u0.clone()));
        }
        Ok(Self {
            ops: SpectralOps::new(grid),
            diag_ops: SpectralOps::new(grid),
            model,
            solver,
            t: 0.0,
            dt_tilde: cfg.dt_min,
            initial_mass: u0.mean(),
            levels: vec![Level {
                field: u0,
                dt: None,
                rhs: None,
            }],
            accepted: 0,
            attempts: 0,
            targets,
            next_target: 0,
            records: Vec::new(),
            snapshots,
            cfg,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn field(&self) -> &PeriodicField {
        &self.levels[0].field
    }

    pub fn fft_count(&self) -> u64 {
        self.ops.fft_count()
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn tentative_dt(&self) -> f64 {
        self.dt_tilde
    }

    pub fn is_finished(&self) -> bool {
        self.next_target >= self.targets.len()
    }

    /// Chooses the attempted step size, truncating to land on the next
    /// target time. Returns `(dt, lands)`.
    fn plan(&self) -> (f64, bool) {
        let target = self.targets[self.next_target];
        let remaining = target - self.t;
        let dt = self.dt_tilde;
        if dt >= remaining {
            (remaining, true)
        } else if remaining - dt < self.cfg.dt_min {
            if remaining <= self.cfg.dt_max {
                (remaining, true)
            } else {
                (0.5 * remaining, false)
            }
        } else {
            (dt, false)
        }
    }

    /// Performs one attempt; `Ok(None)` once the final time is reached.
    pub fn advance(&mut self) -> Result<Option<StepRecord>> {
        if self.is_finished() {
            return Ok(None);
        }
        if self.attempts >= self.cfg.max_steps {
            return Err(Error::RunAborted {
                t: self.t,
                reason: format!("step cap of {} attempts reached", self.cfg.max_steps),
            });
        }
        let (dt, lands) = self.plan();
        let step_index = self.attempts;
        self.attempts += 1;
        let kind = self.cfg.scheme.at_step(self.accepted);
        let history = History {
            current: &self.levels[0].field,
            previous: self.levels.get(1).map(|l| &l.field),
            dt_prev: self.levels[0].dt,
        };

        let outcome = take_step(&self.ops, &self.model, kind, &history, dt, &self.solver);
        let (step, failure) = match outcome {
            Err(e @ Error::IndefinitePreconditioner { .. }) => (None, Some(e.to_string())),
            Err(e) => return Err(e),
            Ok(step) => {
                let failure = match &step.solve {
                    Some(s) if !s.converged => Some(format!(
                        "solver did not converge after {} iterations, |d| = {:.3e}",
                        s.iterations, s.final_d_norm
                    )),
                    _ if !step.field.is_finite() => Some("non-finite field".into()),
                    _ => None,
                };
                (Some(step), failure)
            }
        };
        if let Some(reason) = failure {
            if dt <= self.cfg.dt_min {
                return Err(Error::RunAborted { t: self.t, reason });
            }
            log::warn!("t = {:.6e}: rejecting dt = {dt:.3e}: {reason}", self.t);
            let record = StepRecord {
                step: step_index,
                t: self.t + dt,
                dt,
                err: f64::NAN,
                accepted: false,
                estimator: self.cfg.estimator,
                iterations: step.and_then(|s| s.solve.map(|o| o.iterations)).unwrap_or(0),
                fft_cumulative: self.ops.fft_count(),
                energy: f64::NAN,
                mass: f64::NAN,
            };
            self.dt_tilde = (0.5 * dt).max(self.cfg.dt_min);
            self.records.push(record);
            return Ok(Some(record));
        }
        let step = step.expect("failure handled above");
        let u_tilde = step.field;
        let iterations = step.solve.as_ref().map_or(0, |s| s.iterations);

        let use_midab2 = self.cfg.estimator == EstimatorKind::Midab2 && self.levels.len() >= 3;
        let estimator = if use_midab2 { EstimatorKind::Midab2 } else { EstimatorKind::Am3 };
        let (err, r_tilde) = if use_midab2 {
            let (dt_n, dt_nm1) = (self.levels[0].dt.unwrap(), self.levels[1].dt.unwrap());
            let u_hat = midab2_predict(
                &self.levels[0].field,
                &self.levels[1].field,
                &self.levels[2].field,
                dt,
                dt_n,
                dt_nm1,
            );
            (midab2_err(&u_tilde, &u_hat, dt, dt_n, dt_nm1)?, None)
        } else {
            let rho = self.levels[0].dt.map_or(0.0, |d| dt / d);
            let r_tilde = self.model.rhs(&self.ops, &u_tilde);
            if self.levels[0].rhs.is_none() {
                self.levels[0].rhs = Some(self.model.rhs(&self.ops, &self.levels[0].field));
            }
            if rho != 0.0 && self.levels[1].rhs.is_none() {
                self.levels[1].rhs = Some(self.model.rhs(&self.ops, &self.levels[1].field));
            }
            let r_n = self.levels[0].rhs.as_ref().unwrap();
            let r_nm1 = if rho != 0.0 { self.levels[1].rhs.as_ref().unwrap() } else { r_n };
            let u_hat = am3_combine(&self.levels[0].field, &r_tilde, r_n, r_nm1, dt, rho);
            (am3_err(&u_tilde, &u_hat)?, Some(r_tilde))
        };

        let accept = err <= self.cfg.tol || dt <= self.cfg.dt_min;
        self.dt_tilde = propose_dt(err, dt, self.cfg.tol, self.cfg.dt_min, self.cfg.dt_max);
        let mut record = StepRecord {
            step: step_index,
            t: self.t + dt,
            dt,
            err,
            accepted: accept,
            estimator,
            iterations,
            fft_cumulative: self.ops.fft_count(),
            energy: f64::NAN,
            mass: f64::NAN,
        };
        if accept {
            if lands {
                self.t = self.targets[self.next_target];
                self.next_target += 1;
            } else {
                self.t += dt;
            }
            record.t = self.t;
            record.mass = u_tilde.mean();
            if self.cfg.record_energy {
                record.energy = self.model.energy(&self.diag_ops, &u_tilde);
            }
            if lands && self.cfg.snapshot_times.contains(&self.t) {
                self.snapshots.push(Snapshot::new(self.t, u_tilde.clone()));
            }
            self.levels.insert(
                0,
                Level {
                    field: u_tilde,
                    dt: Some(dt),
                    rhs: r_tilde,
                },
            );
            self.levels.truncate(3);
            self.accepted += 1;
        }
        self.records.push(record);
        Ok(Some(record))
    }

    pub fn finish(self) -> RunReport {
        let fft_count = self.ops.fft_count();
        let final_field = self.levels.into_iter().next().unwrap().field;
        RunReport {
            records: self.records,
            final_time: self.t,
            final_field,
            fft_count,
            snapshots: self.snapshots,
            initial_mass: self.initial_mass,
        }
    }
}

/// Runs the adaptive loop from `u0` at `t = 0` to `cfg.t_final`.
pub fn run(model: Model, solver: SolverConfig, cfg: AdaptiveConfig, u0: PeriodicField) -> Result<RunReport> {
    let mut stepper = Stepper::new(model, solver, cfg, u0)?;
    while stepper.advance()?.is_some() {}
    Ok(stepper.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid2D;

    #[test]
    fn am3_weights_sum_to_six() {
        for rho in [0.0, 0.3, 1.0, 2.5] {
            let (a, b, c) = am3_weights(rho);
            assert!((a + b + c - 6.0).abs() < 1e-14);
        }
        let (a, b, c) = am3_weights(1.0);
        assert!((a - 2.5).abs() < 1e-15 && (b - 4.0).abs() < 1e-15 && (c + 0.5).abs() < 1e-15);
    }

    #[test]
    fn propose_dt_identities() {
        let tol = 1e-4;
        let dt = 0.01;
        let fixed = propose_dt(0.9f64.powi(3) * tol, dt, tol, 1e-6, 1.0);
        assert!((fixed - dt).abs() < 1e-14);
        assert!((propose_dt(tol, dt, tol, 1e-6, 1.0) - 0.9 * dt).abs() < 1e-16);
        assert_eq!(propose_dt(1e10, dt, tol, 1e-6, 1.0), 1e-6);
        assert_eq!(propose_dt(0.0, dt, tol, 1e-6, 0.5), 0.5);
    }

    #[test]
    fn midab2_partition_of_unity() {
        let (a, b, c) = midab2_coefficients(0.3, 0.2, 0.45);
        assert!((a + b + c - 1.0).abs() < 1e-14);
        assert!((midab2_ratio(0.1, 0.1, 0.1) - 25.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn relative_error_homogeneity() {
        let g = Grid2D::anchored(1.0, 4).unwrap();
        let u = PeriodicField::from_fn(g, |x, y| 1.0 + x * y);
        assert_eq!(am3_err(&u, &u).unwrap(), 0.0);
        assert!((am3_err(&(&u * 2.0), &u).unwrap() - 1.0).abs() < 1e-15);
        assert!(am3_err(&u, &PeriodicField::zeros(g)).is_err());
    }
}
