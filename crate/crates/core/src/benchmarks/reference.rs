//! High-accuracy point values by constant-step backward Euler: shrink the
//! step by 10 until the point value settles, then confirm on a grid with
//! half the spacing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid2D, PeriodicField};
use crate::integrators::{run_fixed, SchemeKind};
use crate::models::Model;
use crate::solvers::SolverConfig;
use crate::spectral::SpectralOps;

use super::ic::spectral_interpolate;
use super::BenchmarkSpec;

/// Settling threshold for successive point values.
pub const REFERENCE_TOL: f64 = 1e-6;

/// Space-time point whose value is compared across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferencePoint {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    /// Certified value, once known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl ReferencePoint {
    /// Node indices of `(x, y)`; the point must sit within `h/100` of a node.
    pub fn node(&self, grid: &Grid2D) -> Result<(usize, usize)> {
        let h = grid.spacing();
        let (m1, dx) = grid.nearest_node(self.x);
        let (m2, dy) = grid.nearest_node(self.y);
        if dx > h / 100.0 || dy > h / 100.0 {
            return Err(Error::InvalidParameter(format!(
                "reference point ({}, {}) is off the grid (offsets {:.3e}, {:.3e} with h = {:.3e})",
                self.x, self.y, dx, dy, h
            )));
        }
        Ok((m1, m2))
    }

    /// Largest node offset as a fraction of the spacing.
    pub fn offset_fraction(&self, grid: &Grid2D) -> f64 {
        let h = grid.spacing();
        grid.nearest_node(self.x).1.max(grid.nearest_node(self.y).1) / h
    }

    pub fn sample(&self, u: &PeriodicField) -> Result<f64> {
        let (m1, m2) = self.node(u.grid())?;
        Ok(u.get(m1, m2))
    }
}

/// Something whose value at the reference point can be computed with
/// constant-step backward Euler.
pub trait PointProblem {
    /// Point value at the reference time with step `dt`; `refined` halves
    /// the spatial spacing.
    fn point_value(&mut self, dt: f64, refined: bool) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCertificate {
    /// Value on the refined grid at the adopted step.
    pub value: f64,
    /// Adopted step, `0.1^level`.
    pub dt: f64,
    pub level: u32,
    /// Same step on the run grid.
    pub coarse_value: f64,
    /// Next finer step on the run grid.
    pub finer_step_value: f64,
    /// Spatial refinement agreed within the tolerance.
    pub certified: bool,
}

/// Runs levels `1..=max_level` until two successive point values differ by
/// less than `tol`, adopts the larger step of that pair, and reruns it on
/// the refined grid. An uncertified result is returned with
/// `certified = false`; running out of levels is an error.
pub fn reference_solve(problem: &mut dyn PointProblem, tol: f64, max_level: u32) -> Result<ReferenceCertificate> {
    let dt_of = |l: u32| 0.1f64.powi(l as i32);
    let mut prev = problem.point_value(dt_of(1), false)?;
    for level in 1..max_level {
        let next = problem.point_value(dt_of(level + 1), false)?;
        log::debug!("reference level {level}: {prev:.16e} -> {next:.16e}");
        if (next - prev).abs() < tol {
            let value = problem.point_value(dt_of(level), true)?;
            let certified = (value - prev).abs() < tol;
            if !certified {
                log::warn!(
                    "spatial refinement moved the reference value by {:.3e}",
                    (value - prev).abs()
                );
            }
            return Ok(ReferenceCertificate {
                value,
                dt: dt_of(level),
                level,
                coarse_value: prev,
                finer_step_value: next,
                certified,
            });
        }
        prev = next;
    }
    Err(Error::RunAborted {
        t: f64::NAN,
        reason: format!("reference values did not settle to {tol:e} by dt = {:e}", dt_of(max_level)),
    })
}

/// `u' = -rate u` under backward Euler, evaluated in closed form. The
/// spatial refinement flag has no effect.
#[derive(Debug, Clone, Copy)]
pub struct ScalarDecay {
    pub initial: f64,
    pub rate: f64,
    pub t: f64,
}

impl ScalarDecay {
    pub fn exact(&self) -> f64 {
        self.initial * (-self.rate * self.t).exp()
    }
}

impl PointProblem for ScalarDecay {
    fn point_value(&mut self, dt: f64, _refined: bool) -> Result<f64> {
        let steps = (self.t / dt).round();
        if (steps * dt - self.t).abs() > 1e-9 * self.t.max(1.0) {
            return Err(Error::InvalidParameter(format!("t = {} is not a multiple of dt = {dt}", self.t)));
        }
        Ok(self.initial * (-steps * (self.rate * dt).ln_1p()).exp())
    }
}

/// Field problem: backward Euler from the benchmark initial condition,
/// refined runs start from the spectrally interpolated initial field.
pub struct FieldPointProblem {
    model: Model,
    solver: SolverConfig,
    point: ReferencePoint,
    initial: PeriodicField,
}

impl FieldPointProblem {
    pub fn new(spec: &BenchmarkSpec, solver: SolverConfig, seed: Option<u64>) -> Result<Self> {
        let initial = spec.initial_field(seed)?;
        spec.reference.node(initial.grid())?;
        Ok(Self {
            model: spec.model()?,
            solver,
            point: spec.reference,
            initial,
        })
    }
}

impl PointProblem for FieldPointProblem {
    fn point_value(&mut self, dt: f64, refined: bool) -> Result<f64> {
        let u0 = if refined {
            spectral_interpolate(&self.initial, 2)?
        } else {
            self.initial.clone()
        };
        let ops = SpectralOps::new(*u0.grid());
        let u = run_fixed(&ops, &self.model, SchemeKind::Be, &self.solver, &u0, dt, self.point.t)?;
        self.point.sample(&u)
    }
}
