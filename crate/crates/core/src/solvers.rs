//! Preconditioned gradient descent (PGD) and preconditioned accelerated
//! gradient descent (PAGD) for the per-step objective.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::PeriodicField;
use crate::preconditioner::Preconditioner;

/// Anything with a gradient that can be driven to a critical point.
pub trait Objective {
    fn gradient(&self, v: &PeriodicField) -> Result<PeriodicField>;

    /// Running transform tally, used to attribute cost to a solve.
    fn fft_count(&self) -> u64 {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Pgd,
    #[default]
    Pagd,
}

impl std::str::FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "pgd" => Ok(SolverKind::Pgd),
            "pagd" => Ok(SolverKind::Pagd),
            other => Err(format!("unknown solver '{other}' (expected pgd or pagd)")),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverKind::Pgd => "PGD",
            SolverKind::Pagd => "PAGD",
        })
    }
}

/// Squares of the default PAGD momentum parameters.
pub const DEFAULT_ETA_SQUARES: [f64; 5] = [0.1, 0.575, 1.05, 1.525, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub method: SolverKind,
    /// Step size `s` applied to the preconditioned direction.
    pub step_size: f64,
    /// Momentum parameters `eta`, cycled one per iteration.
    pub eta_sweep: Vec<f64>,
    /// Stop once the sup norm of the direction falls below this.
    pub tol_iter: f64,
    pub max_iter: usize,
    #[serde(default)]
    pub trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverKind::Pagd,
            step_size: 1.0,
            eta_sweep: DEFAULT_ETA_SQUARES.iter().map(|e| e.sqrt()).collect(),
            tol_iter: 1e-10,
            max_iter: 1000,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub lambda: f64,
    pub d_norm: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    /// Point at which the last gradient was evaluated.
    pub solution: PeriodicField,
    /// Number of updates performed.
    pub iterations: usize,
    pub gradient_evaluations: usize,
    pub converged: bool,
    /// Transforms spent inside this solve.
    pub fft_count: u64,
    pub final_d_norm: f64,
    pub trace: Vec<IterationRecord>,
}

/// Momentum weight `(1 - eta sqrt(s)) / (1 + eta sqrt(s))`.
pub fn extrapolation_coefficient(eta: f64, s: f64) -> f64 {
    let q = eta * s.sqrt();
    (1.0 - q) / (1.0 + q)
}

pub fn solve(
    obj: &dyn Objective,
    precond: &dyn Preconditioner,
    x0: &PeriodicField,
    cfg: &SolverConfig,
) -> Result<SolveOutcome> {
    match cfg.method {
        SolverKind::Pgd => pgd(obj, precond, x0, cfg),
        SolverKind::Pagd => pagd(obj, precond, x0, cfg),
    }
}

/// `x_{i+1} = x_i + s d_i` with `d_i = -P^-1 grad G(x_i)`.
pub fn pgd(
    obj: &dyn Objective,
    precond: &dyn Preconditioner,
    x0: &PeriodicField,
    cfg: &SolverConfig,
) -> Result<SolveOutcome> {
    iterate(obj, precond, x0, cfg, |_| 0.0)
}

/// `y_i = x_i + lambda_i (x_i - x_{i-1})`, `x_{i+1} = y_i + s d_i` with
/// `d_i = -P^-1 grad G(y_i)` and `lambda_i` cycling through the sweep.
pub fn pagd(
    obj: &dyn Objective,
    precond: &dyn Preconditioner,
    x0: &PeriodicField,
    cfg: &SolverConfig,
) -> Result<SolveOutcome> {
    let lambdas: Vec<f64> = cfg
        .eta_sweep
        .iter()
        .map(|&eta| extrapolation_coefficient(eta, cfg.step_size))
        .collect();
    if lambdas.is_empty() {
        return iterate(obj, precond, x0, cfg, |_| 0.0);
    }
    iterate(obj, precond, x0, cfg, |i| lambdas[i % lambdas.len()])
}

fn iterate(
    obj: &dyn Objective,
    precond: &dyn Preconditioner,
    x0: &PeriodicField,
    cfg: &SolverConfig,
    lambda_at: impl Fn(usize) -> f64,
) -> Result<SolveOutcome> {
    let fft_start = obj.fft_count();
    let mut x = x0.clone();
    let mut x_prev = x0.clone();
    let mut trace = Vec::new();
    let mut i = 0;
    loop {
        let lambda = lambda_at(i);
        let y = if lambda != 0.0 && i > 0 {
            let mut y = x.clone();
            y.axpy(lambda, &(&x - &x_prev));
            y
        } else {
            x.clone()
        };
        let grad = obj.gradient(&y)?;
        let d = precond.apply_inverse(&(-&grad))?;
        let d_norm = d.max_abs();
        if cfg.trace {
            trace.push(IterationRecord {
                iteration: i,
                lambda,
                d_norm,
            });
        }
        let converged = d_norm < cfg.tol_iter;
        if converged || i >= cfg.max_iter || !d_norm.is_finite() {
            if !converged {
                log::debug!("solver stopped after {i} updates, |d| = {d_norm:.3e}");
            }
            return Ok(SolveOutcome {
                solution: y,
                iterations: i,
                gradient_evaluations: i + 1,
                converged,
                fft_count: obj.fft_count() - fft_start,
                final_d_norm: d_norm,
                trace,
            });
        }
        let mut next = y;
        next.axpy(cfg.step_size, &d);
        x_prev = std::mem::replace(&mut x, next);
        i += 1;
    }
}
