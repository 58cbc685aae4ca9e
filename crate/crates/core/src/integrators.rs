//! Time steppers: fully implicit MP / BDF2 (nonlinear solve per step) and
//! linearly implicit LMP / LBDF2 (one diagonal solve per step), with the
//! first-order bootstraps backward Euler / linearized backward Euler.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PeriodicField;
use crate::models::Model;
use crate::objective::{ImplicitScheme, StepContext};
use crate::preconditioner::AveragedNewton;
use crate::solvers::{solve, SolveOutcome, SolverConfig};
use crate::spectral::SpectralOps;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SchemeKind {
    Mp,
    Bdf2,
    Lmp,
    Lbdf2,
    Be,
    Lbe,
}

impl SchemeKind {
    pub const PRODUCTION: [SchemeKind; 4] =
        [SchemeKind::Mp, SchemeKind::Bdf2, SchemeKind::Lmp, SchemeKind::Lbdf2];

    pub fn is_implicit(self) -> bool {
        matches!(self, SchemeKind::Mp | SchemeKind::Bdf2 | SchemeKind::Be)
    }

    /// Scheme actually used for step `n` (0-based): the two-step methods
    /// start with their one-step counterparts.
    pub fn at_step(self, n: usize) -> SchemeKind {
        match (self, n) {
            (SchemeKind::Bdf2, 0) => SchemeKind::Be,
            (SchemeKind::Lbdf2, 0) => SchemeKind::Lbe,
            (s, _) => s,
        }
    }

    /// Implicitness weight of the stiff linear part.
    fn theta(self) -> f64 {
        match self {
            SchemeKind::Mp | SchemeKind::Lmp => 0.5,
            _ => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Mp => "MP",
            SchemeKind::Bdf2 => "BDF2",
            SchemeKind::Lmp => "LMP",
            SchemeKind::Lbdf2 => "LBDF2",
            SchemeKind::Be => "BE",
            SchemeKind::Lbe => "LBE",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "MP" => Ok(SchemeKind::Mp),
            "BDF2" => Ok(SchemeKind::Bdf2),
            "LMP" => Ok(SchemeKind::Lmp),
            "LBDF2" => Ok(SchemeKind::Lbdf2),
            "BE" => Ok(SchemeKind::Be),
            "LBE" => Ok(SchemeKind::Lbe),
            other => Err(format!("unknown scheme '{other}'")),
        }
    }
}

/// `a u_{n+1} + b u_n + c u_{n-1}` approximates `du/dt` at the new level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Variable-step coefficients. `dt_prev` is only read by the BDF2 family.
pub fn step_coeffs(kind: SchemeKind, dt: f64, dt_prev: Option<f64>) -> Result<StepCoefficients> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    match kind {
        SchemeKind::Bdf2 | SchemeKind::Lbdf2 => {
            let dp = dt_prev.ok_or_else(|| {
                Error::Precondition("BDF2 coefficients need the previous step size".into())
            })?;
            if !(dp > 0.0) {
                return Err(Error::InvalidParameter(format!("previous step must be positive, got {dp}")));
            }
            Ok(StepCoefficients {
                a: 1.0 / dt + 1.0 / (dt + dp),
                b: -1.0 / dt - 1.0 / dp,
                c: 1.0 / dp - 1.0 / (dt + dp),
            })
        }
        _ => Ok(StepCoefficients {
            a: 1.0 / dt,
            b: -1.0 / dt,
            c: 0.0,
        }),
    }
}

/// The already accepted levels a step builds on.
#[derive(Debug, Clone, Copy)]
pub struct History<'a> {
    pub current: &'a PeriodicField,
    pub previous: Option<&'a PeriodicField>,
    /// Size of the step that produced `current`.
    pub dt_prev: Option<f64>,
}

impl<'a> History<'a> {
    pub fn start(u0: &'a PeriodicField) -> Self {
        Self {
            current: u0,
            previous: None,
            dt_prev: None,
        }
    }

    /// `dt / dt_prev`, zero when there is no previous level.
    fn ratio(&self, dt: f64) -> f64 {
        match (self.previous, self.dt_prev) {
            (Some(_), Some(dp)) => dt / dp,
            _ => 0.0,
        }
    }

    /// `u_{n-1}`, with `u_{-1} := u_0`.
    fn previous_or_current(&self) -> &'a PeriodicField {
        self.previous.unwrap_or(self.current)
    }

    /// Linear extrapolation `u_n + rho P0(u_n - u_{n-1})`. Projecting the
    /// increment keeps a rounding-level mean gap between the levels from
    /// being carried forward step after step.
    pub fn extrapolate(&self, dt: f64) -> PeriodicField {
        let rho = self.ratio(dt);
        if rho == 0.0 {
            return self.current.clone();
        }
        let mut out = self.current.clone();
        out.axpy(rho, &(self.current - self.previous_or_current()).mean_zero());
        out
    }
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub field: PeriodicField,
    /// Present for the fully implicit schemes.
    pub solve: Option<SolveOutcome>,
    pub scheme: SchemeKind,
}

/// One step of `kind` (already resolved with [`SchemeKind::at_step`]).
pub fn take_step(
    ops: &SpectralOps,
    model: &Model,
    kind: SchemeKind,
    history: &History,
    dt: f64,
    solver: &SolverConfig,
) -> Result<StepResult> {
    if kind.is_implicit() {
        let (field, outcome) = implicit_step(ops, model, kind, history, dt, solver)?;
        Ok(StepResult {
            field,
            solve: Some(outcome),
            scheme: kind,
        })
    } else {
        Ok(StepResult {
            field: semi_implicit_step(ops, model, kind, history, dt)?,
            solve: None,
            scheme: kind,
        })
    }
}

/// MP, BDF2 or BE step: minimizes the step objective from the extrapolated
/// guess. Non-convergence is reported, not raised; the caller decides.
pub fn implicit_step(
    ops: &SpectralOps,
    model: &Model,
    kind: SchemeKind,
    history: &History,
    dt: f64,
    solver: &SolverConfig,
) -> Result<(PeriodicField, SolveOutcome)> {
    let scheme = match kind {
        SchemeKind::Mp => ImplicitScheme::Mp,
        SchemeKind::Bdf2 => ImplicitScheme::Bdf2,
        SchemeKind::Be => ImplicitScheme::BackwardEuler,
        other => {
            return Err(Error::InvalidParameter(format!("{other} is not a fully implicit scheme")))
        }
    };
    let previous = if scheme == ImplicitScheme::Bdf2 { history.previous } else { None };
    let ctx = StepContext::new(ops, model, scheme, dt, history.dt_prev, history.current, previous)?;
    let x0 = history.extrapolate(dt);
    let precond = AveragedNewton::build(&ctx, &x0)?;
    log::debug!("{kind} step dt={dt:.3e}: {}", precond.diagnostics());
    let outcome = solve(&ctx, &precond, &x0, solver)?;
    if !outcome.converged {
        log::warn!(
            "{kind} step dt={dt:.3e}: solver stopped at |d|={:.3e} after {} iterations",
            outcome.final_d_norm,
            outcome.iterations
        );
    }
    Ok((outcome.solution.clone(), outcome))
}

/// LMP, LBDF2 or LBE step: stiff linear part implicit, nonlinear part
/// extrapolated, solved mode by mode.
pub fn semi_implicit_step(
    ops: &SpectralOps,
    model: &Model,
    kind: SchemeKind,
    history: &History,
    dt: f64,
) -> Result<PeriodicField> {
    let coeff_kind = match kind {
        SchemeKind::Lmp => SchemeKind::Mp,
        SchemeKind::Lbdf2 => SchemeKind::Bdf2,
        SchemeKind::Lbe => SchemeKind::Be,
        other => {
            return Err(Error::InvalidParameter(format!("{other} is not a linearly implicit scheme")))
        }
    };
    let StepCoefficients { a, b, c } = step_coeffs(coeff_kind, dt, history.dt_prev)?;
    let theta = kind.theta();
    let m = model.mobility();
    let un = history.current;
    let prev = history.previous_or_current();
    let rho = history.ratio(dt);

    let argument = match kind {
        SchemeKind::Lbdf2 => un.zip_map(prev, |x, y| x + rho * (x - y)),
        SchemeKind::Lmp => un.zip_map(prev, |x, y| 0.5 * ((2.0 + rho) * x - rho * y)),
        _ => un.clone(),
    };

    let mut base = if theta < 1.0 {
        ops.forward_raw(un)
    } else {
        let mut h = un * (-b);
        h.axpy(-c, prev);
        ops.forward_raw(&h)
    };
    let nonlinear = model.nonlinear_spectrum(ops, &argument);
    for (j, (bj, nj)) in base.iter_mut().zip(&nonlinear).enumerate() {
        let k2 = ops.k2()[j];
        let stiff = m * k2 * model.linear_symbol(k2);
        let lhs = a + theta * stiff;
        if !(lhs > 0.0) {
            return Err(Error::SingularSystem { k2 });
        }
        let explicit = if theta < 1.0 {
            *bj * (-b - (1.0 - theta) * stiff)
        } else {
            *bj
        };
        *bj = (explicit - *nj * (m * k2)) / lhs;
    }
    let out: Vec<Complex64> = base;
    Ok(ops.inverse_raw(out))
}

/// Constant-step integration to `t_final`, bootstrapping the two-step
/// schemes. Used for order checks and reference solves.
pub fn run_fixed(
    ops: &SpectralOps,
    model: &Model,
    kind: SchemeKind,
    solver: &SolverConfig,
    u0: &PeriodicField,
    dt: f64,
    t_final: f64,
) -> Result<PeriodicField> {
    let steps = (t_final / dt).round() as usize;
    if steps == 0 || ((steps as f64) * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "t_final = {t_final} is not a multiple of dt = {dt}"
        )));
    }
    let mut prev: Option<PeriodicField> = None;
    let mut current = u0.clone();
    for n in 0..steps {
        let history = History {
            current: &current,
            previous: prev.as_ref(),
            dt_prev: prev.as_ref().map(|_| dt),
        };
        let step = take_step(ops, model, kind.at_step(n), &history, dt, solver)?;
        if let Some(s) = &step.solve {
            if !s.converged {
                return Err(Error::NonConvergence {
                    iterations: s.iterations,
                    residual: s.final_d_norm,
                });
            }
        }
        if !step.field.is_finite() {
            return Err(Error::RunAborted {
                t: (n + 1) as f64 * dt,
                reason: "non-finite field".into(),
            });
        }
        prev = Some(std::mem::replace(&mut current, step.field));
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid2D;
    use crate::models::{FchParams, PfcParams};
    use std::f64::consts::PI;

    #[test]
    fn bdf2_coefficients() {
        let c = step_coeffs(SchemeKind::Bdf2, 0.1, Some(0.1)).unwrap();
        assert!((c.a - 15.0).abs() < 1e-12);
        assert!((c.b + 20.0).abs() < 1e-12);
        assert!((c.c - 5.0).abs() < 1e-12);
        // exact on quadratics for unequal steps
        let (dt, dp) = (0.3, 0.7);
        let c = step_coeffs(SchemeKind::Bdf2, dt, Some(dp)).unwrap();
        let f = |t: f64| 2.0 + 3.0 * t - t * t;
        let (t1, t0, tm) = (dt, 0.0, -dp);
        let approx = c.a * f(t1) + c.b * f(t0) + c.c * f(tm);
        assert!((approx - (3.0 - 2.0 * t1)).abs() < 1e-12);
        assert!(step_coeffs(SchemeKind::Bdf2, 0.1, None).is_err());
        let mp = step_coeffs(SchemeKind::Mp, 0.25, None).unwrap();
        assert_eq!((mp.a, mp.b, mp.c), (4.0, -4.0, 0.0));
    }

    #[test]
    fn bootstrap_schemes() {
        assert_eq!(SchemeKind::Bdf2.at_step(0), SchemeKind::Be);
        assert_eq!(SchemeKind::Lbdf2.at_step(0), SchemeKind::Lbe);
        assert_eq!(SchemeKind::Bdf2.at_step(1), SchemeKind::Bdf2);
        assert_eq!(SchemeKind::Mp.at_step(0), SchemeKind::Mp);
        assert_eq!("lbdf2".parse::<SchemeKind>().unwrap(), SchemeKind::Lbdf2);
    }

    #[test]
    fn steady_states_are_fixed_points() {
        let g = Grid2D::anchored(2.0 * PI, 16).unwrap();
        let ops = SpectralOps::new(g);
        let u = PeriodicField::constant(g, 0.3);
        let solver = SolverConfig::default();
        for model in [
            Model::pfc(PfcParams::new(0.25, 1.0).unwrap()),
            Model::fch(FchParams::new(0.2, 0.1, 0.1, 0.1, 1.0).unwrap()),
        ] {
            for kind in [SchemeKind::Lmp, SchemeKind::Lbe, SchemeKind::Mp, SchemeKind::Be] {
                let step = take_step(&ops, &model, kind, &History::start(&u), 0.1, &solver).unwrap();
                assert!((&step.field - &u).max_abs() < 1e-12, "{kind}");
            }
        }
    }

    #[test]
    fn semi_implicit_preserves_mass_and_counts_transforms() {
        let g = Grid2D::anchored(2.0 * PI, 16).unwrap();
        let ops = SpectralOps::new(g);
        let model = Model::fch(FchParams::new(0.3, 0.1, 0.1, 0.125, 1.0).unwrap());
        let u0 = PeriodicField::from_fn(g, |x, y| -0.2 + 0.3 * x.cos() * (2.0 * y).sin());
        let u1 = PeriodicField::from_fn(g, |x, y| -0.2 + 0.28 * x.cos() * (2.0 * y).sin());
        let history = History {
            current: &u1,
            previous: Some(&u0),
            dt_prev: Some(0.02),
        };
        let before = ops.fft_count();
        let next = semi_implicit_step(&ops, &model, SchemeKind::Lbdf2, &history, 0.03).unwrap();
        assert!(ops.fft_count() - before <= 6);
        assert!((next.mean() - u1.mean()).abs() < 1e-14);
    }

    #[test]
    fn implicit_step_satisfies_step_equation() {
        let g = Grid2D::anchored(2.0 * PI, 16).unwrap();
        let ops = SpectralOps::new(g);
        let model = Model::pfc(PfcParams::new(0.25, 1.0).unwrap());
        let u0 = PeriodicField::from_fn(g, |x, y| 0.2 + 0.1 * (x + y).cos());
        let solver = SolverConfig {
            step_size: 0.9,
            ..SolverConfig::default()
        };
        for kind in [SchemeKind::Mp, SchemeKind::Be] {
            let (u1, out) = implicit_step(&ops, &model, kind, &History::start(&u0), 0.05, &solver).unwrap();
            assert!(out.converged, "{kind}");
            let scheme = if kind == SchemeKind::Mp { ImplicitScheme::Mp } else { ImplicitScheme::BackwardEuler };
            let ctx = StepContext::new(&ops, &model, scheme, 0.05, None, &u0, None).unwrap();
            assert!(ctx.residual(&u1).max_abs() < 1e-7, "{kind}");
        }
    }
}
