//! Per-step minimization objective of the fully implicit schemes.
//!
//! A step `a u + b u_n + c u_{n-1} = M Lap_N mu(breve u)` is the critical
//! point equation of
//! `G(v) = |a v + b u_n + c u_{n-1}|_{-1,N}^2 / (2 M a) + E~(v)`
//! where `E~(v) = E(v)` for BDF2 / backward Euler and `2 E((v + u_n)/2)` for
//! the midpoint rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PeriodicField;
use crate::integrators::{step_coeffs, SchemeKind, StepCoefficients};
use crate::models::Model;
use crate::solvers::Objective;
use crate::spectral::SpectralOps;

const MEAN_MATCH_TOL: f64 = 1e-10;

/// Fully implicit time discretizations that lead to a nonlinear solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ImplicitScheme {
    Mp,
    Bdf2,
    BackwardEuler,
}

impl ImplicitScheme {
    pub fn scheme_kind(self) -> SchemeKind {
        match self {
            ImplicitScheme::Mp => SchemeKind::Mp,
            ImplicitScheme::Bdf2 => SchemeKind::Bdf2,
            ImplicitScheme::BackwardEuler => SchemeKind::Be,
        }
    }
}

/// Everything that defines one implicit step's objective.
#[derive(Debug, Clone)]
pub struct StepContext<'a> {
    pub ops: &'a SpectralOps,
    pub model: &'a Model,
    pub scheme: ImplicitScheme,
    pub coeffs: StepCoefficients,
    pub dt: f64,
    pub dt_prev: Option<f64>,
    pub current: &'a PeriodicField,
    pub previous: Option<&'a PeriodicField>,
    /// `b u_n + c u_{n-1}`
    history: PeriodicField,
}

impl<'a> StepContext<'a> {
    pub fn new(
        ops: &'a SpectralOps,
        model: &'a Model,
        scheme: ImplicitScheme,
        dt: f64,
        dt_prev: Option<f64>,
        current: &'a PeriodicField,
        previous: Option<&'a PeriodicField>,
    ) -> Result<Self> {
        let coeffs = step_coeffs(scheme.scheme_kind(), dt, dt_prev)?;
        Self::with_coefficients(ops, model, scheme, coeffs, dt, dt_prev, current, previous)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_coefficients(
        ops: &'a SpectralOps,
        model: &'a Model,
        scheme: ImplicitScheme,
        coeffs: StepCoefficients,
        dt: f64,
        dt_prev: Option<f64>,
        current: &'a PeriodicField,
        previous: Option<&'a PeriodicField>,
    ) -> Result<Self> {
        if !(coeffs.a > 0.0) {
            return Err(Error::Precondition(format!("a_n must be positive, got {}", coeffs.a)));
        }
        let scale = coeffs.a.abs() + coeffs.b.abs() + coeffs.c.abs();
        if (coeffs.a + coeffs.b + coeffs.c).abs() > 1e-12 * scale {
            return Err(Error::Precondition("step coefficients must sum to zero".into()));
        }
        if *current.grid() != *ops.grid() {
            return Err(Error::GridMismatch);
        }
        let mut history = current * coeffs.b;
        match previous {
            Some(prev) => {
                if prev.grid() != current.grid() {
                    return Err(Error::GridMismatch);
                }
                check_mean_match(prev, current)?;
                history.axpy(coeffs.c, prev);
            }
            None if coeffs.c != 0.0 => {
                return Err(Error::Precondition("c_n != 0 needs a previous iterate".into()));
            }
            None => {}
        }
        Ok(Self {
            ops,
            model,
            scheme,
            coeffs,
            dt,
            dt_prev,
            current,
            previous,
            history,
        })
    }

    /// The field at which the energy is differentiated.
    pub fn breve(&self, v: &PeriodicField) -> PeriodicField {
        match self.scheme {
            ImplicitScheme::Mp => v.zip_map(self.current, |a, b| 0.5 * (a + b)),
            ImplicitScheme::Bdf2 | ImplicitScheme::BackwardEuler => v.clone(),
        }
    }

    /// `a v + b u_n + c u_{n-1}`, mean-zero projected.
    fn increment(&self, v: &PeriodicField) -> Result<PeriodicField> {
        check_mean_match(v, self.current)?;
        let mut s = self.history.clone();
        s.axpy(self.coeffs.a, v);
        Ok(s.mean_zero())
    }

    pub fn g_value(&self, v: &PeriodicField) -> Result<f64> {
        let s = self.increment(v)?;
        let nn = self.ops.neg_norm(&s)?;
        let m = self.model.mobility();
        let energy = match self.scheme {
            ImplicitScheme::Mp => 2.0 * self.model.energy(self.ops, &self.breve(v)),
            _ => self.model.energy(self.ops, v),
        };
        Ok(nn * nn / (2.0 * m * self.coeffs.a) + energy)
    }

    /// Projected gradient
    /// `M^-1 (-Lap)^-1 P0(a v + b u_n + c u_{n-1}) + P0 mu(breve v)`.
    pub fn g_grad(&self, v: &PeriodicField) -> Result<PeriodicField> {
        let s = self.increment(v)?;
        let mut g = self.ops.inverse_neg_laplacian(&s)?;
        let inv_m = 1.0 / self.model.mobility();
        for x in g.values_mut() {
            *x *= inv_m;
        }
        let mu = self.model.chemical_potential(self.ops, &self.breve(v)).mean_zero();
        g += &mu;
        Ok(g)
    }

    /// Residual of the fully discrete step equation,
    /// `a v + b u_n + c u_{n-1} - M Lap mu(breve v)`.
    pub fn residual(&self, v: &PeriodicField) -> PeriodicField {
        let mut r = self.history.clone();
        r.axpy(self.coeffs.a, v);
        let rhs = self.model.rhs(self.ops, &self.breve(v));
        r -= &rhs;
        r
    }
}

impl Objective for StepContext<'_> {
    fn gradient(&self, v: &PeriodicField) -> Result<PeriodicField> {
        self.g_grad(v)
    }

    fn fft_count(&self) -> u64 {
        self.ops.fft_count()
    }
}

fn check_mean_match(v: &PeriodicField, reference: &PeriodicField) -> Result<()> {
    let (mv, mr) = (v.mean(), reference.mean());
    if (mv - mr).abs() > MEAN_MATCH_TOL * (1.0 + mr.abs()) {
        return Err(Error::Precondition(format!(
            "iterate mean {mv:.12e} differs from history mean {mr:.12e}"
        )));
    }
    Ok(())
}
