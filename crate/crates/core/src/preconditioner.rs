//! Diagonal Fourier preconditioner built from a spatially averaged Newton
//! linearization of the step objective.
//!
//! Symbol on mode `k != 0`:
//! `sigma(k) = beta_m2 / k^2 + beta_0 + beta_2 k^2 + beta_4 k^4`.
//! The zero mode is left untouched (the iterates live in the mean-zero space).

use std::fmt;

use crate::error::{Error, Result};
use crate::field::PeriodicField;
use crate::models::Model;
use crate::objective::StepContext;
use crate::spectral::SpectralOps;

const MEAN_TOL: f64 = 1e-10;

/// Maps a residual to a search direction.
pub trait Preconditioner {
    fn apply_inverse(&self, r: &PeriodicField) -> Result<PeriodicField>;
}

/// No preconditioning; the search direction is the residual itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Preconditioner for Identity {
    fn apply_inverse(&self, r: &PeriodicField) -> Result<PeriodicField> {
        Ok(r.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolCoefficients {
    pub beta_m2: f64,
    pub beta_0: f64,
    pub beta_2: f64,
    pub beta_4: f64,
}

impl SymbolCoefficients {
    pub fn eval(&self, k2: f64) -> f64 {
        self.beta_m2 / k2 + self.beta_0 + self.beta_2 * k2 + self.beta_4 * k2 * k2
    }
}

impl fmt::Display for SymbolCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "beta_-2={:.6e} beta_0={:.6e} beta_2={:.6e} beta_4={:.6e}",
            self.beta_m2, self.beta_0, self.beta_2, self.beta_4
        )
    }
}

#[derive(Debug, Clone)]
pub struct AveragedNewton<'a> {
    ops: &'a SpectralOps,
    coefficients: SymbolCoefficients,
    // 1/sigma on nonzero modes, 0 on the zero mode
    inv_sigma: Vec<f64>,
    min_sigma: f64,
}

impl<'a> AveragedNewton<'a> {
    /// Linearizes around `breve(v0)` for the step described by `ctx`.
    pub fn build(ctx: &StepContext<'a>, v0: &PeriodicField) -> Result<Self> {
        let w = ctx.breve(v0);
        let beta_m2 = ctx.coeffs.a / ctx.model.mobility();
        let n = w.values().len() as f64;
        let avg = |f: &dyn Fn(f64) -> f64| w.values().iter().map(|&z| f(z)).sum::<f64>() / n;
        let coefficients = match ctx.model {
            Model::Pfc(p) => SymbolCoefficients {
                beta_m2,
                beta_0: avg(&|z| 3.0 * z * z + 1.0 - p.epsilon).abs(),
                beta_2: -2.0,
                beta_4: 1.0,
            },
            Model::Fch { params, well } => {
                let e2 = params.epsilon * params.epsilon;
                SymbolCoefficients {
                    beta_m2,
                    beta_0: avg(&|z| {
                        let f2 = well.d2f(z);
                        f2 * f2 - params.eta2 * f2 + well.d3f(z) * well.df(z)
                    })
                    .abs(),
                    beta_2: avg(&|z| e2 * well.d2f(z) - e2 * params.eta1).abs(),
                    beta_4: e2 * e2,
                }
            }
        };
        Self::from_coefficients(ctx.ops, coefficients)
    }

    pub fn from_coefficients(ops: &'a SpectralOps, coefficients: SymbolCoefficients) -> Result<Self> {
        let mut inv_sigma = Vec::with_capacity(ops.k2().len());
        let mut min_sigma = f64::INFINITY;
        for &k2 in ops.k2() {
            if k2 == 0.0 {
                inv_sigma.push(0.0);
                continue;
            }
            let sigma = coefficients.eval(k2);
            if !(sigma > 0.0) {
                return Err(Error::IndefinitePreconditioner { k2, sigma });
            }
            min_sigma = min_sigma.min(sigma);
            inv_sigma.push(1.0 / sigma);
        }
        Ok(Self {
            ops,
            coefficients,
            inv_sigma,
            min_sigma,
        })
    }

    pub fn coefficients(&self) -> SymbolCoefficients {
        self.coefficients
    }

    pub fn min_sigma(&self) -> f64 {
        self.min_sigma
    }

    /// Applies the symbol itself (mean-zero input).
    pub fn apply_forward(&self, v: &PeriodicField) -> Result<PeriodicField> {
        check_mean_free(v)?;
        let table: Vec<f64> = self
            .inv_sigma
            .iter()
            .map(|&s| if s == 0.0 { 0.0 } else { 1.0 / s })
            .collect();
        Ok(self.ops.apply_multiplier(v, &table))
    }

    pub fn diagnostics(&self) -> String {
        format!("{} min_sigma={:.6e}", self.coefficients, self.min_sigma)
    }
}

impl Preconditioner for AveragedNewton<'_> {
    fn apply_inverse(&self, r: &PeriodicField) -> Result<PeriodicField> {
        check_mean_free(r)?;
        Ok(self.ops.apply_multiplier(r, &self.inv_sigma))
    }
}

fn check_mean_free(r: &PeriodicField) -> Result<()> {
    let m = r.mean();
    if m.abs() > MEAN_TOL * r.max_abs().max(1.0) {
        return Err(Error::Precondition(format!("residual mean {m:.3e} is not zero")));
    }
    Ok(())
}
