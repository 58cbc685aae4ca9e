//! Phase field crystal (PFC) and functionalized Cahn-Hilliard (FCH) energies,
//! chemical potentials and linear/nonlinear splittings.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::double_well::DoubleWell;
use crate::error::{Error, Result};
use crate::field::PeriodicField;
use crate::spectral::{inner, SpectralOps};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfcParams {
    pub epsilon: f64,
    pub mobility: f64,
}

impl PfcParams {
    pub fn new(epsilon: f64, mobility: f64) -> Result<Self> {
        if !(mobility > 0.0) {
            return Err(Error::InvalidParameter(format!("mobility must be positive, got {mobility}")));
        }
        Ok(Self { epsilon, mobility })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FchParams {
    pub epsilon: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub tau: f64,
    pub mobility: f64,
    /// Zeroth-order stabilisation of the linear part.
    pub kappa0: f64,
    /// Second-order stabilisation of the linear part.
    pub kappa2: f64,
}

impl FchParams {
    /// Parameters with the default splitting constants
    /// `kappa0 = 1 - 2 tau^2 + eta2` and `kappa2 = 1`.
    pub fn new(epsilon: f64, eta1: f64, eta2: f64, tau: f64, mobility: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(eta1 > 0.0 && eta2 > 0.0) {
            return Err(Error::InvalidParameter("eta1 and eta2 must be positive".into()));
        }
        if !(mobility > 0.0) {
            return Err(Error::InvalidParameter(format!("mobility must be positive, got {mobility}")));
        }
        Ok(Self {
            epsilon,
            eta1,
            eta2,
            tau,
            mobility,
            kappa0: Self::default_kappa0(tau, eta2),
            kappa2: 1.0,
        })
    }

    pub fn default_kappa0(tau: f64, eta2: f64) -> f64 {
        1.0 - 2.0 * tau * tau + eta2
    }

    pub fn with_splitting(mut self, kappa0: f64, kappa2: f64) -> Self {
        if kappa0 != self.kappa0 || kappa2 != self.kappa2 {
            log::info!("overriding FCH splitting constants: kappa0 = {kappa0}, kappa2 = {kappa2}");
        }
        self.kappa0 = kappa0;
        self.kappa2 = kappa2;
        self
    }
}

/// Which gradient flow is being integrated.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Pfc(PfcParams),
    Fch { params: FchParams, well: DoubleWell },
}

impl Model {
    pub fn pfc(params: PfcParams) -> Self {
        Model::Pfc(params)
    }

    pub fn fch(params: FchParams) -> Self {
        Model::Fch {
            well: DoubleWell::new(params.tau),
            params,
        }
    }

    pub fn mobility(&self) -> f64 {
        match self {
            Model::Pfc(p) => p.mobility,
            Model::Fch { params, .. } => params.mobility,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Pfc(_) => "pfc",
            Model::Fch { .. } => "fch",
        }
    }

    /// Discrete free energy (trapezoidal quadrature of the energy density).
    pub fn energy(&self, ops: &SpectralOps, u: &PeriodicField) -> f64 {
        let grad2 = ops.gradient_sq(u);
        let lap = ops.laplacian(u);
        let h = u.grid().spacing();
        let density: f64 = match self {
            Model::Pfc(p) => {
                let a = 0.5 * (1.0 - p.epsilon);
                u.values()
                    .iter()
                    .zip(grad2.values())
                    .zip(lap.values())
                    .map(|((&v, &g), &l)| 0.25 * v.powi(4) + a * v * v - g + 0.5 * l * l)
                    .sum()
            }
            Model::Fch { params, well } => {
                let e2 = params.epsilon * params.epsilon;
                u.values()
                    .iter()
                    .zip(grad2.values())
                    .zip(lap.values())
                    .map(|((&v, &g), &l)| {
                        let w = e2 * l - well.df(v);
                        0.5 * w * w - 0.5 * e2 * params.eta1 * g - params.eta2 * well.f(v)
                    })
                    .sum()
            }
        };
        h * h * density
    }

    /// Chemical potential `mu = dE/du`.
    pub fn chemical_potential(&self, ops: &SpectralOps, u: &PeriodicField) -> PeriodicField {
        match self {
            Model::Pfc(p) => {
                let lin = ops.apply_symbol(u, |k2| k2 * k2 - 2.0 * k2);
                let a = 1.0 - p.epsilon;
                u.zip_map(&lin, |v, l| v * v * v + a * v + l)
            }
            Model::Fch { params, well } => {
                let e2 = params.epsilon * params.epsilon;
                let lap = ops.laplacian(u);
                // omega = eps^2 Lap u - F'(u)
                let omega = u.zip_map(&lap, |v, l| e2 * l - well.df(v));
                let lap_omega = ops.laplacian(&omega);
                let (eta1, eta2) = (params.eta1, params.eta2);
                let mut mu = omega.clone();
                for (((m, &w), &lw), &v) in mu
                    .values_mut()
                    .iter_mut()
                    .zip(omega.values())
                    .zip(lap_omega.values())
                    .zip(u.values())
                {
                    *m = e2 * lw - well.d2f(v) * w + eta1 * w + (eta1 - eta2) * well.df(v);
                }
                mu
            }
        }
    }

    /// Symbol of the implicit linear part as a function of `k^2`.
    pub fn linear_symbol(&self, k2: f64) -> f64 {
        match self {
            Model::Pfc(_) => (1.0 - k2) * (1.0 - k2),
            Model::Fch { params, .. } => {
                let e4 = params.epsilon.powi(4);
                e4 * k2 * k2 + params.kappa2 * k2 + params.kappa0
            }
        }
    }

    /// Linear part `L(u)` of the IMEX splitting.
    pub fn linear_part(&self, ops: &SpectralOps, u: &PeriodicField) -> PeriodicField {
        ops.apply_symbol(u, |k2| self.linear_symbol(k2))
    }

    /// Nonlinear part `N(u) = mu(u) - L(u)`.
    pub fn nonlinear_part(&self, ops: &SpectralOps, u: &PeriodicField) -> PeriodicField {
        let raw = self.nonlinear_spectrum(ops, u);
        ops.inverse_raw(raw)
    }

    /// `(L(u), N(u))`.
    pub fn split(&self, ops: &SpectralOps, u: &PeriodicField) -> (PeriodicField, PeriodicField) {
        (self.linear_part(ops, u), self.nonlinear_part(ops, u))
    }

    /// Unscaled transform of `N(u)`, assembled with as few transforms as the
    /// model allows.
    pub(crate) fn nonlinear_spectrum(&self, ops: &SpectralOps, u: &PeriodicField) -> Vec<Complex64> {
        match self {
            Model::Pfc(p) => {
                let eps = p.epsilon;
                ops.forward_raw(&u.map(|v| v * v * v - eps * v))
            }
            Model::Fch { params, well } => {
                let e2 = params.epsilon * params.epsilon;
                let lap = ops.laplacian(u);
                let (k0, k2c, eta1, eta2) = (params.kappa0, params.kappa2, params.eta1, params.eta2);
                // pointwise part: -k0 u - (e2 (F'' - eta1) - k2) Lap u + (F'' - eta2) F'
                let local = u.zip_map(&lap, |v, l| {
                    let f2 = well.d2f(v);
                    -k0 * v - (e2 * (f2 - eta1) - k2c) * l + (f2 - eta2) * well.df(v)
                });
                // -eps^2 Lap F'(u) is diagonal: + eps^2 k^2 F'^
                let fprime = ops.forward_raw(&u.map(|v| well.df(v)));
                let mut out = ops.forward_raw(&local);
                for ((o, f), &k2) in out.iter_mut().zip(&fprime).zip(ops.k2()) {
                    *o += f * (e2 * k2);
                }
                out
            }
        }
    }

    /// Right-hand side `R(u) = M Lap mu(u)` of the gradient flow.
    pub fn rhs(&self, ops: &SpectralOps, u: &PeriodicField) -> PeriodicField {
        let mu = self.chemical_potential(ops, u);
        let m = self.mobility();
        ops.apply_symbol(&mu, |k2| -m * k2)
    }

    /// Dissipation check helper: `(R(u), (-Lap)^-1 R(u))_N`.
    pub fn rhs_neg_norm_sq(&self, ops: &SpectralOps, u: &PeriodicField) -> Result<f64> {
        let r = self.rhs(ops, u).mean_zero();
        let w = ops.inverse_neg_laplacian(&r)?;
        inner(&r, &w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid2D;
    use std::f64::consts::PI;

    fn fch_model() -> Model {
        Model::fch(FchParams::new(0.18, 0.0324, 0.0324, 0.0, 1.0).unwrap())
    }

    #[test]
    fn constant_fields() {
        let g = Grid2D::anchored(2.0 * PI, 16).unwrap();
        let ops = SpectralOps::new(g);
        let c = 0.3;
        let u = PeriodicField::constant(g, c);

        let pfc = Model::pfc(PfcParams::new(0.25, 1.0).unwrap());
        let e = 0.25 * c.powi(4) + 0.75 * 0.5 * c * c;
        assert!((pfc.energy(&ops, &u) - g.area() * e).abs() < 1e-12);
        let mu = pfc.chemical_potential(&ops, &u);
        assert!(mu.values().iter().all(|&m| (m - (c.powi(3) + 0.75 * c)).abs() < 1e-13));

        let fch = fch_model();
        let Model::Fch { well, params } = &fch else { unreachable!() };
        let e = 0.5 * well.df(c).powi(2) - params.eta2 * well.f(c);
        assert!((fch.energy(&ops, &u) - g.area() * e).abs() < 1e-12);
        let expect = well.d2f(c) * well.df(c) - params.eta2 * well.df(c);
        let mu = fch.chemical_potential(&ops, &u);
        assert!(mu.values().iter().all(|&m| (m - expect).abs() < 1e-13));
        assert!(fch.rhs(&ops, &u).max_abs() < 1e-13);
    }

    #[test]
    fn fch_vanishes_at_lower_well() {
        let g = Grid2D::anchored(1.0, 8).unwrap();
        let ops = SpectralOps::new(g);
        let u = PeriodicField::constant(g, -1.0);
        let fch = fch_model();
        assert!(fch.energy(&ops, &u).abs() < 1e-15);
        assert!(fch.chemical_potential(&ops, &u).max_abs() < 1e-15);
    }

    #[test]
    fn pfc_energy_of_cosine() {
        // u = a cos(kx): <u^2> = a^2/2, <u^4> = 3a^4/8, <|grad u|^2> = a^2 k^2/2,
        // <(Lap u)^2> = a^2 k^4 / 2
        let g = Grid2D::centered(20.0, 32).unwrap();
        let ops = SpectralOps::new(g);
        let (a, eps) = (0.4, 0.3);
        let k = 2.0 * PI / g.length();
        let u = PeriodicField::from_fn(g, |x, _| a * (k * x).cos());
        let pfc = Model::pfc(PfcParams::new(eps, 1.0).unwrap());
        let density = 0.25 * 3.0 * a.powi(4) / 8.0 + 0.5 * (1.0 - eps) * a * a / 2.0
            - a * a * k * k / 2.0
            + 0.5 * a * a * k.powi(4) / 2.0;
        assert!((pfc.energy(&ops, &u) - g.area() * density).abs() < 1e-12);
    }

    #[test]
    fn symbols() {
        let pfc = Model::pfc(PfcParams::new(0.25, 1.0).unwrap());
        assert_eq!(pfc.linear_symbol(1.0), 0.0);
        assert_eq!(pfc.linear_symbol(0.0), 1.0);
        let g = Grid2D::anchored(4.0 * PI, 32).unwrap();
        let ops = SpectralOps::new(g);
        let fch = Model::fch(FchParams::new(0.1, 0.145, 0.2, 0.125, 1.0).unwrap());
        assert!(ops.k2().iter().all(|&k2| fch.linear_symbol(k2) >= 0.0));
    }

    #[test]
    fn default_kappa0_is_linear_coefficient_of_local_term() {
        // (F'' - eta2) F' expanded; its z^1 coefficient
        for (tau, eta2) in [(0.0, 0.0324), (0.125, 0.2), (-0.3, 1.0)] {
            let w = DoubleWell::new(tau);
            let (f1, f2) = (w.coefficients(1), w.coefficients(2));
            let lin = (f2[0] - eta2) * f1[1] + f2[1] * f1[0];
            assert!((lin - FchParams::default_kappa0(tau, eta2)).abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(PfcParams::new(0.1, 0.0).is_err());
        assert!(FchParams::new(0.0, 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(FchParams::new(0.1, -1.0, 1.0, 0.0, 1.0).is_err());
    }
}
