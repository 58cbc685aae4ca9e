//! Browser bindings: step a desk-scale simulation, compare the two
//! nonlinear solvers on one hard step, and plot the preconditioner symbol.

use wasm_bindgen::prelude::*;

use pfch::benchmarks::{BenchmarkSpec, Problem};
use pfch::controller::Stepper;
use pfch::integrators::{implicit_step, History};
use pfch::objective::{ImplicitScheme, StepContext};
use pfch::preconditioner::AveragedNewton;
use pfch::{SchemeKind, SolverKind, SpectralOps};

fn spec_for(problem: &str, n: usize) -> Result<BenchmarkSpec, JsError> {
    let problem: Problem = problem.parse().map_err(|e: String| JsError::new(&e))?;
    let mut spec = problem.spec()?;
    if n > 0 {
        spec.domain.n = n;
    }
    Ok(spec)
}

fn scheme_named(name: &str) -> Result<SchemeKind, JsError> {
    name.parse().map_err(|e: String| JsError::new(&e))
}

#[wasm_bindgen]
pub struct Simulation {
    stepper: Stepper,
    n: usize,
    ops: SpectralOps,
}

#[wasm_bindgen]
impl Simulation {
    /// `n = 0` keeps the problem's own resolution.
    #[wasm_bindgen(constructor)]
    pub fn new(problem: &str, n: usize, scheme: &str, tol: f64, seed: u32) -> Result<Simulation, JsError> {
        let spec = spec_for(problem, n)?;
        let scheme = scheme_named(scheme)?;
        let p: Problem = spec.name.parse().map_err(|e: String| JsError::new(&e))?;
        let cfg = spec.adaptive_config(scheme, p.default_estimator(scheme), tol, spec.stepping.t_final);
        let u0 = spec.initial_field(Some(u64::from(seed)))?;
        let grid = *u0.grid();
        let stepper = Stepper::new(spec.model()?, spec.solver_config(SolverKind::Pagd), cfg, u0)?;
        Ok(Simulation {
            stepper,
            n: grid.n(),
            ops: SpectralOps::new(grid),
        })
    }

    /// Runs up to `attempts` step attempts; false once the final time is
    /// reached.
    pub fn advance(&mut self, attempts: u32) -> Result<bool, JsError> {
        for _ in 0..attempts {
            if self.stepper.advance()?.is_none() {
                return Ok(false);
            }
        }
        Ok(!self.stepper.is_finished())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn time(&self) -> f64 {
        self.stepper.time()
    }

    /// Size of the next attempted step.
    pub fn dt(&self) -> f64 {
        self.stepper.tentative_dt()
    }

    /// Reported transform count (forward plus inverse, halved).
    pub fn fft(&self) -> f64 {
        self.stepper.fft_count() as f64 / 2.0
    }

    pub fn accepted(&self) -> usize {
        self.stepper.records().iter().filter(|r| r.accepted).count()
    }

    pub fn rejected(&self) -> usize {
        self.stepper.records().len() - self.accepted()
    }

    pub fn mass(&self) -> f64 {
        self.stepper.field().mean()
    }

    pub fn energy(&self) -> f64 {
        self.stepper.model().energy(&self.ops, self.stepper.field())
    }

    /// Row-major field values, `n * n` entries.
    pub fn field(&self) -> Vec<f64> {
        self.stepper.field().values().to_vec()
    }
}

/// Search-direction norms per iteration for both solvers on one step.
#[wasm_bindgen]
pub struct SolverTrace {
    pgd: Vec<f64>,
    pagd: Vec<f64>,
    pgd_fft: f64,
    pagd_fft: f64,
}

#[wasm_bindgen]
impl SolverTrace {
    pub fn pgd(&self) -> Vec<f64> {
        self.pgd.clone()
    }

    pub fn pagd(&self) -> Vec<f64> {
        self.pagd.clone()
    }

    pub fn pgd_fft(&self) -> f64 {
        self.pgd_fft
    }

    pub fn pagd_fft(&self) -> f64 {
        self.pagd_fft
    }
}

/// One backward Euler step of size `dt` from the initial condition, solved
/// once with each solver.
#[wasm_bindgen]
pub fn solver_trace(problem: &str, n: usize, dt: f64, seed: u32) -> Result<SolverTrace, JsError> {
    let spec = spec_for(problem, n)?;
    let model = spec.model()?;
    let u0 = spec.initial_field(Some(u64::from(seed)))?;
    let ops = SpectralOps::new(*u0.grid());
    let run = |method: SolverKind| -> Result<(Vec<f64>, f64), JsError> {
        let mut cfg = spec.solver_config(method);
        cfg.trace = true;
        let (_, out) = implicit_step(&ops, &model, SchemeKind::Be, &History::start(&u0), dt, &cfg)?;
        Ok((out.trace.iter().map(|r| r.d_norm).collect(), out.fft_count as f64 / 2.0))
    };
    let (pgd, pgd_fft) = run(SolverKind::Pgd)?;
    let (pagd, pagd_fft) = run(SolverKind::Pagd)?;
    Ok(SolverTrace {
        pgd,
        pagd,
        pgd_fft,
        pagd_fft,
    })
}

/// Preconditioner symbol at `samples` wavenumbers between the lowest and
/// highest resolved ones, as `[k, sigma(k)]` pairs flattened.
#[wasm_bindgen]
pub fn preconditioner_symbol(problem: &str, n: usize, dt: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    let spec = spec_for(problem, n)?;
    let model = spec.model()?;
    let u0 = spec.initial_field(None)?;
    let grid = *u0.grid();
    let ops = SpectralOps::new(grid);
    let ctx = StepContext::new(&ops, &model, ImplicitScheme::BackwardEuler, dt, None, &u0, None)?;
    let coefficients = AveragedNewton::build(&ctx, &u0)?.coefficients();
    let k_lo = 2.0 * std::f64::consts::PI / grid.length();
    let k_hi = k_lo * (grid.n() / 2) as f64;
    let samples = samples.max(2);
    let mut out = Vec::with_capacity(2 * samples);
    for i in 0..samples {
        let k = k_lo * (k_hi / k_lo).powf(i as f64 / (samples - 1) as f64);
        out.push(k);
        out.push(coefficients.eval(k * k));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulation_steps_and_conserves_mass() {
        let mut sim = Simulation::new("DESK-PFC1", 32, "LBDF2", 1e-3, 1).unwrap();
        let m0 = sim.mass();
        sim.advance(20).unwrap();
        assert!(sim.time() > 0.0);
        assert_eq!(sim.field().len(), 32 * 32);
        assert!((sim.mass() - m0).abs() < 1e-12);
        assert!(sim.fft() > 0.0);
    }

    #[test]
    fn trace_and_symbol_have_data() {
        let t = solver_trace("DESK-FCH3", 32, 0.01, 1).unwrap();
        assert!(!t.pgd().is_empty() && !t.pagd().is_empty());
        assert!(t.pgd().last().unwrap() < &1e-10);
        let s = preconditioner_symbol("DESK-FCH3", 32, 0.01, 16).unwrap();
        assert_eq!(s.len(), 32);
        assert!(s.chunks(2).all(|p| p[1] > 0.0));
    }
}
