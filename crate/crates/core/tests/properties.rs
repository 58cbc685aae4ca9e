use std::f64::consts::PI;

use proptest::prelude::*;

use pfch::controller::{am3_weights, midab2_coefficients, propose_dt};
use pfch::objective::{ImplicitScheme, StepContext};
use pfch::preconditioner::{AveragedNewton, Preconditioner, SymbolCoefficients};
use pfch::spectral::inner;
use pfch::{FchParams, Grid2D, Model, PeriodicField, PfcParams, SolverConfig, SolverKind, SpectralOps};

/// Band-limited field built from `(amplitude, phase)` pairs on the lowest
/// wavenumbers.
fn field(grid: Grid2D, mean: f64, modes: &[(f64, f64)]) -> PeriodicField {
    let l = grid.length();
    PeriodicField::from_fn(grid, |x, y| {
        let mut v = mean;
        for (i, &(a, p)) in modes.iter().enumerate() {
            let (k1, k2) = ((i % 3) as f64 + 1.0, (i / 3) as f64 - 1.0);
            v += a * (2.0 * PI * (k1 * x + k2 * y) / l + p).cos();
        }
        v
    })
}

fn modes(max_amp: f64) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-max_amp..max_amp, 0.0..2.0 * PI), 1..7)
}

fn grid_strategy() -> impl Strategy<Value = Grid2D> {
    (prop::sample::select(vec![8usize, 15, 16, 24]), 1.0..20.0f64)
        .prop_map(|(n, l)| Grid2D::anchored(l, n).unwrap())
}

fn fch_model() -> Model {
    Model::fch(FchParams::new(0.1, 0.145, 0.2, 0.125, 1.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transforms_round_trip(grid in grid_strategy(), m in modes(1.0), mean in -1.0..1.0f64) {
        let ops = SpectralOps::new(grid);
        let u = field(grid, mean, &m);
        let back = ops.idft(&ops.dft(&u).unwrap()).unwrap();
        let diff = (&back - &u).max_abs();
        prop_assert!(diff < 1e-12 * u.max_abs().max(1.0), "diff {diff}");
    }

    #[test]
    fn inverse_laplacian_undoes_laplacian(grid in grid_strategy(), m in modes(1.0)) {
        let ops = SpectralOps::new(grid);
        let u = field(grid, 0.0, &m).mean_zero();
        let neg_lap = -&ops.laplacian(&u);
        let back = ops.inverse_neg_laplacian(&neg_lap.mean_zero()).unwrap();
        prop_assert!((&back - &u).max_abs() < 1e-10 * u.max_abs().max(1e-3));
    }

    #[test]
    fn laplacian_is_symmetric_and_negative(grid in grid_strategy(), a in modes(1.0), b in modes(1.0)) {
        let ops = SpectralOps::new(grid);
        let u = field(grid, 0.3, &a);
        let v = field(grid, -0.2, &b);
        let uv = inner(&ops.laplacian(&u), &v).unwrap();
        let vu = inner(&u, &ops.laplacian(&v)).unwrap();
        prop_assert!((uv - vu).abs() < 1e-9 * (uv.abs() + 1.0));
        prop_assert!(inner(&ops.laplacian(&u), &u).unwrap() <= 1e-9);
        let nn = ops.neg_norm(&u.mean_zero()).unwrap();
        prop_assert!(nn >= 0.0 && nn.is_finite());
    }

    #[test]
    fn preconditioner_is_positive_when_built(
        m in modes(0.6),
        mean in -0.95..-0.3f64,
        r in modes(1.0),
        dt in 1e-4..0.5f64,
        pfc in any::<bool>(),
    ) {
        let grid = Grid2D::anchored(2.0 * PI, 16).unwrap();
        let ops = SpectralOps::new(grid);
        let model = if pfc { Model::pfc(PfcParams::new(0.025, 1.0).unwrap()) } else { fch_model() };
        let u = field(grid, mean, &m);
        let ctx = StepContext::new(&ops, &model, ImplicitScheme::Mp, dt, None, &u, None).unwrap();
        if let Ok(p) = AveragedNewton::build(&ctx, &u) {
            let rhs = field(grid, 0.0, &r).mean_zero();
            let d = p.apply_inverse(&rhs).unwrap();
            prop_assert!(inner(&d, &rhs).unwrap() > 0.0);
            let back = p.apply_forward(&d).unwrap();
            prop_assert!((&back - &rhs).max_abs() < 1e-10 * rhs.max_abs());
        }
    }

    #[test]
    fn solvers_preserve_the_mean(m in modes(0.05), mean in -0.9..-0.5f64, pagd in any::<bool>()) {
        let grid = Grid2D::anchored(2.0 * PI, 16).unwrap();
        let ops = SpectralOps::new(grid);
        let model = fch_model();
        let u = field(grid, mean, &m);
        let ctx = StepContext::new(&ops, &model, ImplicitScheme::BackwardEuler, 1e-3, None, &u, None).unwrap();
        let p = AveragedNewton::build(&ctx, &u).unwrap();
        let cfg = SolverConfig {
            method: if pagd { SolverKind::Pagd } else { SolverKind::Pgd },
            step_size: 0.9,
            max_iter: 50,
            ..SolverConfig::default()
        };
        let out = pfch::solvers::solve(&ctx, &p, &u, &cfg).unwrap();
        prop_assert!((out.solution.mean() - u.mean()).abs() < 1e-13);
    }

    #[test]
    fn proposed_step_stays_in_bounds(
        err in 0.0..1e3f64,
        dt in 1e-6..1.0f64,
        tol in 1e-10..1.0f64,
        dt_min in 1e-6..1e-3f64,
        span in 1.0..1e4f64,
    ) {
        let dt_max = dt_min * span;
        let next = propose_dt(err, dt, tol, dt_min, dt_max);
        prop_assert!(next >= dt_min && next <= dt_max);
    }

    #[test]
    fn predictor_weights_reproduce_constants(rho in 0.0..5.0f64, dt in 1e-3..1.0f64, dt_n in 1e-3..1.0f64, dt_nm1 in 1e-3..1.0f64) {
        let (a, b, c) = am3_weights(rho);
        prop_assert!((a + b + c - 6.0).abs() < 1e-12);
        let (a, b, c) = midab2_coefficients(dt, dt_n, dt_nm1);
        prop_assert!((a + b + c - 1.0).abs() < 1e-9 * (a.abs() + b.abs() + c.abs()));
    }

    #[test]
    fn unit_symbol_is_identity(grid in grid_strategy(), m in modes(1.0)) {
        let ops = SpectralOps::new(grid);
        let p = AveragedNewton::from_coefficients(
            &ops,
            SymbolCoefficients { beta_m2: 0.0, beta_0: 1.0, beta_2: 0.0, beta_4: 0.0 },
        )
        .unwrap();
        let r = field(grid, 0.0, &m).mean_zero();
        prop_assert!((&p.apply_inverse(&r).unwrap() - &r).max_abs() < 1e-13);
    }
}
