//! Initial conditions: the strained-strip crystal with a chip, seeded
//! crystallites in a liquid, analytic stand-ins for the functionalized
//! morphologies, and spectral resampling helpers.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid2D, PeriodicField, SpectralField};
use crate::snapshot::Snapshot;
use crate::spectral::SpectralOps;

/// Wavenumber of the one-mode triangular lattice.
pub const LATTICE_Q: f64 = 0.866_025_403_784_438_6;

/// One-mode amplitude `4/5 phi + 4/15 sqrt(15 eps - 36 phi^2)`.
pub fn lattice_amplitude(phi: f64, epsilon: f64) -> Result<f64> {
    let disc = 15.0 * epsilon - 36.0 * phi * phi;
    if disc < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "no lattice amplitude: 15 eps - 36 phi^2 = {disc} < 0"
        )));
    }
    Ok(0.8 * phi + 4.0 / 15.0 * disc.sqrt())
}

/// `cos(q x / stretch) cos(q y / sqrt3) - cos(2 q y / sqrt3) / 2`
fn lattice(x: f64, y: f64, stretch: f64) -> f64 {
    let s3 = 3f64.sqrt();
    (LATTICE_Q * x / stretch).cos() * (LATTICE_Q * y / s3).cos()
        - 0.5 * (2.0 * LATTICE_Q * y / s3).cos()
}

/// Strip geometry of the crystal-with-chip state. `None` fields take the
/// defaults `x0 = 0`, `y0 = gamma1`, `gamma1 = L/8`, `gamma2 = L/32`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripGeometry {
    pub x0: Option<f64>,
    pub y0: Option<f64>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
}

impl StripGeometry {
    pub fn resolve(&self, length: f64) -> (f64, f64, f64, f64) {
        let g1 = self.gamma1.unwrap_or(length / 8.0);
        (
            self.x0.unwrap_or(0.0),
            self.y0.unwrap_or(g1),
            g1,
            self.gamma2.unwrap_or(length / 32.0),
        )
    }
}

/// Smoothed indicator: one inside the strip `|y| < gamma1` and outside the
/// disc of radius `gamma2` around `(x0, y0)`.
pub fn strip_indicator(x: f64, y: f64, x0: f64, y0: f64, gamma1: f64, gamma2: f64) -> f64 {
    let strip = 0.5 - 0.5 * ((y.abs() - gamma1) / 4.0).tanh();
    let r = ((x - x0).powi(2) + (y - y0).powi(2)).sqrt();
    let chip = 0.5 + 0.5 * ((r - gamma2) / 4.0).tanh();
    strip * chip
}

/// Crystal strip in a liquid bath with a chip cut into its edge.
pub fn ic_pfc1(
    grid: Grid2D,
    phi_s: f64,
    phi_l: f64,
    epsilon: f64,
    geometry: &StripGeometry,
) -> Result<PeriodicField> {
    let amp = lattice_amplitude(phi_s, epsilon)?;
    let (x0, y0, g1, g2) = geometry.resolve(grid.length());
    Ok(PeriodicField::from_fn(grid, |x, y| {
        let psi = strip_indicator(x, y, x0, y0, g1, g2);
        phi_s * psi + phi_l * (1.0 - psi) + amp * psi * lattice(x, y, 1.2)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seed {
    pub x: f64,
    pub y: f64,
    /// Lattice rotation in radians.
    pub angle: f64,
    pub radius: f64,
}

/// Crystallites in a supercooled liquid, built on a grid `refine` times finer,
/// smoothed and truncated back to `grid`.
pub fn ic_pfc2(
    grid: Grid2D,
    seeds: &[Seed],
    mean: f64,
    amplitude: f64,
    refine: usize,
    sigma: Option<f64>,
) -> Result<PeriodicField> {
    if seeds.is_empty() {
        return Ok(PeriodicField::constant(grid, mean));
    }
    let fine_grid = grid.refined(refine);
    let fine = PeriodicField::from_fn(fine_grid, |x, y| {
        let mut u = mean;
        for s in seeds {
            // nearest periodic image
            let l = fine_grid.length();
            let dx = x - s.x - l * ((x - s.x) / l).round();
            let dy = y - s.y - l * ((y - s.y) / l).round();
            let r = (dx * dx + dy * dy).sqrt();
            let weight = 0.5 - 0.5 * ((r - s.radius) / 2.0).tanh();
            let (c, sn) = (s.angle.cos(), s.angle.sin());
            u += amplitude * weight * lattice(c * dx + sn * dy, -sn * dx + c * dy, 1.0);
        }
        u
    });
    gaussian_filter(&fine, grid.n(), sigma.unwrap_or(2.0 * fine_grid.spacing()))
}

/// Multiplies by `exp(-k^2 sigma^2 / 2)` on the fine grid and keeps the
/// modes the coarse grid resolves (coarse Nyquist modes dropped).
pub fn gaussian_filter(fine: &PeriodicField, coarse_n: usize, sigma: f64) -> Result<PeriodicField> {
    let fg = *fine.grid();
    if coarse_n == 0 || !fg.n().is_multiple_of(coarse_n) {
        return Err(Error::InvalidGrid(format!(
            "fine resolution {} is not a multiple of {coarse_n}",
            fg.n()
        )));
    }
    let cg = Grid2D::new(fg.length(), coarse_n, fg.origin())?;
    let fine_hat = SpectralOps::new(fg).dft(fine)?;
    let mut coarse_hat = SpectralField::zeros(cg);
    let scale = (2.0 * PI / fg.length()).powi(2);
    for j1 in 0..coarse_n {
        if cg.is_nyquist(j1) {
            continue;
        }
        let r1 = cg.wavenumber(j1);
        for j2 in 0..coarse_n {
            if cg.is_nyquist(j2) {
                continue;
            }
            let r2 = cg.wavenumber(j2);
            let k2 = scale * (r1 * r1 + r2 * r2) as f64;
            let value = fine_hat.mode(r1, r2) * (-0.5 * k2 * sigma * sigma).exp();
            coarse_hat.set_mode(r1, r2, value)?;
        }
    }
    SpectralOps::new(cg).idft(&coarse_hat)
}

/// Trigonometric interpolation onto a grid `factor` times finer; the same
/// continuous function, sampled more densely.
pub fn spectral_interpolate(coarse: &PeriodicField, factor: usize) -> Result<PeriodicField> {
    let cg = *coarse.grid();
    if factor == 1 {
        return Ok(coarse.clone());
    }
    let fg = cg.refined(factor);
    let c_hat = SpectralOps::new(cg).dft(coarse)?;
    let mut f_hat = SpectralField::zeros(fg);
    let targets = |j: usize| -> Vec<(i64, f64)> {
        let r = cg.wavenumber(j);
        if cg.is_nyquist(j) {
            vec![(r, 0.5), (-r, 0.5)]
        } else {
            vec![(r, 1.0)]
        }
    };
    for j1 in 0..cg.n() {
        for j2 in 0..cg.n() {
            let v = c_hat.mode(cg.wavenumber(j1), cg.wavenumber(j2));
            for (r1, w1) in targets(j1) {
                for (r2, w2) in targets(j2) {
                    let cur = f_hat.mode(r1, r2);
                    f_hat.set_mode(r1, r2, cur + v * (w1 * w2))?;
                }
            }
        }
    }
    SpectralOps::new(fg).idft(&f_hat)
}

/// Initial data of a benchmark run. The functionalized Cahn-Hilliard
/// variants are analytic stand-ins; `File` loads externally prepared data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    Constant {
        value: f64,
    },
    /// Snapshot file on the run grid.
    File {
        path: PathBuf,
    },
    /// Bilayer along a closed curve `r = R (1 + delta cos(m theta))` on a
    /// background state.
    PerturbedCircle {
        background: f64,
        peak: f64,
        radius: f64,
        delta: f64,
        lobes: u32,
        width: f64,
    },
    /// Ring of bilayer beads.
    PearledRing {
        background: f64,
        peak: f64,
        radius: f64,
        beads: u32,
        bead_radius: f64,
        width: f64,
    },
    /// Uniform noise about a mean on a grid `refine` times finer, smoothed
    /// and truncated back.
    FilteredRandom {
        mean: f64,
        amplitude: f64,
        seed: u64,
        refine: usize,
        sigma: Option<f64>,
    },
    /// Strained crystal strip with a chip.
    Strip {
        phi_s: f64,
        phi_l: f64,
        x0: Option<f64>,
        y0: Option<f64>,
        gamma1: Option<f64>,
        gamma2: Option<f64>,
    },
    /// Seeded crystallites in a liquid.
    Seeds {
        mean: f64,
        amplitude: Option<f64>,
        refine: usize,
        sigma: Option<f64>,
        seeds: Vec<Seed>,
    },
}

impl InitialCondition {
    /// `epsilon` is the lattice model parameter (used by the crystal ICs).
    pub fn build(&self, grid: Grid2D, epsilon: f64, seed_override: Option<u64>) -> Result<PeriodicField> {
        let center = grid.origin() + 0.5 * grid.length();
        match self {
            InitialCondition::Constant { value } => Ok(PeriodicField::constant(grid, *value)),
            InitialCondition::File { path } => {
                let snap = Snapshot::load(path)?;
                if *snap.field.grid() != grid {
                    return Err(Error::GridMismatch);
                }
                Ok(snap.field)
            }
            InitialCondition::PerturbedCircle {
                background,
                peak,
                radius,
                delta,
                lobes,
                width,
            } => Ok(PeriodicField::from_fn(grid, |x, y| {
                let (dx, dy) = (x - center, y - center);
                let theta = dy.atan2(dx);
                let r0 = radius * (1.0 + delta * (*lobes as f64 * theta).cos());
                let d = ((dx * dx + dy * dy).sqrt() - r0) / width;
                background + (peak - background) * sech2(d)
            })),
            InitialCondition::PearledRing {
                background,
                peak,
                radius,
                beads,
                bead_radius,
                width,
            } => Ok(PeriodicField::from_fn(grid, |x, y| {
                let (dx, dy) = (x - center, y - center);
                let ring = sech2(((dx * dx + dy * dy).sqrt() - radius) / width);
                let mut pearls = 0.0f64;
                for b in 0..*beads {
                    let phi = 2.0 * PI * b as f64 / *beads as f64;
                    let (bx, by) = (radius * phi.cos(), radius * phi.sin());
                    let rb = ((dx - bx).powi(2) + (dy - by).powi(2)).sqrt();
                    pearls = pearls.max(sech2((rb - bead_radius) / width));
                }
                background + (peak - background) * ring.max(pearls)
            })),
            InitialCondition::FilteredRandom {
                mean,
                amplitude,
                seed,
                refine,
                sigma,
            } => {
                let fine_grid = grid.refined(*refine);
                let mut rng = ChaCha8Rng::seed_from_u64(seed_override.unwrap_or(*seed));
                let noise: Vec<f64> = (0..fine_grid.len())
                    .map(|_| amplitude * (2.0 * rng.gen::<f64>() - 1.0))
                    .collect();
                let mut fine = PeriodicField::from_values(fine_grid, noise)?;
                // exact mean before filtering
                let shift = mean - fine.mean();
                for v in fine.values_mut() {
                    *v += shift;
                }
                gaussian_filter(&fine, grid.n(), sigma.unwrap_or(2.0 * fine_grid.spacing()))
            }
            InitialCondition::Strip {
                phi_s,
                phi_l,
                x0,
                y0,
                gamma1,
                gamma2,
            } => {
                let geometry = StripGeometry {
                    x0: *x0,
                    y0: *y0,
                    gamma1: *gamma1,
                    gamma2: *gamma2,
                };
                ic_pfc1(grid, *phi_s, *phi_l, epsilon, &geometry)
            }
            InitialCondition::Seeds {
                mean,
                amplitude,
                refine,
                sigma,
                seeds,
            } => {
                let amp = match amplitude {
                    Some(a) => *a,
                    None => lattice_amplitude(*mean, epsilon)?,
                };
                ic_pfc2(grid, seeds, *mean, amp, *refine, *sigma)
            }
        }
    }
}

fn sech2(d: f64) -> f64 {
    let c = d.cosh();
    1.0 / (c * c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_amplitude_at_unit_epsilon() {
        let a = lattice_amplitude(0.49, 1.0).unwrap();
        let expected = 0.392 + 4.0 / 15.0 * 6.3564f64.sqrt();
        assert!((a - expected).abs() < 1e-12);
        assert!(lattice_amplitude(0.49, 0.1).is_err());
    }

    #[test]
    fn strip_indicator_limits() {
        let l = 1.2 * 32.0 * 4.0 * PI / 3f64.sqrt();
        let (x0, y0, g1, g2) = StripGeometry::default().resolve(l);
        // deep inside the strip, far from the chip
        assert!((strip_indicator(l / 2.5, 0.0, x0, y0, g1, g2) - 1.0).abs() < 1e-6);
        // liquid bath
        let far = strip_indicator(0.0, l / 2.0 - 1.0, x0, y0, g1, g2);
        assert!(far.abs() < 1e-6);
        let grid = Grid2D::centered(l, 128).unwrap();
        let u = ic_pfc1(grid, 0.49, 0.79, 1.0, &StripGeometry::default()).unwrap();
        let (m1, _) = grid.nearest_node(0.0);
        let (m2, _) = grid.nearest_node(-l / 2.0 + 0.5);
        assert!((u.get(m1, m2) - 0.79).abs() < 1e-6);
    }

    #[test]
    fn gaussian_filter_properties() {
        let fine_grid = Grid2D::anchored(2.0 * PI, 32).unwrap();
        let c = PeriodicField::constant(fine_grid, 0.7);
        let fc = gaussian_filter(&c, 16, 0.3).unwrap();
        assert!((&fc - &PeriodicField::constant(*fc.grid(), 0.7)).max_abs() < 1e-14);

        // a single retained mode is damped by the Gaussian factor
        let wave = PeriodicField::from_fn(fine_grid, |x, y| (3.0 * x + y).cos());
        let sigma = 0.2;
        let out = gaussian_filter(&wave, 16, sigma).unwrap();
        let damp = (-0.5 * 10.0 * sigma * sigma).exp();
        let expect = PeriodicField::from_fn(*out.grid(), |x, y| damp * (3.0 * x + y).cos());
        assert!((&out - &expect).max_abs() < 1e-13);

        assert!(gaussian_filter(&wave, 12, 0.1).is_err());
        // no filtering: pure truncation
        let trunc = gaussian_filter(&wave, 16, 0.0).unwrap();
        let exact = PeriodicField::from_fn(*trunc.grid(), |x, y| (3.0 * x + y).cos());
        assert!((&trunc - &exact).max_abs() < 1e-13);
    }

    #[test]
    fn interpolation_reproduces_band_limited_data() {
        let g = Grid2D::centered(5.0, 8).unwrap();
        let k = 2.0 * PI / 5.0;
        let f = |x: f64, y: f64| 0.3 + (k * x).sin() * (2.0 * k * y).cos() + (4.0 * k * x).cos();
        let coarse = PeriodicField::from_fn(g, f);
        let fine = spectral_interpolate(&coarse, 2).unwrap();
        let exact = PeriodicField::from_fn(*fine.grid(), f);
        assert!((&fine - &exact).max_abs() < 1e-13);
    }

    #[test]
    fn constructed_ics() {
        let g = Grid2D::anchored(4.0, 16).unwrap();
        let c = InitialCondition::Constant { value: -0.3 }.build(g, 0.1, None).unwrap();
        assert_eq!(c, PeriodicField::constant(g, -0.3));

        let r = InitialCondition::FilteredRandom {
            mean: -0.5,
            amplitude: 0.2,
            seed: 7,
            refine: 2,
            sigma: None,
        };
        let a = r.build(g, 0.1, None).unwrap();
        assert!((a.mean() + 0.5).abs() < 1e-14);
        assert_eq!(a, r.build(g, 0.1, None).unwrap());
        assert_ne!(a, r.build(g, 0.1, Some(8)).unwrap());

        let seeds = InitialCondition::Seeds {
            mean: 0.285,
            amplitude: None,
            refine: 2,
            sigma: None,
            seeds: vec![],
        };
        assert_eq!(seeds.build(g, 0.25, None).unwrap(), PeriodicField::constant(g, 0.285));
    }

    #[test]
    fn file_round_trip() {
        let g = Grid2D::anchored(3.0, 8).unwrap();
        let u = PeriodicField::from_fn(g, |x, y| x - y * y);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u0.bin");
        Snapshot::new(0.0, u.clone()).save(&path).unwrap();
        let ic = InitialCondition::File { path: path.clone() };
        assert_eq!(ic.build(g, 0.0, None).unwrap(), u);
        let other = Grid2D::anchored(3.0, 16).unwrap();
        assert!(matches!(ic.build(other, 0.0, None), Err(Error::GridMismatch)));
    }
}
