//! Fourier collocation toolbox: transforms, fractional Laplacians, norms and
//! quadrature on a periodic square grid.
//!
//! Transform convention: `w(r) = h^2 sum_s v(x_s) exp(-2 pi i r . x_s / L)`
//! with `x_s = h s` (the grid origin is irrelevant for every operator here,
//! all symbols being functions of `|r|^2` or pure derivatives). The inverse is
//! `v(x_m) = L^-2 sum_r w(r) exp(2 pi i r . x_m / L)`.
//!
//! Every single 2-D forward or inverse transform increments the FFT tally by
//! one.

use std::f64::consts::PI;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{Grid2D, PeriodicField, SpectralField};

/// Relative tolerance on the mean of inputs to `(-Delta_N)^-1`.
const MEAN_ZERO_TOL: f64 = 1e-12;
/// Relative bound on the imaginary residue accepted by [`SpectralOps::idft`].
const SYMMETRY_TOL: f64 = 1e-10;

/// Cached transform plans and wavenumber tables for one grid.
pub struct SpectralOps {
    grid: Grid2D,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `4 pi^2 |r|^2 / L^2` per mode, transform order.
    k2: Vec<f64>,
    /// `2 pi r / L` per 1-D index, Nyquist zeroed (first derivatives only).
    kd: Vec<f64>,
    ffts: AtomicU64,
}

impl fmt::Debug for SpectralOps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralOps")
            .field("grid", &self.grid)
            .field("ffts", &self.fft_count())
            .finish()
    }
}

impl SpectralOps {
    pub fn new(grid: Grid2D) -> Self {
        let n = grid.n();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let base = 2.0 * PI / grid.length();
        let k1: Vec<f64> = (0..n).map(|j| base * grid.wavenumber(j) as f64).collect();
        let mut k2 = Vec::with_capacity(grid.len());
        for a in &k1 {
            for b in &k1 {
                k2.push(a * a + b * b);
            }
        }
        let kd = (0..n)
            .map(|j| if grid.is_nyquist(j) { 0.0 } else { k1[j] })
            .collect();
        Self {
            grid,
            forward,
            inverse,
            k2,
            kd,
            ffts: AtomicU64::new(0),
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Squared physical wavenumbers in transform order; `k2()[0] == 0`.
    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    /// Number of single 2-D transforms performed so far.
    pub fn fft_count(&self) -> u64 {
        self.ffts.load(Ordering::Relaxed)
    }

    /// Tabulates `symbol(k^2)` over every mode.
    pub fn symbol_table(&self, symbol: impl Fn(f64) -> f64) -> Vec<f64> {
        self.k2.iter().map(|&k2| symbol(k2)).collect()
    }

    fn check_grid(&self, grid: &Grid2D) -> Result<()> {
        if *grid == self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.grid.n();
        let plan = if inverse { &self.inverse } else { &self.forward };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        transpose(data, n);
        plan.process_with_scratch(data, &mut scratch);
        transpose(data, n);
        self.ffts.fetch_add(1, Ordering::Relaxed);
    }

    /// Unscaled forward transform of a real field.
    pub(crate) fn forward_raw(&self, v: &PeriodicField) -> Vec<Complex64> {
        assert!(*v.grid() == self.grid, "field grid does not match transform grid");
        let mut data: Vec<Complex64> = v.values().iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut data, false);
        data
    }

    /// Inverse of [`forward_raw`](Self::forward_raw), keeping the real part.
    pub(crate) fn inverse_raw(&self, mut data: Vec<Complex64>) -> PeriodicField {
        self.transform(&mut data, true);
        let scale = 1.0 / self.grid.len() as f64;
        let values = data.iter().map(|c| c.re * scale).collect();
        PeriodicField::from_values(self.grid, values).expect("length preserved")
    }

    /// Multiplies every mode of `v` by `table[mode]` (one forward, one inverse).
    pub fn apply_multiplier(&self, v: &PeriodicField, table: &[f64]) -> PeriodicField {
        debug_assert_eq!(table.len(), self.grid.len());
        let mut data = self.forward_raw(v);
        for (c, &s) in data.iter_mut().zip(table) {
            *c *= s;
        }
        self.inverse_raw(data)
    }

    /// Multiplies every mode of `v` by `symbol(k^2)`.
    pub fn apply_symbol(&self, v: &PeriodicField, symbol: impl Fn(f64) -> f64) -> PeriodicField {
        let mut data = self.forward_raw(v);
        for (c, &k2) in data.iter_mut().zip(&self.k2) {
            *c *= symbol(k2);
        }
        self.inverse_raw(data)
    }

    pub fn dft(&self, v: &PeriodicField) -> Result<SpectralField> {
        self.check_grid(v.grid())?;
        let h = self.grid.spacing();
        let mut data = self.forward_raw(v);
        for c in &mut data {
            *c *= h * h;
        }
        SpectralField::from_coeffs(self.grid, data)
    }

    /// Inverse transform; rejects spectra whose synthesis has a non-negligible
    /// imaginary part.
    pub fn idft(&self, w: &SpectralField) -> Result<PeriodicField> {
        self.check_grid(w.grid())?;
        let mut data = w.coeffs().to_vec();
        self.transform(&mut data, true);
        let scale = 1.0 / self.grid.area();
        let bound = SYMMETRY_TOL * w.coeffs().iter().map(|c| c.norm()).sum::<f64>() * scale;
        let residue = data.iter().fold(0.0_f64, |m, c| m.max(c.im.abs())) * scale;
        if residue > bound {
            return Err(Error::SymmetryViolation { residue, bound });
        }
        let values = data.iter().map(|c| c.re * scale).collect();
        PeriodicField::from_values(self.grid, values)
    }

    /// `(-Delta_N)^alpha v` for `alpha` in {-1, 1, 2}. The zero mode is dropped
    /// for `alpha = -1`, which requires a mean-zero input.
    pub fn frac_laplacian(&self, v: &PeriodicField, alpha: i32) -> Result<PeriodicField> {
        self.check_grid(v.grid())?;
        match alpha {
            1 => Ok(self.apply_symbol(v, |k2| k2)),
            2 => Ok(self.apply_symbol(v, |k2| k2 * k2)),
            -1 => {
                check_mean_zero(v)?;
                Ok(self.apply_symbol(v, |k2| if k2 > 0.0 { 1.0 / k2 } else { 0.0 }))
            }
            other => Err(Error::UnsupportedExponent(other)),
        }
    }

    /// Discrete Laplacian `Delta_N v`.
    pub fn laplacian(&self, v: &PeriodicField) -> PeriodicField {
        self.apply_symbol(v, |k2| -k2)
    }

    /// `Delta_N^2 v`.
    pub fn bilaplacian(&self, v: &PeriodicField) -> PeriodicField {
        self.apply_symbol(v, |k2| k2 * k2)
    }

    /// `(-Delta_N)^-1 v` on mean-zero input.
    pub fn inverse_neg_laplacian(&self, v: &PeriodicField) -> Result<PeriodicField> {
        self.frac_laplacian(v, -1)
    }

    /// Pointwise `|grad_N v|^2` from spectral first derivatives.
    pub fn gradient_sq(&self, v: &PeriodicField) -> PeriodicField {
        let n = self.grid.n();
        let spec = self.forward_raw(v);
        let mut dx = spec.clone();
        let mut dy = spec;
        let i = Complex64::new(0.0, 1.0);
        for j1 in 0..n {
            for j2 in 0..n {
                let idx = j1 * n + j2;
                dx[idx] *= i * self.kd[j1];
                dy[idx] *= i * self.kd[j2];
            }
        }
        let gx = self.inverse_raw(dx);
        let gy = self.inverse_raw(dy);
        gx.zip_map(&gy, |a, b| a * a + b * b)
    }

    /// Mesh-dependent negative norm `sqrt(((-Delta_N)^-1 v, v)_N)`.
    pub fn neg_norm(&self, v: &PeriodicField) -> Result<f64> {
        let w = self.frac_laplacian(v, -1)?;
        Ok(inner(&w, v)?.max(0.0).sqrt())
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

fn check_mean_zero(v: &PeriodicField) -> Result<()> {
    let m = v.mean();
    if m.abs() > MEAN_ZERO_TOL * v.max_abs() {
        return Err(Error::Precondition(format!(
            "inverse Laplacian needs a mean-zero field (mean = {m:.3e})"
        )));
    }
    Ok(())
}

/// Discrete L2 inner product `h^2 sum_s u(x_s) v(x_s)` (composite trapezoidal rule).
pub fn inner(u: &PeriodicField, v: &PeriodicField) -> Result<f64> {
    if u.grid() != v.grid() {
        return Err(Error::GridMismatch);
    }
    let h = u.grid().spacing();
    Ok(h * h * u.values().iter().zip(v.values()).map(|(a, b)| a * b).sum::<f64>())
}

/// Mean-zero projection.
pub fn mean_zero(v: &PeriodicField) -> PeriodicField {
    v.mean_zero()
}
