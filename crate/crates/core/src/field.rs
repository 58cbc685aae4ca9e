//! Grid functions on the doubly periodic square.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid on a square of edge `length` with `n` points per edge.
///
/// Node coordinates are `origin + h * m` for `0 <= m < n`; the spacing `h` is
/// always derived from `length / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    length: f64,
    n: usize,
    origin: f64,
}

impl Grid2D {
    pub fn new(length: f64, n: usize, origin: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("edge length must be positive, got {length}")));
        }
        if n == 0 {
            return Err(Error::InvalidGrid("need at least one point per edge".into()));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self { length, n, origin })
    }

    /// Domain `[0, L]^2`.
    pub fn anchored(length: f64, n: usize) -> Result<Self> {
        Self::new(length, n, 0.0)
    }

    /// Domain `[-L/2, L/2]^2`.
    pub fn centered(length: f64, n: usize) -> Result<Self> {
        Self::new(length, n, -0.5 * length)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn area(&self) -> f64 {
        self.length * self.length
    }

    /// Number of stored values (`n * n`).
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn coord(&self, m: usize) -> f64 {
        self.origin + self.spacing() * m as f64
    }

    /// Signed integer wavenumber of transform index `j`.
    ///
    /// Odd `n = 2K+1` gives `-K..=K`; even `n` gives `-n/2..n/2-1`.
    pub fn wavenumber(&self, j: usize) -> i64 {
        if j <= (self.n - 1) / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// Transform index holding integer wavenumber `r`, if it is resolved.
    pub fn index_of_wavenumber(&self, r: i64) -> Option<usize> {
        let n = self.n as i64;
        let j = r.rem_euclid(n) as usize;
        (self.wavenumber(j) == r).then_some(j)
    }

    /// True when `j` is the unpaired Nyquist index of an even grid.
    pub fn is_nyquist(&self, j: usize) -> bool {
        self.n.is_multiple_of(2) && j == self.n / 2
    }

    /// Index of the node nearest to coordinate `x` (with periodic wrap) and
    /// the distance to that node.
    pub fn nearest_node(&self, x: f64) -> (usize, f64) {
        let h = self.spacing();
        let s = (x - self.origin) / h;
        let m = s.round();
        let offset = (s - m).abs() * h;
        let idx = (m as i64).rem_euclid(self.n as i64) as usize;
        (idx, offset)
    }

    /// Same square with `factor` times as many points per edge.
    pub fn refined(&self, factor: usize) -> Grid2D {
        Grid2D {
            length: self.length,
            n: self.n * factor,
            origin: self.origin,
        }
    }
}

/// Real grid function, one value per periodic equivalence class, stored
/// row-major as `values[m1 * n + m2] = v(x_{m1}, y_{m2})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl PeriodicField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid2D, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for m1 in 0..n {
            let x = grid.coord(m1);
            for m2 in 0..n {
                values.push(f(x, grid.coord(m2)));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, m1: usize, m2: usize) -> f64 {
        self.values[m1 * self.grid.n() + m2]
    }

    /// Value at the node nearest to `(x, y)`.
    pub fn value_near(&self, x: f64, y: f64) -> f64 {
        let (m1, _) = self.grid.nearest_node(x);
        let (m2, _) = self.grid.nearest_node(y);
        self.get(m1, m2)
    }

    /// Domain average, `(v, 1)_N / L^2`.
    pub fn mean(&self) -> f64 {
        compensated_sum(&self.values) / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Discrete L2 norm `sqrt((v, v)_N)`.
    pub fn l2_norm(&self) -> f64 {
        let h = self.grid.spacing();
        (h * h * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PeriodicField {
        PeriodicField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &PeriodicField, f: impl Fn(f64, f64) -> f64) -> PeriodicField {
        self.assert_same_grid(other);
        PeriodicField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &PeriodicField) {
        self.assert_same_grid(x);
        for (s, v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }

    /// `a * x + b * y`
    pub fn lincomb(a: f64, x: &PeriodicField, b: f64, y: &PeriodicField) -> PeriodicField {
        x.zip_map(y, |u, v| a * u + b * v)
    }

    /// Mean-zero projection `v - (v,1)_N / L^2`.
    pub fn mean_zero(&self) -> PeriodicField {
        let m = self.mean();
        self.map(|v| v - m)
    }

    pub(crate) fn assert_same_grid(&self, other: &PeriodicField) {
        assert!(
            self.grid == other.grid,
            "fields on different grids cannot be combined"
        );
    }
}

/// Neumaier summation; the mean feeds every mean-zero projection.
fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for &v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + carry
}

impl Add for &PeriodicField {
    type Output = PeriodicField;
    fn add(self, rhs: &PeriodicField) -> PeriodicField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &PeriodicField {
    type Output = PeriodicField;
    fn sub(self, rhs: &PeriodicField) -> PeriodicField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &PeriodicField {
    type Output = PeriodicField;
    fn mul(self, rhs: f64) -> PeriodicField {
        self.map(|a| a * rhs)
    }
}

impl Neg for &PeriodicField {
    type Output = PeriodicField;
    fn neg(self) -> PeriodicField {
        self.map(|a| -a)
    }
}

impl AddAssign<&PeriodicField> for PeriodicField {
    fn add_assign(&mut self, rhs: &PeriodicField) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&PeriodicField> for PeriodicField {
    fn sub_assign(&mut self, rhs: &PeriodicField) {
        self.axpy(-1.0, rhs);
    }
}

/// Discrete Fourier coefficients, stored in transform order:
/// `coeffs[j1 * n + j2]` belongs to wavenumber `(wavenumber(j1), wavenumber(j2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid2D,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_coeffs(grid: Grid2D, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient of integer wavenumber `(r1, r2)`; zero if not resolved.
    pub fn mode(&self, r1: i64, r2: i64) -> Complex64 {
        match (
            self.grid.index_of_wavenumber(r1),
            self.grid.index_of_wavenumber(r2),
        ) {
            (Some(j1), Some(j2)) => self.coeffs[j1 * self.grid.n() + j2],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn set_mode(&mut self, r1: i64, r2: i64, value: Complex64) -> Result<()> {
        let n = self.grid.n();
        match (
            self.grid.index_of_wavenumber(r1),
            self.grid.index_of_wavenumber(r2),
        ) {
            (Some(j1), Some(j2)) => {
                self.coeffs[j1 * n + j2] = value;
                Ok(())
            }
            _ => Err(Error::InvalidParameter(format!(
                "wavenumber ({r1}, {r2}) is not resolved on an N = {n} grid"
            ))),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.norm()))
    }
}
