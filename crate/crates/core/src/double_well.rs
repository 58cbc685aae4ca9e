use crate::error::{Error, Result};

/// Tilted quartic double well
/// `F(z) = 1/2 (z+1)^2 (1/2 (z-1)^2 + 2/3 tau (z-2))`
/// stored as expanded monomial coefficients for `F` and its first three
/// derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleWell {
    tau: f64,
    // coeffs[d][p] multiplies z^p in the d-th derivative
    coeffs: [[f64; 5]; 4],
}

impl DoubleWell {
    pub fn new(tau: f64) -> Self {
        // (z+1)^2 = 1 + 2z + z^2
        let square = [1.0, 2.0, 1.0];
        // 1/2 (z-1)^2 + 2/3 tau (z-2)
        let quad = [
            0.5 - 4.0 / 3.0 * tau,
            -1.0 + 2.0 / 3.0 * tau,
            0.5,
        ];
        let mut f = [0.0; 5];
        for (i, a) in square.iter().enumerate() {
            for (j, b) in quad.iter().enumerate() {
                f[i + j] += 0.5 * a * b;
            }
        }
        let mut coeffs = [[0.0; 5]; 4];
        coeffs[0] = f;
        for d in 1..4 {
            for p in 1..5 {
                coeffs[d][p - 1] = coeffs[d - 1][p] * p as f64;
            }
        }
        Self { tau, coeffs }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Monomial coefficients of the `order`-th derivative (order <= 3).
    pub fn coefficients(&self, order: usize) -> &[f64; 5] {
        &self.coeffs[order]
    }

    /// `F`, `F'`, `F''` or `F'''` at `z`.
    pub fn eval(&self, z: f64, order: u32) -> Result<f64> {
        match order {
            0..=3 => Ok(Self::horner(&self.coeffs[order as usize], z)),
            _ => Err(Error::DerivativeOrder(order)),
        }
    }

    #[inline]
    fn horner(c: &[f64; 5], z: f64) -> f64 {
        (((c[4] * z + c[3]) * z + c[2]) * z + c[1]) * z + c[0]
    }

    #[inline]
    pub fn f(&self, z: f64) -> f64 {
        Self::horner(&self.coeffs[0], z)
    }

    #[inline]
    pub fn df(&self, z: f64) -> f64 {
        Self::horner(&self.coeffs[1], z)
    }

    #[inline]
    pub fn d2f(&self, z: f64) -> f64 {
        Self::horner(&self.coeffs[2], z)
    }

    #[inline]
    pub fn d3f(&self, z: f64) -> f64 {
        Self::horner(&self.coeffs[3], z)
    }
}
