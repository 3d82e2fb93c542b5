//! eSSVI slices.
//!
//! A slice is parametrized by the ATM total variance `theta`, the skew
//! correlation `rho` and `psi = theta * phi`. Log-moneyness is always
//! `k = ln(K / F)` with `F` the implied forward.
//!
//! ```text
//! w(k) = theta/2 * (1 + rho*phi*k + sqrt((phi*k + rho)^2 + 1 - rho^2))
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One maturity of an eSSVI surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssviSlice {
    pub theta: f64,
    pub rho: f64,
    pub psi: f64,
    pub maturity: f64,
}

impl EssviSlice {
    pub fn new(theta: f64, rho: f64, psi: f64, maturity: f64) -> Result<Self> {
        let s = EssviSlice {
            theta,
            rho,
            psi,
            maturity,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(Error::InvalidSlice(format!(
                "theta = {} must be > 0",
                self.theta
            )));
        }
        if !(self.psi.is_finite() && self.psi >= 0.0) {
            return Err(Error::InvalidSlice(format!(
                "psi = {} must be >= 0",
                self.psi
            )));
        }
        if !(self.rho.is_finite() && self.rho.abs() < 1.0) {
            return Err(Error::InvalidSlice(format!(
                "|rho| = {} must be < 1",
                self.rho.abs()
            )));
        }
        if !(self.maturity.is_finite() && self.maturity > 0.0) {
            return Err(Error::InvalidSlice(format!(
                "maturity = {} must be > 0",
                self.maturity
            )));
        }
        Ok(())
    }

    /// Curvature `phi = psi / theta`.
    #[inline]
    pub fn phi(&self) -> f64 {
        self.psi / self.theta
    }

    #[inline]
    pub fn is_flat(&self) -> bool {
        self.psi == 0.0
    }

    /// Total implied variance at log-moneyness `k`.
    #[inline]
    pub fn total_variance(&self, k: f64) -> f64 {
        let phi = self.phi();
        let u = phi * k + self.rho;
        0.5 * self.theta * (1.0 + self.rho * phi * k + (u * u + (1.0 - self.rho * self.rho)).sqrt())
    }

    /// Black-Scholes implied volatility at `k`.
    pub fn implied_vol(&self, k: f64) -> f64 {
        (self.total_variance(k) / self.maturity).sqrt()
    }

    /// First and second derivatives of `w` with respect to `k`.
    pub fn variance_derivatives(&self, k: f64) -> (f64, f64) {
        if self.is_flat() {
            return (0.0, 0.0);
        }
        let phi = self.phi();
        let z2 = phi * phi * k * k + 2.0 * phi * self.rho * k + 1.0;
        let z = z2.sqrt();
        let d1 = 0.5 * self.psi * ((k * phi + self.rho) / z + self.rho);
        let d2 = self.theta * (1.0 - self.rho * self.rho) * phi * phi / (2.0 * z2 * z);
        (d1, d2)
    }

    /// Slopes of the asymptotes of `2 w(k)`, as `(left, right)`.
    ///
    /// The left slope is taken in `|k|`, so both values are non-negative.
    pub fn asymptote_slopes(&self) -> (f64, f64) {
        (self.psi * (1.0 - self.rho), self.psi * (1.0 + self.rho))
    }

    /// Location and value of the global minimum of `w`.
    ///
    /// A flat slice attains its minimum everywhere; `None` is returned for the
    /// location in that case.
    pub fn minimum(&self) -> (Option<f64>, f64) {
        if self.is_flat() {
            (None, self.theta)
        } else {
            (
                Some(-2.0 * self.rho / self.phi()),
                self.theta * (1.0 - self.rho * self.rho),
            )
        }
    }
}
