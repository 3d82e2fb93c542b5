//! Forward-measure Black-Scholes pricing in total-variance form.

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Bracket for the implied volatility search, annualized.
pub const VOL_LOWER: f64 = 1e-6;
pub const VOL_UPPER: f64 = 5.0;
pub const MAX_ITERATIONS: usize = 200;

/// Standard normal cumulative distribution function.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingInput {
    pub forward: f64,
    pub strike: f64,
    pub rate: f64,
    pub maturity: f64,
    pub total_variance: f64,
    pub is_call: bool,
}

impl PricingInput {
    pub fn new(
        forward: f64,
        strike: f64,
        rate: f64,
        maturity: f64,
        total_variance: f64,
        is_call: bool,
    ) -> Result<Self> {
        let input = PricingInput {
            forward,
            strike,
            rate,
            maturity,
            total_variance,
            is_call,
        };
        check_market(forward, strike, rate, maturity)?;
        if !(total_variance.is_finite() && total_variance > 0.0) {
            return Err(Error::InvalidInput(format!(
                "total variance {total_variance} must be > 0"
            )));
        }
        Ok(input)
    }

    #[inline]
    pub fn discount(&self) -> f64 {
        (-self.rate * self.maturity).exp()
    }

    pub fn price(&self) -> f64 {
        black_price(
            self.forward,
            self.strike,
            self.discount(),
            self.total_variance,
            self.is_call,
        )
    }

    /// Sensitivity to the annualized volatility `sqrt(w / t)`.
    pub fn vega(&self) -> f64 {
        black_vega(
            self.forward,
            self.strike,
            self.discount(),
            self.total_variance,
            self.maturity,
        )
    }
}

fn check_market(forward: f64, strike: f64, rate: f64, maturity: f64) -> Result<()> {
    if !(forward.is_finite() && forward > 0.0) {
        return Err(Error::InvalidInput(format!(
            "forward {forward} must be > 0"
        )));
    }
    if !(strike.is_finite() && strike > 0.0) {
        return Err(Error::InvalidInput(format!("strike {strike} must be > 0")));
    }
    if !(maturity.is_finite() && maturity > 0.0) {
        return Err(Error::InvalidInput(format!(
            "maturity {maturity} must be > 0"
        )));
    }
    if !rate.is_finite() {
        return Err(Error::InvalidInput(format!("rate {rate} must be finite")));
    }
    Ok(())
}

/// Discounted Black price for total variance `w`. `w = 0` yields the
/// discounted intrinsic value.
#[inline]
pub fn black_price(forward: f64, strike: f64, discount: f64, w: f64, is_call: bool) -> f64 {
    if w <= 0.0 {
        let intrinsic = if is_call {
            (forward - strike).max(0.0)
        } else {
            (strike - forward).max(0.0)
        };
        return discount * intrinsic;
    }
    let sw = w.sqrt();
    let d1 = (forward / strike).ln() / sw + 0.5 * sw;
    let d2 = d1 - sw;
    if is_call {
        discount * (forward * norm_cdf(d1) - strike * norm_cdf(d2))
    } else {
        discount * (strike * norm_cdf(-d2) - forward * norm_cdf(-d1))
    }
}

#[inline]
pub fn black_vega(forward: f64, strike: f64, discount: f64, w: f64, maturity: f64) -> f64 {
    let sw = w.sqrt();
    let d1 = (forward / strike).ln() / sw + 0.5 * sw;
    discount * forward * norm_pdf(d1) * maturity.sqrt()
}

/// Total implied variance reproducing `market_price`.
///
/// Bisection-safeguarded Newton iteration on the annualized volatility,
/// bracketed by [`VOL_LOWER`, `VOL_UPPER`].
pub fn implied_total_variance(
    market_price: f64,
    forward: f64,
    strike: f64,
    rate: f64,
    maturity: f64,
    is_call: bool,
) -> Result<f64> {
    check_market(forward, strike, rate, maturity)?;
    let df = (-rate * maturity).exp();
    let (lower, upper) = if is_call {
        (df * (forward - strike).max(0.0), df * forward)
    } else {
        (df * (strike - forward).max(0.0), df * strike)
    };
    if !market_price.is_finite() || market_price <= lower || market_price >= upper {
        return Err(Error::PriceOutOfBounds {
            price: market_price,
            lower,
            upper,
        });
    }

    // Work on the out-of-the-money side; in-the-money prices carry the
    // intrinsic value, which only dilutes the relative accuracy.
    let (target, call) = if is_call && strike < forward {
        (market_price - df * (forward - strike), false)
    } else if !is_call && strike > forward {
        (market_price - df * (strike - forward), true)
    } else {
        (market_price, is_call)
    };
    let t = maturity;
    let price_at = |sigma: f64| black_price(forward, strike, df, sigma * sigma * t, call);

    let mut lo = VOL_LOWER;
    let mut hi = VOL_UPPER;
    let p_lo = price_at(lo);
    let p_hi = price_at(hi);
    if target < p_lo || target > p_hi {
        return Err(Error::PriceOutOfBounds {
            price: market_price,
            lower: p_lo,
            upper: p_hi,
        });
    }

    let m = (forward / strike).ln().abs();
    let mut sigma = ((2.0 * m / t).sqrt()).max(0.2).clamp(lo, hi);
    for _ in 0..MAX_ITERATIONS {
        let diff = price_at(sigma) - target;
        if diff == 0.0 {
            return Ok(sigma * sigma * t);
        }
        if diff > 0.0 {
            hi = sigma;
        } else {
            lo = sigma;
        }
        let vega = black_vega(forward, strike, df, sigma * sigma * t, t);
        let newton = sigma - diff / vega;
        let next = if vega > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - sigma).abs() <= 4.0 * f64::EPSILON * sigma || hi - lo <= 4.0 * f64::EPSILON * hi
        {
            return Ok(next * next * t);
        }
        sigma = next;
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
    })
}
