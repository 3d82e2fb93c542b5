//! Reproducible synthetic option chains priced from random arbitrage-free surfaces.

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::blackscholes::black_price;
use crate::error::{Error, Result};
use crate::global::{expand_params, GlobalParams};
use crate::pipeline::{OptionChain, OptionQuote, RateCurve};
use crate::surface::EssviSlice;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub quote_date: String,
    pub maturities: Vec<f64>,
    pub spot: f64,
    pub dividend_yield: f64,
    /// `(tenor, rate)` points of the zero curve.
    pub curve: Vec<(f64, f64)>,
    pub strikes_per_slice: usize,
    /// Strike range in ATM standard deviations, `[-lower, upper]`.
    pub lower_width: f64,
    pub upper_width: f64,
    /// Quotes are `mid (1 -/+ half_spread)`.
    pub half_spread: f64,
    /// Lognormal noise applied to mids.
    pub noise: f64,
    /// Add a strike exactly at the forward.
    pub atm_strike: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            quote_date: "2024-01-02".into(),
            maturities: vec![0.1, 0.25, 0.5, 1.0, 2.0],
            spot: 100.0,
            dividend_yield: 0.01,
            curve: vec![(0.25, 0.02), (1.0, 0.025), (5.0, 0.03)],
            strikes_per_slice: 15,
            lower_width: 2.0,
            upper_width: 1.5,
            half_spread: 0.02,
            noise: 0.0,
            atm_strike: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub chain: OptionChain,
    pub surface: Vec<EssviSlice>,
    pub params: GlobalParams,
}

/// Random parameters inside the rectangular box, scaled to equity-like smiles.
pub fn random_params<R: Rng>(rng: &mut R, maturities: &[f64]) -> GlobalParams {
    let n = maturities.len();
    let vol: f64 = rng.random_range(0.15..0.3);
    let rho = (0..n).map(|_| rng.random_range(-0.7..0.2)).collect();
    let a = maturities
        .windows(2)
        .map(|w| rng.random_range(0.5..1.5) * vol * vol * (w[1] - w[0]))
        .collect();
    let c = (0..n).map(|_| rng.random_range(0.3..0.8)).collect();
    GlobalParams {
        rho,
        theta1: vol * vol * maturities[0],
        a,
        c,
    }
}

/// Generates a chain with calls and puts at every strike.
pub fn synth_chain(config: &SynthConfig) -> Result<SynthOutput> {
    let mats = &config.maturities;
    if mats.is_empty() || mats.iter().any(|t| !(*t > 0.0)) || mats.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidInput(
            "maturities must be positive and increasing".into(),
        ));
    }
    if config.strikes_per_slice < 2 {
        return Err(Error::InvalidInput(
            "need at least two strikes per slice".into(),
        ));
    }
    let date = NaiveDate::parse_from_str(&config.quote_date, "%Y-%m-%d")
        .map_err(|e| Error::InvalidInput(format!("quote_date: {e}")))?;
    let curve = RateCurve::new(config.curve.clone())?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = random_params(&mut rng, mats);
    let surface = expand_params(&params, mats)?;

    let mut quotes = Vec::new();
    for slice in &surface {
        let t = slice.maturity;
        let r = curve.rate(t);
        let df = (-r * t).exp();
        let fwd = config.spot * ((r - config.dividend_yield) * t).exp();
        let expiry = date
            .checked_add_days(Days::new((t * 365.0).round() as u64))
            .ok_or_else(|| Error::InvalidInput("expiry out of range".into()))?
            .format("%Y-%m-%d")
            .to_string();

        let sd = slice.theta.sqrt();
        let m = config.strikes_per_slice;
        let (lo, hi) = (-config.lower_width * sd, config.upper_width * sd);
        let mut ks: Vec<f64> = (0..m)
            .map(|j| lo + (hi - lo) * j as f64 / (m - 1) as f64)
            .collect();
        if config.atm_strike && !ks.contains(&0.0) {
            ks.push(0.0);
            ks.sort_by(f64::total_cmp);
        }
        for k in ks {
            let strike = fwd * k.exp();
            let w = slice.total_variance(k);
            for is_call in [true, false] {
                let mut mid = black_price(fwd, strike, df, w, is_call);
                if config.noise > 0.0 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mid *= (config.noise * z).exp();
                }
                quotes.push(OptionQuote {
                    expiry: expiry.clone(),
                    maturity: t,
                    strike,
                    bid: mid * (1.0 - config.half_spread),
                    ask: mid * (1.0 + config.half_spread),
                    is_call,
                });
            }
        }
    }

    Ok(SynthOutput {
        chain: OptionChain {
            quote_date: config.quote_date.clone(),
            underlying: config.spot,
            curve,
            quotes,
        },
        surface,
        params,
    })
}
