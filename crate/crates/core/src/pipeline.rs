//! Option-chain ingestion, implied forwards, quote filtering and ATM anchors.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blackscholes::{black_price, black_vega, implied_total_variance};
use crate::error::{Error, Result};
use crate::surface::EssviSlice;

/// Quotes with `(ask - bid) / mid` above this are discarded.
pub const MAX_RELATIVE_SPREAD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub expiry: String,
    pub maturity: f64,
    pub strike: f64,
    pub bid: f64,
    pub ask: f64,
    pub is_call: bool,
}

impl OptionQuote {
    #[inline]
    pub fn mid(&self) -> f64 {
        0.5 * (self.bid + self.ask)
    }

    pub fn relative_spread(&self) -> f64 {
        let mid = self.mid();
        if mid > 0.0 {
            (self.ask - self.bid) / mid
        } else {
            f64::INFINITY
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.strike.is_finite()
            && self.strike > 0.0
            && self.maturity.is_finite()
            && self.maturity > 0.0
            && self.bid.is_finite()
            && self.ask.is_finite()
            && self.bid >= 0.0
            && self.bid <= self.ask;
        if ok {
            Ok(())
        } else {
            Err(Error::Malformed(format!(
                "quote K={} t={} bid={} ask={}",
                self.strike, self.maturity, self.bid, self.ask
            )))
        }
    }
}

/// Zero-rate curve, linear between tenors and flat outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    points: Vec<(f64, f64)>,
}

impl RateCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Malformed("rate curve has no points".into()));
        }
        if points
            .iter()
            .any(|(t, r)| !t.is_finite() || !r.is_finite() || *t < 0.0)
        {
            return Err(Error::Malformed("rate curve has invalid entries".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Malformed(
                "rate curve tenors must be strictly increasing".into(),
            ));
        }
        Ok(RateCurve { points })
    }

    pub fn flat(rate: f64) -> Self {
        RateCurve {
            points: vec![(1.0, rate)],
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn rate(&self, t: f64) -> f64 {
        let pts = &self.points;
        let (t0, r0) = pts[0];
        let (tn, rn) = pts[pts.len() - 1];
        if t <= t0 {
            return r0;
        }
        if t >= tn {
            return rn;
        }
        let i = pts.partition_point(|p| p.0 <= t);
        let (ta, ra) = pts[i - 1];
        let (tb, rb) = pts[i];
        ra + (rb - ra) * (t - ta) / (tb - ta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptionChain {
    pub quote_date: String,
    pub underlying: f64,
    pub curve: RateCurve,
    pub quotes: Vec<OptionQuote>,
}

impl OptionChain {
    pub fn validate(&self) -> Result<()> {
        if !(self.underlying.is_finite() && self.underlying > 0.0) {
            return Err(Error::Malformed(format!(
                "underlying {} must be > 0",
                self.underlying
            )));
        }
        self.quotes.iter().try_for_each(OptionQuote::validate)
    }

    /// Distinct maturities in increasing order.
    pub fn maturities(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.quotes.iter().map(|q| q.maturity).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }

    fn quotes_at(&self, maturity: f64) -> impl Iterator<Item = &OptionQuote> {
        self.quotes.iter().filter(move |q| q.maturity == maturity)
    }
}

/// A filtered quote with the quantities the calibrators need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorQuote {
    pub strike: f64,
    /// `ln(K / F)`
    pub k: f64,
    pub bid: f64,
    pub ask: f64,
    pub mid: f64,
    pub is_call: bool,
    /// Market implied total variance of the mid.
    pub total_variance: f64,
    /// Black vega at the market implied volatility.
    pub vega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceAnchor {
    pub maturity: f64,
    pub forward: f64,
    pub rate: f64,
    pub dividend_yield: f64,
    pub k_star: f64,
    pub theta_star: f64,
    pub quotes: Vec<AnchorQuote>,
}

impl SliceAnchor {
    #[inline]
    pub fn discount(&self) -> f64 {
        (-self.rate * self.maturity).exp()
    }

    /// Model prices of the anchor's quotes under `slice`.
    pub fn model_prices(&self, slice: &EssviSlice) -> Vec<f64> {
        let df = self.discount();
        self.quotes
            .iter()
            .map(|q| {
                black_price(
                    self.forward,
                    q.strike,
                    df,
                    slice.total_variance(q.k),
                    q.is_call,
                )
            })
            .collect()
    }

    pub fn summary(&self) -> AnchorSummary {
        AnchorSummary {
            maturity: self.maturity,
            forward: self.forward,
            k_star: self.k_star,
            theta_star: self.theta_star,
            n_quotes: self.quotes.len(),
        }
    }
}

/// Serialized form of an anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorSummary {
    pub maturity: f64,
    pub forward: f64,
    pub k_star: f64,
    pub theta_star: f64,
    pub n_quotes: usize,
}

/// Average implied dividend yield over all put-call pairs at `maturity`.
pub fn implied_dividend_yield(chain: &OptionChain, maturity: f64) -> Result<f64> {
    let r = chain.curve.rate(maturity);
    let df = (-r * maturity).exp();
    let mut calls: BTreeMap<u64, f64> = BTreeMap::new();
    let mut puts: BTreeMap<u64, f64> = BTreeMap::new();
    for q in chain.quotes_at(maturity) {
        let book = if q.is_call { &mut calls } else { &mut puts };
        book.insert(q.strike.to_bits(), q.mid());
    }
    let mut pairs = 0usize;
    let mut sum = 0.0;
    for (bits, c) in &calls {
        let Some(p) = puts.get(bits) else { continue };
        pairs += 1;
        let strike = f64::from_bits(*bits);
        let arg = c - p + strike * df;
        if arg > 0.0 {
            sum += (chain.underlying.ln() - arg.ln()) / maturity;
        } else {
            pairs -= 1;
            log::debug!("skipping pair K={strike} at t={maturity}: non-positive log argument");
        }
    }
    if pairs == 0 {
        return Err(Error::NoPairs { maturity });
    }
    Ok(sum / pairs as f64)
}

/// `F = S exp((r - q) t)`
pub fn forward(chain: &OptionChain, maturity: f64, q: f64) -> f64 {
    chain.underlying * ((chain.curve.rate(maturity) - q) * maturity).exp()
}

fn forward_otm(q: &OptionQuote, forward: f64) -> bool {
    if q.is_call {
        q.strike >= forward
    } else {
        q.strike <= forward
    }
}

/// Drops forward-ITM and wide quotes.
pub fn filter_quotes<'a, I>(quotes: I, forward: f64) -> Vec<OptionQuote>
where
    I: IntoIterator<Item = &'a OptionQuote>,
{
    quotes
        .into_iter()
        .filter(|q| forward_otm(q, forward) && q.relative_spread() <= MAX_RELATIVE_SPREAD)
        .cloned()
        .collect()
}

/// Builds the anchor of one maturity, or `None` if the survivors do not
/// straddle the forward.
fn build_anchor(chain: &OptionChain, maturity: f64) -> Result<Option<SliceAnchor>> {
    let q = implied_dividend_yield(chain, maturity)?;
    let fwd = forward(chain, maturity, q);
    let rate = chain.curve.rate(maturity);
    let df = (-rate * maturity).exp();

    let mut quotes = Vec::new();
    for quote in filter_quotes(chain.quotes_at(maturity), fwd) {
        let mid = quote.mid();
        let w = match implied_total_variance(mid, fwd, quote.strike, rate, maturity, quote.is_call)
        {
            Ok(w) => w,
            Err(e) => {
                log::debug!("dropping K={} t={maturity}: {e}", quote.strike);
                continue;
            }
        };
        quotes.push(AnchorQuote {
            strike: quote.strike,
            k: (quote.strike / fwd).ln(),
            bid: quote.bid,
            ask: quote.ask,
            mid,
            is_call: quote.is_call,
            total_variance: w,
            vega: black_vega(fwd, quote.strike, df, w, maturity),
        });
    }
    quotes.sort_by(|a, b| {
        a.strike
            .total_cmp(&b.strike)
            .then(b.is_call.cmp(&a.is_call))
    });

    let below = quotes.iter().any(|q| fwd / q.strike > 1.0);
    let above = quotes.iter().any(|q| fwd / q.strike < 1.0);
    if !(below && above) {
        return Ok(None);
    }
    // Sorted by strike with calls first, so the first minimum wins both ties.
    let anchor = quotes
        .iter()
        .min_by(|a, b| {
            (fwd / a.strike - 1.0)
                .abs()
                .total_cmp(&(fwd / b.strike - 1.0).abs())
        })
        .expect("non-empty");
    Ok(Some(SliceAnchor {
        maturity,
        forward: fwd,
        rate,
        dividend_yield: q,
        k_star: anchor.k,
        theta_star: anchor.total_variance,
        quotes,
    }))
}

/// Per-maturity anchors of the quotes surviving the filters.
pub fn filter_chain(chain: &OptionChain) -> Result<Vec<SliceAnchor>> {
    chain.validate()?;
    let mut anchors = Vec::new();
    for t in chain.maturities() {
        match build_anchor(chain, t) {
            Ok(Some(a)) => anchors.push(a),
            Ok(None) => log::info!("maturity {t}: survivors do not straddle the forward"),
            Err(e) => log::info!("maturity {t}: {e}"),
        }
    }
    if anchors.is_empty() {
        return Err(Error::EmptyChain);
    }
    Ok(anchors)
}

#[derive(Debug, Serialize, Deserialize)]
struct ChainRow {
    quote_date: String,
    expiry: String,
    maturity_years: f64,
    #[serde(rename = "type")]
    kind: String,
    strike: f64,
    bid: f64,
    ask: f64,
    underlying: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveRow {
    tenor_years: f64,
    rate: f64,
}

pub fn read_curve<R: Read>(reader: R) -> Result<RateCurve> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut points = Vec::new();
    for row in rdr.deserialize() {
        let row: CurveRow = row?;
        points.push((row.tenor_years, row.rate));
    }
    RateCurve::new(points)
}

pub fn read_chain<R: Read>(reader: R, curve: RateCurve) -> Result<OptionChain> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut quotes = Vec::new();
    let mut meta: Option<(String, f64)> = None;
    for row in rdr.deserialize() {
        let row: ChainRow = row?;
        let is_call = match row.kind.trim() {
            "C" | "c" => true,
            "P" | "p" => false,
            other => return Err(Error::Malformed(format!("option type {other:?}"))),
        };
        match &meta {
            None => meta = Some((row.quote_date.clone(), row.underlying)),
            Some((_, s)) if *s != row.underlying => {
                return Err(Error::Malformed("underlying differs between rows".into()));
            }
            _ => {}
        }
        quotes.push(OptionQuote {
            expiry: row.expiry,
            maturity: row.maturity_years,
            strike: row.strike,
            bid: row.bid,
            ask: row.ask,
            is_call,
        });
    }
    let (quote_date, underlying) =
        meta.ok_or_else(|| Error::Malformed("chain has no quotes".into()))?;
    let chain = OptionChain {
        quote_date,
        underlying,
        curve,
        quotes,
    };
    chain.validate()?;
    Ok(chain)
}

/// Reads a chain and its rate curve from CSV files.
pub fn load_chain(chain_path: &Path, curve_path: &Path) -> Result<OptionChain> {
    let curve = read_curve(std::fs::File::open(curve_path)?)?;
    read_chain(std::fs::File::open(chain_path)?, curve)
}

pub fn write_chain<W: Write>(chain: &OptionChain, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for q in &chain.quotes {
        wtr.serialize(ChainRow {
            quote_date: chain.quote_date.clone(),
            expiry: q.expiry.clone(),
            maturity_years: q.maturity,
            kind: if q.is_call { "C" } else { "P" }.to_string(),
            strike: q.strike,
            bid: q.bid,
            ask: q.ask,
            underlying: chain.underlying,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_curve<W: Write>(curve: &RateCurve, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for &(tenor_years, rate) in curve.points() {
        wtr.serialize(CurveRow { tenor_years, rate })?;
    }
    wtr.flush()?;
    Ok(())
}
