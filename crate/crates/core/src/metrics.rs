//! Fit measures of a calibrated surface against its filtered quotes.
//!
//! - `F1`: fraction of model prices inside `[bid, ask]` (inclusive).
//! - `F2`: mean absolute pricing error.
//! - `F3`: mean squared pricing error.
//! - `F4`: inverse-vega-squared weighted mean squared pricing error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::global::{QuoteWeights, WeightScheme};
use crate::pipeline::SliceAnchor;
use crate::surface::EssviSlice;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaturityFit {
    pub maturity: f64,
    pub n: usize,
    pub n_within: usize,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
    pub n_total: usize,
    pub per_maturity: Vec<MaturityFit>,
}

/// Fit measures with the market inverse-vega-squared weights in `F4`.
pub fn fit_report(slices: &[EssviSlice], anchors: &[SliceAnchor]) -> Result<FitReport> {
    let weights = QuoteWeights::new(anchors, WeightScheme::InverseVegaSquared);
    fit_report_with_weights(slices, anchors, &weights)
}

pub fn fit_report_with_weights(
    slices: &[EssviSlice],
    anchors: &[SliceAnchor],
    weights: &QuoteWeights,
) -> Result<FitReport> {
    if anchors.is_empty() {
        return Err(Error::EmptySurface);
    }
    if slices.len() != anchors.len() || weights.values.len() != anchors.len() {
        return Err(Error::InvalidInput(
            "one slice and weight row per anchor required".into(),
        ));
    }

    let mut per_maturity = Vec::with_capacity(anchors.len());
    let (mut n_total, mut n_within) = (0usize, 0usize);
    let (mut abs_sum, mut sq_sum, mut wsq_sum, mut w_sum) = (0.0, 0.0, 0.0, 0.0);
    for ((slice, anchor), w) in slices.iter().zip(anchors).zip(&weights.values) {
        let model = anchor.model_prices(slice);
        let mut row = MaturityFit {
            maturity: anchor.maturity,
            n: anchor.quotes.len(),
            n_within: 0,
            f2: 0.0,
            f3: 0.0,
            f4: 0.0,
        };
        let mut row_w = 0.0;
        for ((q, c_hat), wq) in anchor.quotes.iter().zip(&model).zip(w) {
            if q.bid <= *c_hat && *c_hat <= q.ask {
                row.n_within += 1;
            }
            let e = q.mid - c_hat;
            row.f2 += e.abs();
            row.f3 += e * e;
            row.f4 += wq * e * e;
            row_w += wq;
        }
        n_total += row.n;
        n_within += row.n_within;
        abs_sum += row.f2;
        sq_sum += row.f3;
        wsq_sum += row.f4;
        w_sum += row_w;
        if row.n > 0 {
            row.f2 /= row.n as f64;
            row.f3 /= row.n as f64;
            row.f4 /= row_w;
        }
        per_maturity.push(row);
    }
    if n_total == 0 {
        return Err(Error::EmptySurface);
    }
    let nt = n_total as f64;
    Ok(FitReport {
        f1: n_within as f64 / nt,
        f2: abs_sum / nt,
        f3: sq_sum / nt,
        f4: wsq_sum / w_sum,
        n_total,
        per_maturity,
    })
}

/// Pearson correlations of the absolute bid-ask spread with vega and with
/// days to expiry, across all filtered quotes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadCorrelations {
    pub vega_spread: Option<f64>,
    pub dte_spread: Option<f64>,
}

pub fn spread_correlations(anchors: &[SliceAnchor]) -> SpreadCorrelations {
    let mut spread = Vec::new();
    let mut vega = Vec::new();
    let mut dte = Vec::new();
    for a in anchors {
        for q in &a.quotes {
            spread.push(q.ask - q.bid);
            vega.push(q.vega);
            dte.push(a.maturity * 365.0);
        }
    }
    SpreadCorrelations {
        vega_spread: pearson(&vega, &spread),
        dte_spread: pearson(&dte, &spread),
    }
}

/// Sample correlation, `None` when either series is constant or too short.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}
