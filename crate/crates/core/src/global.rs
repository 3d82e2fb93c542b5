//! Joint calibration over a rectangular parameter box.
//!
//! The slices `(theta_i, rho_i, psi_i)` are rewritten in terms of
//! `(rho, theta_1, a, c)` with
//!
//! ```text
//! p_i  = max{(1 + rho_{i-1}) / (1 + rho_i), (1 - rho_{i-1}) / (1 - rho_i)}
//! f_i  = min{4 / (1 + |rho_i|), sqrt(4 theta_i / (1 + |rho_i|))}
//! A_i  = psi_{i-1} p_i                    (A_1 = 0)
//! C_i  = min{psi_{i-1} theta_i / theta_{i-1}, f_i, f_j / (p_{i+1} ... p_j) for j > i}
//! theta_i = theta_{i-1} p_i + a_i
//! psi_i   = A_i + c_i (C_i - A_i)
//! ```
//!
//! Every point of `(-1, 1)^n x (0, inf)^n x (0, 1)^n` maps to slices that
//! satisfy the butterfly and calendar conditions strictly, so a plain
//! bound-constrained least-squares solver suffices.

use serde::{Deserialize, Serialize};

use crate::blackscholes::black_price;
use crate::error::{Error, Result};
use crate::lsq::{least_squares, LsqConfig, Termination};
use crate::pipeline::SliceAnchor;
use crate::surface::EssviSlice;

/// Multiple of the median weight above which inverse-vega weights are capped.
pub const WEIGHT_CAP: f64 = 1e8;

/// Floor for `a_i`, relative to the first ATM variance.
pub const A_FLOOR: f64 = 1e-8;

/// Range `c_i` is clipped to when projecting an external surface.
pub const C_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalParams {
    pub rho: Vec<f64>,
    pub theta1: f64,
    /// `a_2, ..., a_n`
    pub a: Vec<f64>,
    pub c: Vec<f64>,
}

impl GlobalParams {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.rho.len();
        if n == 0 || self.c.len() != n || self.a.len() + 1 != n {
            return Err(Error::InvalidInput(
                "inconsistent parameter dimensions".into(),
            ));
        }
        let inside = self.rho.iter().all(|r| r.abs() < 1.0)
            && self.theta1 > 0.0
            && self.theta1.is_finite()
            && self.a.iter().all(|a| *a > 0.0 && a.is_finite())
            && self.c.iter().all(|c| *c > 0.0 && *c < 1.0);
        if inside {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "parameters outside the open box".into(),
            ))
        }
    }

    /// Flat layout `[rho.., theta1, a.., c..]`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = self.rho.clone();
        v.push(self.theta1);
        v.extend_from_slice(&self.a);
        v.extend_from_slice(&self.c);
        v
    }

    pub fn from_vector(n: usize, v: &[f64]) -> Self {
        assert_eq!(v.len(), 3 * n, "parameter vector length");
        GlobalParams {
            rho: v[..n].to_vec(),
            theta1: v[n],
            a: v[n + 1..2 * n].to_vec(),
            c: v[2 * n..].to_vec(),
        }
    }

    /// Box bounds matching [`GlobalParams::to_vector`].
    pub fn bounds(n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![-1.0; n];
        let mut hi = vec![1.0; n];
        lo.push(0.0);
        hi.push(f64::INFINITY);
        lo.extend(std::iter::repeat_n(0.0, n - 1));
        hi.extend(std::iter::repeat_n(f64::INFINITY, n - 1));
        lo.extend(std::iter::repeat_n(0.0, n));
        hi.extend(std::iter::repeat_n(1.0, n));
        (lo, hi)
    }
}

#[inline]
fn p_factor(rho_prev: f64, rho: f64) -> f64 {
    ((1.0 + rho_prev) / (1.0 + rho)).max((1.0 - rho_prev) / (1.0 - rho))
}

#[inline]
fn f_cap(theta: f64, rho: f64) -> f64 {
    let a = 1.0 + rho.abs();
    (4.0 / a).min((4.0 * theta / a).sqrt())
}

/// `p_i` for `i = 1..n`, with `p_1 = 1` as a placeholder.
fn p_factors(rho: &[f64]) -> Vec<f64> {
    let mut p = vec![1.0; rho.len()];
    for i in 1..rho.len() {
        p[i] = p_factor(rho[i - 1], rho[i]);
    }
    p
}

/// `min_{j > i} f_j / (p_{i+1} ... p_j)`, `+inf` for the last index.
fn tail_caps(f: &[f64], p: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut tail = vec![f64::INFINITY; n];
    for i in (0..n.saturating_sub(1)).rev() {
        tail[i] = f[i + 1].min(tail[i + 1]) / p[i + 1];
    }
    tail
}

/// The interval `(A_i, C_i)` for `psi_i`.
fn psi_range(
    i: usize,
    thetas: &[f64],
    psis: &[f64],
    f: &[f64],
    p: &[f64],
    tail: &[f64],
) -> (f64, f64) {
    let mut c = f[i].min(tail[i]);
    let a = if i == 0 {
        0.0
    } else {
        c = c.min(psis[i - 1] * thetas[i] / thetas[i - 1]);
        psis[i - 1] * p[i]
    };
    (a, c)
}

/// Slices encoded by `params`, one per maturity.
pub fn expand_params(params: &GlobalParams, maturities: &[f64]) -> Result<Vec<EssviSlice>> {
    params.validate()?;
    let n = params.len();
    if maturities.len() != n {
        return Err(Error::InvalidInput(
            "one maturity per slice required".into(),
        ));
    }
    let p = p_factors(&params.rho);
    let mut thetas = vec![params.theta1; n];
    for i in 1..n {
        thetas[i] = thetas[i - 1] * p[i] + params.a[i - 1];
    }
    let f: Vec<f64> = thetas
        .iter()
        .zip(&params.rho)
        .map(|(&t, &r)| f_cap(t, r))
        .collect();
    let tail = tail_caps(&f, &p);
    let mut psis = vec![0.0; n];
    for i in 0..n {
        let (a, c) = psi_range(i, &thetas, &psis, &f, &p, &tail);
        if !(c > a) {
            return Err(Error::EmptyBox(i));
        }
        psis[i] = a + params.c[i] * (c - a);
    }
    (0..n)
        .map(|i| EssviSlice::new(thetas[i], params.rho[i], psis[i], maturities[i]))
        .collect()
}

/// Exact inverse of [`expand_params`].
pub fn compress_params(slices: &[EssviSlice]) -> Result<GlobalParams> {
    compress(slices, None)
}

/// Inverse of [`expand_params`] that pushes boundary values back into the box:
/// `a_i` is floored at `a_floor` and `c_i` clipped to `[C_MARGIN, 1 - C_MARGIN]`.
/// The result re-expands to slices close to, but not exactly, the input.
pub fn compress_params_projected(slices: &[EssviSlice], a_floor: f64) -> Result<GlobalParams> {
    compress(slices, Some(a_floor))
}

fn compress(slices: &[EssviSlice], project: Option<f64>) -> Result<GlobalParams> {
    let n = slices.len();
    if n == 0 {
        return Err(Error::EmptySurface);
    }
    let rho: Vec<f64> = slices.iter().map(|s| s.rho).collect();
    let p = p_factors(&rho);
    let theta1 = slices[0].theta;

    // Rebuild thetas and psis from the (possibly projected) parameters so
    // that each step sees the same predecessors expand_params will.
    let mut thetas = vec![theta1; n];
    let mut a = Vec::with_capacity(n.saturating_sub(1));
    for i in 1..n {
        let mut ai = slices[i].theta - thetas[i - 1] * p[i];
        if let Some(floor) = project {
            ai = ai.max(floor);
        } else if !(ai > 0.0) {
            return Err(Error::NotInBox(format!(
                "a_{} = {ai} is not positive",
                i + 1
            )));
        }
        a.push(ai);
        thetas[i] = thetas[i - 1] * p[i] + ai;
    }
    let f: Vec<f64> = thetas
        .iter()
        .zip(&rho)
        .map(|(&t, &r)| f_cap(t, r))
        .collect();
    let tail = tail_caps(&f, &p);
    let mut psis = vec![0.0; n];
    let mut c = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, hi) = psi_range(i, &thetas, &psis, &f, &p, &tail);
        if !(hi > lo) {
            return Err(Error::EmptyBox(i));
        }
        let mut ci = (slices[i].psi - lo) / (hi - lo);
        if project.is_some() {
            ci = ci.clamp(C_MARGIN, 1.0 - C_MARGIN);
        } else if !(ci > 0.0 && ci < 1.0) {
            return Err(Error::NotInBox(format!(
                "c_{} = {ci} outside (0, 1)",
                i + 1
            )));
        }
        c.push(ci);
        psis[i] = lo + ci * (hi - lo);
    }
    Ok(GlobalParams { rho, theta1, a, c })
}

/// Checks the butterfly and calendar conditions the box guarantees.
///
/// With `strict`, every inequality must hold strictly; otherwise equality is
/// tolerated up to a relative `1e-12`.
pub fn satisfies_box_conditions(slices: &[EssviSlice], strict: bool) -> bool {
    let tol = if strict { 0.0 } else { 1e-12 };
    let lt = |a: f64, b: f64| {
        if strict {
            a < b
        } else {
            a <= b + tol * b.abs().max(a.abs())
        }
    };
    slices.iter().all(|s| {
        let a = 1.0 + s.rho.abs();
        lt(s.psi, 4.0 / a) && lt(s.psi * s.psi, 4.0 * s.theta / a)
    }) && slices.windows(2).all(|w| {
        let (s1, s2) = (&w[0], &w[1]);
        lt(s1.theta, s2.theta)
            && lt(s1.psi * p_factor(s1.rho, s2.rho), s2.psi)
            && lt(s2.psi, s1.psi * s2.theta / s1.theta)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    InverseVegaSquared,
    Constant,
}

/// Per-quote weights, one vector per anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteWeights {
    pub values: Vec<Vec<f64>>,
    /// Weights reduced to the cap.
    pub capped: usize,
}

impl QuoteWeights {
    pub fn new(anchors: &[SliceAnchor], scheme: WeightScheme) -> Self {
        match scheme {
            WeightScheme::Constant => QuoteWeights {
                values: anchors.iter().map(|a| vec![1.0; a.quotes.len()]).collect(),
                capped: 0,
            },
            WeightScheme::InverseVegaSquared => {
                let raw: Vec<Vec<f64>> = anchors
                    .iter()
                    .map(|a| a.quotes.iter().map(|q| 1.0 / (q.vega * q.vega)).collect())
                    .collect();
                let mut all: Vec<f64> = raw
                    .iter()
                    .flatten()
                    .copied()
                    .filter(|w| w.is_finite())
                    .collect();
                all.sort_by(f64::total_cmp);
                let cap = if all.is_empty() {
                    f64::INFINITY
                } else {
                    WEIGHT_CAP * all[all.len() / 2]
                };
                let mut capped = 0;
                let values = raw
                    .into_iter()
                    .map(|row| {
                        row.into_iter()
                            .map(|w| {
                                if w > cap || !w.is_finite() {
                                    capped += 1;
                                    cap
                                } else {
                                    w
                                }
                            })
                            .collect()
                    })
                    .collect();
                if capped > 0 {
                    log::warn!("{capped} inverse-vega weights capped at {cap:e}");
                }
                QuoteWeights { values, capped }
            }
        }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().flatten().sum()
    }
}

/// Weighted residuals `sqrt(w) (mid - model)` for every quote.
pub fn global_objective(
    params: &GlobalParams,
    anchors: &[SliceAnchor],
    weights: &QuoteWeights,
) -> Result<Vec<f64>> {
    let maturities: Vec<f64> = anchors.iter().map(|a| a.maturity).collect();
    let slices = expand_params(params, &maturities)?;
    debug_assert!(satisfies_box_conditions(&slices, false));
    Ok(slice_residuals(&slices, anchors, weights))
}

fn slice_residuals(
    slices: &[EssviSlice],
    anchors: &[SliceAnchor],
    weights: &QuoteWeights,
) -> Vec<f64> {
    let mut out = Vec::new();
    for ((slice, anchor), w) in slices.iter().zip(anchors).zip(&weights.values) {
        let df = anchor.discount();
        for (q, wq) in anchor.quotes.iter().zip(w) {
            let model = black_price(
                anchor.forward,
                q.strike,
                df,
                slice.total_variance(q.k),
                q.is_call,
            );
            out.push(wq.sqrt() * (q.mid - model));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum GlobalInit {
    /// Start from an existing surface, typically the robust fit.
    RobustSeed(Vec<EssviSlice>),
    /// `rho_i = 0`, `a_i = max{theta*_i - theta*_{i-1}, 0}`, `c_i = 1/2`.
    LessDataDriven,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalConfig {
    pub scheme: WeightScheme,
    pub lsq: LsqConfig,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        GlobalConfig {
            scheme: WeightScheme::InverseVegaSquared,
            lsq: LsqConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalReport {
    pub status: Termination,
    pub nfev: usize,
    pub njev: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub capped_weights: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalFit {
    pub slices: Vec<EssviSlice>,
    pub params: GlobalParams,
    pub report: GlobalReport,
}

/// Initial parameters for `init`.
pub fn initial_params(anchors: &[SliceAnchor], init: &GlobalInit) -> Result<GlobalParams> {
    let first = anchors.first().ok_or(Error::EmptyChain)?;
    let floor = A_FLOOR * first.theta_star;
    if !(floor > 0.0) {
        return Err(Error::InitInfeasible(format!(
            "theta*_1 = {}",
            first.theta_star
        )));
    }
    let params = match init {
        GlobalInit::RobustSeed(slices) => {
            if slices.len() != anchors.len() {
                return Err(Error::InitInfeasible(
                    "seed has the wrong number of slices".into(),
                ));
            }
            compress_params_projected(slices, floor)
                .map_err(|e| Error::InitInfeasible(e.to_string()))?
        }
        GlobalInit::LessDataDriven => {
            let n = anchors.len();
            let a = anchors
                .windows(2)
                .map(|w| (w[1].theta_star - w[0].theta_star).max(0.0).max(floor))
                .collect();
            GlobalParams {
                rho: vec![0.0; n],
                theta1: first.theta_star,
                a,
                c: vec![0.5; n],
            }
        }
    };
    params
        .validate()
        .map_err(|e| Error::InitInfeasible(e.to_string()))?;
    Ok(params)
}

/// Weighted least-squares fit of all slices at once.
pub fn calibrate_global(
    anchors: &[SliceAnchor],
    init: &GlobalInit,
    config: &GlobalConfig,
) -> Result<GlobalFit> {
    let x0 = initial_params(anchors, init)?;
    let n = anchors.len();
    let maturities: Vec<f64> = anchors.iter().map(|a| a.maturity).collect();
    expand_params(&x0, &maturities).map_err(|e| Error::InitInfeasible(e.to_string()))?;

    let weights = QuoteWeights::new(anchors, config.scheme);
    let (lower, upper) = GlobalParams::bounds(n);
    let residual =
        |x: &[f64]| global_objective(&GlobalParams::from_vector(n, x), anchors, &weights);
    let res = least_squares(residual, &x0.to_vector(), &lower, &upper, &config.lsq)?;

    let params = GlobalParams::from_vector(n, &res.x);
    let slices = expand_params(&params, &maturities)?;
    log::debug!(
        "global fit: {:?} after {} evaluations, objective {:.3e} -> {:.3e}",
        res.status,
        res.nfev,
        res.initial_cost,
        res.cost
    );
    Ok(GlobalFit {
        slices,
        params,
        report: GlobalReport {
            status: res.status,
            nfev: res.nfev,
            njev: res.njev,
            initial_objective: res.initial_cost,
            final_objective: res.cost,
            capped_weights: weights.capped,
        },
    })
}
