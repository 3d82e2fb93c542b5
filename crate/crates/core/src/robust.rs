//! Sequential calibration through the ATM anchors.
//!
//! Each slice is forced through its anchor `(k*, theta*)` by
//! `theta = theta* - rho psi k*`. For a given `rho`, butterfly and calendar
//! constraints against the previous slice reduce to an interval `[L, U]`
//! for `psi`. The calibrator scans `rho` on a grid, minimizes over `psi`
//! inside each interval, and refines the grid around the best `rho`.

use serde::{Deserialize, Serialize};

use crate::blackscholes::black_price;
use crate::error::{Error, Result};
use crate::minimize::fminbound;
use crate::pipeline::SliceAnchor;
use crate::surface::EssviSlice;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustConfig {
    /// Grid points per refinement stage.
    pub r: usize,
    /// Refinement stops once the grid width drops below this.
    pub epsilon: f64,
    pub max_inner_evals: usize,
    pub inner_xtol: f64,
}

impl Default for RobustConfig {
    fn default() -> Self {
        RobustConfig {
            r: 100,
            epsilon: 1e-5,
            max_inner_evals: 1000,
            inner_xtol: 1e-8,
        }
    }
}

impl RobustConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r < 2 {
            return Err(Error::InvalidInput(format!(
                "grid size r = {} must be >= 2",
                self.r
            )));
        }
        if !(self.epsilon > 0.0) || !(self.inner_xtol > 0.0) || self.max_inner_evals == 0 {
            return Err(Error::InvalidInput(
                "epsilon, xtol and budget must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A fitted maturity as seen by its successor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedAnchor {
    pub k_star: f64,
    pub theta_star: f64,
    pub rho: f64,
    pub psi: f64,
}

impl FittedAnchor {
    /// `theta* - rho psi k*`
    #[inline]
    pub fn theta(&self) -> f64 {
        self.theta_star - self.rho * self.psi * self.k_star
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub b1: f64,
    pub b2_minus: f64,
    pub b2_plus: f64,
    /// Undefined when `rho k* = 0`.
    pub b3: Option<f64>,
    pub b4: f64,
    /// `+inf` without a predecessor.
    pub b5: f64,
    pub lower: f64,
    pub upper: f64,
    pub feasible: bool,
}

/// Bounds on `psi` for the slice through `(k_star, theta_star)` with
/// correlation `rho`, given the previous fitted slice.
pub fn psi_bounds(
    k_star: f64,
    theta_star: f64,
    prev: Option<&FittedAnchor>,
    rho: f64,
) -> Result<BoundSet> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidInput(format!(
            "|rho| = {} must be < 1",
            rho.abs()
        )));
    }
    let zero = FittedAnchor {
        k_star: 0.0,
        theta_star: 0.0,
        rho: 0.0,
        psi: 0.0,
    };
    let p = prev.unwrap_or(&zero);
    let theta_prev = p.theta();
    let a = 1.0 + rho.abs();
    let rk = rho * k_star;

    let b1 = 4.0 / a;
    let c = -2.0 * rk / a;
    let disc = (4.0 * rk * rk / (a * a) + 4.0 * theta_star / a).sqrt();
    let b2_minus = c - disc;
    let b2_plus = c + disc;
    let b3 = (rk != 0.0).then(|| (theta_star - theta_prev) / rk);
    let b4 = p.psi * ((1.0 + p.rho) / (1.0 + rho)).max((1.0 - p.rho) / (1.0 - rho));
    let b5 = if prev.is_none() {
        f64::INFINITY
    } else {
        let bracket = p.theta_star - p.psi * (p.rho * p.k_star - rk);
        if bracket == 0.0 {
            f64::INFINITY
        } else {
            p.psi * theta_star / bracket
        }
    };

    let mut extra_ok = true;
    let (lower, upper) = if rk > 0.0 {
        (b2_minus.max(b4), b1.min(b2_plus).min(b3.unwrap()).min(b5))
    } else if rk == 0.0 {
        extra_ok = theta_star >= theta_prev;
        (b4, b1.min(b2_plus).min(b5))
    } else {
        let upper = if b5 > 0.0 {
            b1.min(b2_plus).min(b5)
        } else {
            b1.min(b2_plus)
        };
        (b2_minus.max(b3.unwrap()).max(b4), upper)
    };

    let feasible = extra_ok && lower <= upper;
    let set = BoundSet {
        b1,
        b2_minus,
        b2_plus,
        b3,
        b4,
        b5,
        lower,
        upper,
        feasible,
    };
    if feasible {
        Ok(set)
    } else {
        Err(Error::Infeasible { lower, upper })
    }
}

/// Sum of absolute mid-price errors of the anchored slice `(rho, psi)`.
pub fn slice_objective(anchor: &SliceAnchor, rho: f64, psi: f64) -> Result<f64> {
    let theta = anchor.theta_star - rho * psi * anchor.k_star;
    if !(theta > 0.0) {
        return Err(Error::NonPositiveTheta { theta });
    }
    let phi = psi / theta;
    let df = anchor.discount();
    let mut total = 0.0;
    for q in &anchor.quotes {
        let u = phi * q.k + rho;
        let w = 0.5 * theta * (1.0 + rho * phi * q.k + (u * u + 1.0 - rho * rho).sqrt());
        total += (q.mid - black_price(anchor.forward, q.strike, df, w, q.is_call)).abs();
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustSliceReport {
    pub maturity: f64,
    pub rho: f64,
    pub psi: f64,
    pub theta: f64,
    pub objective: f64,
    /// Objective evaluations spent on this maturity.
    pub evaluations: usize,
    /// Refinement stages run, including the initial grid.
    pub stages: usize,
    pub lower: f64,
    pub upper: f64,
    /// Best objective after each stage.
    pub stage_objectives: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustFit {
    pub slices: Vec<EssviSlice>,
    pub reports: Vec<RobustSliceReport>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    rho: f64,
    psi: f64,
    objective: f64,
    lower: f64,
    upper: f64,
}

fn search_psi(
    anchor: &SliceAnchor,
    rho: f64,
    bounds: &BoundSet,
    config: &RobustConfig,
) -> (Candidate, usize) {
    let (l, u) = (bounds.lower, bounds.upper);
    let inset = 1e-12 * (u - l).abs().max(1.0);
    let score = |psi: f64| slice_objective(anchor, rho, psi).unwrap_or(f64::INFINITY);
    let (psi, objective, evals) = if u - l <= 2.0 * inset {
        let psi = 0.5 * (l + u);
        (psi, score(psi), 1)
    } else {
        let m = fminbound(
            score,
            l + inset,
            u - inset,
            config.inner_xtol,
            config.max_inner_evals,
        );
        (m.x, m.fx, m.evaluations)
    };
    (
        Candidate {
            rho,
            psi,
            objective,
            lower: l,
            upper: u,
        },
        evals,
    )
}

/// Fits every anchor in maturity order.
pub fn calibrate_robust(anchors: &[SliceAnchor], config: &RobustConfig) -> Result<RobustFit> {
    config.validate()?;
    if anchors.is_empty() {
        return Err(Error::EmptyChain);
    }
    let r = config.r;
    let edge = 1.0 - 1e-9;
    let mut prev: Option<FittedAnchor> = None;
    let mut slices = Vec::with_capacity(anchors.len());
    let mut reports = Vec::with_capacity(anchors.len());

    for (i, anchor) in anchors.iter().enumerate() {
        if let Some(p) = &prev {
            if anchor.k_star == 0.0 && anchor.theta_star < p.theta() {
                return Err(Error::AnchorInconsistent(i));
            }
        }

        let mut best: Option<Candidate> = None;
        let mut evaluations = 0;
        let mut stage_objectives = Vec::new();
        let (mut lo, mut hi) = (-1.0, 1.0);
        let mut zeta = 0;
        loop {
            for j in 0..r {
                let rho = lo + (j as f64 + 0.5) * (hi - lo) / r as f64;
                let Ok(bounds) = psi_bounds(anchor.k_star, anchor.theta_star, prev.as_ref(), rho)
                else {
                    continue;
                };
                let (cand, evals) = search_psi(anchor, rho, &bounds, config);
                evaluations += evals;
                if best.is_none_or(|b| cand.objective < b.objective) {
                    best = Some(cand);
                }
            }
            let Some(b) = best else {
                return Err(Error::AllRhoInfeasible(i));
            };
            stage_objectives.push(b.objective);

            zeta += 1;
            let half = 1.2 / (r as f64).powi(zeta);
            if 2.0 * half < config.epsilon {
                break;
            }
            lo = (b.rho - half).max(-edge);
            hi = (b.rho + half).min(edge);
        }

        let b = best.expect("at least one feasible stage");
        let fitted = FittedAnchor {
            k_star: anchor.k_star,
            theta_star: anchor.theta_star,
            rho: b.rho,
            psi: b.psi,
        };
        let slice = EssviSlice::new(fitted.theta(), b.rho, b.psi, anchor.maturity)?;
        log::debug!(
            "robust slice {i}: rho={:.6} psi={:.6} objective={:.3e} evals={evaluations}",
            b.rho,
            b.psi,
            b.objective
        );
        reports.push(RobustSliceReport {
            maturity: anchor.maturity,
            rho: b.rho,
            psi: b.psi,
            theta: slice.theta,
            objective: b.objective,
            evaluations,
            stages: zeta as usize,
            lower: b.lower,
            upper: b.upper,
            stage_objectives,
        });
        slices.push(slice);
        prev = Some(fitted);
    }
    Ok(RobustFit { slices, reports })
}
