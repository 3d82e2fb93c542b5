//! Bound-constrained nonlinear least squares.
//!
//! Levenberg-Marquardt with Marquardt's diagonal scaling. Trial points are
//! kept strictly inside the box by moving each coordinate at most 99% of the
//! way to its bound, and the Jacobian is built by forward differences that
//! step away from nearby bounds.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsqConfig {
    /// Residual evaluations allowed, not counting finite-difference Jacobians.
    pub max_nfev: usize,
    pub ftol: f64,
    pub xtol: f64,
    pub gtol: f64,
}

impl Default for LsqConfig {
    fn default() -> Self {
        LsqConfig {
            max_nfev: 500,
            ftol: 1e-8,
            xtol: 1e-8,
            gtol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Budget,
    Ftol,
    Xtol,
    Gtol,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsqResult {
    pub x: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub initial_cost: f64,
    pub nfev: usize,
    pub njev: usize,
    pub status: Termination,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn norm(v: &[f64]) -> f64 {
    sum_sq(v).sqrt()
}

/// Moves `x + step` into the open box, at most 99% of the way to a bound.
fn clip_step(x: &[f64], step: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(step)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &si), (&lo, &hi))| {
            let t = xi + si;
            if t <= lo || (si < 0.0 && t < xi - 0.99 * (xi - lo)) {
                xi - 0.99 * (xi - lo)
            } else if t >= hi || (si > 0.0 && t > xi + 0.99 * (hi - xi)) {
                xi + 0.99 * (hi - xi)
            } else {
                t
            }
        })
        .collect()
}

fn jacobian<F>(f: &mut F, x: &[f64], r: &[f64], lower: &[f64], upper: &[f64]) -> DMatrix<f64>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let m = r.len();
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let base = 1.490_116_119_384_765_6e-8 * x[j].abs().max(1.0);
        let room_up = upper[j] - x[j];
        let room_down = x[j] - lower[j];
        let h = if room_up > base {
            base
        } else if room_down > base {
            -base
        } else if room_up >= room_down {
            0.5 * room_up
        } else {
            -0.5 * room_down
        };
        let mut col = None;
        for step in [h, -h] {
            xp[j] = x[j] + step;
            if let Ok(rp) = f(&xp) {
                col = Some((rp, step));
                break;
            }
        }
        xp[j] = x[j];
        if let Some((rp, step)) = col {
            for i in 0..m {
                jac[(i, j)] = (rp[i] - r[i]) / step;
            }
        }
    }
    jac
}

/// Minimizes `sum(f(x)^2)` over the open box `(lower, upper)`.
pub fn least_squares<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    config: &LsqConfig,
) -> Result<LsqResult>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    if lower.len() != n || upper.len() != n {
        return Err(Error::InvalidInput(
            "bound dimensions do not match x0".into(),
        ));
    }
    if x0
        .iter()
        .zip(lower.iter().zip(upper))
        .any(|(x, (l, u))| !(x > l && x < u))
    {
        return Err(Error::InvalidInput(
            "x0 is not strictly inside the bounds".into(),
        ));
    }

    let mut x = x0.to_vec();
    let mut r = f(&x)?;
    let mut nfev = 1;
    let mut njev = 0;
    let mut cost = sum_sq(&r);
    let initial_cost = cost;
    let mut lambda = 1e-3;
    let mut nu = 2.0;
    let mut diag = vec![0.0_f64; n];

    let status = 'outer: loop {
        if cost == 0.0 {
            break Termination::Ftol;
        }
        let jac = jacobian(&mut f, &x, &r, lower, upper);
        njev += 1;
        let rv = DVector::from_column_slice(&r);
        let g = jac.transpose() * &rv;
        if g.amax() <= config.gtol {
            break Termination::Gtol;
        }
        let jtj = jac.transpose() * &jac;
        for (j, d) in diag.iter_mut().enumerate() {
            *d = d.max(jtj[(j, j)]).max(1e-12);
        }

        loop {
            if nfev >= config.max_nfev {
                break 'outer Termination::Budget;
            }
            let mut a = jtj.clone();
            for j in 0..n {
                a[(j, j)] += lambda * diag[j];
            }
            let Some(chol) = a.cholesky() else {
                lambda *= nu;
                nu *= 2.0;
                continue;
            };
            let delta = chol.solve(&(-&g));
            let x_new = clip_step(&x, delta.as_slice(), lower, upper);
            let step: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let step_norm = norm(&step);
            let small_step = step_norm <= config.xtol * (config.xtol + norm(&x));

            let trial = f(&x_new);
            nfev += 1;
            let accepted = match trial {
                Ok(r_new) => {
                    let cost_new = sum_sq(&r_new);
                    if cost_new < cost {
                        let sv = DVector::from_column_slice(&step);
                        let lin = &rv + &jac * &sv;
                        let predicted = cost - lin.norm_squared();
                        let ratio = if predicted > 0.0 {
                            (cost - cost_new) / predicted
                        } else {
                            0.0
                        };
                        let reduction = cost - cost_new;
                        let old_cost = cost;
                        x = x_new;
                        r = r_new;
                        cost = cost_new;
                        lambda *= (1.0f64 / 3.0).max(1.0 - (2.0 * ratio - 1.0).powi(3));
                        nu = 2.0;
                        if reduction <= config.ftol * old_cost && ratio > 0.25 {
                            break 'outer Termination::Ftol;
                        }
                        if small_step {
                            break 'outer Termination::Xtol;
                        }
                        true
                    } else {
                        false
                    }
                }
                Err(_) => false,
            };
            if accepted {
                break;
            }
            if small_step {
                break 'outer Termination::Xtol;
            }
            lambda *= nu;
            nu *= 2.0;
        }
    };

    Ok(LsqResult {
        x,
        residuals: r,
        cost,
        initial_cost,
        nfev,
        njev,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| Ok(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]);
        let inf = f64::INFINITY;
        let res = least_squares(
            f,
            &[-1.2, 1.0],
            &[-inf, -inf],
            &[inf, inf],
            &LsqConfig::default(),
        )
        .unwrap();
        assert!((res.x[0] - 1.0).abs() < 1e-6 && (res.x[1] - 1.0).abs() < 1e-6);
        assert!(res.cost < 1e-12);
        assert!(res.cost <= res.initial_cost);
    }

    #[test]
    fn respects_bounds() {
        // Unconstrained minimum at x = -1 lies outside the box.
        let f = |x: &[f64]| Ok(vec![x[0] + 1.0]);
        let res = least_squares(f, &[0.5], &[0.0], &[1.0], &LsqConfig::default()).unwrap();
        assert!(res.x[0] > 0.0 && res.x[0] < 1e-3);
    }

    #[test]
    fn budget_is_honored() {
        let f = |x: &[f64]| Ok(vec![(x[0] - 3.0).exp() - 1.0, x[1].sin()]);
        let cfg = LsqConfig {
            max_nfev: 3,
            ..LsqConfig::default()
        };
        let inf = f64::INFINITY;
        let res = least_squares(f, &[0.0, 1.0], &[-inf, -inf], &[inf, inf], &cfg).unwrap();
        assert!(res.nfev <= 3);
    }

    #[test]
    fn rejects_start_outside_box() {
        let f = |x: &[f64]| Ok(vec![x[0]]);
        assert!(least_squares(f, &[1.0], &[0.0], &[1.0], &LsqConfig::default()).is_err());
    }
}
