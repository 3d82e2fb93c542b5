//! Static arbitrage checks for eSSVI slices.
//!
//! Butterfly arbitrage is ruled out slice by slice through the two sufficient
//! conditions `psi (1 + |rho|) < 4` and `psi^2 (1 + |rho|) <= 4 theta`.
//!
//! Calendar-spread arbitrage between a near slice `w1` and a far slice `w2`
//! is classified exactly. With `Theta = theta2 / theta1`,
//! `Phi = phi2 / phi1` and `x = phi1 * k`, the two slices meet where
//!
//! ```text
//! alpha(x) + Theta * z2(x) = z1(x)
//! alpha(x) = Theta - 1 + (Theta*Phi*rho2 - rho1) * x
//! z1(x)    = sqrt(x^2 + 2 rho1 x + 1)
//! z2(x)    = sqrt(Phi^2 x^2 + 2 rho2 Phi x + 1)
//! ```
//!
//! Squaring twice gives a quartic `P(x) = x^2 Q(x)` with `Q` quadratic, and
//! the sign structure of `(Theta Phi rho2 - rho1)^2` against
//! `(Theta - 1)(Theta Phi^2 - 1)` and `(Theta Phi - 1)^2` decides whether the
//! slices are separated, tangent, or cross once or twice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surface::EssviSlice;

/// Relative tolerance for the equality cases of the region boundaries.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// Relative residual below which a candidate is accepted as a root of `Q`.
pub const ROOT_TOL: f64 = 1e-8;

#[inline]
fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= BOUNDARY_TOL * a.abs().max(b.abs()) + 1e-20
}

/// `a <= b` up to the boundary tolerance.
#[inline]
fn approx_le(a: f64, b: f64) -> bool {
    a <= b || approx_eq(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ButterflyCheck {
    /// `psi (1 + |rho|)`, must stay below 4.
    pub b1_lhs: f64,
    /// `psi^2 (1 + |rho|)`, must not exceed `4 theta`.
    pub b2_lhs: f64,
    pub b2_rhs: f64,
    pub passed: bool,
}

pub fn butterfly_check(slice: &EssviSlice) -> ButterflyCheck {
    let a = 1.0 + slice.rho.abs();
    let b1_lhs = slice.psi * a;
    let b2_lhs = slice.psi * slice.psi * a;
    let b2_rhs = 4.0 * slice.theta;
    ButterflyCheck {
        b1_lhs,
        b2_lhs,
        b2_rhs,
        passed: b1_lhs < 4.0 && approx_le(b2_lhs, b2_rhs),
    }
}

/// Scale-free description of a pair of non-flat slices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGeometry {
    /// `theta2 / theta1`
    pub theta_ratio: f64,
    /// `phi2 / phi1`
    pub phi_ratio: f64,
    pub rho1: f64,
    pub rho2: f64,
}

/// Coefficients of `Q(x) = c2 x^2 + c1 x + c0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadCoeffs {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl QuadCoeffs {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.c2 * x + self.c1) * x + self.c0
    }

    /// Magnitude used to judge residuals of `Q` at `x`.
    #[inline]
    pub fn scale(&self, x: f64) -> f64 {
        self.c2.abs() * x * x + self.c1.abs() * x.abs() + self.c0.abs()
    }
}

impl PairGeometry {
    pub fn new(theta_ratio: f64, phi_ratio: f64, rho1: f64, rho2: f64) -> Result<Self> {
        if !(theta_ratio.is_finite() && theta_ratio > 0.0) {
            return Err(Error::InvalidPair(format!(
                "Theta = {theta_ratio} must be > 0"
            )));
        }
        if !(phi_ratio.is_finite() && phi_ratio > 0.0) {
            return Err(Error::InvalidPair(format!("Phi = {phi_ratio} must be > 0")));
        }
        if !(rho1.abs() < 1.0 && rho2.abs() < 1.0) {
            return Err(Error::InvalidPair(format!(
                "correlations ({rho1}, {rho2}) must lie in (-1, 1)"
            )));
        }
        Ok(PairGeometry {
            theta_ratio,
            phi_ratio,
            rho1,
            rho2,
        })
    }

    /// Geometry of two non-flat slices.
    pub fn from_slices(near: &EssviSlice, far: &EssviSlice) -> Result<Self> {
        if near.is_flat() || far.is_flat() {
            return Err(Error::InvalidPair(
                "flat slices have no curvature ratio".into(),
            ));
        }
        PairGeometry::new(
            far.theta / near.theta,
            far.phi() / near.phi(),
            near.rho,
            far.rho,
        )
    }

    /// `Theta * Phi = psi2 / psi1`
    #[inline]
    pub fn psi_ratio(&self) -> f64 {
        self.theta_ratio * self.phi_ratio
    }

    /// `Theta Phi rho2 - rho1`
    #[inline]
    pub fn skew_gap(&self) -> f64 {
        self.psi_ratio() * self.rho2 - self.rho1
    }

    #[inline]
    pub fn alpha(&self, x: f64) -> f64 {
        self.theta_ratio - 1.0 + self.skew_gap() * x
    }

    #[inline]
    pub fn z1(&self, x: f64) -> f64 {
        (x * x + 2.0 * self.rho1 * x + 1.0).sqrt()
    }

    #[inline]
    pub fn z2(&self, x: f64) -> f64 {
        let p = self.phi_ratio;
        (p * p * x * x + 2.0 * self.rho2 * p * x + 1.0).sqrt()
    }

    /// `2 (w2 - w1) / theta1` at `x = phi1 k`.
    #[inline]
    pub fn scaled_gap(&self, x: f64) -> f64 {
        self.alpha(x) + self.theta_ratio * self.z2(x) - self.z1(x)
    }

    pub fn q_coefficients(&self) -> QuadCoeffs {
        let t = self.theta_ratio;
        let f = self.phi_ratio;
        let r1 = self.rho1;
        let r2 = self.rho2;
        let tf = t * f;
        let s = tf * r2 - r1;
        let c2 = (s * s - (tf - 1.0) * (tf - 1.0)) * ((tf + 1.0) * (tf + 1.0) - s * s);
        let c1 = 4.0
            * t
            * (r1 * (-t * t * f * f + (t - 2.0) * t * r2 * r2 * f * f + 2.0 * t * f * f - 1.0)
                + r2 * f * (t * t * r2 * r2 * f * f - t * t * f * f + 2.0 * t - 1.0)
                + (1.0 - 2.0 * t) * r2 * r1 * r1 * f
                + r1 * r1 * r1);
        let c0 = 4.0 * (t - 1.0) * t * (t * f * f * r2 * r2 - t * f * f - r1 * r1 + 1.0);
        QuadCoeffs { c2, c1, c0 }
    }

    /// `rho1^2 - Theta^2 Phi^2 rho2^2 + Theta^2 Phi^2 - 1`, zero on the hyperbola `H`.
    #[inline]
    pub fn hyperbola_residual(&self) -> f64 {
        let tf2 = self.psi_ratio() * self.psi_ratio();
        self.rho1 * self.rho1 - tf2 * self.rho2 * self.rho2 + tf2 - 1.0
    }

    /// `(Theta - 1)(Theta Phi^2 - 1)`
    #[inline]
    pub fn tangency_level(&self) -> f64 {
        (self.theta_ratio - 1.0) * (self.theta_ratio * self.phi_ratio * self.phi_ratio - 1.0)
    }

    /// `(Theta Phi - 1)^2`
    #[inline]
    pub fn asymptote_level(&self) -> f64 {
        let d = self.psi_ratio() - 1.0;
        d * d
    }

    /// Discriminant of `Q` in factored form.
    pub fn q_discriminant(&self) -> Result<f64> {
        let s = self.skew_gap();
        let d = s * s;
        if self.q_is_degenerate() {
            return Err(Error::DegenerateQuadratic);
        }
        let h = self.hyperbola_residual();
        Ok(16.0 * self.theta_ratio * h * h * (d - self.tangency_level()))
    }

    /// Whether the leading coefficient of `Q` vanishes.
    pub fn q_is_degenerate(&self) -> bool {
        let s = self.skew_gap();
        let tf = self.psi_ratio();
        approx_eq(s * s, (tf - 1.0) * (tf - 1.0)) || approx_eq(s * s, (tf + 1.0) * (tf + 1.0))
    }

    /// Real roots of `Q`, using the stable quadratic form.
    pub fn q_roots(&self) -> Vec<f64> {
        let q = self.q_coefficients();
        if self.q_is_degenerate() || q.c2 == 0.0 {
            if q.c1 != 0.0 {
                return vec![-q.c0 / q.c1];
            }
            return Vec::new();
        }
        if approx_eq(self.skew_gap().powi(2), self.tangency_level()) {
            return vec![-q.c1 / (2.0 * q.c2)];
        }
        let disc = self
            .q_discriminant()
            .unwrap_or(q.c1 * q.c1 - 4.0 * q.c2 * q.c0);
        if disc < 0.0 {
            return Vec::new();
        }
        stable_quadratic_roots(q, disc)
    }
}

/// Both roots of `c2 x^2 + c1 x + c0` for a non-negative discriminant.
fn stable_quadratic_roots(q: QuadCoeffs, disc: f64) -> Vec<f64> {
    let sq = disc.sqrt();
    let t = -0.5 * (q.c1 + q.c1.signum() * sq);
    if t == 0.0 {
        return vec![0.0];
    }
    let mut r = vec![t / q.c2, q.c0 / t];
    r.sort_by(|a, b| a.partial_cmp(b).unwrap());
    r
}

/// Which squared identity a root of `P(x)` satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootType {
    /// `alpha - Theta z2 = +/- z1`
    A,
    /// `alpha + Theta z2 = -z1`
    B,
    /// `alpha + Theta z2 = z1`, a genuine intersection point.
    C,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootInfo {
    pub root_type: RootType,
    pub x: f64,
    pub alpha: f64,
    pub z1: f64,
    pub z2: f64,
    /// `z1^2 - alpha^2 - Theta^2 z2^2`
    pub big_z: f64,
}

pub fn classify_root(g: &PairGeometry, x: f64) -> Result<RootInfo> {
    let q = g.q_coefficients();
    let scale = q.scale(x);
    let residual = q.eval(x).abs();
    if residual > ROOT_TOL * scale && residual > 1e-300 {
        return Err(Error::NotARoot {
            x,
            residual: residual / scale,
        });
    }
    let alpha = g.alpha(x);
    let z1 = g.z1(x);
    let z2 = g.z2(x);
    let t = g.theta_ratio;
    let big_z = z1 * z1 - alpha * alpha - t * t * z2 * z2;
    let rc = (alpha + t * z2 - z1).abs();
    let rb = (alpha + t * z2 + z1).abs();
    let ra = (alpha - t * z2 - z1).abs().min((alpha - t * z2 + z1).abs());
    let root_type = if rc <= rb && rc <= ra {
        RootType::C
    } else if rb <= ra {
        RootType::B
    } else {
        RootType::A
    };
    Ok(RootInfo {
        root_type,
        x,
        alpha,
        z1,
        z2,
        big_z,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NoArbStrict,
    NoArbWithTangency,
    OneCrossing,
    TwoCrossings,
    /// The far slice does not exceed the near one at the money.
    ArbitrageAtOrigin,
    ArbitrageGeneric,
}

impl Verdict {
    pub fn is_arbitrage_free(self) -> bool {
        matches!(self, Verdict::NoArbStrict | Verdict::NoArbWithTangency)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntersectionKind {
    Tangency,
    Crossing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    /// `phi1 * k`; zero when the near slice is flat.
    pub x: f64,
    pub k: f64,
    pub kind: IntersectionKind,
}

/// Margins of the two necessary conditions; all three are non-negative when
/// the conditions hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NecessaryMargins {
    /// `Theta - max{1, (1 - rho1^2) / (1 - rho2^2)}`
    pub theta: f64,
    /// `(Theta Phi rho2 - rho1) - (1 - Theta Phi)`
    pub skew_lower: f64,
    /// `(Theta Phi - 1) - (Theta Phi rho2 - rho1)`
    pub skew_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairClassification {
    pub verdict: Verdict,
    pub intersections: Vec<Intersection>,
    /// Both slices describe the same curve.
    pub identical: bool,
    pub margins: Option<NecessaryMargins>,
    pub geometry: Option<PairGeometry>,
}

impl PairClassification {
    fn new(verdict: Verdict, intersections: Vec<Intersection>) -> Self {
        PairClassification {
            verdict,
            intersections,
            identical: false,
            margins: None,
            geometry: None,
        }
    }

    pub fn crossings(&self) -> usize {
        self.intersections
            .iter()
            .filter(|i| i.kind == IntersectionKind::Crossing)
            .count()
    }

    pub fn tangencies(&self) -> usize {
        self.intersections
            .iter()
            .filter(|i| i.kind == IntersectionKind::Tangency)
            .count()
    }
}

/// Log-moneyness values where a non-flat slice reaches `level`.
fn level_crossings(s: &EssviSlice, level: f64) -> Vec<f64> {
    // With u = phi k and a = 2 level / theta - 1 the equation
    // 1 + rho u + sqrt(u^2 + 2 rho u + 1) = 2 level / theta squares to
    // (1 - rho^2) u^2 + 2 rho (1 + a) u + (1 - a^2) = 0, valid where a - rho u >= 0.
    let a = 2.0 * level / s.theta - 1.0;
    let rho = s.rho;
    let q = QuadCoeffs {
        c2: 1.0 - rho * rho,
        c1: 2.0 * rho * (1.0 + a),
        c0: 1.0 - a * a,
    };
    let disc = q.c1 * q.c1 - 4.0 * q.c2 * q.c0;
    if disc < 0.0 {
        return Vec::new();
    }
    stable_quadratic_roots(q, disc)
        .into_iter()
        .filter(|u| a - rho * u >= -1e-12)
        .map(|u| u / s.phi())
        .collect()
}

fn flat_pair(near: &EssviSlice, far: &EssviSlice) -> PairClassification {
    let below_at_money = far.theta < near.theta && !approx_eq(far.theta, near.theta);
    let arbitrage = if below_at_money {
        Verdict::ArbitrageAtOrigin
    } else {
        Verdict::ArbitrageGeneric
    };
    let phi1 = near.phi();
    match (near.is_flat(), far.is_flat()) {
        (true, true) => {
            if approx_eq(far.theta, near.theta) {
                let mut c = PairClassification::new(Verdict::NoArbStrict, Vec::new());
                c.identical = true;
                c
            } else if far.theta > near.theta {
                PairClassification::new(Verdict::NoArbStrict, Vec::new())
            } else {
                PairClassification::new(Verdict::ArbitrageAtOrigin, Vec::new())
            }
        }
        (true, false) => {
            let (kmin, wmin) = far.minimum();
            if approx_eq(wmin, near.theta) {
                let k = kmin.unwrap_or(0.0);
                PairClassification::new(
                    Verdict::NoArbWithTangency,
                    vec![Intersection {
                        x: 0.0,
                        k,
                        kind: IntersectionKind::Tangency,
                    }],
                )
            } else if wmin > near.theta {
                PairClassification::new(Verdict::NoArbStrict, Vec::new())
            } else {
                let pts = level_crossings(far, near.theta)
                    .into_iter()
                    .map(|k| Intersection {
                        x: 0.0,
                        k,
                        kind: IntersectionKind::Crossing,
                    })
                    .collect();
                PairClassification::new(arbitrage, pts)
            }
        }
        (false, true) => {
            // The near slice grows without bound, the far one is constant.
            let (_, wmin) = near.minimum();
            let pts = if approx_eq(wmin, far.theta) {
                vec![Intersection {
                    x: -2.0 * near.rho,
                    k: near.minimum().0.unwrap_or(0.0),
                    kind: IntersectionKind::Tangency,
                }]
            } else {
                level_crossings(near, far.theta)
                    .into_iter()
                    .map(|k| Intersection {
                        x: phi1 * k,
                        k,
                        kind: IntersectionKind::Crossing,
                    })
                    .collect()
            };
            PairClassification::new(arbitrage, pts)
        }
        (false, false) => unreachable!(),
    }
}

/// Type-c roots of `Q`, i.e. the genuine intersection points away from the origin.
fn intersections_from_q(g: &PairGeometry, phi1: f64) -> Vec<Intersection> {
    let roots = g.q_roots();
    let double = roots.len() == 1 && !g.q_is_degenerate();
    roots
        .into_iter()
        .filter(|&x| x != 0.0 || g.theta_ratio != 1.0)
        .filter_map(|x| classify_root(g, x).ok())
        .filter(|r| r.root_type == RootType::C)
        .map(|r| Intersection {
            x: r.x,
            k: r.x / phi1,
            kind: if double {
                IntersectionKind::Tangency
            } else {
                IntersectionKind::Crossing
            },
        })
        .collect()
}

/// Classifies calendar-spread arbitrage between a near and a far slice.
pub fn classify_pair(near: &EssviSlice, far: &EssviSlice) -> Result<PairClassification> {
    near.validate()
        .and_then(|_| far.validate())
        .map_err(|e| Error::InvalidPair(e.to_string()))?;
    if near.is_flat() || far.is_flat() {
        return Ok(flat_pair(near, far));
    }

    let phi1 = near.phi();
    let g = PairGeometry::from_slices(near, far)?;
    let theta = g.theta_ratio;
    let phi = g.phi_ratio;
    let (r1, r2) = (g.rho1, g.rho2);
    let tf = g.psi_ratio();
    let s = g.skew_gap();
    let margins = NecessaryMargins {
        theta: theta - 1f64.max((1.0 - r1 * r1) / (1.0 - r2 * r2)),
        skew_lower: s - (1.0 - tf),
        skew_upper: (tf - 1.0) - s,
    };

    let mut out = if approx_eq(theta, 1.0) {
        classify_equal_atm(&g, phi1)
    } else if theta < 1.0 {
        PairClassification::new(Verdict::ArbitrageAtOrigin, intersections_from_q(&g, phi1))
    } else {
        let d = s * s;
        let asym = g.asymptote_level();
        let tang = g.tangency_level();
        let necessary = approx_le(1.0, tf) && approx_le(d, asym);
        if !necessary {
            PairClassification::new(Verdict::ArbitrageGeneric, intersections_from_q(&g, phi1))
        } else if approx_le(phi, 1.0) {
            PairClassification::new(Verdict::NoArbStrict, Vec::new())
        } else if approx_eq(d, asym) {
            let q = g.q_coefficients();
            let x = -q.c0 / q.c1;
            PairClassification::new(
                Verdict::OneCrossing,
                vec![Intersection {
                    x,
                    k: x / phi1,
                    kind: IntersectionKind::Crossing,
                }],
            )
        } else if approx_eq(d, tang) {
            let q = g.q_coefficients();
            let x = -q.c1 / (2.0 * q.c2);
            PairClassification::new(
                Verdict::NoArbWithTangency,
                vec![Intersection {
                    x,
                    k: x / phi1,
                    kind: IntersectionKind::Tangency,
                }],
            )
        } else if d < tang {
            PairClassification::new(Verdict::NoArbStrict, Vec::new())
        } else {
            let q = g.q_coefficients();
            let h = g.hyperbola_residual();
            let disc = (16.0 * theta * h * h * (d - tang)).max(0.0);
            let pts = stable_quadratic_roots(q, disc)
                .into_iter()
                .map(|x| Intersection {
                    x,
                    k: x / phi1,
                    kind: IntersectionKind::Crossing,
                })
                .collect();
            PairClassification::new(Verdict::TwoCrossings, pts)
        }
    };
    out.margins = Some(margins);
    out.geometry = Some(g);
    Ok(out)
}

/// Equal ATM variances: the slices touch at the money and stay ordered only
/// if their slopes agree there and the far slice is at least as convex.
fn classify_equal_atm(g: &PairGeometry, phi1: f64) -> PairClassification {
    let phi = g.phi_ratio;
    let (r1, r2) = (g.rho1, g.rho2);
    let origin = |kind| Intersection {
        x: 0.0,
        k: 0.0,
        kind,
    };

    if approx_eq(phi, 1.0) && (r1 - r2).abs() <= BOUNDARY_TOL {
        let mut c = PairClassification::new(Verdict::NoArbStrict, Vec::new());
        c.identical = true;
        return c;
    }
    let symmetric = r1.abs() <= BOUNDARY_TOL && r2.abs() <= BOUNDARY_TOL;
    let matched_slope = (phi * r2 - r1).abs() <= BOUNDARY_TOL;
    let case_i = symmetric && approx_le(1.0, phi);
    let case_ii = !symmetric && matched_slope && approx_le(r2 * r2, r1 * r1);
    if case_i || case_ii {
        return PairClassification::new(
            Verdict::NoArbWithTangency,
            vec![origin(IntersectionKind::Tangency)],
        );
    }

    // With Theta = 1 the quadratic factor is x (c2 x + c1).
    let exact = PairGeometry {
        theta_ratio: 1.0,
        ..*g
    };
    let kind = if matched_slope {
        IntersectionKind::Tangency
    } else {
        IntersectionKind::Crossing
    };
    let mut pts = vec![origin(kind)];
    pts.extend(intersections_from_q(&exact, phi1));
    pts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
    PairClassification::new(Verdict::ArbitrageAtOrigin, pts)
}
