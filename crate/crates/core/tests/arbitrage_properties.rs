use essvi::arbitrage::{
    butterfly_check, classify_pair, classify_root, IntersectionKind, PairGeometry, RootType,
    Verdict,
};
use essvi::EssviSlice;
use proptest::prelude::*;

fn slices(theta1: f64, phi1: f64, tt: f64, ff: f64, r1: f64, r2: f64) -> (EssviSlice, EssviSlice) {
    let theta2 = theta1 * tt;
    (
        EssviSlice::new(theta1, r1, theta1 * phi1, 1.0).unwrap(),
        EssviSlice::new(theta2, r2, theta2 * phi1 * ff, 2.0).unwrap(),
    )
}

fn gap(near: &EssviSlice, far: &EssviSlice, k: f64) -> f64 {
    far.total_variance(k) - near.total_variance(k)
}

proptest! {
    #[test]
    fn discriminant_identity(tt in 1.0..3.0f64, ff in 0.3..3.0f64, r1 in -0.95..0.95f64, r2 in -0.95..0.95f64) {
        let g = PairGeometry::new(tt, ff, r1, r2).unwrap();
        prop_assume!(!g.q_is_degenerate());
        let q = g.q_coefficients();
        let direct = q.c1 * q.c1 - 4.0 * q.c2 * q.c0;
        let scale = (q.c1 * q.c1).max((4.0 * q.c2 * q.c0).abs()).max(1e-300);
        prop_assert!((g.q_discriminant().unwrap() - direct).abs() <= 1e-9 * scale);
    }

    #[test]
    fn hyperbola_avoids_the_stripes(tt in 1.01..3.0f64, ff in 0.3..3.0f64, r1 in -0.99..0.99f64, sign in any::<bool>()) {
        let tf = tt * ff;
        prop_assume!(tf > 1.0 + 1e-6);
        // rho2 on the hyperbola for the given rho1.
        let r2 = (1.0 - (1.0 - r1 * r1) / (tf * tf)).sqrt() * if sign { 1.0 } else { -1.0 };
        let g = PairGeometry::new(tt, ff, r1, r2).unwrap();
        prop_assert!(g.hyperbola_residual().abs() < 1e-12);
        let d = g.skew_gap().powi(2);
        prop_assert!(!(g.tangency_level() <= d && d <= g.asymptote_level()));
    }

    #[test]
    fn crossings_change_sign(
        theta1 in 0.02..0.3f64,
        phi1 in 0.5..3.0f64,
        tt in 1.0..3.0f64,
        ff in 0.3..3.0f64,
        r1 in -0.95..0.95f64,
        r2 in -0.95..0.95f64,
    ) {
        let (near, far) = slices(theta1, phi1, tt, ff, r1, r2);
        let c = classify_pair(&near, &far).unwrap();
        match c.verdict {
            Verdict::NoArbStrict => prop_assert!(c.intersections.is_empty()),
            Verdict::NoArbWithTangency => prop_assert_eq!(c.tangencies(), 1),
            Verdict::OneCrossing => prop_assert_eq!(c.crossings(), 1),
            Verdict::TwoCrossings => prop_assert_eq!(c.crossings(), 2),
            _ => {}
        }
        let ks: Vec<f64> = c.intersections.iter().map(|i| i.k).collect();
        for i in &c.intersections {
            prop_assert!(gap(&near, &far, i.k).abs() <= 1e-9 * theta1 * (1.0 + i.k.abs()));
            if i.kind == IntersectionKind::Crossing {
                let spacing = ks.iter().filter(|&&k| k != i.k).map(|k| (k - i.k).abs()).fold(f64::INFINITY, f64::min);
                let h = (1e-6 * i.k.abs().max(1.0)).min(0.25 * spacing);
                prop_assert!(gap(&near, &far, i.k - h) * gap(&near, &far, i.k + h) < 0.0);
                let g = c.geometry.unwrap();
                prop_assert_eq!(classify_root(&g, i.x).unwrap().root_type, RootType::C);
            }
        }
    }

    #[test]
    fn type_c_roots_are_intersections(tt in 1.0..3.0f64, ff in 0.3..3.0f64, r1 in -0.95..0.95f64, r2 in -0.95..0.95f64) {
        let (near, far) = slices(0.1, 1.0, tt, ff, r1, r2);
        let g = PairGeometry::from_slices(&near, &far).unwrap();
        for x in g.q_roots() {
            let info = classify_root(&g, x).unwrap();
            if info.root_type == RootType::C {
                prop_assert!(gap(&near, &far, x).abs() < 1e-9 * 0.1 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn butterfly_matches_direct_arithmetic(theta in 0.001..1.0f64, rho in -0.99..0.99f64, psi in 0.0..4.0f64) {
        let s = EssviSlice::new(theta, rho, psi, 1.0).unwrap();
        let a = 1.0 + rho.abs();
        let expected = psi * a < 4.0 && psi * psi * a <= 4.0 * theta * (1.0 + 1e-10);
        prop_assert_eq!(butterfly_check(&s).passed, expected);
    }
}

#[test]
fn type_a_root_with_positive_alpha() {
    let (tt, ff) = (2.0_f64, 0.6_f64);
    let x = 2.0 * (tt * (tt - 1.0) * (1.0 - tt * ff * ff)).sqrt() / (tt * tt * ff * ff - 1.0);
    let g = PairGeometry::new(tt, ff, 0.0, 0.0).unwrap();
    let info = classify_root(&g, x).unwrap();
    assert_eq!(info.root_type, RootType::A);
    assert!(info.alpha > 0.0 && info.big_z < 0.0);
}

#[test]
fn type_c_test_points_on_the_asymptote_boundary() {
    for (tt, ff) in [(1.5_f64, 1.2_f64), (2.0, 2.0), (3.0, 1.1)] {
        let rho_star = 1.0 / (tt * ff) - 1.0;
        for sign in [1.0, -1.0] {
            let g = PairGeometry::new(tt, ff, 0.0, sign * rho_star).unwrap();
            let x = sign * (2.0 * tt * tt * ff - tt * tt - 2.0 * tt * ff + 1.0)
                / (2.0 * tt * (ff - 1.0) * (tt * ff - 1.0));
            let info = classify_root(&g, x).unwrap();
            assert_eq!(info.root_type, RootType::C);
            let expected_alpha = -(tt - 1.0).powi(2) / (2.0 * tt * (ff - 1.0));
            assert!((info.alpha - expected_alpha).abs() < 1e-12);
            let expected = (tt * tt * (ff - 1.0).powi(2) + (tt * ff - 1.0).powi(2))
                / (2.0 * tt * (ff - 1.0) * (tt * ff - 1.0));
            assert!((info.alpha + tt * info.z2 - expected).abs() < 1e-12 * expected);
        }
    }
}

#[test]
fn tangency_confirmed_by_dense_scan() {
    let (tt, ff) = (1.5_f64, 1.2_f64);
    let r2 = ((tt - 1.0) * (tt * ff * ff - 1.0)).sqrt() / (tt * ff);
    let (near, far) = slices(0.04, 2.0, tt, ff, 0.0, r2);
    let c = classify_pair(&near, &far).unwrap();
    assert_eq!(c.verdict, Verdict::NoArbWithTangency);
    assert_eq!(c.intersections.len(), 1);
    let k0 = c.intersections[0].k;
    let tol = 1e-7 * near.theta;
    assert!(gap(&near, &far, k0).abs() < tol);
    let min = (0..=200_000)
        .map(|j| gap(&near, &far, -10.0 + j as f64 * 1e-4))
        .fold(f64::INFINITY, f64::min);
    assert!(min > -tol && min < tol);
}

#[test]
fn butterfly_examples() {
    let s = EssviSlice::new(0.04, 0.0, 0.4, 1.0).unwrap();
    assert!(butterfly_check(&s).passed);
    let s = EssviSlice::new(0.04, 0.5, 0.5, 1.0).unwrap();
    let b = butterfly_check(&s);
    assert!(!b.passed);
    assert!((b.b2_lhs - 0.375).abs() < 1e-15 && (b.b2_rhs - 0.16).abs() < 1e-15);
}

#[test]
fn tangency_axis_point_zeroes_the_discriminant() {
    let (tt, ff) = (2.0_f64, 1.5_f64);
    let r2 = ((tt - 1.0) * (tt * ff * ff - 1.0)).sqrt() / (tt * ff);
    let g = PairGeometry::new(tt, ff, 0.0, r2).unwrap();
    let q = g.q_coefficients();
    assert!(g.q_discriminant().unwrap().abs() < 1e-12 * (q.c1 * q.c1).max(1.0));
}
