use essvi::blackscholes::{black_price, black_vega, implied_total_variance, norm_cdf};
use essvi::EssviSlice;
use proptest::prelude::*;

fn slice() -> impl Strategy<Value = EssviSlice> {
    (0.005..1.0f64, -0.95..0.95f64, 0.01..2.0f64)
        .prop_map(|(theta, rho, psi)| EssviSlice::new(theta, rho, psi, 1.0).unwrap())
}

proptest! {
    #[test]
    fn atm_value_is_theta(s in slice()) {
        prop_assert!((s.total_variance(0.0) - s.theta).abs() <= 1e-15 * s.theta);
    }

    #[test]
    fn minimum_is_global(s in slice(), k in -5.0..5.0f64) {
        let (at, value) = s.minimum();
        let at = at.unwrap();
        prop_assert!((s.total_variance(at) - value).abs() <= 1e-12 * s.theta);
        prop_assert!(s.total_variance(k) >= value - 1e-12 * s.theta);
    }

    #[test]
    fn convex_with_matching_derivatives(s in slice(), k in -3.0..3.0f64) {
        let (d1, d2) = s.variance_derivatives(k);
        prop_assert!(d2 >= 0.0);
        let h = 1e-4;
        let fd1 = (s.total_variance(k + h) - s.total_variance(k - h)) / (2.0 * h);
        let fd2 = (s.total_variance(k + h) - 2.0 * s.total_variance(k) + s.total_variance(k - h)) / (h * h);
        prop_assert!((fd1 - d1).abs() <= 1e-6 * d1.abs().max(s.psi));
        prop_assert!((fd2 - d2).abs() <= 1e-4 * d2.abs().max(s.psi));
    }

    #[test]
    fn wings_follow_asymptotes(s in slice()) {
        let (left, right) = s.asymptote_slopes();
        let k = 1e5;
        let slope = |a: f64, b: f64| 2.0 * (s.total_variance(b) - s.total_variance(a)) / (b - a).abs();
        prop_assert!((slope(k, 2.0 * k) - right).abs() <= 1e-6 * right);
        prop_assert!((slope(-k, -2.0 * k) - left).abs() <= 1e-6 * left);
    }

    #[test]
    fn put_call_parity(f in 10.0..200.0f64, z in -3.0..3.0f64, w in 1e-4..2.0f64, df in 0.5..1.0f64) {
        let k = f * (z * w.sqrt()).exp();
        let c = black_price(f, k, df, w, true);
        let p = black_price(f, k, df, w, false);
        prop_assert!((c - p - df * (f - k)).abs() <= 1e-12 * f.max(k));
    }

    #[test]
    fn prices_are_monotone(f in 50.0..150.0f64, z in -2.0..2.0f64, w in 1e-3..1.0f64) {
        let k = f * (z * w.sqrt()).exp();
        let c = black_price(f, k, 1.0, w, true);
        prop_assert!(black_price(f, k, 1.0, w * 1.01, true) > c);
        prop_assert!(black_price(f, k * 1.01, 1.0, w, true) < c);
        prop_assert!(black_price(f, k * 1.01, 1.0, w, false) > black_price(f, k, 1.0, w, false));
    }

    #[test]
    fn implied_variance_round_trip(
        f in 50.0..150.0f64,
        z in -2.5..2.5f64,
        sigma in 0.05..1.0f64,
        t in 0.02..3.0f64,
        r in -0.01..0.08f64,
        is_call in any::<bool>(),
    ) {
        let w = sigma * sigma * t;
        let k = f * (z * w.sqrt()).exp();
        let price = black_price(f, k, (-r * t).exp(), w, is_call);
        let w_hat = implied_total_variance(price, f, k, r, t, is_call).unwrap();
        prop_assert!(((w_hat / t).sqrt() - sigma).abs() < 1e-7);
    }

    #[test]
    fn vega_matches_difference(f in 50.0..150.0f64, z in -2.0..2.0f64, sigma in 0.05..1.0f64, t in 0.05..3.0f64) {
        let w = sigma * sigma * t;
        let k = f * (z * w.sqrt()).exp();
        let h = 1e-4 * sigma;
        let up = black_price(f, k, 0.97, (sigma + h).powi(2) * t, true);
        let dn = black_price(f, k, 0.97, (sigma - h).powi(2) * t, true);
        let v = black_vega(f, k, 0.97, w, t);
        prop_assert!(((up - dn) / (2.0 * h) - v).abs() <= 1e-6 * v);
    }
}

#[test]
fn cdf_reference_values() {
    // Values of the standard normal distribution to 16 digits.
    assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
    assert!((norm_cdf(1.0) - 0.8413447460685429).abs() < 1e-15);
    assert!((norm_cdf(-1.959963984540054) - 0.025).abs() < 1e-15);
    assert!((norm_cdf(-8.0) - 6.220960574271785e-16).abs() < 1e-28);
}

#[test]
fn out_of_bounds_prices_are_rejected() {
    let c = black_price(100.0, 90.0, 1.0, 0.04, true);
    assert!(implied_total_variance(9.0, 100.0, 90.0, 0.0, 1.0, true).is_err());
    assert!(implied_total_variance(101.0, 100.0, 90.0, 0.0, 1.0, true).is_err());
    assert!(implied_total_variance(c, 100.0, 90.0, 0.0, 1.0, true).is_ok());
}
