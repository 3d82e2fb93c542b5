use essvi::arbitrage::{classify_pair, Verdict};
use essvi::blackscholes::black_price;
use essvi::global::{
    calibrate_global, compress_params, expand_params, global_objective, GlobalConfig, GlobalInit,
    QuoteWeights, WeightScheme,
};
use essvi::metrics::{fit_report, fit_report_with_weights};
use essvi::pipeline::{filter_chain, SliceAnchor};
use essvi::robust::{calibrate_robust, psi_bounds, slice_objective, FittedAnchor, RobustConfig};
use essvi::synth::{synth_chain, SynthConfig};
use essvi::{Error, EssviSlice};
use proptest::prelude::*;

fn anchors(seed: u64, maturities: Vec<f64>, noise: f64) -> (Vec<SliceAnchor>, Vec<EssviSlice>) {
    let out = synth_chain(&SynthConfig {
        seed,
        maturities,
        noise,
        ..SynthConfig::default()
    })
    .unwrap();
    (filter_chain(&out.chain).unwrap(), out.surface)
}

/// Every constraint on the anchored slice, written out directly.
fn admissible(
    k_star: f64,
    theta_star: f64,
    prev: Option<&FittedAnchor>,
    rho: f64,
    psi: f64,
) -> bool {
    let tol = 1e-12;
    let theta = theta_star - rho * psi * k_star;
    let a = 1.0 + rho.abs();
    let mut ok = psi >= 0.0 && theta >= -tol && psi * a < 4.0 && psi * psi * a <= 4.0 * theta + tol;
    if let Some(p) = prev {
        let tp = p.theta();
        let factor = ((1.0 + p.rho) / (1.0 + rho)).max((1.0 - p.rho) / (1.0 - rho));
        ok &= theta >= tp - tol && psi >= p.psi * factor - tol && psi * tp <= p.psi * theta + tol;
    }
    ok
}

fn prev_anchor() -> impl Strategy<Value = FittedAnchor> {
    (-0.05..0.05f64, 0.01..0.1f64, -0.9..0.9f64, 0.0..0.4f64).prop_map(
        |(k_star, theta_star, rho, psi)| FittedAnchor {
            k_star,
            theta_star,
            rho,
            psi,
        },
    )
}

proptest! {
    #[test]
    fn psi_interval_is_exact(
        prev in prev_anchor(),
        with_prev in any::<bool>(),
        k_star in -0.05..0.05f64,
        growth in 0.9..2.5f64,
        rho in -0.99..0.99f64,
    ) {
        let p = with_prev.then_some(prev);
        let theta_star = growth * prev.theta().max(0.01);
        match psi_bounds(k_star, theta_star, p.as_ref(), rho) {
            Ok(b) => {
                prop_assert!(b.lower <= b.upper);
                let width = b.upper - b.lower;
                for j in 0..=20 {
                    let psi = b.lower + width * j as f64 / 20.0;
                    let psi = psi.clamp(b.lower + 1e-12 * width, b.upper - 1e-12 * width);
                    prop_assert!(admissible(k_star, theta_star, p.as_ref(), rho, psi), "psi {psi} in {b:?}");
                }
                let d = 1e-6 * b.upper.abs().max(1e-3);
                prop_assert!(!admissible(k_star, theta_star, p.as_ref(), rho, b.upper + d));
                prop_assert!(!admissible(k_star, theta_star, p.as_ref(), rho, b.lower - d));
            }
            Err(Error::Infeasible { .. }) => {
                for j in 0..=4000 {
                    let psi = 4.0 * j as f64 / 4000.0;
                    prop_assert!(!admissible(k_star, theta_star, p.as_ref(), rho, psi));
                }
            }
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }
}

#[test]
fn first_maturity_without_skewed_anchor() {
    for (k_star, rho) in [(0.0, 0.4), (0.02, -0.5), (-0.03, 0.3)] {
        let theta_star = 0.04;
        let b = psi_bounds(k_star, theta_star, None, rho).unwrap();
        let a = 1.0 + rho.abs();
        let rk = rho * k_star;
        let plus = -2.0 * rk / a + (4.0 * rk * rk / (a * a) + 4.0 * theta_star / a).sqrt();
        assert_eq!(b.lower, 0.0);
        assert!((b.upper - plus.min(4.0 / a)).abs() < 1e-15);
    }
}

#[test]
fn zero_rho_collapses_the_bounds() {
    let prev = FittedAnchor {
        k_star: 0.01,
        theta_star: 0.02,
        rho: 0.0,
        psi: 0.1,
    };
    let b = psi_bounds(-0.02, 0.05, Some(&prev), 0.0).unwrap();
    assert_eq!(b.b3, None);
    assert_eq!(b.lower, 0.1);
    let expected = (2.0 * 0.05f64.sqrt()).min(0.1 * 0.05 / 0.02);
    assert!((b.upper - expected).abs() < 1e-15);
}

#[test]
fn slice_objective_is_the_absolute_error_sum() {
    let (anchors, _) = anchors(4, vec![0.25, 1.0], 0.01);
    for a in &anchors {
        let (rho, psi) = (-0.4, 0.15);
        let s = EssviSlice::new(a.theta_star - rho * psi * a.k_star, rho, psi, a.maturity).unwrap();
        let df = (-a.rate * a.maturity).exp();
        let direct: f64 = a
            .quotes
            .iter()
            .map(|q| {
                let model = black_price(
                    a.forward,
                    q.strike,
                    df,
                    s.total_variance((q.strike / a.forward).ln()),
                    q.is_call,
                );
                (q.mid - model).abs()
            })
            .sum();
        let got = slice_objective(a, rho, psi).unwrap();
        assert!((got - direct).abs() <= 1e-12 * direct.max(1.0));
    }
}

#[test]
fn robust_fit_is_calendar_free() {
    let (anchors, _) = anchors(6, vec![0.5, 1.0], 0.01);
    let fit = calibrate_robust(&anchors, &RobustConfig::default()).unwrap();
    for r in &fit.reports {
        assert!(r.stage_objectives.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.lower <= r.psi && r.psi <= r.upper);
    }
    let c = classify_pair(&fit.slices[0], &fit.slices[1]).unwrap();
    assert_eq!(c.verdict, Verdict::NoArbStrict);
    for (s, a) in fit.slices.iter().zip(&anchors) {
        assert!((s.theta - (a.theta_star - s.rho * s.psi * a.k_star)).abs() < 1e-15);
    }
}

#[test]
fn objectives_match_the_fit_measures() {
    let (anchors, _) = anchors(8, vec![0.25, 0.5, 1.0], 0.01);
    let robust = calibrate_robust(&anchors, &RobustConfig::default()).unwrap();
    let maturities: Vec<f64> = anchors.iter().map(|a| a.maturity).collect();
    let params = compress_params(&robust.slices)
        .or_else(|_| {
            let fit = calibrate_global(
                &anchors,
                &GlobalInit::LessDataDriven,
                &GlobalConfig::default(),
            )?;
            Ok::<_, Error>(fit.params)
        })
        .unwrap();
    let slices = expand_params(&params, &maturities).unwrap();

    let constant = QuoteWeights::new(&anchors, WeightScheme::Constant);
    let r = global_objective(&params, &anchors, &constant).unwrap();
    let report = fit_report_with_weights(&slices, &anchors, &constant).unwrap();
    let ss: f64 = r.iter().map(|x| x * x).sum();
    assert!((ss - report.n_total as f64 * report.f3).abs() <= 1e-12 * ss);

    let vega = QuoteWeights::new(&anchors, WeightScheme::InverseVegaSquared);
    let r = global_objective(&params, &anchors, &vega).unwrap();
    let report = fit_report(&slices, &anchors).unwrap();
    let ss: f64 = r.iter().map(|x| x * x).sum();
    assert!((ss - vega.total() * report.f4).abs() <= 1e-12 * ss);

    assert!(report.f2 * report.f2 <= report.f3 * (1.0 + 1e-12));
    assert!((0.0..=1.0).contains(&report.f1));
}

#[test]
fn global_fit_improves_on_its_start() {
    let (anchors, _) = anchors(12, vec![0.25, 0.5, 1.0, 2.0], 0.02);
    for scheme in [WeightScheme::InverseVegaSquared, WeightScheme::Constant] {
        let config = GlobalConfig {
            scheme,
            ..GlobalConfig::default()
        };
        let fit = calibrate_global(&anchors, &GlobalInit::LessDataDriven, &config).unwrap();
        assert!(fit.report.final_objective <= fit.report.initial_objective);
        let weights = QuoteWeights::new(&anchors, scheme);
        let r = global_objective(&fit.params, &anchors, &weights).unwrap();
        let ss: f64 = r.iter().map(|x| x * x).sum();
        assert!((ss - fit.report.final_objective).abs() <= 1e-12 * ss.max(1e-300));
        for w in fit.slices.windows(2) {
            let v = classify_pair(&w[0], &w[1]).unwrap().verdict;
            assert!(v.is_arbitrage_free());
        }
    }
}

#[test]
fn truth_seed_is_recovered() {
    let (anchors, truth) = anchors(21, vec![0.25, 0.75, 1.5], 0.0);
    let fit = calibrate_global(
        &anchors,
        &GlobalInit::RobustSeed(truth.clone()),
        &GlobalConfig::default(),
    )
    .unwrap();
    assert!(fit.report.final_objective < 1e-12);
    for (s, t) in fit.slices.iter().zip(&truth) {
        assert!((s.theta - t.theta).abs() < 1e-6 * t.theta);
        assert!((s.rho - t.rho).abs() < 1e-4);
        assert!((s.psi - t.psi).abs() < 1e-4 * t.psi);
    }
}

#[test]
fn single_maturity_fit() {
    let (anchors, _) = anchors(3, vec![1.0], 0.01);
    let fit = calibrate_global(
        &anchors,
        &GlobalInit::LessDataDriven,
        &GlobalConfig::default(),
    )
    .unwrap();
    assert_eq!(fit.slices.len(), 1);
    assert!(fit.params.a.is_empty());
    assert_eq!(fit.slices[0].theta, fit.params.theta1);
    assert!(fit.report.final_objective <= fit.report.initial_objective);
}

#[test]
fn compress_reads_the_box_coordinates() {
    let (theta, rho) = (0.05_f64, -0.3_f64);
    let a = 1.0 + rho.abs();
    let cap = (4.0 / a).min((4.0 * theta / a).sqrt());
    let s = EssviSlice::new(theta, rho, 0.5 * cap, 1.0).unwrap();
    let p = compress_params(&[s]).unwrap();
    assert!((p.c[0] - 0.5).abs() < 1e-15);
    let back = expand_params(&p, &[1.0]).unwrap();
    assert!((back[0].psi - s.psi).abs() < 1e-15);

    let near = EssviSlice::new(0.04, 0.0, 0.2, 0.5).unwrap();
    let far = EssviSlice::new(0.05, 0.0, 0.3, 1.0).unwrap();
    assert!(matches!(
        compress_params(&[near, far]),
        Err(Error::NotInBox(_))
    ));
}
