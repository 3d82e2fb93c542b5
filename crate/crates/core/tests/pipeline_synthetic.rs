use essvi::pipeline::{
    filter_chain, filter_quotes, forward, implied_dividend_yield, read_chain, read_curve,
    write_chain, write_curve, MAX_RELATIVE_SPREAD,
};
use essvi::synth::{synth_chain, SynthConfig};
use essvi::Error;

fn config(seed: u64) -> SynthConfig {
    SynthConfig {
        seed,
        ..SynthConfig::default()
    }
}

#[test]
fn dividend_yield_is_recovered() {
    for seed in 1..6 {
        let out = synth_chain(&config(seed)).unwrap();
        for t in out.chain.maturities() {
            let q = implied_dividend_yield(&out.chain, t).unwrap();
            assert!((q - 0.01).abs() < 1e-10, "seed {seed} t {t}: q = {q}");
        }
    }
}

#[test]
fn forward_round_trip() {
    let cfg = config(3);
    let out = synth_chain(&cfg).unwrap();
    for t in out.chain.maturities() {
        let q = implied_dividend_yield(&out.chain, t).unwrap();
        let f = forward(&out.chain, t, q);
        let r = out.chain.curve.rate(t);
        let expected = cfg.spot * ((r - cfg.dividend_yield) * t).exp();
        assert!((f - expected).abs() < 1e-9 * expected);
        // Parity at the ATM strike gives back the forward.
        let atm: Vec<_> = out
            .chain
            .quotes
            .iter()
            .filter(|x| x.maturity == t && (x.strike / expected - 1.0).abs() < 1e-12)
            .collect();
        assert_eq!(atm.len(), 2);
        let (c, p) = if atm[0].is_call {
            (atm[0].mid(), atm[1].mid())
        } else {
            (atm[1].mid(), atm[0].mid())
        };
        assert!((c - p).abs() < 1e-9 * expected);
    }
}

#[test]
fn anchors_match_the_generator() {
    let out = synth_chain(&config(7)).unwrap();
    let anchors = filter_chain(&out.chain).unwrap();
    assert_eq!(anchors.len(), 5);
    for (a, s) in anchors.iter().zip(&out.surface) {
        assert_eq!(a.maturity, s.maturity);
        assert!(a.k_star.abs() < 1e-10);
        assert!((a.theta_star - s.total_variance(a.k_star)).abs() < 1e-9 * s.theta);
        for q in &a.quotes {
            assert!((q.total_variance - s.total_variance(q.k)).abs() < 1e-8 * s.theta);
            assert!(q.vega > 0.0);
        }
    }
}

#[test]
fn survivors_are_otm_and_tight() {
    let mut cfg = config(11);
    cfg.noise = 0.01;
    let out = synth_chain(&cfg).unwrap();
    for a in filter_chain(&out.chain).unwrap() {
        for q in &a.quotes {
            if q.is_call {
                assert!(q.strike >= a.forward);
            } else {
                assert!(q.strike <= a.forward);
            }
            assert!((q.ask - q.bid) / q.mid <= MAX_RELATIVE_SPREAD);
        }
    }
}

#[test]
fn filter_is_idempotent() {
    let out = synth_chain(&config(5)).unwrap();
    for t in out.chain.maturities() {
        let q = implied_dividend_yield(&out.chain, t).unwrap();
        let f = forward(&out.chain, t, q);
        let at_t: Vec<_> = out
            .chain
            .quotes
            .iter()
            .filter(|x| x.maturity == t)
            .collect();
        let once = filter_quotes(at_t.iter().copied(), f);
        let twice = filter_quotes(&once, f);
        assert_eq!(once, twice);
        assert!(!once.is_empty() && once.len() < at_t.len());
    }
}

#[test]
fn csv_round_trip() {
    let out = synth_chain(&config(2)).unwrap();
    let mut curve_csv = Vec::new();
    write_curve(&out.chain.curve, &mut curve_csv).unwrap();
    let mut chain_csv = Vec::new();
    write_chain(&out.chain, &mut chain_csv).unwrap();
    let curve = read_curve(curve_csv.as_slice()).unwrap();
    let chain = read_chain(chain_csv.as_slice(), curve).unwrap();
    assert_eq!(chain, out.chain);
}

#[test]
fn wide_spreads_empty_the_chain() {
    let mut cfg = config(1);
    cfg.half_spread = 0.03;
    let out = synth_chain(&cfg).unwrap();
    assert_eq!(filter_chain(&out.chain), Err(Error::EmptyChain));
}

#[test]
fn malformed_rows_are_rejected() {
    let curve = read_curve("tenor_years,rate\n1.0,0.02\n".as_bytes()).unwrap();
    let header = "quote_date,expiry,maturity_years,type,strike,bid,ask,underlying\n";
    let bad_type = format!("{header}2024-01-02,2025-01-02,1.0,X,100,1,2,100\n");
    assert!(matches!(
        read_chain(bad_type.as_bytes(), curve.clone()),
        Err(Error::Malformed(_))
    ));
    let crossed = format!("{header}2024-01-02,2025-01-02,1.0,C,100,2,1,100\n");
    assert!(matches!(
        read_chain(crossed.as_bytes(), curve.clone()),
        Err(Error::Malformed(_))
    ));
    let empty = header.to_string();
    assert!(matches!(
        read_chain(empty.as_bytes(), curve),
        Err(Error::Malformed(_))
    ));
}

#[test]
fn synth_is_reproducible() {
    assert_eq!(
        synth_chain(&config(9)).unwrap(),
        synth_chain(&config(9)).unwrap()
    );
    assert_ne!(
        synth_chain(&config(9)).unwrap().chain,
        synth_chain(&config(10)).unwrap().chain
    );
}
