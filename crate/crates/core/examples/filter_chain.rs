//! Filters a synthetic chain into per-maturity anchors.

use essvi::pipeline::filter_chain;
use essvi::synth::{synth_chain, SynthConfig};

fn main() -> essvi::Result<()> {
    let synth = synth_chain(&SynthConfig {
        noise: 0.01,
        ..SynthConfig::default()
    })?;
    println!(
        "{} quotes on {} maturities",
        synth.chain.quotes.len(),
        synth.chain.maturities().len()
    );

    for a in filter_chain(&synth.chain)? {
        println!(
            "t = {:.2}  q = {:.5}  F = {:.4}  k* = {:+.5}  theta* = {:.6}  quotes kept = {}",
            a.maturity,
            a.dividend_yield,
            a.forward,
            a.k_star,
            a.theta_star,
            a.quotes.len()
        );
    }
    Ok(())
}
