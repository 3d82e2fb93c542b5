//! Sequential fit through the ATM anchors, then an arbitrage check of the result.

use essvi::arbitrage::classify_pair;
use essvi::metrics::fit_report;
use essvi::pipeline::filter_chain;
use essvi::robust::{calibrate_robust, RobustConfig};
use essvi::synth::{synth_chain, SynthConfig};

fn main() -> essvi::Result<()> {
    let synth = synth_chain(&SynthConfig {
        seed: 3,
        noise: 0.01,
        ..SynthConfig::default()
    })?;
    let anchors = filter_chain(&synth.chain)?;
    let fit = calibrate_robust(&anchors, &RobustConfig::default())?;

    for (r, truth) in fit.reports.iter().zip(&synth.surface) {
        println!(
            "t = {:.2}  rho = {:+.4} ({:+.4})  psi = {:.4} ({:.4})  psi in [{:.4}, {:.4}]  stages = {}",
            r.maturity, r.rho, truth.rho, r.psi, truth.psi, r.lower, r.upper, r.stages
        );
    }
    for w in fit.slices.windows(2) {
        println!(
            "{} -> {}: {:?}",
            w[0].maturity,
            w[1].maturity,
            classify_pair(&w[0], &w[1])?.verdict
        );
    }
    let report = fit_report(&fit.slices, &anchors)?;
    println!(
        "F1 = {:.3}  F2 = {:.3e}  F3 = {:.3e}  F4 = {:.3e}",
        report.f1, report.f2, report.f3, report.f4
    );
    Ok(())
}
