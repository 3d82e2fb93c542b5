//! Fit measures per maturity and spread correlations of a calibrated surface.

use essvi::global::{calibrate_global, GlobalConfig, GlobalInit};
use essvi::metrics::{fit_report, spread_correlations};
use essvi::pipeline::filter_chain;
use essvi::synth::{synth_chain, SynthConfig};

fn main() -> essvi::Result<()> {
    let synth = synth_chain(&SynthConfig {
        seed: 8,
        noise: 0.01,
        ..SynthConfig::default()
    })?;
    let anchors = filter_chain(&synth.chain)?;
    let fit = calibrate_global(
        &anchors,
        &GlobalInit::LessDataDriven,
        &GlobalConfig::default(),
    )?;

    let report = fit_report(&fit.slices, &anchors)?;
    println!(
        "{:>6} {:>4} {:>7} {:>10} {:>10} {:>10}",
        "t", "n", "inside", "F2", "F3", "F4"
    );
    for m in &report.per_maturity {
        println!(
            "{:>6.2} {:>4} {:>7} {:>10.3e} {:>10.3e} {:>10.3e}",
            m.maturity, m.n, m.n_within, m.f2, m.f3, m.f4
        );
    }
    println!(
        "all: F1 = {:.3}, F2 = {:.3e}, F3 = {:.3e}, F4 = {:.3e}",
        report.f1, report.f2, report.f3, report.f4
    );

    let corr = spread_correlations(&anchors);
    println!("corr(spread, vega) = {:?}", corr.vega_spread);
    println!("corr(spread, days) = {:?}", corr.dte_spread);
    Ok(())
}
