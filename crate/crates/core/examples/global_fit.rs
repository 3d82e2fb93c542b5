//! Joint least-squares fit over the parameter box, from both starting points.

use essvi::global::{calibrate_global, GlobalConfig, GlobalInit, WeightScheme};
use essvi::pipeline::filter_chain;
use essvi::robust::{calibrate_robust, RobustConfig};
use essvi::synth::{synth_chain, SynthConfig};

fn main() -> essvi::Result<()> {
    let synth = synth_chain(&SynthConfig {
        seed: 5,
        noise: 0.02,
        ..SynthConfig::default()
    })?;
    let anchors = filter_chain(&synth.chain)?;
    let robust = calibrate_robust(&anchors, &RobustConfig::default())?;

    let starts = [
        ("robust seed", GlobalInit::RobustSeed(robust.slices)),
        ("simple", GlobalInit::LessDataDriven),
    ];
    for (name, init) in starts {
        for scheme in [WeightScheme::InverseVegaSquared, WeightScheme::Constant] {
            let config = GlobalConfig {
                scheme,
                ..GlobalConfig::default()
            };
            let fit = calibrate_global(&anchors, &init, &config)?;
            println!(
                "{name:<12} {scheme:?}: {:?} after {} evaluations, objective {:.3e} -> {:.3e}",
                fit.report.status,
                fit.report.nfev,
                fit.report.initial_objective,
                fit.report.final_objective
            );
        }
    }
    Ok(())
}
