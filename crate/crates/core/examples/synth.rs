//! Writes a synthetic chain, its rate curve and the generating surface as CSV.
//!
//! ```text
//! cargo run --example synth -- 42
//! ```

use std::io;

use essvi::pipeline::{write_chain, write_curve};
use essvi::synth::{synth_chain, SynthConfig};

fn main() -> essvi::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let synth = synth_chain(&SynthConfig {
        seed,
        maturities: vec![0.25, 1.0],
        strikes_per_slice: 5,
        ..SynthConfig::default()
    })?;

    println!("# surface");
    for s in &synth.surface {
        println!(
            "t = {}: theta = {:.6}, rho = {:+.4}, psi = {:.4}",
            s.maturity, s.theta, s.rho, s.psi
        );
    }
    println!("# curve");
    write_curve(&synth.chain.curve, io::stdout())?;
    println!("# chain");
    write_chain(&synth.chain, io::stdout())?;
    Ok(())
}
