//! Shape of a single slice: ATM level, minimum, wing slopes and the butterfly check.
//!
//! ```text
//! cargo run --example slice_shape
//! ```

use essvi::arbitrage::butterfly_check;
use essvi::EssviSlice;

fn main() -> essvi::Result<()> {
    let slice = EssviSlice::new(0.04, -0.4, 0.3, 1.0)?;
    println!(
        "theta = {}, rho = {}, psi = {}, phi = {:.4}",
        slice.theta,
        slice.rho,
        slice.psi,
        slice.phi()
    );

    let (at, min) = slice.minimum();
    println!("minimum w = {min:.6} at k = {:.4}", at.unwrap_or(0.0));
    let (left, right) = slice.asymptote_slopes();
    println!("wing slopes: left {left:.4}, right {right:.4}");

    println!("{:>8} {:>10} {:>8}", "k", "w(k)", "vol");
    for i in -4..=4 {
        let k = 0.1 * i as f64;
        println!(
            "{k:>8.2} {:>10.6} {:>8.4}",
            slice.total_variance(k),
            slice.implied_vol(k)
        );
    }

    let b = butterfly_check(&slice);
    println!(
        "butterfly: psi(1+|rho|) = {:.4} < 4, psi^2(1+|rho|) = {:.4} <= {:.4}: {}",
        b.b1_lhs, b.b2_lhs, b.b2_rhs, b.passed
    );
    Ok(())
}
