//! Black prices, vega and implied volatility round trips.

use essvi::blackscholes::{implied_total_variance, PricingInput};

fn main() -> essvi::Result<()> {
    let (forward, rate, t): (f64, f64, f64) = (100.0, 0.03, 0.75);
    println!(
        "{:>8} {:>6} {:>10} {:>10} {:>10}",
        "strike", "type", "price", "vega", "iv"
    );
    for strike in [80.0, 90.0, 100.0, 110.0, 120.0] {
        let is_call = strike >= forward;
        let vol = 0.2 + 0.1 * (strike / forward).ln().abs();
        let input = PricingInput::new(forward, strike, rate, t, vol * vol * t, is_call)?;
        let price = input.price();
        let w = implied_total_variance(price, forward, strike, rate, t, is_call)?;
        println!(
            "{strike:>8.1} {:>6} {price:>10.6} {:>10.6} {:>10.6}",
            if is_call { "call" } else { "put" },
            input.vega(),
            (w / t).sqrt()
        );
    }
    Ok(())
}
