//! Calendar-spread classification of slice pairs, with the located crossings.

use essvi::arbitrage::classify_pair;
use essvi::EssviSlice;

fn main() -> essvi::Result<()> {
    let near = EssviSlice::new(0.04, 0.0, 0.24, 0.5)?;
    let cases = [
        ("steeper skew", EssviSlice::new(0.06, -0.2, 0.3, 1.0)?),
        ("tangent", {
            let (tt, ff) = (1.5_f64, 1.2_f64);
            let r2 = ((tt - 1.0) * (tt * ff * ff - 1.0)).sqrt() / (tt * ff);
            EssviSlice::new(0.04 * tt, r2, 0.24 * tt * ff, 1.0)?
        }),
        ("strong skew", EssviSlice::new(0.06, 0.81, 0.432, 1.0)?),
        ("lower at the money", EssviSlice::new(0.035, 0.0, 0.2, 1.0)?),
    ];

    for (name, far) in &cases {
        let c = classify_pair(&near, far)?;
        println!("{name}: {:?}", c.verdict);
        for i in &c.intersections {
            println!("    {:?} at k = {:.6}", i.kind, i.k);
        }
    }
    Ok(())
}
