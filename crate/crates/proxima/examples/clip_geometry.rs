//! Print one clipped-surrogate term as a function of the probability ratio
//! for positive and negative advantages: the plateau that removes the
//! incentive for large ratio moves, and the unclipped worsening side.
//!
//! Run with: `cargo run --example clip_geometry`

use proxima::harness::{clip_geometry_table, AdvantageSign};

fn ascii_plot(table: &[(f64, f64)], lo: f64, hi: f64) {
    let width = 48;
    for (r, v) in table {
        let frac = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        let col = (frac * width as f64) as usize;
        println!("r={r:>4.2}  {v:>5.2}  |{}{}", " ".repeat(col), "*");
    }
}

fn main() -> proxima::Result<()> {
    let epsilon = 0.2;
    let grid: Vec<f64> = (1..=20).map(|i| i as f64 * 0.1).collect();

    println!("positive advantage (A = +1), epsilon = {epsilon}: flat above 1+eps\n");
    let pos = clip_geometry_table(AdvantageSign::Positive, epsilon, &grid)?;
    ascii_plot(&pos, 0.0, 1.3);

    println!("\nnegative advantage (A = -1): flat below 1-eps, linear where it worsens\n");
    let neg = clip_geometry_table(AdvantageSign::Negative, epsilon, &grid)?;
    ascii_plot(&neg, -2.1, -0.7);

    println!("\n(the starting point of every update is r = 1, where both curves equal A)");
    Ok(())
}
