//! Evaluates a cubic B-spline basis on a uniform grid and checks that it
//! forms a partition of unity.
//!
//! `cargo run --example spline_basis`

use kanele::spline::SplineBasis;

fn main() -> anyhow::Result<()> {
    let basis = SplineBasis::new(6, 3, -8.0, 8.0)?;
    println!("{} basis functions, knot step {}", basis.len(), basis.step());
    for x in [-8.0, -5.3, 0.0, 2.5, 7.99, 8.0, 12.0] {
        let (v, d) = basis.eval_with_deriv(x);
        let support: Vec<String> = v
            .iter()
            .enumerate()
            .filter(|(_, b)| **b > 0.0)
            .map(|(k, b)| format!("B{k}={b:.4}"))
            .collect();
        println!(
            "x={x:>6}: sum={:.12} dsum={:+.1e}  {}",
            v.iter().sum::<f64>(),
            d.iter().sum::<f64>(),
            support.join(" ")
        );
    }
    Ok(())
}
