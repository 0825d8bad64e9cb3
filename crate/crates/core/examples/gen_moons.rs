//! Generates the two-moons dataset and a stratified train/test split.
//!
//! `cargo run --example gen_moons -- 500 0.2`

use kanele::data::{gen_moons, split};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(1000), |s| s.parse())?;
    let noise: f64 = args.next().map_or(Ok(0.1), |s| s.parse())?;
    let ds = gen_moons(n, noise, 0)?;
    let (train, test) = split(&ds, 0.8, 0, true)?;
    for (name, part) in [("train", &train), ("test", &test)] {
        let labels = part.labels().unwrap_or_default();
        let ones = labels.iter().filter(|&&l| l == 1).count();
        println!("{name}: {} samples, {} of class 0, {ones} of class 1", part.len(), part.len() - ones);
    }
    for s in ds.feature_stats() {
        println!("feature mean {:+.4} std {:.4}", s.mean, s.std);
    }
    println!("x0,x1,label");
    for (x, y) in ds.features.iter().zip(ds.labels().unwrap_or_default()).take(5) {
        println!("{},{},{}", x[0], x[1], y);
    }
    Ok(())
}
