//! Hidden-width sweep on Moons: accuracy against table size.
//!
//! `cargo run --release --example scaling_sweep`

use std::path::Path;

use kanele::config::RunConfig;
use kanele::report::{scaling_sweep, SweepAxis};

fn main() -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(Path::new("configs/moons.toml"))?;
    cfg.train.epochs = 60;
    let table = scaling_sweep(&cfg, SweepAxis::Width, &[1.0, 2.0, 4.0, 8.0])?;
    print!("{}", table.to_csv());
    Ok(())
}
