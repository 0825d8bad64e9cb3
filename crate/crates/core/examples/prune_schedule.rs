//! Trains a deliberately wide Moons network with pruning and shows the
//! threshold schedule next to the surviving edge count.
//!
//! `cargo run --release --example prune_schedule`

use std::path::Path;

use kanele::config::{run_training, RunConfig};

const CONFIG: &str = r#"
[dataset]
kind = "moons"
n = 1000

[model]
dims = [2, 8, 1]
bits = [6, 5, 8]
grid_size = 6
order = 3
domain = [-8.0, 8.0]

[train]
epochs = 120
batch_size = 64
learning_rate = 0.01

[prune]
threshold = 20.0
warmup_start = 20
warmup_target = 80
"#;

fn main() -> anyhow::Result<()> {
    let cfg = RunConfig::from_toml(CONFIG, "prune_schedule", Path::new("."))?;
    let outcome = run_training(&cfg)?;
    println!("epoch   tau      active  test_acc");
    for rec in outcome.history.epochs.iter().filter(|r| r.epoch % 10 == 0 || r.epoch + 1 == cfg.train.epochs) {
        println!("{:>5} {:>8.4} {:>8} {:>9.4}", rec.epoch, rec.tau, rec.active_edges, rec.val_acc);
    }
    println!("edges left: {} of {}", outcome.net.active_edges(), 2 * 8 + 8);
    Ok(())
}
