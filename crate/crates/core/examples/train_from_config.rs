//! Trains the experiment described by a TOML file and prints the history tail.
//!
//! `cargo run --release --example train_from_config -- configs/moons.toml`

use std::path::PathBuf;
use std::time::Instant;

use kanele::config::{run_training, RunConfig};
use kanele::lutir::extract;
use kanele::sim::{sim_batch, LabelDecoder};

fn main() -> anyhow::Result<()> {
    let path: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "configs/moons.toml".into())
        .into();
    let cfg = RunConfig::load(&path)?;
    let start = Instant::now();
    let outcome = run_training(&cfg)?;
    for rec in outcome.history.epochs.iter().rev().take(5).rev() {
        println!(
            "epoch {:>4} loss {:.4} train {:.4} test {:.4}",
            rec.epoch, rec.loss, rec.train_acc, rec.val_acc
        );
    }
    let graph = extract(&outcome.net)?;
    let sim = sim_batch(&graph, &outcome.test_set, LabelDecoder::for_graph(&graph)?)?;
    println!(
        "trained in {:.1}s; LUT graph test accuracy {:.4} ({} edges)",
        start.elapsed().as_secs_f64(),
        sim.accuracy.unwrap_or(f64::NAN),
        graph.edge_count()
    );
    Ok(())
}
