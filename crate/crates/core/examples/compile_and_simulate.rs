//! Trains a small model, extracts the LUT graph and proves exhaustively that
//! the integer simulator matches the quantized network on every input.
//!
//! `cargo run --release --example compile_and_simulate`

use std::path::Path;

use kanele::config::{run_training, RunConfig};
use kanele::kan::Checkpoint;
use kanele::lutir::{extract, LutGraph};
use kanele::sim::{sim_batch, sim_forward, LabelDecoder};

fn main() -> anyhow::Result<()> {
    let cfg = RunConfig::load(Path::new("configs/moons.toml"))?;
    let outcome = run_training(&cfg)?;
    let net = outcome.net;

    // the checkpoint and graph both survive a JSON round trip unchanged
    let ckpt = Checkpoint::from_network(&net, None);
    let net = Checkpoint::from_json(&ckpt.to_json())?.into_network()?;
    let graph = LutGraph::from_json(&extract(&net)?.to_json())?;

    let bits = graph.input_bits();
    let width = graph.input_width() as u32;
    let mut mismatches = 0;
    for idx in 0..1u64 << (bits * width) {
        let codes: Vec<u32> = (0..width)
            .map(|i| ((idx >> (i * bits)) & ((1 << bits) - 1)) as u32)
            .collect();
        if sim_forward(&graph, &codes)? != net.forward_codes(&codes)? {
            mismatches += 1;
        }
    }
    println!("exhaustive check over {} input codes: {mismatches} mismatches", 1u64 << (bits * width));

    let report = sim_batch(&graph, &outcome.test_set, LabelDecoder::for_graph(&graph)?)?;
    println!(
        "LUT graph: {} edges, {} table entries; test accuracy {:.4}",
        graph.edge_count(),
        graph.layers.iter().map(|l| l.table_entries()).sum::<u64>(),
        report.accuracy.unwrap_or(f64::NAN)
    );
    Ok(())
}
