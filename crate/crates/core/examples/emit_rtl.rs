//! Writes a VHDL bundle with a self-checking testbench for a fresh model.
//!
//! `cargo run --example emit_rtl -- out/rtl_demo`

use std::path::PathBuf;

use kanele::kan::{KanNetwork, KanSpec};
use kanele::lutir::extract;
use kanele::rtl::{emit_vhdl, latency_cycles, random_vectors, RtlOptions};

fn main() -> anyhow::Result<()> {
    let dir: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "out/rtl_demo".into()).into();
    let spec = KanSpec::new(vec![4, 3, 2], vec![4, 5, 6], 5, 3, (-4.0, 4.0));
    let graph = extract(&KanNetwork::init(&spec, 1)?)?;
    let opts = RtlOptions {
        entity_prefix: "demo".into(),
        ..RtlOptions::default()
    };
    let vectors = random_vectors(&graph, 256, 0);
    let bundle = emit_vhdl(&graph, &opts, &vectors)?;
    bundle.write_to(&dir)?;
    for (name, text) in &bundle.files {
        println!("{:>8} bytes  {name}", text.len());
    }
    println!("latency {} cycles at n_add = {}", latency_cycles(&graph, opts.n_add)?, opts.n_add);
    Ok(())
}
