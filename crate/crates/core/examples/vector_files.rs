//! Packs code vectors into the hex line format used by the testbench.
//!
//! `cargo run --example vector_files`

use kanele::sim::{format_vectors, parse_vectors};

fn main() -> anyhow::Result<()> {
    let vectors: Vec<Vec<u32>> = vec![vec![1, 2, 3], vec![63, 0, 17], vec![5, 5, 5]];
    let text = format_vectors(vectors.iter().map(Vec::as_slice), 6);
    print!("{text}");
    let back = parse_vectors(&text, 3, 6)?;
    assert_eq!(back, vectors);
    println!("round trip ok ({} lines)", back.len());
    Ok(())
}
