#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kanele::kan::{KanNetwork, KanSpec};
use kanele::lutir::LutGraph;
use kanele::prune::backward_prune;
use kanele::sim::sim_forward;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn config_path(name: &str) -> PathBuf {
    repo_root().join("configs").join(name)
}

/// Random spec with up to three widths bounded by `max_dims`, bits in
/// `bits_range` for every quantizer.
pub fn random_spec(rng: &mut ChaCha8Rng, max_dims: &[usize], bits_lo: u32, bits_hi: u32) -> KanSpec {
    let dims: Vec<usize> = max_dims.iter().map(|&m| rng.random_range(1..=m)).collect();
    let bits = (0..dims.len()).map(|_| rng.random_range(bits_lo..=bits_hi)).collect();
    let domains = [(-8.0, 8.0), (-4.0, 4.0), (-1.0, 2.0)];
    let domain = domains[rng.random_range(0..domains.len())];
    KanSpec::new(dims, bits, rng.random_range(1..=8), rng.random_range(0..=3), domain)
}

/// Initialized network with larger, irregular weights, random layer scales,
/// random input statistics and roughly `prune_fraction` of edges pruned.
pub fn random_network(spec: &KanSpec, seed: u64, prune_fraction: f64) -> KanNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut net = KanNetwork::init(spec, seed).unwrap();
    let width = net.input_width();
    let mean = (0..width).map(|_| rng.random_range(-2.0..2.0)).collect();
    let std = (0..width).map(|_| rng.random_range(0.3..3.0)).collect();
    net.set_normalization(mean, std).unwrap();
    net.norm.gain = rng.random_range(0.5..3.0);
    net.norm.shift = rng.random_range(-1.0..1.0);
    for layer in net.layers_mut() {
        layer.scale = rng.random_range(0.5..2.0);
        for q in 0..layer.d_out() {
            for p in 0..layer.d_in() {
                let edge = layer.edge_mut(q, p);
                let gain = rng.random_range(1.0..40.0);
                edge.coeffs.iter_mut().for_each(|c| *c *= gain);
                if rng.random_bool(prune_fraction) {
                    edge.active = false;
                }
            }
        }
    }
    backward_prune(&mut net);
    net
}

/// Every input code vector when the packed width is at most `max_bits`,
/// else `samples` random ones.
pub fn code_vectors(width: usize, bits: u32, max_bits: u32, samples: usize, seed: u64) -> (Vec<Vec<u32>>, bool) {
    let total = width as u32 * bits;
    if total <= max_bits {
        let mask = (1u64 << bits) - 1;
        let all = (0..1u64 << total)
            .map(|idx| (0..width).map(|i| ((idx >> (i as u32 * bits)) & mask) as u32).collect())
            .collect();
        (all, true)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..samples)
            .map(|_| (0..width).map(|_| rng.random_range(0..1u32 << bits)).collect())
            .collect();
        (v, false)
    }
}

/// Number of vectors on which the graph and the quantized model disagree.
pub fn mismatches(graph: &LutGraph, net: &KanNetwork, vectors: &[Vec<u32>]) -> usize {
    use rayon::prelude::*;
    vectors
        .par_iter()
        .filter(|v| sim_forward(graph, v).unwrap() != net.forward_codes(v).unwrap())
        .count()
}
