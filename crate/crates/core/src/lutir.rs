//! Logical-LUT graph: the integer IR between a trained network and RTL.
//!
//! Each surviving edge becomes a truth table indexed by its input code and
//! holding signed fixed-point entries in units of `δ_out / 2^F`. An output
//! neuron adds its tables' entries and a constant offset, then
//! [`requantize_with`] shifts the sum back to an output code.
//!
//! Persisted as `kanele-lut-v1` JSON:
//!
//! ```text
//! {
//!   "version": "kanele-lut-v1",
//!   "dims": [d0, d1, ...],
//!   "input_quant": {"bits", "a", "b", "scale": [per feature], "bias": [per feature]},
//!   "layers": [{
//!     "d_in", "d_out", "in_bits", "out_bits", "guard_bits", "a", "b", "adder_fanin",
//!     "offsets": [per output neuron],
//!     "edges": [{"in", "out", "entry_bits", "table": [2^in_bits integers]}]
//!   }],
//!   "meta": {"seed", "source_checkpoint"}
//! }
//! ```

use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KanError, Result};
use crate::kan::{Checkpoint, KanNetwork};
use crate::quant::{round_shift, InputQuantSpec, QuantSpec, MAX_BITS};

pub const LUT_VERSION: &str = "kanele-lut-v1";
pub const DEFAULT_ADDER_FANIN: usize = 4;
/// Widest accumulator the simulator (64-bit signed) can hold without overflow.
pub const MAX_ACCUMULATOR_BITS: u32 = 63;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LutEdge {
    #[serde(rename = "in")]
    pub in_neuron: usize,
    #[serde(rename = "out")]
    pub out_neuron: usize,
    pub entry_bits: u32,
    pub table: Vec<i64>,
}

impl LutEdge {
    pub fn new(in_neuron: usize, out_neuron: usize, table: Vec<i64>) -> Self {
        let entry_bits = min_entry_bits(&table);
        LutEdge {
            in_neuron,
            out_neuron,
            entry_bits,
            table,
        }
    }

    /// Address width, `log2(table.len())`.
    pub fn in_bits(&self) -> u32 {
        self.table.len().trailing_zeros()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LutLayer {
    pub d_in: usize,
    pub d_out: usize,
    pub in_bits: u32,
    pub out_bits: u32,
    pub guard_bits: u32,
    pub a: f64,
    pub b: f64,
    pub adder_fanin: usize,
    pub offsets: Vec<i64>,
    pub edges: Vec<LutEdge>,
}

impl LutLayer {
    pub fn out_spec(&self) -> Result<QuantSpec> {
        QuantSpec::new(self.out_bits, self.a, self.b, self.guard_bits)
    }

    pub fn max_code(&self) -> u32 {
        (1u32 << self.out_bits) - 1
    }

    /// Output code of neuron `q` given the summed table entries.
    pub fn requantize_sum(&self, q: usize, sum: i64) -> u32 {
        requantize_with(sum, self.offsets[q], self.guard_bits, self.out_bits)
    }

    /// Incoming edges of each output neuron, in edge-list order.
    pub fn incoming(&self) -> Vec<Vec<&LutEdge>> {
        let mut by_neuron = vec![Vec::new(); self.d_out];
        for e in &self.edges {
            by_neuron[e.out_neuron].push(e);
        }
        by_neuron
    }

    pub fn fan_in(&self) -> Vec<usize> {
        let mut counts = vec![0; self.d_out];
        for e in &self.edges {
            counts[e.out_neuron] += 1;
        }
        counts
    }

    /// Signed accumulator width for each output neuron: wide enough for the
    /// sum of its entries plus the offset.
    pub fn accumulator_bits(&self) -> Vec<u32> {
        self.incoming()
            .iter()
            .enumerate()
            .map(|(q, edges)| {
                let widest = edges
                    .iter()
                    .map(|e| e.entry_bits)
                    .chain(std::iter::once(signed_width(self.offsets[q])))
                    .max()
                    .unwrap_or(1);
                widest + ceil_log2(edges.len() as u64 + 1)
            })
            .collect()
    }

    pub fn table_entries(&self) -> u64 {
        self.edges.iter().map(|e| e.table.len() as u64).sum()
    }
}

/// `clamp(round_shift(sum + offset, guard_bits), 0, 2^bits - 1)`.
pub fn requantize_with(sum: i64, offset: i64, guard_bits: u32, bits: u32) -> u32 {
    let shifted = round_shift(sum.saturating_add(offset), guard_bits);
    shifted.clamp(0, (1i64 << bits) - 1) as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputCodec {
    pub bits: u32,
    pub a: f64,
    pub b: f64,
    pub scale: Vec<f64>,
    pub bias: Vec<f64>,
}

impl InputCodec {
    pub fn to_spec(&self, guard_bits: u32) -> Result<InputQuantSpec> {
        let base = QuantSpec::new(self.bits, self.a, self.b, guard_bits)?;
        InputQuantSpec::new(base, self.scale.clone(), self.bias.clone())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphMeta {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub source_checkpoint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LutGraph {
    pub version: String,
    pub dims: Vec<usize>,
    pub input_quant: InputCodec,
    pub layers: Vec<LutLayer>,
    #[serde(default)]
    pub meta: GraphMeta,
}

impl LutGraph {
    pub fn input_width(&self) -> usize {
        self.dims[0]
    }

    pub fn input_bits(&self) -> u32 {
        self.input_quant.bits
    }

    pub fn output_width(&self) -> usize {
        *self.dims.last().expect("validated graph has dims")
    }

    pub fn output_bits(&self) -> u32 {
        self.layers.last().map_or(self.input_quant.bits, |l| l.out_bits)
    }

    pub fn edge_count(&self) -> usize {
        self.layers.iter().map(|l| l.edges.len()).sum()
    }

    pub fn input_codec(&self) -> Result<InputQuantSpec> {
        let guard = self.layers.first().map_or(0, |l| l.guard_bits);
        self.input_quant.to_spec(guard)
    }

    /// Quantizer of the final layer's output codes.
    pub fn output_spec(&self) -> Result<QuantSpec> {
        match self.layers.last() {
            Some(l) => l.out_spec(),
            None => QuantSpec::new(self.input_quant.bits, self.input_quant.a, self.input_quant.b, 0),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let graph: LutGraph = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            KanError::schema(path, e.into_inner().to_string())
        })?;
        graph.validate()?;
        Ok(graph)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| KanError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| KanError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Structural validation; every error names the offending JSON path.
    pub fn validate(&self) -> Result<()> {
        fn err(path: impl Into<String>, msg: impl Into<String>) -> KanError {
            KanError::schema(path, msg)
        }
        if self.version != LUT_VERSION {
            return Err(err("version", format!("expected {LUT_VERSION}, found {}", self.version)));
        }
        if self.dims.len() != self.layers.len() + 1 {
            return Err(err(
                "dims",
                format!("{} widths for {} layers", self.dims.len(), self.layers.len()),
            ));
        }
        if let Some(i) = self.dims.iter().position(|&d| d == 0) {
            return Err(err(format!("dims[{i}]"), "width must be positive"));
        }
        let iq = &self.input_quant;
        check_bits("input_quant.bits", iq.bits)?;
        check_domain("input_quant", iq.a, iq.b)?;
        if iq.scale.len() != self.dims[0] {
            return Err(err(
                "input_quant.scale",
                format!("expected {} entries, found {}", self.dims[0], iq.scale.len()),
            ));
        }
        if iq.bias.len() != self.dims[0] {
            return Err(err(
                "input_quant.bias",
                format!("expected {} entries, found {}", self.dims[0], iq.bias.len()),
            ));
        }
        if let Some(i) = iq.scale.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(err(format!("input_quant.scale[{i}]"), "must be positive and finite"));
        }
        if let Some(i) = iq.bias.iter().position(|s| !s.is_finite()) {
            return Err(err(format!("input_quant.bias[{i}]"), "must be finite"));
        }

        let mut prev_bits = iq.bits;
        for (l, layer) in self.layers.iter().enumerate() {
            let at = |field: &str| format!("layers[{l}].{field}");
            if layer.d_in != self.dims[l] {
                return Err(err(at("d_in"), format!("expected dims[{l}] = {}", self.dims[l])));
            }
            if layer.d_out != self.dims[l + 1] {
                return Err(err(at("d_out"), format!("expected dims[{}] = {}", l + 1, self.dims[l + 1])));
            }
            check_bits(&at("in_bits"), layer.in_bits)?;
            check_bits(&at("out_bits"), layer.out_bits)?;
            if layer.in_bits != prev_bits {
                return Err(err(
                    at("in_bits"),
                    format!("{} does not match the previous layer's {prev_bits} output bits", layer.in_bits),
                ));
            }
            prev_bits = layer.out_bits;
            if layer.guard_bits > 32 {
                return Err(err(at("guard_bits"), "at most 32 guard bits"));
            }
            check_domain(&format!("layers[{l}]"), layer.a, layer.b)?;
            if layer.adder_fanin < 2 {
                return Err(err(at("adder_fanin"), "must be at least 2"));
            }
            if layer.offsets.len() != layer.d_out {
                return Err(err(
                    at("offsets"),
                    format!("expected {} offsets, found {}", layer.d_out, layer.offsets.len()),
                ));
            }
            let mut seen = HashSet::new();
            for (e, edge) in layer.edges.iter().enumerate() {
                let at = |field: &str| format!("layers[{l}].edges[{e}].{field}");
                if edge.in_neuron >= layer.d_in {
                    return Err(err(at("in"), format!("neuron {} >= d_in {}", edge.in_neuron, layer.d_in)));
                }
                if edge.out_neuron >= layer.d_out {
                    return Err(err(at("out"), format!("neuron {} >= d_out {}", edge.out_neuron, layer.d_out)));
                }
                if !seen.insert((edge.in_neuron, edge.out_neuron)) {
                    return Err(err(format!("layers[{l}].edges[{e}]"), "duplicate edge"));
                }
                let expected = 1usize << layer.in_bits;
                if edge.table.len() != expected {
                    return Err(err(
                        at("table"),
                        format!("expected {expected} entries for {} input bits, found {}", layer.in_bits, edge.table.len()),
                    ));
                }
                if edge.entry_bits == 0 || edge.entry_bits > 64 {
                    return Err(err(at("entry_bits"), "must be in 1..=64"));
                }
                if let Some(i) = edge.table.iter().position(|&v| signed_width(v) > edge.entry_bits) {
                    return Err(err(
                        format!("layers[{l}].edges[{e}].table[{i}]"),
                        format!("{} does not fit {} signed bits", edge.table[i], edge.entry_bits),
                    ));
                }
            }
            if let Some((q, bits)) = layer
                .accumulator_bits()
                .into_iter()
                .enumerate()
                .find(|(_, b)| *b > MAX_ACCUMULATOR_BITS)
            {
                return Err(err(
                    at("edges"),
                    format!("neuron {q} needs a {bits}-bit accumulator (max {MAX_ACCUMULATOR_BITS})"),
                ));
            }
            if let Some(next) = self.layers.get(l + 1) {
                let fan_in = layer.fan_in();
                for (q, &n) in fan_in.iter().enumerate() {
                    let feeds = next.edges.iter().any(|e| e.in_neuron == q);
                    if n > 0 && !feeds {
                        return Err(err(
                            at("edges"),
                            format!("neuron {q} has {n} incoming edges but no outgoing edges in layer {}", l + 1),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Compiles a network into its LUT graph. Tables come from
/// [`crate::kan::KanLayer::edge_entry`], the same routine the quantized
/// training forward uses.
pub fn extract(net: &KanNetwork) -> Result<LutGraph> {
    extract_with(net, DEFAULT_ADDER_FANIN)
}

pub fn extract_with(net: &KanNetwork, adder_fanin: usize) -> Result<LutGraph> {
    net.validate()?;
    let input = net.input_quant();
    let mut layers = Vec::with_capacity(net.layers().len());
    for (l, layer) in net.layers().iter().enumerate() {
        let in_spec = *net.in_spec(l);
        let out = *layer.out_quant();
        let active: Vec<(usize, usize)> = (0..layer.d_out())
            .flat_map(|q| (0..layer.d_in()).map(move |p| (q, p)))
            .filter(|&(q, p)| layer.edge(q, p).active)
            .collect();
        let edges = active
            .par_iter()
            .map(|&(q, p)| {
                let table = (0..in_spec.levels())
                    .map(|c| layer.edge_entry(q, p, in_spec.decode_unchecked(c), net.base()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(LutEdge::new(p, q, table))
            })
            .collect::<Result<Vec<_>>>()?;
        let offset = out.code_offset()?;
        let (a, b) = out.domain();
        layers.push(LutLayer {
            d_in: layer.d_in(),
            d_out: layer.d_out(),
            in_bits: in_spec.bits(),
            out_bits: out.bits(),
            guard_bits: out.guard_bits(),
            a,
            b,
            adder_fanin,
            offsets: vec![offset; layer.d_out()],
            edges,
        });
    }
    let (a, b) = input.base.domain();
    let graph = LutGraph {
        version: LUT_VERSION.to_string(),
        dims: net.dims().to_vec(),
        input_quant: InputCodec {
            bits: input.base.bits(),
            a,
            b,
            scale: input.scale,
            bias: input.bias,
        },
        layers,
        meta: GraphMeta {
            seed: net.seed(),
            source_checkpoint: Checkpoint::from_network(net, None).digest(),
        },
    };
    if let Err(e) = graph.validate() {
        return match e {
            KanError::Schema { message, .. } if message.contains("accumulator") => {
                Err(KanError::Overflow(message))
            }
            other => Err(KanError::InvalidGraph(other.to_string())),
        };
    }
    Ok(graph)
}

/// Smallest two's-complement width holding `v`.
pub fn signed_width(v: i64) -> u32 {
    let magnitude = if v < 0 { !v } else { v };
    64 - magnitude.leading_zeros() + 1
}

/// Smallest width holding every entry of a table (1 for an empty table).
pub fn min_entry_bits(table: &[i64]) -> u32 {
    table.iter().map(|&v| signed_width(v)).max().unwrap_or(1)
}

pub fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

fn check_bits(path: &str, bits: u32) -> Result<()> {
    if (1..=MAX_BITS).contains(&bits) {
        Ok(())
    } else {
        Err(KanError::schema(path, format!("{bits} outside 1..={MAX_BITS}")))
    }
}

fn check_domain(path: &str, a: f64, b: f64) -> Result<()> {
    if a.is_finite() && b.is_finite() && a < b {
        Ok(())
    } else {
        Err(KanError::schema(format!("{path}.a"), format!("domain [{a}, {b}] needs a < b")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kan::{KanEdge, KanSpec};

    #[test]
    fn widths() {
        assert_eq!(signed_width(0), 1);
        assert_eq!(signed_width(-1), 1);
        assert_eq!(signed_width(1), 2);
        assert_eq!(signed_width(127), 8);
        assert_eq!(signed_width(128), 9);
        assert_eq!(signed_width(-128), 8);
        assert_eq!(signed_width(-129), 9);
        assert_eq!(signed_width(i64::MAX), 64);
        assert_eq!(signed_width(i64::MIN), 64);
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(4), 2);
        assert_eq!(ceil_log2(5), 3);
    }

    fn layer(out_bits: u32, guard: u32) -> LutLayer {
        LutLayer {
            d_in: 1,
            d_out: 1,
            in_bits: 2,
            out_bits,
            guard_bits: guard,
            a: -8.0,
            b: 8.0,
            adder_fanin: 4,
            offsets: vec![0],
            edges: vec![],
        }
    }

    #[test]
    fn requantize_examples() {
        let l = layer(5, 8);
        assert_eq!(l.requantize_sum(0, 0), 0);
        assert_eq!(l.requantize_sum(0, 31 << 8), 31);
        assert_eq!(l.requantize_sum(0, i64::MAX), 31);
        assert_eq!(l.requantize_sum(0, -1_000_000), 0);
        assert_eq!(l.requantize_sum(0, 128), 1);
        assert_eq!(l.requantize_sum(0, 127), 0);
        assert_eq!(requantize_with(i64::MAX, i64::MAX, 8, 5), 31);
    }

    #[test]
    fn one_edge_extraction_by_hand() {
        // 1x1 layer, 2-bit inputs on [-8, 8], spline c = [1, ..] so φ ≡ 1 and w_base = 0.
        let spec = KanSpec::new(vec![1, 1], vec![2, 4], 2, 1, (-8.0, 8.0));
        let mut net = KanNetwork::zeros(&spec, 0).unwrap();
        let nb = net.layers()[0].basis().len();
        *net.layers_mut()[0].edge_mut(0, 0) = KanEdge {
            w_base: 0.0,
            coeffs: vec![1.0; nb],
            active: true,
        };
        let graph = extract(&net).unwrap();
        let edge = &graph.layers[0].edges[0];
        // δ_out = 16/15, entry = round(1 · 256 · 15/16) = 240 for every code.
        assert_eq!(edge.table, vec![240; 4]);
        assert_eq!(edge.entry_bits, 9);
        // offset = round(8 · 256 · 15/16) = 1920
        assert_eq!(graph.layers[0].offsets, vec![1920]);

        // Linear spline through the coefficients: degree-1 basis on a
        // 2-interval grid is the hat functions at knots -8, 0, 8.
        net.layers_mut()[0].edge_mut(0, 0).coeffs = vec![-2.0, 0.0, 2.0];
        let graph = extract(&net).unwrap();
        let step_in = 16.0 / 3.0;
        let expected: Vec<i64> = (0..4)
            .map(|c| {
                let x: f64 = -8.0 + c as f64 * step_in;
                (x / 4.0 * 240.0).round() as i64
            })
            .collect();
        assert_eq!(graph.layers[0].edges[0].table, expected);
        assert_eq!(expected, vec![-480, -160, 160, 480]);
    }

    #[test]
    fn fully_pruned_layer_has_no_edges() {
        let spec = KanSpec::new(vec![2, 3], vec![3, 4], 3, 2, (-8.0, 8.0));
        let mut net = KanNetwork::init(&spec, 2).unwrap();
        for q in 0..3 {
            for p in 0..2 {
                net.layers_mut()[0].edge_mut(q, p).active = false;
            }
        }
        let graph = extract(&net).unwrap();
        assert!(graph.layers[0].edges.is_empty());
        let q = net.layers()[0].out_quant();
        for n in 0..3 {
            assert_eq!(graph.layers[0].requantize_sum(n, 0), q.encode(0.0));
        }
    }

    #[test]
    fn extraction_rejects_orphans() {
        let spec = KanSpec::new(vec![2, 2, 1], vec![3, 3, 4], 3, 2, (-8.0, 8.0));
        let mut net = KanNetwork::init(&spec, 2).unwrap();
        net.layers_mut()[1].edge_mut(0, 0).active = false;
        assert!(matches!(extract(&net), Err(KanError::InvalidNetwork(_))));
    }

    #[test]
    fn extraction_rejects_huge_entries() {
        let spec = KanSpec::new(vec![1, 1], vec![2, 16], 2, 1, (-8.0, 8.0));
        let mut net = KanNetwork::init(&spec, 2).unwrap();
        net.layers_mut()[0].scale = 1e16;
        assert!(matches!(extract(&net), Err(KanError::Overflow(_))));
    }

    #[test]
    fn json_round_trip_and_version() {
        let spec = KanSpec::new(vec![2, 2, 1], vec![3, 3, 4], 3, 2, (-8.0, 8.0));
        let graph = extract(&KanNetwork::init(&spec, 9).unwrap()).unwrap();
        let text = graph.to_json();
        assert_eq!(LutGraph::from_json(&text).unwrap(), graph);
        let bad = text.replace(LUT_VERSION, "kanele-lut-v0");
        let err = LutGraph::from_json(&bad).unwrap_err();
        assert!(err.to_string().starts_with("version:"), "{err}");
    }
}
