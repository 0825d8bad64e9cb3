//! Bit-exact integer simulator for [`LutGraph`]s.
//!
//! `sim_forward` is the golden model: table lookups, exact `i64` sums and
//! the shared requantization, with no floating point between input and
//! output codes. Emitted testbenches take their expected outputs from here.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Dataset, Targets};
use crate::error::{KanError, Result};
use crate::lutir::LutGraph;

/// One stimulus with optional expected outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimVector {
    pub inputs: Vec<u32>,
    pub expected: Option<Vec<u32>>,
}

impl SimVector {
    pub fn new(inputs: Vec<u32>) -> Self {
        SimVector {
            inputs,
            expected: None,
        }
    }

    pub fn check_width(&self, graph: &LutGraph) -> Result<()> {
        check_codes(&self.inputs, graph.input_width(), graph.input_bits())?;
        if let Some(out) = &self.expected {
            check_codes(out, graph.output_width(), graph.output_bits())?;
        }
        Ok(())
    }
}

fn check_codes(codes: &[u32], width: usize, bits: u32) -> Result<()> {
    if codes.len() != width {
        return Err(KanError::Vectors(format!(
            "vector has {} codes, expected {width}",
            codes.len()
        )));
    }
    if let Some(c) = codes.iter().find(|&&c| c >> bits != 0) {
        return Err(KanError::Vectors(format!("code {c} exceeds {bits} bits")));
    }
    Ok(())
}

pub fn sim_forward(graph: &LutGraph, in_codes: &[u32]) -> Result<Vec<u32>> {
    check_codes(in_codes, graph.input_width(), graph.input_bits())?;
    let mut codes = in_codes.to_vec();
    let mut sums = Vec::new();
    for layer in &graph.layers {
        sums.clear();
        sums.resize(layer.d_out, 0i64);
        for edge in &layer.edges {
            sums[edge.out_neuron] += edge.table[codes[edge.in_neuron] as usize];
        }
        codes = sums
            .iter()
            .enumerate()
            .map(|(q, &s)| layer.requantize_sum(q, s))
            .collect();
    }
    Ok(codes)
}

/// Maps output codes to a class: argmax over codes, or a threshold code
/// for single-output networks (class 1 when the code decodes above zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelDecoder {
    Argmax,
    Threshold { min_positive_code: u32 },
}

impl LabelDecoder {
    /// Decoder matching [`crate::kan::KanNetwork::classify`] for a graph.
    pub fn for_graph(graph: &LutGraph) -> Result<Self> {
        if graph.output_width() != 1 {
            return Ok(LabelDecoder::Argmax);
        }
        let spec = graph.output_spec()?;
        let min_positive_code = (0..spec.levels())
            .find(|&c| spec.decode_unchecked(c) > 0.0)
            .unwrap_or(spec.levels());
        Ok(LabelDecoder::Threshold { min_positive_code })
    }

    pub fn decode(&self, codes: &[u32]) -> usize {
        match *self {
            LabelDecoder::Threshold { min_positive_code } => {
                usize::from(codes[0] >= min_positive_code)
            }
            LabelDecoder::Argmax => {
                let mut best = 0;
                for (i, c) in codes.iter().enumerate() {
                    if *c > codes[best] {
                        best = i;
                    }
                }
                best
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SimReport {
    pub samples: usize,
    /// Classification tasks only.
    pub correct: Option<usize>,
    pub accuracy: Option<f64>,
    /// Regression tasks: mean squared error of decoded outputs.
    pub mse: Option<f64>,
}

impl SimReport {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "samples,correct,accuracy,mse\n{},{},{},{}\n",
            self.samples,
            self.correct.map(|c| c.to_string()).unwrap_or_default(),
            opt(self.accuracy),
            opt(self.mse)
        )
    }
}

/// Encodes every sample through the graph's input codec and runs
/// [`sim_forward`]; per-sample work runs in parallel, aggregation is in
/// sample order.
pub fn sim_batch(graph: &LutGraph, data: &Dataset, decoder: LabelDecoder) -> Result<SimReport> {
    if data.is_empty() {
        return Ok(SimReport::default());
    }
    let codec = graph.input_codec()?;
    let outputs = data
        .features
        .par_iter()
        .map(|x| sim_forward(graph, &codec.encode(x)?))
        .collect::<Result<Vec<_>>>()?;
    match &data.targets {
        Targets::Classes { labels, .. } => {
            let correct = outputs
                .iter()
                .zip(labels)
                .filter(|(out, &y)| decoder.decode(out) == y)
                .count();
            Ok(SimReport {
                samples: data.len(),
                correct: Some(correct),
                accuracy: Some(correct as f64 / data.len() as f64),
                mse: None,
            })
        }
        Targets::Values(values) => {
            let spec = graph.output_spec()?;
            let mut total = 0.0;
            let mut count = 0usize;
            for (out, target) in outputs.iter().zip(values) {
                for (c, t) in out.iter().zip(target) {
                    let d = spec.decode_unchecked(*c) - t;
                    total += d * d;
                    count += 1;
                }
            }
            Ok(SimReport {
                samples: data.len(),
                correct: None,
                accuracy: None,
                mse: Some(total / count.max(1) as f64),
            })
        }
    }
}

/// Formats one code vector as `kanele-vec-v1` hex: codes packed
/// `bits` wide, the highest-index neuron in the most significant position,
/// zero-padded to whole hex digits.
pub fn format_vector(codes: &[u32], bits: u32) -> String {
    let total_bits = codes.len() * bits as usize;
    let digits = total_bits.div_ceil(4).max(1);
    let mut nibbles = vec![0u8; digits];
    for (i, &c) in codes.iter().enumerate() {
        for k in 0..bits as usize {
            if (c >> k) & 1 == 1 {
                let pos = i * bits as usize + k;
                nibbles[pos / 4] |= 1 << (pos % 4);
            }
        }
    }
    nibbles
        .iter()
        .rev()
        .map(|n| char::from_digit(*n as u32, 16).expect("nibble"))
        .collect()
}

pub fn parse_vector(line: &str, width: usize, bits: u32) -> Result<Vec<u32>> {
    let line = line.trim();
    let digits = (width * bits as usize).div_ceil(4).max(1);
    if line.len() != digits {
        return Err(KanError::Vectors(format!(
            "expected {digits} hex digits, found {:?}",
            line
        )));
    }
    let mut nibbles = Vec::with_capacity(digits);
    for ch in line.chars().rev() {
        let n = ch
            .to_digit(16)
            .ok_or_else(|| KanError::Vectors(format!("invalid hex digit {ch:?}")))?;
        nibbles.push(n);
    }
    let bit = |pos: usize| (nibbles[pos / 4] >> (pos % 4)) & 1;
    let used = width * bits as usize;
    if (used..digits * 4).any(|pos| bit(pos) == 1) {
        return Err(KanError::Vectors(format!("padding bits set in {line:?}")));
    }
    Ok((0..width)
        .map(|i| (0..bits as usize).fold(0u32, |acc, k| acc | (bit(i * bits as usize + k) << k)))
        .collect())
}

/// One vector per line, newline-terminated.
pub fn format_vectors<'a>(vectors: impl IntoIterator<Item = &'a [u32]>, bits: u32) -> String {
    let mut out = String::new();
    for v in vectors {
        out.push_str(&format_vector(v, bits));
        out.push('\n');
    }
    out
}

pub fn parse_vectors(text: &str, width: usize, bits: u32) -> Result<Vec<Vec<u32>>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            parse_vector(l, width, bits).map_err(|e| KanError::Vectors(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lutir::{LutEdge, LutLayer, LUT_VERSION};
    use crate::lutir::{GraphMeta, InputCodec};

    /// 1 input, 1 output, 2-bit codes, one edge with a hand-written table.
    fn tiny() -> LutGraph {
        LutGraph {
            version: LUT_VERSION.into(),
            dims: vec![1, 1],
            input_quant: InputCodec {
                bits: 2,
                a: -8.0,
                b: 8.0,
                scale: vec![1.0],
                bias: vec![0.0],
            },
            layers: vec![LutLayer {
                d_in: 1,
                d_out: 1,
                in_bits: 2,
                out_bits: 3,
                guard_bits: 4,
                a: -8.0,
                b: 8.0,
                adder_fanin: 4,
                offsets: vec![56],
                edges: vec![LutEdge::new(0, 0, vec![-60, -9, 8, 100])],
            }],
            meta: GraphMeta::default(),
        }
    }

    #[test]
    fn hand_traced_lookups() {
        let g = tiny();
        g.validate().unwrap();
        // (table + 56) / 16 rounded half away, clamped to 0..=7:
        // -4 -> -0.25 -> 0; 47 -> 2.94 -> 3; 64 -> 4; 156 -> 9.75 -> 7
        let outs: Vec<u32> = (0..4).map(|c| sim_forward(&g, &[c]).unwrap()[0]).collect();
        assert_eq!(outs, vec![0, 3, 4, 7]);
    }

    #[test]
    fn zero_tables_give_offset_code() {
        let mut g = tiny();
        g.layers[0].edges[0].table = vec![0; 4];
        for c in 0..4 {
            assert_eq!(sim_forward(&g, &[c]).unwrap(), vec![g.layers[0].requantize_sum(0, 0)]);
        }
        assert_eq!(g.layers[0].requantize_sum(0, 0), 4);
    }

    #[test]
    fn width_violations() {
        let g = tiny();
        assert!(sim_forward(&g, &[4]).is_err());
        assert!(sim_forward(&g, &[1, 1]).is_err());
    }

    #[test]
    fn decoders() {
        assert_eq!(LabelDecoder::Argmax.decode(&[3, 9, 9, 1]), 1);
        let t = LabelDecoder::Threshold { min_positive_code: 4 };
        assert_eq!(t.decode(&[3]), 0);
        assert_eq!(t.decode(&[4]), 1);
        // 3-bit on [-8, 8]: code 4 decodes to 8/7 > 0, code 3 to -8/7.
        assert_eq!(LabelDecoder::for_graph(&tiny()).unwrap(), t);
    }

    #[test]
    fn vector_format() {
        assert_eq!(format_vector(&[5], 3), "5");
        // neuron 1 = 0x2A in bits 6..11, neuron 0 = 0x01 in bits 0..5
        assert_eq!(format_vector(&[1, 0x2A], 6), "a81");
        assert_eq!(parse_vector("a81", 2, 6).unwrap(), vec![1, 0x2A]);
        assert_eq!(format_vector(&[1, 2, 3], 2), "39");
        assert!(parse_vector("f", 1, 3).is_err());
        assert!(parse_vector("12", 1, 3).is_err());
        assert!(parse_vector("g", 1, 3).is_err());
        let text = format_vectors([&[1u32, 2][..], &[3, 0][..]], 2);
        assert_eq!(text, "9\n3\n");
        assert_eq!(parse_vectors(&text, 2, 2).unwrap(), vec![vec![1, 2], vec![3, 0]]);
    }
}
