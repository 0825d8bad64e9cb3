//! Structural resource counts and scaling sweeps.
//!
//! Everything here is derived from the graph alone. Register counts are a
//! flip-flop proxy: registered bits of the pipeline as emitted by
//! [`crate::rtl`], not a vendor estimate.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{run_training, RunConfig};
use crate::error::{KanError, Result};
use crate::lutir::{extract_with, LutGraph, LutLayer};
use crate::rtl::{latency_cycles, plan_adder_tree};
use crate::sim::{sim_batch, LabelDecoder};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LayerResources {
    pub layer: usize,
    pub d_in: usize,
    pub d_out: usize,
    pub in_bits: u32,
    pub out_bits: u32,
    pub active_edges: usize,
    pub table_entries: u64,
    pub table_bits: u64,
    /// Registered adder-tree and alignment bits.
    pub accumulator_registers: u64,
    /// Accumulator registers plus the output-code register.
    pub pipeline_registers: u64,
    pub adder_depth: usize,
    pub max_fan_in: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ResourceTotals {
    pub active_edges: usize,
    pub table_entries: u64,
    pub table_bits: u64,
    pub accumulator_registers: u64,
    /// Includes the input-code register.
    pub pipeline_registers: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ResourceReport {
    pub n_add: usize,
    pub layers: Vec<LayerResources>,
    pub total: ResourceTotals,
    pub latency_cycles: usize,
    pub bits_per_edge: f64,
}

fn layer_resources(l: usize, layer: &LutLayer, n_add: usize) -> Result<LayerResources> {
    let acc = layer.accumulator_bits();
    let fan_in = layer.fan_in();
    let mut plans = Vec::with_capacity(layer.d_out);
    for &n in &fan_in {
        plans.push(if n == 0 { None } else { Some(plan_adder_tree(n, n_add)?) });
    }
    let depth = plans.iter().flatten().map(|p| p.depth).max().unwrap_or(0);
    let mut acc_regs = 0u64;
    for (q, plan) in plans.iter().enumerate() {
        let own = plan.as_ref().map_or(0, |p| p.depth);
        let stage_regs: usize = plan.as_ref().map_or(0, |p| p.stages.iter().map(Vec::len).sum());
        acc_regs += (stage_regs + depth - own) as u64 * acc[q] as u64;
    }
    let table_bits = layer
        .edges
        .iter()
        .map(|e| (e.table.len() as u64) * e.entry_bits as u64)
        .sum();
    Ok(LayerResources {
        layer: l,
        d_in: layer.d_in,
        d_out: layer.d_out,
        in_bits: layer.in_bits,
        out_bits: layer.out_bits,
        active_edges: layer.edges.len(),
        table_entries: layer.table_entries(),
        table_bits,
        accumulator_registers: acc_regs,
        pipeline_registers: acc_regs + (layer.d_out as u64) * layer.out_bits as u64,
        adder_depth: depth,
        max_fan_in: fan_in.into_iter().max().unwrap_or(0),
    })
}

/// Resource counts for `graph` with an `n_add`-input adder tree. A graph
/// without layers reports all zeros.
pub fn resources(graph: &LutGraph, n_add: usize) -> Result<ResourceReport> {
    if n_add < 2 {
        return Err(KanError::Config(format!("n_add {n_add} must be at least 2")));
    }
    if graph.layers.is_empty() {
        return Ok(ResourceReport {
            n_add,
            ..ResourceReport::default()
        });
    }
    let layers = graph
        .layers
        .iter()
        .enumerate()
        .map(|(l, layer)| layer_resources(l, layer, n_add))
        .collect::<Result<Vec<_>>>()?;
    let input_regs = graph.layers[0].d_in as u64 * graph.layers[0].in_bits as u64;
    let total = ResourceTotals {
        active_edges: layers.iter().map(|l| l.active_edges).sum(),
        table_entries: layers.iter().map(|l| l.table_entries).sum(),
        table_bits: layers.iter().map(|l| l.table_bits).sum(),
        accumulator_registers: layers.iter().map(|l| l.accumulator_registers).sum(),
        pipeline_registers: input_regs + layers.iter().map(|l| l.pipeline_registers).sum::<u64>(),
    };
    let bits_per_edge = if total.active_edges == 0 {
        0.0
    } else {
        total.table_bits as f64 / total.active_edges as f64
    };
    Ok(ResourceReport {
        n_add,
        latency_cycles: latency_cycles(graph, n_add)?,
        layers,
        total,
        bits_per_edge,
    })
}

impl ResourceReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "latency_cycles: {} (n_add = {})", self.latency_cycles, self.n_add).unwrap();
        writeln!(
            s,
            "{:>5} {:>9} {:>7} {:>6} {:>14} {:>12} {:>10} {:>6}",
            "layer", "shape", "bits", "edges", "table_entries", "table_bits", "ff_proxy", "depth"
        )
        .unwrap();
        for l in &self.layers {
            writeln!(
                s,
                "{:>5} {:>9} {:>7} {:>6} {:>14} {:>12} {:>10} {:>6}",
                l.layer,
                format!("{}x{}", l.d_in, l.d_out),
                format!("{}->{}", l.in_bits, l.out_bits),
                l.active_edges,
                l.table_entries,
                l.table_bits,
                l.pipeline_registers,
                l.adder_depth
            )
            .unwrap();
        }
        writeln!(
            s,
            "{:>5} {:>9} {:>7} {:>6} {:>14} {:>12} {:>10}",
            "total", "", "", self.total.active_edges, self.total.table_entries, self.total.table_bits,
            self.total.pipeline_registers
        )
        .unwrap();
        writeln!(s, "bits_per_edge: {:.1}", self.bits_per_edge).unwrap();
        s
    }

    /// One row per layer followed by a `total` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "layer,d_in,d_out,in_bits,out_bits,active_edges,table_entries,table_bits,accumulator_registers,pipeline_registers,adder_depth,latency_cycles\n",
        );
        for l in &self.layers {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},",
                l.layer,
                l.d_in,
                l.d_out,
                l.in_bits,
                l.out_bits,
                l.active_edges,
                l.table_entries,
                l.table_bits,
                l.accumulator_registers,
                l.pipeline_registers,
                l.adder_depth
            )
            .unwrap();
        }
        let t = &self.total;
        writeln!(
            s,
            "total,,,,,{},{},{},{},{},,{}",
            t.active_edges, t.table_entries, t.table_bits, t.accumulator_registers, t.pipeline_registers,
            self.latency_cycles
        )
        .unwrap();
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Every hidden layer width.
    Width,
    /// Every layer's input bit width (output bits unchanged).
    Bits,
    /// Full pruning threshold `T`.
    PruneT,
}

impl std::str::FromStr for SweepAxis {
    type Err = KanError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "width" => Ok(SweepAxis::Width),
            "bits" => Ok(SweepAxis::Bits),
            "prune_t" | "prune-t" | "prune_T" => Ok(SweepAxis::PruneT),
            _ => Err(KanError::Config(format!("unknown sweep axis {s:?} (width, bits, prune_t)"))),
        }
    }
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Width => "width",
            SweepAxis::Bits => "bits",
            SweepAxis::PruneT => "prune_t",
        }
    }

    /// Template with the axis set to `value`.
    pub fn apply(self, template: &RunConfig, value: f64) -> Result<RunConfig> {
        let mut cfg = template.clone();
        let as_int = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(KanError::Config(format!("{} axis needs positive integers, got {value}", self.name())))
            }
        };
        match self {
            SweepAxis::Width => {
                let n = cfg.model.dims.len();
                let w = as_int()?;
                for d in &mut cfg.model.dims[1..n - 1] {
                    *d = w;
                }
            }
            SweepAxis::Bits => {
                let n = cfg.model.bits.len();
                let b = as_int()? as u32;
                for bits in &mut cfg.model.bits[..n - 1] {
                    *bits = b;
                }
            }
            SweepAxis::PruneT => {
                cfg.prune.threshold = value;
                if cfg.prune.warmup_start >= cfg.prune.warmup_target {
                    cfg.prune.warmup_start = 0;
                    cfg.prune.warmup_target = (cfg.train.epochs / 2).max(1);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: &'static str,
    pub value: f64,
    pub accuracy: f64,
    pub active_edges: usize,
    pub table_entries: u64,
    pub table_bits: u64,
    pub pipeline_registers: u64,
    pub latency_cycles: usize,
    /// Per-layer table entries.
    pub layer_table_entries: Vec<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "axis,value,accuracy,active_edges,table_entries,table_bits,pipeline_registers,latency_cycles,layer_table_entries\n",
        );
        for r in &self.rows {
            let per_layer: Vec<String> = r.layer_table_entries.iter().map(u64::to_string).collect();
            writeln!(
                s,
                "{},{},{:.6},{},{},{},{},{},{}",
                r.axis,
                r.value,
                r.accuracy,
                r.active_edges,
                r.table_entries,
                r.table_bits,
                r.pipeline_registers,
                r.latency_cycles,
                per_layer.join(";")
            )
            .unwrap();
        }
        s
    }
}

/// Trains, extracts and measures the template at each point. Points run in
/// parallel; rows keep the order of `points`.
pub fn scaling_sweep(template: &RunConfig, axis: SweepAxis, points: &[f64]) -> Result<SweepTable> {
    let rows = points
        .par_iter()
        .map(|&value| {
            let cfg = axis.apply(template, value)?;
            let outcome = run_training(&cfg)?;
            let graph = extract_with(&outcome.net, cfg.hardware.n_add)?;
            let sim = sim_batch(&graph, &outcome.test_set, LabelDecoder::for_graph(&graph)?)?;
            let res = resources(&graph, cfg.hardware.n_add)?;
            Ok(SweepRow {
                axis: axis.name(),
                value,
                accuracy: sim.accuracy.unwrap_or(f64::NAN),
                active_edges: res.total.active_edges,
                table_entries: res.total.table_entries,
                table_bits: res.total.table_bits,
                pipeline_registers: res.total.pipeline_registers,
                latency_cycles: res.latency_cycles,
                layer_table_entries: res.layers.iter().map(|l| l.table_entries).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { rows })
}
