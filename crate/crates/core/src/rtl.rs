//! VHDL generation for LUT graphs.
//!
//! Pipeline per layer: combinational table lookups feed a balanced adder tree
//! with a register after every stage; the root adds the neuron offset,
//! requantizes and saturates, and the resulting code is registered. Neurons
//! with shallower trees are delayed to the layer's deepest tree. The top
//! level registers its input, so an inference takes
//! `1 + Σ_l (1 + depth_l)` cycles.
//!
//! Output tree:
//!
//! ```text
//! rtl/<prefix>_config_pkg.vhd     widths, latency, requantize function
//! rtl/<prefix>_layer<l>_pkg.vhd   ROM contents and offsets
//! rtl/<prefix>_layer<l>.vhd       LUT entities and the layer entity
//! rtl/<prefix>_top.vhd            top level with valid shift register
//! tb/<prefix>_tb.vhd              self-checking testbench
//! tb/stimulus.vec, tb/expected.vec
//! scripts/build.tcl
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{KanError, Result};
use crate::lutir::{LutGraph, LutLayer};
use crate::sim::{format_vector, sim_forward, SimVector};

/// Environment variable naming an external HDL simulator command used by
/// the optional testbench smoke test.
pub const HDL_SIM_ENV: &str = "KANELE_HDL_SIM";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdderPlan {
    pub fan_in: usize,
    pub n_add: usize,
    /// Operand group sizes for each registered stage.
    pub stages: Vec<Vec<usize>>,
    pub depth: usize,
}

/// Balanced reduction of `fan_in` operands, at most `n_add` per adder.
pub fn plan_adder_tree(fan_in: usize, n_add: usize) -> Result<AdderPlan> {
    if fan_in == 0 {
        return Err(KanError::InvalidGraph("adder tree needs at least one operand".into()));
    }
    if n_add < 2 {
        return Err(KanError::InvalidGraph(format!("adder fan-in {n_add} must be at least 2")));
    }
    let mut stages = Vec::new();
    let mut operands = fan_in;
    while operands > 1 {
        let groups = operands.div_ceil(n_add);
        let base = operands / groups;
        let extra = operands % groups;
        stages.push((0..groups).map(|g| base + usize::from(g < extra)).collect());
        operands = groups;
    }
    Ok(AdderPlan {
        fan_in,
        n_add,
        depth: stages.len(),
        stages,
    })
}

/// Deepest adder tree of a layer; neurons without edges count as depth 0.
pub fn layer_depth(layer: &LutLayer, n_add: usize) -> Result<usize> {
    let mut depth = 0;
    for n in layer.fan_in() {
        if n > 0 {
            depth = depth.max(plan_adder_tree(n, n_add)?.depth);
        }
    }
    Ok(depth)
}

/// Cycles from input to output: input register, then per layer the tree
/// stages plus the output-code register.
pub fn latency_cycles(graph: &LutGraph, n_add: usize) -> Result<usize> {
    let mut cycles = 1;
    for layer in &graph.layers {
        cycles += 1 + layer_depth(layer, n_add)?;
    }
    Ok(cycles)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RtlOptions {
    pub n_add: usize,
    pub entity_prefix: String,
    /// Clock period used by the testbench and the build script.
    pub target_clock_ns: f64,
}

impl Default for RtlOptions {
    fn default() -> Self {
        RtlOptions {
            n_add: 4,
            entity_prefix: "kan".into(),
            target_clock_ns: 10.0,
        }
    }
}

impl RtlOptions {
    pub fn validate(&self) -> Result<()> {
        let p = &self.entity_prefix;
        let valid = p.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
            && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            && !p.ends_with('_')
            && !p.contains("__");
        if !valid {
            return Err(KanError::Config(format!("{p:?} is not a valid VHDL identifier prefix")));
        }
        if self.n_add < 2 {
            return Err(KanError::Config(format!("n_add {} must be at least 2", self.n_add)));
        }
        if !(self.target_clock_ns.is_finite() && self.target_clock_ns > 0.0) {
            return Err(KanError::Config("clock period must be positive".into()));
        }
        Ok(())
    }
}

/// Generated files keyed by relative path.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RtlBundle {
    pub files: BTreeMap<String, String>,
}

impl RtlBundle {
    pub fn get(&self, path: &str) -> Option<&str> {
        self.files.get(path).map(String::as_str)
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        for (rel, text) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| KanError::io(parent, e))?;
            }
            std::fs::write(&path, text).map_err(|e| KanError::io(&path, e))?;
        }
        Ok(())
    }
}

/// Deterministic random stimulus for a graph.
pub fn random_vectors(graph: &LutGraph, count: usize, seed: u64) -> Vec<SimVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = 1u32 << graph.input_bits();
    (0..count)
        .map(|_| SimVector::new((0..graph.input_width()).map(|_| rng.random_range(0..levels)).collect()))
        .collect()
}

/// Full bundle: RTL, build script and a testbench over `vectors`.
pub fn emit_vhdl(graph: &LutGraph, opts: &RtlOptions, vectors: &[SimVector]) -> Result<RtlBundle> {
    opts.validate()?;
    graph.validate().map_err(|e| KanError::InvalidGraph(e.to_string()))?;
    let layout = Layout::new(graph, opts)?;
    let mut bundle = RtlBundle::default();
    let p = &opts.entity_prefix;
    bundle
        .files
        .insert(format!("rtl/{p}_config_pkg.vhd"), config_pkg(&layout));
    for l in 0..graph.layers.len() {
        bundle
            .files
            .insert(format!("rtl/{p}_layer{l}_pkg.vhd"), layer_pkg(&layout, l));
        bundle
            .files
            .insert(format!("rtl/{p}_layer{l}.vhd"), layer_entity(&layout, l));
    }
    bundle.files.insert(format!("rtl/{p}_top.vhd"), top_entity(&layout));
    bundle.files.insert("scripts/build.tcl".into(), build_script(&layout));
    bundle.files.extend(emit_testbench(graph, vectors, opts)?);
    Ok(bundle)
}

/// Testbench plus stimulus/expected files. Expected outputs come from
/// [`sim_forward`].
pub fn emit_testbench(graph: &LutGraph, vectors: &[SimVector], opts: &RtlOptions) -> Result<BTreeMap<String, String>> {
    opts.validate()?;
    if vectors.is_empty() {
        return Err(KanError::Vectors("testbench needs at least one vector".into()));
    }
    for v in vectors {
        v.check_width(graph)?;
    }
    let mut stimulus = String::new();
    let mut expected = String::new();
    for v in vectors {
        let out = sim_forward(graph, &v.inputs)?;
        if let Some(want) = &v.expected {
            if *want != out {
                return Err(KanError::Vectors(format!(
                    "supplied expected outputs {want:?} disagree with the simulator ({out:?})"
                )));
            }
        }
        stimulus.push_str(&format_vector(&v.inputs, graph.input_bits()));
        stimulus.push('\n');
        expected.push_str(&format_vector(&out, graph.output_bits()));
        expected.push('\n');
    }
    let layout = Layout::new(graph, opts)?;
    let mut files = BTreeMap::new();
    files.insert(
        format!("tb/{}_tb.vhd", opts.entity_prefix),
        testbench(&layout, vectors.len()),
    );
    files.insert("tb/stimulus.vec".into(), stimulus);
    files.insert("tb/expected.vec".into(), expected);
    Ok(files)
}

/// Widths and plans resolved once for all templates.
struct Layout<'a> {
    graph: &'a LutGraph,
    opts: &'a RtlOptions,
    layers: Vec<LayerLayout>,
    latency: usize,
}

struct LayerLayout {
    depth: usize,
    neurons: Vec<NeuronLayout>,
}

struct NeuronLayout {
    /// Indices into the layer's edge list.
    edges: Vec<usize>,
    plan: Option<AdderPlan>,
    acc_bits: u32,
    /// Width of `sum + offset` handed to `requantize`.
    root_bits: u32,
}

impl<'a> Layout<'a> {
    fn new(graph: &'a LutGraph, opts: &'a RtlOptions) -> Result<Self> {
        let mut layers = Vec::new();
        for layer in &graph.layers {
            let acc = layer.accumulator_bits();
            let mut neurons: Vec<NeuronLayout> = (0..layer.d_out)
                .map(|q| NeuronLayout {
                    edges: Vec::new(),
                    plan: None,
                    acc_bits: acc[q],
                    root_bits: root_width(acc[q], layer.out_bits, layer.guard_bits),
                })
                .collect();
            for (i, e) in layer.edges.iter().enumerate() {
                neurons[e.out_neuron].edges.push(i);
            }
            for n in &mut neurons {
                if !n.edges.is_empty() {
                    n.plan = Some(plan_adder_tree(n.edges.len(), opts.n_add)?);
                }
            }
            layers.push(LayerLayout {
                depth: layer_depth(layer, opts.n_add)?,
                neurons,
            });
        }
        Ok(Layout {
            graph,
            opts,
            layers,
            latency: latency_cycles(graph, opts.n_add)?,
        })
    }

    fn prefix(&self) -> &str {
        &self.opts.entity_prefix
    }
}

/// Width of `sum + offset` at the requantizer: one bit over the
/// accumulator, and wide enough for the rounding constant and the
/// saturation compare inside `requantize`.
fn root_width(acc_bits: u32, out_bits: u32, guard_bits: u32) -> u32 {
    (acc_bits + 1).max(out_bits + 2).max(guard_bits + 2)
}

/// Two's-complement bit string literal of `width` bits.
fn bits_literal(v: i64, width: u32) -> String {
    let mut s = String::with_capacity(width as usize + 2);
    s.push('"');
    for k in (0..width).rev() {
        let bit = if k >= 64 { v < 0 } else { (v >> k) & 1 == 1 };
        s.push(if bit { '1' } else { '0' });
    }
    s.push('"');
    s
}

fn banner(title: &str) -> String {
    format!("-- {title}\n-- Generated by kanele {}; do not edit.\n", env!("CARGO_PKG_VERSION"))
}

fn header(title: &str) -> String {
    banner(title) + "\nlibrary ieee;\nuse ieee.std_logic_1164.all;\nuse ieee.numeric_std.all;\n"
}

fn hex_bits(width: usize, bits: u32) -> usize {
    (width * bits as usize).div_ceil(4).max(1) * 4
}

fn config_pkg(layout: &Layout) -> String {
    let g = layout.graph;
    let p = layout.prefix();
    let mut s = header("Configuration constants and shared requantization");
    writeln!(s, "\npackage {p}_config_pkg is").unwrap();
    writeln!(s, "  constant IN_WIDTH   : natural := {};", g.input_width()).unwrap();
    writeln!(s, "  constant IN_BITS    : natural := {};", g.input_bits()).unwrap();
    writeln!(s, "  constant OUT_WIDTH  : natural := {};", g.output_width()).unwrap();
    writeln!(s, "  constant OUT_BITS   : natural := {};", g.output_bits()).unwrap();
    writeln!(s, "  constant N_LAYERS   : natural := {};", g.layers.len()).unwrap();
    writeln!(s, "  constant N_ADD      : natural := {};", layout.opts.n_add).unwrap();
    writeln!(s, "  constant LATENCY    : natural := {};", layout.latency).unwrap();
    for (l, layer) in g.layers.iter().enumerate() {
        let ll = &layout.layers[l];
        writeln!(s, "\n  -- layer {l}: {} -> {}, {} edges", layer.d_in, layer.d_out, layer.edges.len()).unwrap();
        writeln!(s, "  constant L{l}_IN_BITS    : natural := {};", layer.in_bits).unwrap();
        writeln!(s, "  constant L{l}_OUT_BITS   : natural := {};", layer.out_bits).unwrap();
        writeln!(s, "  constant L{l}_GUARD_BITS : natural := {};", layer.guard_bits).unwrap();
        writeln!(s, "  constant L{l}_DEPTH      : natural := {};", ll.depth).unwrap();
        for (q, n) in ll.neurons.iter().enumerate() {
            writeln!(s, "  constant L{l}_N{q}_ACC_BITS : natural := {};", n.acc_bits).unwrap();
        }
    }
    s.push_str(
        r#"
  -- clamp(round_half_away(acc / 2**guard), 0, 2**out_bits - 1)
  function requantize(acc : signed; guard : natural; out_bits : natural) return unsigned;
"#,
    );
    writeln!(s, "end package {p}_config_pkg;").unwrap();
    writeln!(s, "\npackage body {p}_config_pkg is").unwrap();
    s.push_str(
        r#"
  function requantize(acc : signed; guard : natural; out_bits : natural) return unsigned is
    variable wide : signed(acc'length downto 0);
    variable r    : signed(acc'length downto 0);
  begin
    wide := resize(acc, acc'length + 1);
    if guard = 0 then
      r := wide;
    else
      r := shift_right(abs(wide) + shift_left(to_signed(1, acc'length + 1), guard - 1), guard);
      if wide < 0 then
        r := -r;
      end if;
    end if;
    if r < 0 then
      return to_unsigned(0, out_bits);
    elsif r > 2**out_bits - 1 then
      return to_unsigned(2**out_bits - 1, out_bits);
    else
      return unsigned(r(out_bits - 1 downto 0));
    end if;
  end function;
"#,
    );
    writeln!(s, "\nend package body {p}_config_pkg;").unwrap();
    s
}

fn layer_pkg(layout: &Layout, l: usize) -> String {
    let layer = &layout.graph.layers[l];
    let p = layout.prefix();
    let mut s = header(&format!("Layer {l} truth tables and offsets"));
    writeln!(s, "\npackage {p}_layer{l}_pkg is").unwrap();
    for (k, e) in layer.edges.iter().enumerate() {
        writeln!(
            s,
            "\n  -- edge {k}: input {} -> output {}, {} entries x {} bits",
            e.in_neuron,
            e.out_neuron,
            e.table.len(),
            e.entry_bits
        )
        .unwrap();
        writeln!(
            s,
            "  type rom_e{k}_t is array (0 to {}) of signed({} downto 0);",
            e.table.len() - 1,
            e.entry_bits - 1
        )
        .unwrap();
        writeln!(s, "  constant ROM_E{k} : rom_e{k}_t := (").unwrap();
        let entries: Vec<String> = e.table.iter().map(|&v| bits_literal(v, e.entry_bits)).collect();
        for (i, chunk) in entries.chunks(8).enumerate() {
            let last = (i + 1) * 8 >= entries.len();
            writeln!(s, "    {}{}", chunk.join(", "), if last { "" } else { "," }).unwrap();
        }
        writeln!(s, "  );").unwrap();
    }
    writeln!(s).unwrap();
    for (q, n) in layout.layers[l].neurons.iter().enumerate() {
        writeln!(
            s,
            "  constant OFFSET_N{q} : signed({} downto 0) := {};",
            n.root_bits - 1,
            bits_literal(layer.offsets[q], n.root_bits)
        )
        .unwrap();
    }
    writeln!(s, "end package {p}_layer{l}_pkg;").unwrap();
    s
}

fn layer_entity(layout: &Layout, l: usize) -> String {
    let layer = &layout.graph.layers[l];
    let ll = &layout.layers[l];
    let p = layout.prefix();
    let mut s = banner(&format!("Layer {l}: table lookups, adder trees, requantization"));

    for (k, e) in layer.edges.iter().enumerate() {
        write!(
            s,
            "\nlibrary ieee;\nuse ieee.std_logic_1164.all;\nuse ieee.numeric_std.all;\nuse work.{p}_layer{l}_pkg.all;\n\n\
entity {p}_l{l}_e{k} is\n  port (\n    addr : in  std_logic_vector({ab} downto 0);\n    data : out signed({eb} downto 0)\n  );\nend entity;\n\n\
architecture rtl of {p}_l{l}_e{k} is\nbegin\n  data <= ROM_E{k}(to_integer(unsigned(addr)));\nend architecture;\n",
            ab = layer.in_bits - 1,
            eb = e.entry_bits - 1,
        )
        .unwrap();
    }

    let in_bus = layer.d_in * layer.in_bits as usize;
    let out_bus = layer.d_out * layer.out_bits as usize;
    write!(
        s,
        "\nlibrary ieee;\nuse ieee.std_logic_1164.all;\nuse ieee.numeric_std.all;\nuse work.{p}_config_pkg.all;\nuse work.{p}_layer{l}_pkg.all;\n\n\
entity {p}_layer{l} is\n  port (\n    clk : in  std_logic;\n    x   : in  std_logic_vector({} downto 0);\n    y   : out std_logic_vector({} downto 0)\n  );\nend entity;\n\n\
architecture rtl of {p}_layer{l} is\n",
        in_bus - 1,
        out_bus - 1
    )
    .unwrap();

    // Declarations
    for (k, e) in layer.edges.iter().enumerate() {
        writeln!(s, "  signal e{k}_v : signed({} downto 0);", e.entry_bits - 1).unwrap();
    }
    for (q, n) in ll.neurons.iter().enumerate() {
        let aw = n.acc_bits - 1;
        if let Some(plan) = &n.plan {
            for (st, groups) in plan.stages.iter().enumerate() {
                for g in 0..groups.len() {
                    writeln!(s, "  signal n{q}_s{}_{g} : signed({aw} downto 0) := (others => '0');", st + 1).unwrap();
                }
            }
        }
        writeln!(s, "  signal n{q}_sum : signed({aw} downto 0);").unwrap();
        let pad = ll.depth - n.plan.as_ref().map_or(0, |p| p.depth);
        for d in 1..=pad {
            writeln!(s, "  signal n{q}_d{d} : signed({aw} downto 0) := (others => '0');").unwrap();
        }
        writeln!(s, "  signal n{q}_root : signed({aw} downto 0);").unwrap();
    }
    writeln!(s, "  signal y_reg : std_logic_vector({} downto 0) := (others => '0');", out_bus - 1).unwrap();
    writeln!(s, "begin").unwrap();

    // Lookups
    for (k, e) in layer.edges.iter().enumerate() {
        let lo = e.in_neuron * layer.in_bits as usize;
        let hi = lo + layer.in_bits as usize - 1;
        writeln!(
            s,
            "  u_e{k} : entity work.{p}_l{l}_e{k} port map (addr => x({hi} downto {lo}), data => e{k}_v);"
        )
        .unwrap();
    }

    // Adder trees
    for (q, n) in ll.neurons.iter().enumerate() {
        let aw = n.acc_bits;
        writeln!(s, "\n  -- neuron {q}: {} operands", n.edges.len()).unwrap();
        let Some(plan) = &n.plan else {
            writeln!(s, "  n{q}_sum <= (others => '0');").unwrap();
            continue;
        };
        let mut operands: Vec<String> = n
            .edges
            .iter()
            .map(|k| format!("resize(e{k}_v, {aw})"))
            .collect();
        if plan.depth > 0 {
            writeln!(s, "  process (clk)\n  begin\n    if rising_edge(clk) then").unwrap();
            for (st, groups) in plan.stages.iter().enumerate() {
                let mut next = Vec::new();
                let mut it = operands.into_iter();
                for (g, &size) in groups.iter().enumerate() {
                    let terms: Vec<String> = it.by_ref().take(size).collect();
                    let name = format!("n{q}_s{}_{g}", st + 1);
                    writeln!(s, "      {name} <= {};", terms.join(" + ")).unwrap();
                    next.push(name);
                }
                operands = next;
            }
            writeln!(s, "    end if;\n  end process;").unwrap();
        }
        writeln!(s, "  n{q}_sum <= {};", operands[0]).unwrap();
    }

    // Alignment, root and output register
    writeln!(s).unwrap();
    let has_delays = ll
        .neurons
        .iter()
        .any(|n| ll.depth > n.plan.as_ref().map_or(0, |p| p.depth));
    if has_delays {
        writeln!(s, "  process (clk)\n  begin\n    if rising_edge(clk) then").unwrap();
        for (q, n) in ll.neurons.iter().enumerate() {
            let pad = ll.depth - n.plan.as_ref().map_or(0, |p| p.depth);
            for d in 1..=pad {
                let src = if d == 1 { format!("n{q}_sum") } else { format!("n{q}_d{}", d - 1) };
                writeln!(s, "      n{q}_d{d} <= {src};").unwrap();
            }
        }
        writeln!(s, "    end if;\n  end process;").unwrap();
    }
    for (q, n) in ll.neurons.iter().enumerate() {
        let pad = ll.depth - n.plan.as_ref().map_or(0, |p| p.depth);
        let src = if pad == 0 { format!("n{q}_sum") } else { format!("n{q}_d{pad}") };
        writeln!(s, "  n{q}_root <= {src};").unwrap();
    }
    writeln!(s, "\n  process (clk)\n  begin\n    if rising_edge(clk) then").unwrap();
    let ob = layer.out_bits as usize;
    for (q, n) in ll.neurons.iter().enumerate() {
        let lo = q * ob;
        writeln!(
            s,
            "      y_reg({} downto {lo}) <= std_logic_vector(requantize(resize(n{q}_root, {}) + OFFSET_N{q}, L{l}_GUARD_BITS, L{l}_OUT_BITS));",
            lo + ob - 1,
            n.root_bits
        )
        .unwrap();
    }
    writeln!(s, "    end if;\n  end process;\n\n  y <= y_reg;\nend architecture;").unwrap();
    s
}

fn top_entity(layout: &Layout) -> String {
    let g = layout.graph;
    let p = layout.prefix();
    let mut s = header("Top level: input register, layers, valid pipeline");
    writeln!(s, "use work.{p}_config_pkg.all;\n").unwrap();
    writeln!(
        s,
        "entity {p}_top is\n  port (\n    clk       : in  std_logic;\n    in_valid  : in  std_logic;\n    in_codes  : in  std_logic_vector(IN_WIDTH * IN_BITS - 1 downto 0);\n    out_valid : out std_logic;\n    out_codes : out std_logic_vector(OUT_WIDTH * OUT_BITS - 1 downto 0)\n  );\nend entity;\n"
    )
    .unwrap();
    writeln!(s, "architecture rtl of {p}_top is").unwrap();
    writeln!(s, "  signal in_reg   : std_logic_vector(IN_WIDTH * IN_BITS - 1 downto 0) := (others => '0');").unwrap();
    for (l, layer) in g.layers.iter().enumerate() {
        writeln!(
            s,
            "  signal l{l}_out   : std_logic_vector({} downto 0);",
            layer.d_out * layer.out_bits as usize - 1
        )
        .unwrap();
    }
    writeln!(s, "  signal valid_sr : std_logic_vector(LATENCY - 1 downto 0) := (others => '0');").unwrap();
    writeln!(s, "begin").unwrap();
    writeln!(
        s,
        "  process (clk)\n  begin\n    if rising_edge(clk) then\n      in_reg   <= in_codes;\n      valid_sr <= valid_sr(LATENCY - 2 downto 0) & in_valid;\n    end if;\n  end process;\n"
    )
    .unwrap();
    for l in 0..g.layers.len() {
        let src = if l == 0 { "in_reg".to_string() } else { format!("l{}_out", l - 1) };
        writeln!(s, "  u_layer{l} : entity work.{p}_layer{l} port map (clk => clk, x => {src}, y => l{l}_out);").unwrap();
    }
    writeln!(
        s,
        "\n  out_codes <= l{}_out;\n  out_valid <= valid_sr(LATENCY - 1);\nend architecture;",
        g.layers.len() - 1
    )
    .unwrap();
    s
}

fn testbench(layout: &Layout, n_vectors: usize) -> String {
    let g = layout.graph;
    let p = layout.prefix();
    let in_hex = hex_bits(g.input_width(), g.input_bits());
    let out_hex = hex_bits(g.output_width(), g.output_bits());
    let half = layout.opts.target_clock_ns / 2.0;
    let mut s = header("Self-checking testbench; expected outputs come from the bit-exact simulator");
    write!(
        s,
        r#"use ieee.std_logic_textio.all;
use std.textio.all;
use work.{p}_config_pkg.all;

entity {p}_tb is
  generic (
    STIMULUS_FILE : string := "stimulus.vec";
    EXPECTED_FILE : string := "expected.vec"
  );
end entity;

architecture sim of {p}_tb is
  constant N_VECTORS  : natural := {n_vectors};
  constant HALF_CYCLE : time := {half} ns;
  signal clk       : std_logic := '0';
  signal done      : boolean := false;
  signal in_valid  : std_logic := '0';
  signal in_codes  : std_logic_vector(IN_WIDTH * IN_BITS - 1 downto 0) := (others => '0');
  signal out_valid : std_logic;
  signal out_codes : std_logic_vector(OUT_WIDTH * OUT_BITS - 1 downto 0);
begin
  clk <= not clk after HALF_CYCLE when not done else clk;

  dut : entity work.{p}_top
    port map (clk => clk, in_valid => in_valid, in_codes => in_codes,
              out_valid => out_valid, out_codes => out_codes);

  stimulus : process
    file f     : text open read_mode is STIMULUS_FILE;
    variable l : line;
    variable v : std_logic_vector({in_msb} downto 0);
  begin
    while not endfile(f) loop
      readline(f, l);
      hread(l, v);
      in_codes <= v(IN_WIDTH * IN_BITS - 1 downto 0);
      in_valid <= '1';
      wait until rising_edge(clk);
    end loop;
    in_valid <= '0';
    wait;
  end process;

  check : process
    file f            : text open read_mode is EXPECTED_FILE;
    variable l        : line;
    variable v        : std_logic_vector({out_msb} downto 0);
    variable seen     : natural := 0;
    variable mismatch : natural := 0;
  begin
    while seen < N_VECTORS loop
      wait until rising_edge(clk);
      if out_valid = '1' then
        readline(f, l);
        hread(l, v);
        if out_codes /= v(OUT_WIDTH * OUT_BITS - 1 downto 0) then
          mismatch := mismatch + 1;
          report "mismatch on vector " & integer'image(seen) severity error;
        end if;
        seen := seen + 1;
      end if;
    end loop;
    report "kanele-tb: " & integer'image(seen) & " vectors, "
      & integer'image(mismatch) & " mismatches" severity note;
    if mismatch /= 0 then
      report "kanele-tb: FAIL" severity failure;
    end if;
    report "kanele-tb: PASS" severity note;
    done <= true;
    wait;
  end process;
end architecture;
"#,
        in_msb = in_hex - 1,
        out_msb = out_hex - 1,
    )
    .unwrap();
    s
}

fn build_script(layout: &Layout) -> String {
    let p = layout.prefix();
    let mut s = String::new();
    writeln!(s, "# Out-of-context synthesis stub for {p}_top.").unwrap();
    writeln!(s, "# Usage: vivado -mode batch -source scripts/build.tcl -tclargs <part>").unwrap();
    writeln!(s, "set part [expr {{[llength $argv] > 0 ? [lindex $argv 0] : \"xcvu9p-flgb2104-2-i\"}}]").unwrap();
    writeln!(s, "set root [file dirname [file dirname [info script]]]").unwrap();
    writeln!(s, "read_vhdl $root/rtl/{p}_config_pkg.vhd").unwrap();
    for l in 0..layout.graph.layers.len() {
        writeln!(s, "read_vhdl $root/rtl/{p}_layer{l}_pkg.vhd").unwrap();
        writeln!(s, "read_vhdl $root/rtl/{p}_layer{l}.vhd").unwrap();
    }
    writeln!(s, "read_vhdl $root/rtl/{p}_top.vhd").unwrap();
    writeln!(s, "synth_design -top {p}_top -part $part -mode out_of_context").unwrap();
    writeln!(
        s,
        "create_clock -name clk -period {} [get_ports clk]",
        layout.opts.target_clock_ns
    )
    .unwrap();
    writeln!(s, "opt_design\nplace_design\nroute_design").unwrap();
    writeln!(s, "report_utilization -file $root/utilization.rpt").unwrap();
    writeln!(s, "report_timing_summary -file $root/timing.rpt").unwrap();
    s
}
