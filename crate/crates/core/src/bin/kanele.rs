use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kanele::config::{run_training, RunConfig};
use kanele::data::{gen_moons, load_csv, CsvOptions, Dataset, LabelColumn};
use kanele::kan::Checkpoint;
use kanele::lutir::{extract_with, LutGraph, DEFAULT_ADDER_FANIN};
use kanele::report::{resources, scaling_sweep, SweepAxis};
use kanele::rtl::{emit_vhdl, random_vectors, RtlOptions};
use kanele::sim::{sim_batch, sim_forward, LabelDecoder, SimReport};
use kanele::KanError;

#[derive(Parser)]
#[command(name = "kanele", version, about = "Train quantized KANs and compile them to LUT netlists")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train from a TOML experiment file; writes checkpoint.json and history.csv.
    Train {
        config: PathBuf,
        #[arg(long)]
        epochs: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Extract a LUT graph (graph.json) from a checkpoint.
    Compile {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ADDER_FANIN)]
        n_add: usize,
    },
    /// Run the bit-exact simulator over a dataset and/or check equivalence.
    Simulate(SimulateArgs),
    /// Emit VHDL, testbench and build script.
    EmitRtl {
        graph: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ADDER_FANIN)]
        n_add: usize,
        #[arg(long, default_value = "kan")]
        prefix: String,
        /// Random testbench vectors.
        #[arg(long, default_value_t = 1000)]
        vectors: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10.0)]
        clock_ns: f64,
    },
    /// Print latency and structural resource counts.
    Report {
        graph: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ADDER_FANIN)]
        n_add: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Shorthand for `--format json`.
        #[arg(long)]
        json: bool,
    },
    /// Write a Moons dataset as CSV.
    GenMoons {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train and measure a config across one axis; writes sweep.csv.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        points: Vec<f64>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    graph: PathBuf,
    /// Evaluate on the held-out split of this experiment.
    #[arg(long, conflicts_with = "csv")]
    config: Option<PathBuf>,
    /// Evaluate on a CSV file (label in the last column unless --label).
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, requires = "csv")]
    label: Option<String>,
    /// Compare every output against this checkpoint's quantized forward.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Check all input codes (needs total input width <= 24 bits).
    #[arg(long, conflicts_with = "samples")]
    exhaustive: bool,
    /// Random code vectors for the equivalence check.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, msg) = match e.downcast_ref::<KanError>() {
                Some(k) => (k.code(), k.to_string()),
                None => ("E_CLI", format!("{e:#}")),
            };
            let msg = msg.replace('\n', " ");
            eprintln!("error[{code}]: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let out = cli.out;
    match cli.cmd {
        Cmd::Train { config, epochs, seed } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if let Some(s) = seed {
                cfg.train.seed = s;
                cfg.model.seed = s;
            }
            cfg.validate()?;
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            cmd_train(&cfg, &dir)
        }
        Cmd::Compile { checkpoint, n_add } => cmd_compile(&checkpoint, n_add, &out_dir(out)),
        Cmd::Simulate(args) => cmd_simulate(&args, &out_dir(out)),
        Cmd::EmitRtl {
            graph,
            n_add,
            prefix,
            vectors,
            seed,
            clock_ns,
        } => {
            let graph = LutGraph::load(&graph)?;
            let opts = RtlOptions {
                n_add,
                entity_prefix: prefix,
                target_clock_ns: clock_ns,
            };
            let vecs = random_vectors(&graph, vectors, seed);
            let bundle = emit_vhdl(&graph, &opts, &vecs)?;
            let dir = out_dir(out);
            bundle.write_to(&dir)?;
            println!("wrote {} files to {}", bundle.files.len(), dir.display());
            Ok(())
        }
        Cmd::Report {
            graph,
            n_add,
            format,
            json,
        } => {
            let graph = LutGraph::load(&graph)?;
            let report = resources(&graph, n_add)?;
            let format = if json { Format::Json } else { format };
            match format {
                Format::Text => print!("{}", report.to_text()),
                Format::Csv => print!("{}", report.to_csv()),
                Format::Json => println!("{}", report.to_json()),
            }
            if let Some(dir) = out {
                write(&dir, "report.csv", &report.to_csv())?;
                write(&dir, "report.json", &report.to_json())?;
            }
            Ok(())
        }
        Cmd::GenMoons { n, noise, seed } => {
            let ds = gen_moons(n, noise, seed)?;
            let mut text = String::from("x0,x1,label\n");
            let labels = ds.labels().expect("moons are labelled");
            for (x, y) in ds.features.iter().zip(labels) {
                text.push_str(&format!("{},{},{}\n", x[0], x[1], y));
            }
            let dir = out_dir(out);
            write(&dir, "moons.csv", &text)?;
            println!("wrote {} samples to {}", n, dir.join("moons.csv").display());
            Ok(())
        }
        Cmd::Sweep { config, axis, points } => {
            let cfg = RunConfig::load(&config)?;
            let table = scaling_sweep(&cfg, axis, &points)?;
            let csv = table.to_csv();
            print!("{csv}");
            write(&out.unwrap_or_else(|| cfg.output.dir.clone()), "sweep.csv", &csv)
        }
    }
}

fn out_dir(out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from("out"))
}

fn write(dir: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| KanError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| KanError::Io { path, source: e })?;
    Ok(())
}

fn cmd_train(cfg: &RunConfig, dir: &Path) -> anyhow::Result<()> {
    let outcome = run_training(cfg)?;
    let config_json = serde_json::to_value(cfg).context("serializing config")?;
    let ckpt = Checkpoint::from_network(&outcome.net, Some(config_json));
    std::fs::create_dir_all(dir).map_err(|e| KanError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    ckpt.save(&dir.join("checkpoint.json"))?;
    write(dir, "history.csv", &outcome.history.to_csv())?;
    write(dir, "config.toml", &cfg.to_toml())?;
    match outcome.history.last() {
        Some(last) => println!(
            "epochs {} loss {:.4} train_acc {:.4} test_acc {:.4} active_edges {}",
            last.epoch + 1,
            last.loss,
            last.train_acc,
            last.val_acc,
            last.active_edges
        ),
        None => println!("epochs 0 (checkpoint holds the initialization)"),
    }
    println!("checkpoint {}", dir.join("checkpoint.json").display());
    Ok(())
}

fn cmd_compile(checkpoint: &Path, n_add: usize, dir: &Path) -> anyhow::Result<()> {
    let net = Checkpoint::load(checkpoint)?.into_network()?;
    let graph = extract_with(&net, n_add)?;
    graph.validate()?;
    write(dir, "graph.json", &graph.to_json())?;
    for (l, layer) in graph.layers.iter().enumerate() {
        println!(
            "layer {l}: {}x{} edges {} table_entries {} in_bits {} out_bits {}",
            layer.d_in,
            layer.d_out,
            layer.edges.len(),
            layer.table_entries(),
            layer.in_bits,
            layer.out_bits
        );
    }
    println!("edges {} -> {}", graph.edge_count(), dir.join("graph.json").display());
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, dir: &Path) -> anyhow::Result<()> {
    let graph = LutGraph::load(&args.graph)?;
    let dataset: Option<Dataset> = if let Some(cfg) = &args.config {
        Some(RunConfig::load(cfg)?.load_split()?.1)
    } else if let Some(csv) = &args.csv {
        let label = match &args.label {
            None => LabelColumn::Last,
            Some(s) => s.parse().map(LabelColumn::Index).unwrap_or(LabelColumn::Name(s.clone())),
        };
        Some(load_csv(
            csv,
            &CsvOptions {
                label,
                ..CsvOptions::default()
            },
        )?)
    } else {
        None
    };
    let mut summary = String::new();
    if let Some(ds) = &dataset {
        if ds.width() != graph.input_width() {
            return Err(KanError::DimensionMismatch(format!(
                "dataset has {} features, graph expects {}",
                ds.width(),
                graph.input_width()
            ))
            .into());
        }
        let report = sim_batch(&graph, ds, LabelDecoder::for_graph(&graph)?)?;
        print_sim(&report);
        summary.push_str(&report.to_csv());
    }
    if let Some(ckpt) = &args.checkpoint {
        let net = Checkpoint::load(ckpt)?.into_network()?;
        if net.input_width() != graph.input_width() || net.output_width() != graph.output_width() {
            return Err(KanError::DimensionMismatch("checkpoint and graph widths differ".into()).into());
        }
        let total_bits = graph.input_width() as u32 * graph.input_bits();
        let vectors: Vec<Vec<u32>> = if args.exhaustive {
            if total_bits > 24 {
                return Err(KanError::Config(format!(
                    "exhaustive check over {total_bits} input bits is too large; use --samples"
                ))
                .into());
            }
            (0..1u64 << total_bits)
                .map(|idx| unpack(idx, graph.input_width(), graph.input_bits()))
                .collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let levels = 1u32 << graph.input_bits();
            (0..args.samples)
                .map(|_| (0..graph.input_width()).map(|_| rng.random_range(0..levels)).collect())
                .collect()
        };
        let mut mismatches = 0usize;
        for v in &vectors {
            if sim_forward(&graph, v)? != net.forward_codes(v)? {
                mismatches += 1;
            }
        }
        let verdict = if mismatches == 0 { "EQUIVALENT" } else { "MISMATCH" };
        println!(
            "equivalence: {verdict} ({} vectors, {mismatches} mismatches{})",
            vectors.len(),
            if args.exhaustive { ", exhaustive" } else { "" }
        );
        summary.push_str(&format!("equivalence_vectors,mismatches\n{},{mismatches}\n", vectors.len()));
        if mismatches > 0 {
            write(dir, "simulate.csv", &summary)?;
            bail!("graph disagrees with checkpoint on {mismatches} vectors");
        }
    }
    if dataset.is_none() && args.checkpoint.is_none() {
        print_sim(&SimReport::default());
    }
    write(dir, "simulate.csv", &summary)?;
    Ok(())
}

fn print_sim(report: &SimReport) {
    match (report.accuracy, report.mse) {
        (Some(acc), _) => println!(
            "samples {} correct {} accuracy {acc:.6}",
            report.samples,
            report.correct.unwrap_or(0)
        ),
        (None, Some(mse)) => println!("samples {} mse {mse:.6}", report.samples),
        (None, None) => println!("samples {}", report.samples),
    }
}

/// Splits a packed index into `width` codes of `bits` bits, neuron 0 lowest.
fn unpack(idx: u64, width: usize, bits: u32) -> Vec<u32> {
    let mask = (1u64 << bits) - 1;
    (0..width).map(|i| ((idx >> (i as u32 * bits)) & mask) as u32).collect()
}
