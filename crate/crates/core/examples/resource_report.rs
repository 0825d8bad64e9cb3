//! Structural resource counts and latency for one graph at several adder
//! fan-ins.
//!
//! `cargo run --example resource_report`

use kanele::kan::{KanNetwork, KanSpec};
use kanele::lutir::extract;
use kanele::report::resources;
use kanele::rtl::plan_adder_tree;

fn main() -> anyhow::Result<()> {
    let spec = KanSpec::new(vec![13, 4, 3], vec![6, 7, 8], 6, 3, (-8.0, 8.0));
    let graph = extract(&KanNetwork::init(&spec, 0)?)?;
    print!("{}", resources(&graph, 4)?.to_text());
    for n_add in [2, 3, 4, 8] {
        let plan = plan_adder_tree(13, n_add)?;
        println!(
            "n_add {n_add}: 13-input tree {:?}, latency {} cycles",
            plan.stages,
            resources(&graph, n_add)?.latency_cycles
        );
    }
    Ok(())
}
