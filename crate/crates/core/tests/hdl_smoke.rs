//! Runs an emitted testbench through an external HDL simulator.
//!
//! Set `KANELE_HDL_SIM` to a shell command. It runs with the bundle root as
//! working directory and `KANELE_PREFIX`, `KANELE_TOP`, `KANELE_TB` in the
//! environment; it must exit 0 and print `kanele-tb: PASS`.

mod common;

use std::process::Command;

use kanele::kan::KanSpec;
use kanele::lutir::extract;
use kanele::rtl::{emit_vhdl, random_vectors, RtlOptions, HDL_SIM_ENV};

use common::random_network;

#[test]
fn emitted_testbench_passes_in_simulator() {
    let Some(cmd) = std::env::var_os(HDL_SIM_ENV) else {
        eprintln!("{HDL_SIM_ENV} not set; HDL smoke test skipped");
        return;
    };
    let spec = KanSpec::new(vec![3, 4, 2], vec![4, 5, 6], 5, 3, (-4.0, 4.0));
    let net = random_network(&spec, 11, 0.25);
    let graph = extract(&net).unwrap();
    let opts = RtlOptions {
        entity_prefix: "smoke".into(),
        ..RtlOptions::default()
    };
    let vectors = random_vectors(&graph, 200, 5);
    let bundle = emit_vhdl(&graph, &opts, &vectors).unwrap();
    let dir = tempfile::tempdir().unwrap();
    bundle.write_to(dir.path()).unwrap();

    let out = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .current_dir(dir.path())
        .env("KANELE_PREFIX", &opts.entity_prefix)
        .env("KANELE_TOP", format!("{}_top", opts.entity_prefix))
        .env("KANELE_TB", format!("{}_tb", opts.entity_prefix))
        .output()
        .expect("spawn HDL simulator");
    let text = format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.status.success(), "simulator failed:\n{text}");
    assert!(text.contains("kanele-tb: PASS"), "no PASS line:\n{text}");
    assert!(!text.contains("kanele-tb: FAIL"), "{text}");
}
