//! Uniform quantizer round trips and the fixed-point table entry encoding.
//!
//! `cargo run --example quantize_values`

use kanele::quant::{round_shift, QuantSpec};

fn main() -> anyhow::Result<()> {
    let q = QuantSpec::new(4, -8.0, 8.0, 8)?;
    println!("bits {} levels {} step {}", q.bits(), q.levels(), q.step());
    for x in [-9.0, -8.0, -0.4, 0.0, 0.55, 3.3, 8.0, 100.0] {
        let code = q.encode(x);
        let (fq, _) = q.fake_quant(x);
        println!("x={x:>6} code={code:>2} decoded={:>8.4} fake_quant={fq:>8.4}", q.decode(code)?);
    }

    // table entries carry 8 fractional bits relative to the output step
    let y = 1.234;
    let entry = q.entry_fixed_point(y)?;
    println!("entry({y}) = {entry} -> {:.6}", q.entry_to_real(entry));
    println!("code offset {}", q.code_offset()?);
    for v in [-384i64, -383, 383, 384, 640] {
        println!("round_shift({v}, 8) = {}", round_shift(v, 8));
    }
    Ok(())
}
