//! Quantized, pruned Kolmogorov–Arnold networks compiled to lookup tables.
//!
//! The pipeline: [`train`] a [`kan::KanNetwork`] with quantizers in the
//! forward pass and norm-based [`prune`]-ing, [`lutir::extract`] it into an
//! integer [`lutir::LutGraph`], check it with the bit-exact [`sim`]ulator,
//! then emit VHDL with [`rtl`] and count resources with [`report`].
//!
//! ```
//! use kanele::{data, kan, lutir, sim};
//!
//! let ds = data::gen_moons(200, 0.1, 0).unwrap();
//! let spec = kan::KanSpec::new(vec![2, 2, 1], vec![6, 5, 8], 6, 3, (-8.0, 8.0));
//! let net = kan::KanNetwork::init(&spec, 0).unwrap();
//! let graph = lutir::extract(&net).unwrap();
//! let codes = net.input_quant().encode(&ds.features[0]).unwrap();
//! assert_eq!(sim::sim_forward(&graph, &codes).unwrap(), net.forward_codes(&codes).unwrap());
//! ```

pub mod config;
pub mod data;
pub mod error;
pub mod kan;
pub mod lutir;
pub mod prune;
pub mod quant;
pub mod report;
pub mod rtl;
pub mod sim;
pub mod spline;
pub mod train;

pub use error::{KanError, Result};
