//! Trainable KAN model.
//!
//! Every edge `p -> q` of a layer carries `φ(x) = w_base·silu(x) + Σ c_k B_k(x)`;
//! an output neuron sums its incoming edges and the layer quantizer snaps the
//! sum to the next layer's code grid.
//!
//! The quantized forward pass computes exactly what the LUT hardware computes:
//! each edge output (times the layer scale) is rounded to a fixed-point entry,
//! the entries are summed as integers and [`requantize_sum`] produces the
//! output code. Extraction reuses [`KanLayer::edge_entry`], so the trained
//! model and the extracted tables can never drift apart.

mod checkpoint;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{KanError, Result};
use crate::lutir::requantize_with;
use crate::quant::{InputQuantSpec, QuantSpec, DEFAULT_GUARD_BITS};
use crate::spline::SplineBasis;

/// Base activation added to every spline edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseActivation {
    #[default]
    Silu,
    /// No base term; edges are pure splines.
    Zero,
}

impl BaseActivation {
    pub fn value(self, x: f64) -> f64 {
        match self {
            BaseActivation::Silu => x * sigmoid(x),
            BaseActivation::Zero => 0.0,
        }
    }

    pub fn deriv(self, x: f64) -> f64 {
        match self {
            BaseActivation::Silu => {
                let s = sigmoid(x);
                s * (1.0 + x * (1.0 - s))
            }
            BaseActivation::Zero => 0.0,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Forward semantics. `Quantized` matches the hardware bit for bit;
/// `Relaxed` replaces every quantizer and entry snap with the identity,
/// which is the surrogate whose exact gradient the backward pass computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Quantized,
    Relaxed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanEdge {
    pub w_base: f64,
    pub coeffs: Vec<f64>,
    #[serde(rename = "mask")]
    pub active: bool,
}

impl KanEdge {
    pub fn zeros(n_basis: usize) -> Self {
        KanEdge {
            w_base: 0.0,
            coeffs: vec![0.0; n_basis],
            active: true,
        }
    }

    /// Spline part `Σ c_k B_k` from precomputed basis values.
    pub fn spline_value(&self, basis_values: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(basis_values)
            .map(|(c, b)| c * b)
            .sum()
    }

    fn raw_output(&self, basis_values: &[f64], phi: f64) -> f64 {
        self.w_base * phi + self.spline_value(basis_values)
    }
}

/// `w_base·φ(x) + Σ c_k B_k(x)`, or 0 for a pruned edge.
pub fn edge_eval(edge: &KanEdge, basis: &SplineBasis, x: f64, base: BaseActivation) -> f64 {
    if !edge.active {
        return 0.0;
    }
    edge.raw_output(&basis.eval(x), base.value(x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KanLayer {
    d_in: usize,
    d_out: usize,
    /// Row-major `d_out × d_in`: edge `p -> q` at `q * d_in + p`.
    edges: Vec<KanEdge>,
    basis: SplineBasis,
    out_quant: QuantSpec,
    /// Learned output multiplier, folded into the tables at extraction.
    pub scale: f64,
}

impl KanLayer {
    pub fn new(d_in: usize, d_out: usize, basis: SplineBasis, out_quant: QuantSpec) -> Result<Self> {
        if d_in == 0 || d_out == 0 {
            return Err(KanError::InvalidNetwork(format!(
                "layer dimensions {d_in}x{d_out} must be positive"
            )));
        }
        if basis.domain() != out_quant.domain() {
            return Err(KanError::InvalidNetwork(
                "layer quantizer domain must equal the spline domain".into(),
            ));
        }
        let edges = vec![KanEdge::zeros(basis.len()); d_in * d_out];
        Ok(KanLayer {
            d_in,
            d_out,
            edges,
            basis,
            out_quant,
            scale: 1.0,
        })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn basis(&self) -> &SplineBasis {
        &self.basis
    }

    pub fn out_quant(&self) -> &QuantSpec {
        &self.out_quant
    }

    pub fn edges(&self) -> &[KanEdge] {
        &self.edges
    }

    pub fn edge(&self, q: usize, p: usize) -> &KanEdge {
        &self.edges[q * self.d_in + p]
    }

    pub fn edge_mut(&mut self, q: usize, p: usize) -> &mut KanEdge {
        &mut self.edges[q * self.d_in + p]
    }

    pub fn active_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.active).count()
    }

    /// Scaled edge output at an input value, before fixed-point snapping.
    fn scaled_output(&self, edge: &KanEdge, basis_values: &[f64], phi: f64) -> f64 {
        self.scale * edge.raw_output(basis_values, phi)
    }

    /// Fixed-point table entry of edge `p -> q` at input value `x`; this is
    /// the single definition used by both training and extraction.
    pub fn edge_entry(&self, q: usize, p: usize, x: f64, base: BaseActivation) -> Result<i64> {
        let edge = self.edge(q, p);
        let values = self.basis.eval(x);
        self.out_quant
            .entry_fixed_point(self.scaled_output(edge, &values, base.value(x)))
    }

    /// One quantized layer: decode inputs, sum fixed-point edge entries and
    /// requantize per output neuron.
    pub fn forward_quantized(
        &self,
        in_codes: &[u32],
        in_spec: &QuantSpec,
        base: BaseActivation,
    ) -> Result<(Vec<u32>, LayerCache)> {
        if in_codes.len() != self.d_in {
            return Err(KanError::DimensionMismatch(format!(
                "layer expects {} input codes, got {}",
                self.d_in,
                in_codes.len()
            )));
        }
        let x = in_codes
            .iter()
            .map(|&c| in_spec.decode(c))
            .collect::<Result<Vec<_>>>()?;
        let cache = self.evaluate(x, base, Precision::Quantized)?;
        Ok((cache.out_codes.clone(), cache))
    }

    fn evaluate(&self, x: Vec<f64>, base: BaseActivation, precision: Precision) -> Result<LayerCache> {
        let nb = self.basis.len();
        let mut basis = vec![0.0; self.d_in * nb];
        let mut dbasis = vec![0.0; self.d_in * nb];
        let mut phi = vec![0.0; self.d_in];
        let mut dphi = vec![0.0; self.d_in];
        for (p, &xp) in x.iter().enumerate() {
            self.basis.eval_into(xp, &mut basis[p * nb..(p + 1) * nb]);
            self.basis.deriv_into(xp, &mut dbasis[p * nb..(p + 1) * nb]);
            phi[p] = base.value(xp);
            dphi[p] = base.deriv(xp);
        }

        let mut raw = vec![0.0; self.edges.len()];
        let mut out = vec![0.0; self.d_out];
        let mut out_codes = Vec::new();
        let offset = self.out_quant.code_offset()?;
        for q in 0..self.d_out {
            let mut acc: i64 = 0;
            let mut sum = 0.0;
            for p in 0..self.d_in {
                let idx = q * self.d_in + p;
                let edge = &self.edges[idx];
                if !edge.active {
                    continue;
                }
                let values = &basis[p * nb..(p + 1) * nb];
                raw[idx] = edge.raw_output(values, phi[p]);
                let scaled = self.scaled_output(edge, values, phi[p]);
                match precision {
                    Precision::Quantized => {
                        let entry = self.out_quant.entry_fixed_point(scaled)?;
                        acc = acc.checked_add(entry).ok_or_else(|| {
                            KanError::Overflow("accumulator exceeds 64 bits".into())
                        })?;
                    }
                    Precision::Relaxed => sum += scaled,
                }
            }
            match precision {
                Precision::Quantized => {
                    let code = requantize_with(
                        acc,
                        offset,
                        self.out_quant.guard_bits(),
                        self.out_quant.bits(),
                    );
                    out_codes.push(code);
                    out[q] = self.out_quant.decode_unchecked(code);
                }
                Precision::Relaxed => out[q] = sum,
            }
        }
        Ok(LayerCache {
            x,
            basis,
            dbasis,
            phi,
            dphi,
            raw,
            out,
            out_codes,
        })
    }
}

/// Intermediates of one layer's forward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    pub x: Vec<f64>,
    basis: Vec<f64>,
    dbasis: Vec<f64>,
    phi: Vec<f64>,
    dphi: Vec<f64>,
    /// Unscaled edge outputs, zero for pruned edges.
    raw: Vec<f64>,
    /// Values handed to the next layer (decoded codes when quantized).
    pub out: Vec<f64>,
    /// Output codes; empty in relaxed precision.
    pub out_codes: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    precision: Precision,
    /// Standardized inputs, needed for the input gain gradient.
    z: Vec<f64>,
    pub input_codes: Vec<u32>,
    pub layers: Vec<LayerCache>,
}

impl ForwardCache {
    pub fn precision(&self) -> Precision {
        self.precision
    }
}

/// Architecture hyperparameters of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanSpec {
    /// Layer widths `d_0 .. d_L`.
    pub dims: Vec<usize>,
    /// Input bits followed by one output width per layer; same length as `dims`.
    pub bits: Vec<u32>,
    pub grid_size: usize,
    pub order: usize,
    pub domain: (f64, f64),
    #[serde(default = "default_guard_bits")]
    pub guard_bits: u32,
    #[serde(default)]
    pub base: BaseActivation,
}

fn default_guard_bits() -> u32 {
    DEFAULT_GUARD_BITS
}

impl KanSpec {
    pub fn new(dims: Vec<usize>, bits: Vec<u32>, grid_size: usize, order: usize, domain: (f64, f64)) -> Self {
        KanSpec {
            dims,
            bits,
            grid_size,
            order,
            domain,
            guard_bits: DEFAULT_GUARD_BITS,
            base: BaseActivation::Silu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 {
            return Err(KanError::InvalidNetwork(
                "dims needs an input width and at least one layer".into(),
            ));
        }
        if self.bits.len() != self.dims.len() {
            return Err(KanError::InvalidNetwork(format!(
                "bits has {} entries, dims has {}",
                self.bits.len(),
                self.dims.len()
            )));
        }
        if let Some(d) = self.dims.iter().find(|&&d| d == 0) {
            return Err(KanError::InvalidNetwork(format!("layer width {d} must be positive")));
        }
        Ok(())
    }

    pub fn n_edges(&self) -> usize {
        self.dims.windows(2).map(|w| w[0] * w[1]).sum()
    }
}

/// Per-feature standardization plus the learned input shift/scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub gain: f64,
    pub shift: f64,
}

impl InputNorm {
    pub fn identity(width: usize) -> Self {
        InputNorm {
            mean: vec![0.0; width],
            std: vec![1.0; width],
            gain: 1.0,
            shift: 0.0,
        }
    }

    fn standardize(&self, feature: usize, x: f64) -> f64 {
        (x - self.mean[feature]) / self.std[feature]
    }
}

pub const MIN_INPUT_GAIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct KanNetwork {
    spec: KanSpec,
    layers: Vec<KanLayer>,
    input_base: QuantSpec,
    pub norm: InputNorm,
    seed: u64,
}

impl KanNetwork {
    /// Random initialization: spline coefficients `~ N(0, 0.1/√(G+S))`,
    /// base weights `~ N(0, 1/√d_in)`, every edge active.
    pub fn init(spec: &KanSpec, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(spec, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nb = spec.grid_size + spec.order;
        let coeff_dist = Normal::new(0.0, 0.1 / (nb as f64).sqrt())
            .map_err(|e| KanError::InvalidNetwork(e.to_string()))?;
        for layer in &mut net.layers {
            let base_dist = Normal::new(0.0, 1.0 / (layer.d_in as f64).sqrt())
                .map_err(|e| KanError::InvalidNetwork(e.to_string()))?;
            for edge in &mut layer.edges {
                edge.w_base = base_dist.sample(&mut rng);
                for c in &mut edge.coeffs {
                    *c = coeff_dist.sample(&mut rng);
                }
            }
        }
        Ok(net)
    }

    /// All parameters zero, all edges active.
    pub fn zeros(spec: &KanSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let (a, b) = spec.domain;
        let basis = SplineBasis::new(spec.grid_size, spec.order, a, b)?;
        let input_base = QuantSpec::new(spec.bits[0], a, b, spec.guard_bits)?;
        let layers = spec
            .dims
            .windows(2)
            .zip(&spec.bits[1..])
            .map(|(w, &bits)| {
                let q = QuantSpec::new(bits, a, b, spec.guard_bits)?;
                KanLayer::new(w[0], w[1], basis.clone(), q)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(KanNetwork {
            spec: spec.clone(),
            layers,
            input_base,
            norm: InputNorm::identity(spec.dims[0]),
            seed,
        })
    }

    pub fn spec(&self) -> &KanSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dims(&self) -> &[usize] {
        &self.spec.dims
    }

    pub fn base(&self) -> BaseActivation {
        self.spec.base
    }

    pub fn layers(&self) -> &[KanLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [KanLayer] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.spec.dims[0]
    }

    pub fn output_width(&self) -> usize {
        *self.spec.dims.last().expect("validated dims")
    }

    pub fn active_edges(&self) -> usize {
        self.layers.iter().map(KanLayer::active_edges).sum()
    }

    /// Quantizer feeding layer `l` (the input codec's grid for layer 0).
    pub fn in_spec(&self, l: usize) -> &QuantSpec {
        if l == 0 {
            &self.input_base
        } else {
            self.layers[l - 1].out_quant()
        }
    }

    /// Installs dataset statistics; the learned gain and shift are kept.
    pub fn set_normalization(&mut self, mean: Vec<f64>, std: Vec<f64>) -> Result<()> {
        if mean.len() != self.input_width() || std.len() != self.input_width() {
            return Err(KanError::DimensionMismatch(format!(
                "normalization for {} features, network has {}",
                mean.len(),
                self.input_width()
            )));
        }
        if std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(KanError::InvalidNetwork("feature std must be positive".into()));
        }
        self.norm.mean = mean;
        self.norm.std = std;
        Ok(())
    }

    /// Normalization, gain and shift folded into one affine map per feature.
    pub fn input_quant(&self) -> InputQuantSpec {
        let n = &self.norm;
        let scale = n.std.iter().map(|s| n.gain / s).collect();
        let bias = n
            .mean
            .iter()
            .zip(&n.std)
            .map(|(m, s)| n.shift - n.gain * m / s)
            .collect();
        InputQuantSpec {
            base: self.input_base,
            scale,
            bias,
        }
    }

    /// Composition of quantized layers on input codes.
    pub fn forward_codes(&self, in_codes: &[u32]) -> Result<Vec<u32>> {
        let mut codes = in_codes.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            codes = layer.forward_quantized(&codes, self.in_spec(l), self.base())?.0;
        }
        Ok(codes)
    }

    pub fn forward(&self, x_raw: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        self.forward_with(x_raw, Precision::Quantized)
    }

    pub fn forward_with(&self, x_raw: &[f64], precision: Precision) -> Result<(Vec<f64>, ForwardCache)> {
        if x_raw.len() != self.input_width() {
            return Err(KanError::DimensionMismatch(format!(
                "network expects {} features, got {}",
                self.input_width(),
                x_raw.len()
            )));
        }
        let z: Vec<f64> = x_raw
            .iter()
            .enumerate()
            .map(|(i, &x)| self.norm.standardize(i, x))
            .collect();
        let (input_codes, mut x) = match precision {
            Precision::Quantized => {
                let codes = self.input_quant().encode(x_raw)?;
                let values = codes
                    .iter()
                    .map(|&c| self.input_base.decode_unchecked(c))
                    .collect();
                (codes, values)
            }
            Precision::Relaxed => (
                Vec::new(),
                z.iter().map(|z| self.norm.gain * z + self.norm.shift).collect(),
            ),
        };
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let cache = layer.evaluate(x, self.base(), precision)?;
            x = cache.out.clone();
            caches.push(cache);
        }
        Ok((
            x,
            ForwardCache {
                precision,
                z,
                input_codes,
                layers: caches,
            },
        ))
    }

    /// Class decision from decoded logits: argmax, or `logit > 0` for a
    /// single-output network.
    pub fn classify(logits: &[f64]) -> usize {
        if logits.len() == 1 {
            return usize::from(logits[0] > 0.0);
        }
        let mut best = 0;
        for (i, v) in logits.iter().enumerate() {
            if *v > logits[best] {
                best = i;
            }
        }
        best
    }

    pub fn predict(&self, x_raw: &[f64]) -> Result<usize> {
        Ok(Self::classify(&self.forward(x_raw)?.0))
    }

    /// Gradients of a loss with respect to every parameter, given
    /// `dloss/dlogits`. Quantizers pass gradients through unchanged.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &[f64]) -> Result<Gradients> {
        if cache.layers.len() != self.layers.len() {
            return Err(KanError::CacheMismatch(format!(
                "cache has {} layers, network has {}",
                cache.layers.len(),
                self.layers.len()
            )));
        }
        if dlogits.len() != self.output_width() {
            return Err(KanError::CacheMismatch(format!(
                "{} logit gradients for {} outputs",
                dlogits.len(),
                self.output_width()
            )));
        }
        let mut grads = Gradients::zeros(self);
        let mut upstream = dlogits.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let lc = &cache.layers[l];
            if lc.x.len() != layer.d_in || lc.raw.len() != layer.edges.len() {
                return Err(KanError::CacheMismatch(format!("layer {l} shape differs")));
            }
            let nb = layer.basis.len();
            let g = &mut grads.layers[l];
            let mut dx = vec![0.0; layer.d_in];
            for q in 0..layer.d_out {
                let gq = upstream[q];
                for p in 0..layer.d_in {
                    let idx = q * layer.d_in + p;
                    let edge = &layer.edges[idx];
                    if !edge.active {
                        continue;
                    }
                    let values = &lc.basis[p * nb..(p + 1) * nb];
                    let dvalues = &lc.dbasis[p * nb..(p + 1) * nb];
                    let gs = gq * layer.scale;
                    g.w_base[idx] += gs * lc.phi[p];
                    for (gc, b) in g.coeffs[idx * nb..(idx + 1) * nb].iter_mut().zip(values) {
                        *gc += gs * b;
                    }
                    g.scale += gq * lc.raw[idx];
                    let slope = edge.w_base * lc.dphi[p] + edge.spline_value(dvalues);
                    dx[p] += gs * slope;
                }
            }
            upstream = dx;
        }
        for (i, d) in upstream.iter().enumerate() {
            grads.input_gain += d * cache.z[i];
            grads.input_shift += d;
        }
        Ok(grads)
    }

    /// Non-final neurons that still receive active edges but feed none.
    pub fn orphan_neurons(&self) -> Vec<(usize, usize)> {
        let mut orphans = Vec::new();
        for l in 0..self.layers.len().saturating_sub(1) {
            let layer = &self.layers[l];
            let next = &self.layers[l + 1];
            for q in 0..layer.d_out {
                let fed = (0..layer.d_in).any(|p| layer.edge(q, p).active);
                let feeds = (0..next.d_out).any(|r| next.edge(r, q).active);
                if fed && !feeds {
                    orphans.push((l, q));
                }
            }
        }
        orphans
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((l, q)) = self.orphan_neurons().first() {
            return Err(KanError::InvalidNetwork(format!(
                "neuron {q} of layer {l} has active inputs but no active outputs"
            )));
        }
        Ok(())
    }

    /// Flattened trainable parameters in [`Gradients::flatten`] order.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for edge in &layer.edges {
                out.push(edge.w_base);
                out.extend_from_slice(&edge.coeffs);
            }
            out.push(layer.scale);
        }
        out.push(self.norm.gain);
        out.push(self.norm.shift);
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        let expected = self.param_count();
        if params.len() != expected {
            return Err(KanError::DimensionMismatch(format!(
                "{} parameters supplied, network has {expected}",
                params.len()
            )));
        }
        let mut it = params.iter().copied();
        for layer in &mut self.layers {
            for edge in &mut layer.edges {
                edge.w_base = it.next().expect("length checked");
                for c in &mut edge.coeffs {
                    *c = it.next().expect("length checked");
                }
            }
            layer.scale = it.next().expect("length checked");
        }
        self.norm.gain = it.next().expect("length checked").max(MIN_INPUT_GAIN);
        self.norm.shift = it.next().expect("length checked");
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.edges.len() * (1 + l.basis.len()) + 1)
            .sum::<usize>()
            + 2
    }

    /// Per-parameter flags: frozen (belongs to a pruned edge) and whether
    /// weight decay applies (edge weights only).
    pub fn param_meta(&self) -> Vec<ParamMeta> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            for edge in &layer.edges {
                let meta = ParamMeta {
                    frozen: !edge.active,
                    decay: true,
                };
                out.extend(std::iter::repeat_n(meta, 1 + edge.coeffs.len()));
            }
            out.push(ParamMeta::NO_DECAY);
        }
        out.push(ParamMeta::NO_DECAY);
        out.push(ParamMeta::NO_DECAY);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamMeta {
    pub frozen: bool,
    pub decay: bool,
}

impl ParamMeta {
    pub const NO_DECAY: ParamMeta = ParamMeta {
        frozen: false,
        decay: false,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    /// Per edge, same layout as the layer's edges.
    pub w_base: Vec<f64>,
    /// Edge-major, `G + S` entries per edge.
    pub coeffs: Vec<f64>,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
    pub input_gain: f64,
    pub input_shift: f64,
}

impl Gradients {
    pub fn zeros(net: &KanNetwork) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    w_base: vec![0.0; l.edges.len()],
                    coeffs: vec![0.0; l.edges.len() * l.basis.len()],
                    scale: 0.0,
                })
                .collect(),
            input_gain: 0.0,
            input_shift: 0.0,
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            let nb = if g.w_base.is_empty() {
                0
            } else {
                g.coeffs.len() / g.w_base.len()
            };
            for (e, w) in g.w_base.iter().enumerate() {
                out.push(*w);
                out.extend_from_slice(&g.coeffs[e * nb..(e + 1) * nb]);
            }
            out.push(g.scale);
        }
        out.push(self.input_gain);
        out.push(self.input_shift);
        out
    }

    /// `self += other`.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.w_base.iter_mut().zip(&b.w_base).for_each(|(x, y)| *x += y);
            a.coeffs.iter_mut().zip(&b.coeffs).for_each(|(x, y)| *x += y);
            a.scale += b.scale;
        }
        self.input_gain += other.input_gain;
        self.input_shift += other.input_shift;
    }

    pub fn scale_by(&mut self, k: f64) {
        for g in &mut self.layers {
            g.w_base.iter_mut().for_each(|x| *x *= k);
            g.coeffs.iter_mut().for_each(|x| *x *= k);
            g.scale *= k;
        }
        self.input_gain *= k;
        self.input_shift *= k;
    }
}
