//! Code and value mappings shared by training, table extraction, simulation
//! and RTL.
//!
//! A [`QuantSpec`] places `2^n` levels uniformly on `[a, b]`, so code 0 is `a`
//! and the top code is `b`. Rounding is half away from zero everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{KanError, Result};

pub const MAX_BITS: u32 = 16;
pub const DEFAULT_GUARD_BITS: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuantParams", into = "QuantParams")]
pub struct QuantSpec {
    bits: u32,
    a: f64,
    b: f64,
    guard_bits: u32,
    step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantParams {
    pub bits: u32,
    pub a: f64,
    pub b: f64,
    pub guard_bits: u32,
}

impl TryFrom<QuantParams> for QuantSpec {
    type Error = KanError;

    fn try_from(p: QuantParams) -> Result<Self> {
        QuantSpec::new(p.bits, p.a, p.b, p.guard_bits)
    }
}

impl From<QuantSpec> for QuantParams {
    fn from(q: QuantSpec) -> Self {
        QuantParams {
            bits: q.bits,
            a: q.a,
            b: q.b,
            guard_bits: q.guard_bits,
        }
    }
}

impl QuantSpec {
    pub fn new(bits: u32, a: f64, b: f64, guard_bits: u32) -> Result<Self> {
        if !(1..=MAX_BITS).contains(&bits) {
            return Err(KanError::InvalidQuant(format!(
                "bit width {bits} outside 1..={MAX_BITS}"
            )));
        }
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(KanError::InvalidQuant(format!(
                "domain [{a}, {b}] must be a finite interval with a < b"
            )));
        }
        if guard_bits > 32 {
            return Err(KanError::InvalidQuant(format!(
                "guard bits {guard_bits} exceed 32"
            )));
        }
        let step = (b - a) / ((1u64 << bits) - 1) as f64;
        Ok(QuantSpec {
            bits,
            a,
            b,
            guard_bits,
            step,
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn guard_bits(&self) -> u32 {
        self.guard_bits
    }

    /// Number of codes, `2^n`.
    pub fn levels(&self) -> u32 {
        1 << self.bits
    }

    pub fn max_code(&self) -> u32 {
        self.levels() - 1
    }

    pub fn encode(&self, x: f64) -> u32 {
        let x = if x.is_nan() { self.a } else { x.clamp(self.a, self.b) };
        let scaled = ((x - self.a) / self.step).round();
        (scaled.max(0.0) as u32).min(self.max_code())
    }

    pub fn decode(&self, code: u32) -> Result<f64> {
        if code > self.max_code() {
            return Err(KanError::CodeOutOfRange {
                code,
                bits: self.bits,
            });
        }
        Ok(self.decode_unchecked(code))
    }

    /// `decode` for callers that already validated the code.
    pub fn decode_unchecked(&self, code: u32) -> f64 {
        self.a + code as f64 * self.step
    }

    /// Forward value `decode(encode(x))` with the straight-through gradient,
    /// which is 1 everywhere, clipped regions included.
    pub fn fake_quant(&self, x: f64) -> (f64, f64) {
        (self.decode_unchecked(self.encode(x)), 1.0)
    }

    /// Entry scale `2^F / δ`: one output step is `2^F` entry units.
    pub fn entry_scale(&self) -> f64 {
        (1u64 << self.guard_bits) as f64 / self.step
    }

    /// Converts a real edge output into the signed fixed-point table entry
    /// `round(y · 2^F / δ)`.
    pub fn entry_fixed_point(&self, y: f64) -> Result<i64> {
        let scaled = (y * self.entry_scale()).round();
        // 2^63 is exactly representable; anything at or past it does not fit.
        if !scaled.is_finite() || scaled.abs() >= 9.223_372_036_854_775_808e18 {
            return Err(KanError::Overflow(format!(
                "table entry for {y} exceeds 63-bit magnitude"
            )));
        }
        Ok(scaled as i64)
    }

    /// Real value represented by a fixed-point entry or sum.
    pub fn entry_to_real(&self, entry: i64) -> f64 {
        entry as f64 / self.entry_scale()
    }

    /// Constant added to a summed entry value so that a rounded shift by `F`
    /// yields the output code: `round(-a · 2^F / δ)`.
    pub fn code_offset(&self) -> Result<i64> {
        self.entry_fixed_point(-self.a)
    }
}

/// Arithmetic right shift by `shift` with round-half-away-from-zero.
pub fn round_shift(value: i64, shift: u32) -> i64 {
    if shift == 0 {
        return value;
    }
    let half = 1i128 << (shift - 1);
    let v = value as i128;
    let magnitude = (v.abs() + half) >> shift;
    (if v < 0 { -magnitude } else { magnitude }) as i64
}

/// Input codec with dataset normalization and the learned shift/scale folded
/// into one affine map per feature: `code = encode(x · scale + bias)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputQuantSpec {
    pub base: QuantSpec,
    pub scale: Vec<f64>,
    pub bias: Vec<f64>,
}

impl InputQuantSpec {
    pub fn new(base: QuantSpec, scale: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if scale.len() != bias.len() {
            return Err(KanError::InvalidQuant(format!(
                "input scale has {} entries but bias has {}",
                scale.len(),
                bias.len()
            )));
        }
        if let Some(s) = scale.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(KanError::InvalidQuant(format!(
                "input scale {s} must be positive and finite"
            )));
        }
        if let Some(b) = bias.iter().find(|b| !b.is_finite()) {
            return Err(KanError::InvalidQuant(format!("input bias {b} is not finite")));
        }
        Ok(InputQuantSpec { base, scale, bias })
    }

    pub fn width(&self) -> usize {
        self.scale.len()
    }

    pub fn affine(&self, feature: usize, x: f64) -> f64 {
        x * self.scale[feature] + self.bias[feature]
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<u32>> {
        if x.len() != self.width() {
            return Err(KanError::DimensionMismatch(format!(
                "input has {} features, codec expects {}",
                x.len(),
                self.width()
            )));
        }
        Ok(x
            .iter()
            .enumerate()
            .map(|(i, &v)| self.base.encode(self.affine(i, v)))
            .collect())
    }
}
