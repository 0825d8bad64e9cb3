//! Norm-based structured pruning of spline edges.
//!
//! An edge is scored by the ℓ2 norm of its spline component over every
//! representable input code and dropped once the score is at or below the
//! scheduled threshold. Masks only ever go from active to pruned. After
//! thresholding, neurons that no longer feed anything lose their incoming
//! edges too, repeated until nothing changes.

use serde::{Deserialize, Serialize};

use crate::error::{KanError, Result};
use crate::kan::{KanEdge, KanNetwork};
use crate::quant::QuantSpec;
use crate::spline::SplineBasis;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruneConfig {
    /// Full threshold `T`; 0 disables pruning.
    pub threshold: f64,
    pub warmup_start: u32,
    pub warmup_target: u32,
}

impl PruneConfig {
    pub fn disabled() -> Self {
        PruneConfig::default()
    }

    pub fn enabled(&self) -> bool {
        self.threshold > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return Err(KanError::Config(format!(
                "prune threshold {} must be non-negative",
                self.threshold
            )));
        }
        if self.enabled() && self.warmup_start >= self.warmup_target {
            return Err(KanError::Config(format!(
                "warmup start {} must precede warmup target {}",
                self.warmup_start, self.warmup_target
            )));
        }
        Ok(())
    }

    /// `τ(t)`: 0 before the warmup, rising exponentially from `T/20` at the
    /// warmup start to `T` at the target epoch, constant afterwards.
    pub fn threshold_at(&self, epoch: u32) -> f64 {
        if !self.enabled() || epoch < self.warmup_start {
            return 0.0;
        }
        let span = (self.warmup_target - self.warmup_start) as f64;
        let remaining = (self.warmup_target - epoch.min(self.warmup_target)) as f64;
        self.threshold * (-(20f64).ln() * remaining / span).exp()
    }
}

/// ℓ2 norm of `Σ c_k B_k(x)` over the decoded codes of `in_spec`.
pub fn edge_norm(edge: &KanEdge, basis: &SplineBasis, in_spec: &QuantSpec) -> f64 {
    let mut values = vec![0.0; basis.len()];
    let mut sum = 0.0;
    for c in 0..in_spec.levels() {
        basis.eval_into(in_spec.decode_unchecked(c), &mut values);
        let f = edge.spline_value(&values);
        sum += f * f;
    }
    sum.sqrt()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PruneReport {
    /// Edges pruned by the threshold, per layer.
    pub by_threshold: Vec<usize>,
    /// Edges pruned because their target neuron feeds nothing, per layer.
    pub by_backward: Vec<usize>,
    pub active_edges: usize,
}

impl PruneReport {
    pub fn newly_pruned(&self) -> Vec<usize> {
        self.by_threshold
            .iter()
            .zip(&self.by_backward)
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn total_pruned(&self) -> usize {
        self.newly_pruned().iter().sum()
    }
}

/// Prunes every active edge with norm `<= tau`, then applies backward
/// pruning to a fixed point.
pub fn update_masks(net: &mut KanNetwork, tau: f64) -> PruneReport {
    let n_layers = net.layers().len();
    let mut report = PruneReport {
        by_threshold: vec![0; n_layers],
        by_backward: vec![0; n_layers],
        active_edges: 0,
    };
    for l in 0..n_layers {
        let in_spec = *net.in_spec(l);
        let layer = &mut net.layers_mut()[l];
        let basis = layer.basis().clone();
        for q in 0..layer.d_out() {
            for p in 0..layer.d_in() {
                let edge = layer.edge_mut(q, p);
                if edge.active && edge_norm(edge, &basis, &in_spec) <= tau {
                    edge.active = false;
                    report.by_threshold[l] += 1;
                }
            }
        }
    }
    let backward = backward_prune(net);
    for (l, n) in backward.into_iter().enumerate() {
        report.by_backward[l] += n;
    }
    report.active_edges = net.active_edges();
    report
}

/// Removes incoming edges of non-final neurons without active outgoing
/// edges until no such neuron remains. Returns edges pruned per layer.
pub fn backward_prune(net: &mut KanNetwork) -> Vec<usize> {
    let n_layers = net.layers().len();
    let mut pruned = vec![0; n_layers];
    loop {
        let mut changed = false;
        for l in (0..n_layers.saturating_sub(1)).rev() {
            let (head, tail) = net.layers_mut().split_at_mut(l + 1);
            let layer = &mut head[l];
            let next = &tail[0];
            for q in 0..layer.d_out() {
                let feeds = (0..next.d_out()).any(|r| next.edge(r, q).active);
                if feeds {
                    continue;
                }
                for p in 0..layer.d_in() {
                    let edge = layer.edge_mut(q, p);
                    if edge.active {
                        edge.active = false;
                        pruned[l] += 1;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return pruned;
        }
    }
}
