use super::network::{Gradients, Network};

/// Floor applied to probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// `−log p[label]` with the log argument clamped at [`PROB_FLOOR`].
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(PROB_FLOOR).ln()
}

/// `l2 · Σ w²` over convolution kernels and dense weights.
pub fn l2_penalty(net: &Network, l2: f64) -> f64 {
    if l2 == 0.0 {
        0.0
    } else {
        l2 * net.weight_norm_sq()
    }
}

/// Cross-entropy of one prediction plus the network's l2 penalty.
pub fn loss(probs: &[f64], label: usize, net: &Network, l2: f64) -> f64 {
    cross_entropy(probs, label) + l2_penalty(net, l2)
}

/// Adds `2 · l2 · w` to every weight gradient.
pub fn add_l2_gradient(net: &Network, l2: f64, grads: &mut Gradients) {
    if l2 == 0.0 {
        return;
    }
    for (g, layer) in grads.weights.iter_mut().zip(net.layers()) {
        g.iter_mut().zip(&layer.weights).for_each(|(g, w)| *g += 2.0 * l2 * w);
    }
}
