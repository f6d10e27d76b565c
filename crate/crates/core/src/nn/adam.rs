use super::network::{Gradients, Layer, Network};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moments per parameter buffer plus the step counter.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    pub step: u64,
    pub m_w: Vec<Vec<f64>>,
    pub v_w: Vec<Vec<f64>>,
    pub m_b: Vec<Vec<f64>>,
    pub v_b: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn for_layers(layers: &[Layer]) -> Self {
        let zeros = |f: fn(&Layer) -> usize| layers.iter().map(|l| vec![0.0; f(l)]).collect::<Vec<_>>();
        Self {
            step: 0,
            m_w: zeros(|l| l.weights.len()),
            v_w: zeros(|l| l.weights.len()),
            m_b: zeros(|l| l.biases.len()),
            v_b: zeros(|l| l.biases.len()),
        }
    }

    pub(crate) fn matches(&self, layers: &[Layer]) -> bool {
        let same = |bufs: &[Vec<f64>], f: fn(&Layer) -> usize| bufs.len() == layers.len() && bufs.iter().zip(layers).all(|(b, l)| b.len() == f(l));
        same(&self.m_w, |l| l.weights.len())
            && same(&self.v_w, |l| l.weights.len())
            && same(&self.m_b, |l| l.biases.len())
            && same(&self.v_b, |l| l.biases.len())
    }
}

fn update(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, c1: f64, c2: f64) {
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
}

/// One bias-corrected Adam update of every parameter.
pub fn adam_step(net: &mut Network, grads: &Gradients, learning_rate: f64) {
    let mut state = std::mem::take(&mut net.adam);
    state.step += 1;
    let t = state.step as f64;
    let c1 = 1.0 - BETA1.powf(t);
    let c2 = 1.0 - BETA2.powf(t);
    for (i, layer) in net.layers_mut().iter_mut().enumerate() {
        update(&mut layer.weights, &grads.weights[i], &mut state.m_w[i], &mut state.v_w[i], learning_rate, c1, c2);
        update(&mut layer.biases, &grads.biases[i], &mut state.m_b[i], &mut state.v_b[i], learning_rate, c1, c2);
    }
    net.adam = state;
}
