use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::adam::AdamState;
use super::layers::{classifier_chain, infer_shapes, Activation, LayerSpec};
use super::{Shape, Tensor3};
use crate::rng::{lanes, StreamKey};
use crate::{Error, Result};

/// A layer with its resolved shapes and parameters.
///
/// Convolution kernels are laid out `[ky][kx][c_in][c_out]`, dense weights
/// `[in][out]`, so both are a row-major `K × out` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub input: Shape,
    pub output: Shape,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// One gradient buffer per layer, shaped like the layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights).chain(self.biases.iter_mut().zip(&other.biases)) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for buf in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            buf.iter_mut().for_each(|x| *x *= factor);
        }
    }
}

/// Network parameters plus the optimiser state that travels with them.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input: Shape,
    classes: usize,
    seed: u64,
    layers: Vec<Layer>,
    pub(crate) adam: AdamState,
}

/// Activations of one forward pass, kept for backpropagation.
pub struct Trace {
    /// `acts[0]` is the input, `acts[i + 1]` the output of layer `i`.
    acts: Vec<Vec<f64>>,
    /// Winning input index per pooled output cell.
    argmax: Vec<Vec<usize>>,
}

impl Trace {
    pub fn probabilities(&self) -> &[f64] {
        self.acts.last().expect("traces are never empty")
    }

    /// Bit pattern of every ReLU and max-pool decision in the pass.
    pub fn activation_pattern(&self, net: &Network) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        let mut feed = |v: u64| h = (h ^ v).wrapping_mul(0x0100_0000_01b3);
        for (i, layer) in net.layers.iter().enumerate() {
            match layer.spec {
                LayerSpec::Conv2D { activation: Activation::Relu, .. } | LayerSpec::Dense { activation: Activation::Relu, .. } => {
                    self.acts[i + 1].iter().for_each(|v| feed(u64::from(*v > 0.0)));
                }
                LayerSpec::MaxPool2D { .. } => self.argmax[i].iter().for_each(|k| feed(*k as u64)),
                _ => {}
            }
        }
        h
    }
}

impl Network {
    /// Builds `specs` on `input` with He-normal weights and zero biases.
    ///
    /// Weights of layer `i` are drawn from `StreamKey(seed, 0)` on the init
    /// lane, stream `i`.
    pub fn new(input: Shape, specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let shapes = infer_shapes(input, specs)?;
        match specs.iter().position(|s| *s == LayerSpec::Softmax) {
            Some(p) if p + 1 == specs.len() => {}
            _ => return Err(Error::Shape("the chain must end with its only Softmax layer".into())),
        }
        let classes = shapes.last().expect("non-empty chain").len();
        let key = StreamKey::new(seed, 0).with_lane(lanes::INIT);
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let layer_input = if i == 0 { input } else { shapes[i - 1] };
            let (nw, nb) = spec.param_counts(layer_input);
            let std = if nw > 0 { (2.0 / spec.fan_in(layer_input) as f64).sqrt() } else { 0.0 };
            let mut rng = key.stream(i as u64);
            let weights = (0..nw).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
            layers.push(Layer {
                spec: *spec,
                input: layer_input,
                output: shapes[i],
                weights,
                biases: vec![0.0; nb],
            });
        }
        let adam = AdamState::for_layers(&layers);
        Ok(Self {
            input,
            classes,
            seed,
            layers,
            adam,
        })
    }

    pub(crate) fn from_parts(input: Shape, seed: u64, layers: Vec<Layer>, adam: AdamState) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec).collect();
        let mut net = Self::new(input, &specs, seed)?;
        for (dst, src) in net.layers.iter_mut().zip(layers) {
            if dst.weights.len() != src.weights.len() || dst.biases.len() != src.biases.len() {
                return Err(Error::Shape(format!("parameter blob size mismatch in {} layer", dst.spec.name())));
            }
            dst.weights = src.weights;
            dst.biases = src.biases;
        }
        if !adam.matches(&net.layers) {
            return Err(Error::Shape("optimiser moments do not match the parameters".into()));
        }
        net.adam = adam;
        Ok(net)
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Adam steps taken so far.
    pub fn step(&self) -> u64 {
        self.adam.step
    }

    /// `Σ w²` over kernels and dense weights; biases are not penalised.
    pub fn weight_norm_sq(&self) -> f64 {
        self.layers.iter().flat_map(|l| l.weights.iter()).map(|w| w * w).sum()
    }

    fn check_input(&self, x: &Tensor3) -> Result<()> {
        if x.shape() != self.input {
            return Err(Error::Shape(format!("input is {} but the network expects {}", x.shape(), self.input)));
        }
        Ok(())
    }

    /// Class probabilities for `x`.
    pub fn forward(&self, x: &Tensor3) -> Result<Vec<f64>> {
        Ok(self.forward_trace(x)?.acts.pop().expect("traces are never empty"))
    }

    pub fn forward_trace(&self, x: &Tensor3) -> Result<Trace> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut argmax = Vec::with_capacity(self.layers.len());
        acts.push(x.data().to_vec());
        for layer in &self.layers {
            let prev = acts.last().expect("input pushed first");
            let mut winners = Vec::new();
            let out = match layer.spec {
                LayerSpec::Conv2D { kernel, stride, activation, .. } => {
                    let patches = im2col(prev, layer.input, layer.output, kernel, stride);
                    let mut out = bias_rows(&layer.biases, layer.output.height * layer.output.width);
                    matmul_acc(&patches, &layer.weights, &mut out, layer.output.height * layer.output.width, patch_len(layer), layer.output.channels);
                    activate(&mut out, activation);
                    out
                }
                LayerSpec::MaxPool2D { pool, stride } => {
                    let (out, w) = max_pool(prev, layer.input, layer.output, pool, stride);
                    winners = w;
                    out
                }
                LayerSpec::Flatten => prev.clone(),
                LayerSpec::Dense { activation, .. } => {
                    let mut out = layer.biases.clone();
                    matmul_acc(prev, &layer.weights, &mut out, 1, layer.input.len(), layer.output.len());
                    activate(&mut out, activation);
                    out
                }
                LayerSpec::Softmax => softmax(prev),
            };
            argmax.push(winners);
            acts.push(out);
        }
        Ok(Trace { acts, argmax })
    }

    /// Adds the cross-entropy gradient of one labelled sample to `grads`.
    ///
    /// The l2 term is not included; see [`super::loss::add_l2_gradient`].
    pub fn backward_into(&self, trace: &Trace, label: usize, grads: &mut Gradients) -> Result<()> {
        if label >= self.classes {
            return Err(Error::Shape(format!("label {label} out of range for {} classes", self.classes)));
        }
        let last = self.layers.len() - 1;
        // Softmax followed by cross-entropy: dL/dlogits = p − y.
        let mut delta = trace.acts[last + 1].clone();
        delta[label] -= 1.0;
        for i in (0..last).rev() {
            let layer = &self.layers[i];
            let input = &trace.acts[i];
            let output = &trace.acts[i + 1];
            delta = match layer.spec {
                LayerSpec::Conv2D { kernel, stride, activation, .. } => {
                    relu_mask(&mut delta, output, activation);
                    let p = layer.output.height * layer.output.width;
                    let k = patch_len(layer);
                    let f = layer.output.channels;
                    let patches = im2col(input, layer.input, layer.output, kernel, stride);
                    add_column_sums(&delta, f, &mut grads.biases[i]);
                    let pv = ArrayView2::from_shape((p, k), &patches).expect("patch matrix");
                    let dv = ArrayView2::from_shape((p, f), &delta).expect("delta matrix");
                    let mut gw = ArrayViewMut2::from_shape((k, f), &mut grads.weights[i]).expect("kernel gradient");
                    general_mat_mul(1.0, &pv.t(), &dv, 1.0, &mut gw);
                    if i == 0 {
                        break;
                    }
                    let wv = ArrayView2::from_shape((k, f), &layer.weights).expect("kernel");
                    let mut dpatches = vec![0.0; p * k];
                    general_mat_mul(
                        1.0,
                        &dv,
                        &wv.t(),
                        0.0,
                        &mut ArrayViewMut2::from_shape((p, k), &mut dpatches).expect("patch gradient"),
                    );
                    col2im(&dpatches, layer.input, layer.output, kernel, stride)
                }
                LayerSpec::MaxPool2D { .. } => {
                    let mut dx = vec![0.0; layer.input.len()];
                    for (g, &src) in delta.iter().zip(&trace.argmax[i]) {
                        dx[src] += g;
                    }
                    dx
                }
                LayerSpec::Flatten => delta,
                LayerSpec::Dense { activation, .. } => {
                    relu_mask(&mut delta, output, activation);
                    let (n_in, n_out) = (layer.input.len(), layer.output.len());
                    grads.biases[i].iter_mut().zip(&delta).for_each(|(g, d)| *g += d);
                    let gw = &mut grads.weights[i];
                    for (r, &xv) in input.iter().enumerate() {
                        if xv != 0.0 {
                            gw[r * n_out..(r + 1) * n_out].iter_mut().zip(&delta).for_each(|(g, d)| *g += xv * d);
                        }
                    }
                    if i == 0 {
                        break;
                    }
                    let mut dx = vec![0.0; n_in];
                    for (r, d) in dx.iter_mut().enumerate() {
                        *d = layer.weights[r * n_out..(r + 1) * n_out].iter().zip(&delta).map(|(w, g)| w * g).sum();
                    }
                    dx
                }
                LayerSpec::Softmax => return Err(Error::Shape("Softmax must be the last layer".into())),
            };
        }
        Ok(())
    }

    /// Cross-entropy gradient of a single sample, l2 excluded.
    pub fn gradient(&self, x: &Tensor3, label: usize) -> Result<Gradients> {
        let trace = self.forward_trace(x)?;
        let mut grads = Gradients::zeros_like(self);
        self.backward_into(&trace, label, &mut grads)?;
        Ok(grads)
    }
}

/// The reference classifier for `d × d × 2` dependence tensors.
pub fn build_network(d: usize, classes: usize, seed: u64) -> Result<Network> {
    build_network_with(d, classes, super::layers::REFERENCE_DENSE_UNITS, seed)
}

/// The reference chain with custom dense widths (for reduced-size runs).
pub fn build_network_with(d: usize, classes: usize, dense_units: [usize; 2], seed: u64) -> Result<Network> {
    if !(2..=3).contains(&classes) {
        return Err(Error::Config(format!("class count must be 2 or 3, got {classes}")));
    }
    Network::new(Shape::new(d, d, 2), &classifier_chain(classes, dense_units), seed)
}

fn patch_len(layer: &Layer) -> usize {
    match layer.spec {
        LayerSpec::Conv2D { kernel, .. } => kernel[0] * kernel[1] * layer.input.channels,
        _ => 0,
    }
}

fn im2col(x: &[f64], input: Shape, output: Shape, kernel: [usize; 2], stride: [usize; 2]) -> Vec<f64> {
    let c = input.channels;
    let row = kernel[1] * c;
    let k = kernel[0] * row;
    let mut patches = vec![0.0; output.height * output.width * k];
    for oy in 0..output.height {
        for ox in 0..output.width {
            let dst = &mut patches[(oy * output.width + ox) * k..][..k];
            for ky in 0..kernel[0] {
                let start = ((oy * stride[0] + ky) * input.width + ox * stride[1]) * c;
                dst[ky * row..(ky + 1) * row].copy_from_slice(&x[start..start + row]);
            }
        }
    }
    patches
}

fn col2im(dpatches: &[f64], input: Shape, output: Shape, kernel: [usize; 2], stride: [usize; 2]) -> Vec<f64> {
    let c = input.channels;
    let row = kernel[1] * c;
    let k = kernel[0] * row;
    let mut dx = vec![0.0; input.len()];
    for oy in 0..output.height {
        for ox in 0..output.width {
            let src = &dpatches[(oy * output.width + ox) * k..][..k];
            for ky in 0..kernel[0] {
                let start = ((oy * stride[0] + ky) * input.width + ox * stride[1]) * c;
                dx[start..start + row].iter_mut().zip(&src[ky * row..(ky + 1) * row]).for_each(|(d, s)| *d += s);
            }
        }
    }
    dx
}

fn max_pool(x: &[f64], input: Shape, output: Shape, pool: [usize; 2], stride: [usize; 2]) -> (Vec<f64>, Vec<usize>) {
    let c = input.channels;
    let mut out = vec![f64::NEG_INFINITY; output.len()];
    let mut winners = vec![0usize; output.len()];
    for oy in 0..output.height {
        for ox in 0..output.width {
            let base = (oy * output.width + ox) * c;
            // Row-major scan with strict `>` keeps the first maximum.
            for py in 0..pool[0] {
                for px in 0..pool[1] {
                    let src = ((oy * stride[0] + py) * input.width + ox * stride[1] + px) * c;
                    for ch in 0..c {
                        if x[src + ch] > out[base + ch] {
                            out[base + ch] = x[src + ch];
                            winners[base + ch] = src + ch;
                        }
                    }
                }
            }
        }
    }
    (out, winners)
}

fn bias_rows(biases: &[f64], rows: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * biases.len());
    for _ in 0..rows {
        out.extend_from_slice(biases);
    }
    out
}

fn matmul_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    let av = ArrayView2::from_shape((m, k), a).expect("lhs shape");
    let bv = ArrayView2::from_shape((k, n), b).expect("rhs shape");
    let mut cv = ArrayViewMut2::from_shape((m, n), c).expect("output shape");
    general_mat_mul(1.0, &av, &bv, 1.0, &mut cv);
}

fn add_column_sums(m: &[f64], cols: usize, acc: &mut [f64]) {
    for row in m.chunks_exact(cols) {
        acc.iter_mut().zip(row).for_each(|(a, v)| *a += v);
    }
}

fn activate(v: &mut [f64], activation: Activation) {
    if activation == Activation::Relu {
        v.iter_mut().for_each(|x| *x = x.max(0.0));
    }
}

fn relu_mask(delta: &mut [f64], output: &[f64], activation: Activation) {
    if activation == Activation::Relu {
        delta.iter_mut().zip(output).for_each(|(d, y)| {
            if *y <= 0.0 {
                *d = 0.0;
            }
        });
    }
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}
