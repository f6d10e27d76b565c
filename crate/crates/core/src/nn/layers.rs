use serde::{Deserialize, Serialize};

use super::Shape;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
}

/// One layer of the chain. All spatial layers use valid padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv2D {
        filters: usize,
        kernel: [usize; 2],
        stride: [usize; 2],
        activation: Activation,
    },
    MaxPool2D {
        pool: [usize; 2],
        stride: [usize; 2],
    },
    Flatten,
    Dense {
        units: usize,
        activation: Activation,
    },
    Softmax,
}

fn valid_extent(size: usize, kernel: usize, stride: usize) -> Option<usize> {
    (size >= kernel && kernel > 0 && stride > 0).then(|| (size - kernel) / stride + 1)
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2D { .. } => "Conv2D",
            LayerSpec::MaxPool2D { .. } => "MaxPool2D",
            LayerSpec::Flatten => "Flatten",
            LayerSpec::Dense { .. } => "Dense",
            LayerSpec::Softmax => "Softmax",
        }
    }

    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Conv2D { .. } | LayerSpec::Dense { .. })
    }

    /// Output shape for `input`, or a description of why the layer does not fit.
    pub fn output_shape(&self, input: Shape) -> std::result::Result<Shape, String> {
        match *self {
            LayerSpec::Conv2D { filters, kernel, stride, .. } => {
                if filters == 0 {
                    return Err("zero filters".into());
                }
                match (
                    valid_extent(input.height, kernel[0], stride[0]),
                    valid_extent(input.width, kernel[1], stride[1]),
                ) {
                    (Some(h), Some(w)) => Ok(Shape::new(h, w, filters)),
                    _ => Err(format!("{}x{} kernel does not fit a {input} input", kernel[0], kernel[1])),
                }
            }
            LayerSpec::MaxPool2D { pool, stride } => match (
                valid_extent(input.height, pool[0], stride[0]),
                valid_extent(input.width, pool[1], stride[1]),
            ) {
                (Some(h), Some(w)) if h > 0 && w > 0 => Ok(Shape::new(h, w, input.channels)),
                _ => Err(format!("{}x{} pool does not fit a {input} input", pool[0], pool[1])),
            },
            LayerSpec::Flatten => Ok(Shape::flat(input.len())),
            LayerSpec::Dense { units, .. } => {
                if !input.is_flat() {
                    Err(format!("dense layer needs a flattened input, got {input}"))
                } else if units == 0 {
                    Err("zero units".into())
                } else {
                    Ok(Shape::flat(units))
                }
            }
            LayerSpec::Softmax => {
                if input.is_flat() {
                    Ok(input)
                } else {
                    Err(format!("softmax needs a flattened input, got {input}"))
                }
            }
        }
    }

    /// `(weight count, bias count)` for a given input shape.
    pub fn param_counts(&self, input: Shape) -> (usize, usize) {
        match *self {
            LayerSpec::Conv2D { filters, kernel, .. } => (kernel[0] * kernel[1] * input.channels * filters, filters),
            LayerSpec::Dense { units, .. } => (input.len() * units, units),
            _ => (0, 0),
        }
    }

    /// Fan-in used for He initialisation.
    pub fn fan_in(&self, input: Shape) -> usize {
        match *self {
            LayerSpec::Conv2D { kernel, .. } => kernel[0] * kernel[1] * input.channels,
            LayerSpec::Dense { .. } => input.len(),
            _ => 0,
        }
    }
}

/// Shapes after each layer of `specs` applied to `input`.
pub fn infer_shapes(input: Shape, specs: &[LayerSpec]) -> Result<Vec<Shape>> {
    if input.is_empty() {
        return Err(Error::Shape(format!("input shape {input} is empty")));
    }
    let mut shapes = Vec::with_capacity(specs.len());
    let mut current = input;
    for (i, spec) in specs.iter().enumerate() {
        current = spec
            .output_shape(current)
            .map_err(|why| Error::Shape(format!("layer {} ({}): {why}", i + 1, spec.name())))?;
        shapes.push(current);
    }
    Ok(shapes)
}

/// Total trainable parameters of `specs` on `input`.
pub fn parameter_count(input: Shape, specs: &[LayerSpec]) -> Result<usize> {
    let shapes = infer_shapes(input, specs)?;
    Ok(specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let layer_input = if i == 0 { input } else { shapes[i - 1] };
            let (w, b) = spec.param_counts(layer_input);
            w + b
        })
        .sum())
}

/// Dense widths of the reference classifier.
pub const REFERENCE_DENSE_UNITS: [usize; 2] = [1024, 512];

/// The three-convolution classifier chain with the given dense widths:
/// Conv(64, 3×3, /2) → Pool(2×2, /1) → Conv(128) → Conv(256) → Pool(2×2, /1) →
/// Flatten → Dense → Dense → Dense(classes) → Softmax.
pub fn classifier_chain(classes: usize, dense_units: [usize; 2]) -> Vec<LayerSpec> {
    let conv = |filters, stride| LayerSpec::Conv2D {
        filters,
        kernel: [3, 3],
        stride: [stride, stride],
        activation: Activation::Relu,
    };
    let pool = LayerSpec::MaxPool2D {
        pool: [2, 2],
        stride: [1, 1],
    };
    vec![
        conv(64, 2),
        pool,
        conv(128, 1),
        conv(256, 1),
        pool,
        LayerSpec::Flatten,
        LayerSpec::Dense {
            units: dense_units[0],
            activation: Activation::Relu,
        },
        LayerSpec::Dense {
            units: dense_units[1],
            activation: Activation::Relu,
        },
        LayerSpec::Dense {
            units: classes,
            activation: Activation::Identity,
        },
        LayerSpec::Softmax,
    ]
}
