//! A small f64 dense/convolutional network engine.
//!
//! Layers run channel-last with valid padding. Gradients are exact
//! reverse-mode derivatives of softmax cross-entropy plus an l2 weight penalty,
//! and parameters are updated with Adam.

mod adam;
mod io;
mod layers;
mod loss;
mod network;
mod tensor;
mod train;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use io::{load_network, network_from_bytes, network_to_bytes, read_network, save_network, write_network, NETWORK_MAGIC, NETWORK_VERSION};
pub use layers::{classifier_chain, infer_shapes, parameter_count, Activation, LayerSpec, REFERENCE_DENSE_UNITS};
pub use loss::{add_l2_gradient, cross_entropy, l2_penalty, loss, PROB_FLOOR};
pub use network::{build_network, build_network_with, softmax, Gradients, Layer, Network, Trace};
pub use tensor::{Shape, Tensor3};
pub use train::{evaluate, predict, resume, train, EarlyStopping, EpochRecord, LabeledTensor, StopDecision, TrainConfig, TrainProgress};
