//! Dense arrays, layers with reverse-mode gradients, training and weight
//! files.

mod layer;
mod model;
mod tensor;
mod train;
mod weights;

pub use layer::{conv1d, conv_output_len, depthwise_conv1d, ActivationFn, LayerSpec};
pub use model::{Head, Loss, Model, ModelSpec};
pub use tensor::Tensor;
pub use train::{evaluate_loss, train, Dataset, OptimizerKind, TrainConfig, TrainReport};
pub use weights::{decode_weights, encode_weights, load_weights, save_weights, MAGIC};
