//! Dense neural-network primitives with explicit forward and backward passes.

pub mod backbone;
pub mod conv;
pub mod linear;
pub mod loss;
pub mod optim;
pub mod weights;

pub use backbone::{Backbone, BackboneSpec, ConvSpec, PoolSpec};
pub use conv::{conv2d, conv2d_backward, max_pool2d, max_pool2d_backward, relu, relu_backward, Conv2dGrads};
pub use linear::{fc, fc_backward, FcGrads, Linear};
pub use loss::{bce_loss, bce_loss_batch, instance_embedding_loss, sigmoid, softmax, softmax_backward, softmax_rows, softmax_rows_backward};
pub use optim::{clip_grad_norm, sgd_step, Parameterized, Sgd, SgdConfig};
pub use weights::{parse_weight_file, serialize_weight_file, WeightEntry, WeightFile, WeightFileError};
