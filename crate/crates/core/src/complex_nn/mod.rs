//! Complex-valued layers and the embedding network built from them.
//!
//! Every layer has a forward pass and an exact backward pass. Complex
//! tensors are treated as pairs of real tensors, so gradients are ordinary
//! real gradients with respect to real and imaginary parts.

mod activation;
mod batchnorm;
mod conv;
mod head;
mod model;
mod pool;
mod tensor;

pub use activation::{cvrelu, cvrelu_backward};
pub use batchnorm::{cvbn_backward, cvbn_forward, inv_sqrt_2x2, update_running_stats, BnBatchStats, BnCache, BnGrads, CvbnParams};
pub use conv::{cvconv1d_backward, cvconv1d_forward, cvconv1d_forward_counted, ConvCache, ConvGrads, ConvLayerParams, MacCounter, Padding};
pub use head::{flatten, flatten_and_head, head_backward, DenseHeadParams, HeadCache, HeadGrads, HeadOutput};
pub use model::{BlockGrads, ConvBlock, EmbeddingModel, Forward, ModelConfig, ModelGrads};
pub use pool::{magnitude_maxpool, maxpool_backward, PoolCache};
pub use tensor::CTensor;

/// Train mode uses batch statistics and dropout; eval mode is
/// deterministic and uses running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
