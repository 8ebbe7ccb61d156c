//! Classical neural-network pieces: tensors, CNN layers, loss, PCA and Adam.

mod adam;
mod layers;
mod pca;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use layers::{
    conv2d_backward, conv2d_forward, crop_to_even, crop_to_even_backward, dense_backward, dense_forward,
    maxpool2x2_backward, maxpool2x2_forward, relu_backward, relu_forward, relu_in_place, relu_mask,
    softmax_cross_entropy,
};
pub use pca::{covariance, pca_fit, pca_transform, PcaModel};
pub use tensor::Tensor;
