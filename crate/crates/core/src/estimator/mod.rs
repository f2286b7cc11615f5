//! Learned channel prediction and reconstruction.
//!
//! The encoder watches a window of channel matrices and predicts the next
//! slot's path parameters; the quantizer turns those into feedback bits; the
//! decoder reconstructs the channel matrix on the far side. Training runs
//! both gradient chains per batch: the encoder against the NMSE of the
//! channel its parameters imply, the decoder against reconstruction NMSE.

pub mod baselines;
pub mod checkpoint;
pub mod decoder;
pub mod encoder;
pub mod layers;
pub mod train;

pub use baselines::{oracle_estimator, persistence_baseline};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use decoder::{channel_to_tensor, decoder_forward, tensor_to_channel, DecoderParams};
pub use encoder::{
    encoder_forward, input_embedding, EncoderParams, EstimatorDims, FeatureExtractor,
};
pub use layers::{
    layer_norm, leaky_relu, multi_head_self_attention, AttentionHead, Conv2dParams,
    LayerNormParams, LinearLayer, MhsaParams,
};
pub use train::{predict, train, EpochStats, Prediction, TrainConfig, TrainSample};
