//! Learnable architectures: the neural state-space base model, the affine
//! lifting map from manifold coordinates to base parameters, and the
//! bidirectional-GRU encoder that maps a dataset to coordinates.

mod encoder;
mod init;
mod kernels;
mod layout;
mod manifold;
mod scaling;
mod ssm;

pub use encoder::{encode, EncoderCache, EncoderConfig, EncoderLayout};
pub use init::{glorot_fill, init_encoder, init_manifold, init_ssm};
pub use layout::{Layout, Segment};
pub use manifold::{lift, Manifold};
pub use scaling::SignalScaling;
pub use ssm::{rollout, ssm_forward, theta_count, Rollout, SsmConfig, ThetaLayout};
