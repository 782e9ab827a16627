//! Small CPU neural-network kernel: f64 tensors, convolution / linear /
//! pooling layers with hand-written backward passes, Adam, and a
//! finite-difference gradient checker.

pub mod adam;
pub mod gradcheck;
pub mod layers;
pub mod serialize;
pub mod tensor;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check, GradCheckReport, GradCheckable, LayerProbe};
pub use layers::{Activation, AdaptiveAvgPool2d, AvgPool2d, Conv2d, Layer, Linear, Sequential, Trace};
pub use serialize::{decode_model, encode_model};
pub use tensor::{concat, split, Tensor};
