//! Quaternion and parameterized hypercomplex (PH) deep-learning building
//! blocks, assembled into a StarGANv2-style image-to-image translation model.

pub mod algebra;
pub mod data;
pub mod error;
pub mod init;
pub mod layers;
pub mod nets;
pub mod norm;
pub mod session;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use tensor::Tensor;
