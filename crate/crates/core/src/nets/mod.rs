//! StarGANv2-style networks, losses, optimizer and training step.

mod adam;
mod blocks;
mod config;
mod losses;
mod networks;
mod train;

pub use adam::{AdamState, ADAM_EPS};
pub use blocks::{AdaResBlk, Factory, ResBlk, LRELU_SLOPE};
pub use config::{AlgebraKind, TrainConfig};
pub use losses::{
    adversarial_loss, cycle_loss, diversification_loss, generator_objective, rgb, style_reconstruction_loss,
    LossWeights, Side,
};
pub use networks::{Discriminator, Generator, MappingNetwork, StyleEncoder, Trunk};
pub use train::{sample_batch, Batch, GeneratorLosses, LossReport, ModelBundle, Phase, NETWORK_NAMES};
