//! Retinex-GAN low-light image enhancement: data synthesis, networks, losses,
//! training, metrics and the experiment harness.

pub mod autograd;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evalharness;
pub mod filter;
pub mod gradcheck;
pub mod imgcore;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod optim;
pub mod scalar;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};

pub type Tensor32 = tensor::Tensor<f32>;
pub type Tensor64 = tensor::Tensor<f64>;
pub type Image32 = imgcore::ImageTensor<f32>;
pub type Image64 = imgcore::ImageTensor<f64>;
pub type Generator32 = model::Generator<f32>;
pub type Discriminator32 = model::PatchDiscriminator<f32>;
pub type TrainState32 = trainer::TrainState<f32>;
