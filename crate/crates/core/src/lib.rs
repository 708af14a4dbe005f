//! Neural module networks for visual question answering, enriched with
//! image captions and retrieved background knowledge.
//!
//! The numeric core is generic over the [`Scalar`] type (`f32` or `f64`);
//! the `*64` aliases below are what the trainer and the command-line tool
//! use.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod encoders;
pub mod error;
pub mod fusion;
pub mod gradcheck;
pub mod knowledge;
pub mod layout;
pub mod metrics;
pub mod model;
pub mod modules;
pub mod optim;
pub mod params;
pub mod scalar;
pub mod synth;
pub mod tape;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor64 = tensor::Tensor<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
pub type Tape64 = tape::Tape<f64>;
pub type Tape32 = tape::Tape<f32>;
pub type ParameterStore64 = params::ParameterStore<f64>;
pub type Model64 = model::Model<f64>;
