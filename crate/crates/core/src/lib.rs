//! Decentralized multi-robot foraging and search-and-rescue on 2D grids,
//! with agents that share their planned paths as rasterized intention maps
//! and learn dense spatial action values with double DQN.
//!
//! The numeric core is generic over [`Scalar`]; the simulator and trainer
//! run in `f32` through the aliases below, while gradient checks run the same
//! code in `f64`.

pub mod coordination;
pub mod environment;
pub mod error;
pub mod gridcore;
pub mod harness;
pub mod learner;
pub mod perception;
pub mod predictor;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Map type used by the simulator and state tensors.
pub type Map = gridcore::ScalarMap<f32>;
pub type State = perception::StateTensor<f32>;
pub type Net = learner::FcnNet<f32>;
pub type QMap = learner::QValueMap<f32>;
