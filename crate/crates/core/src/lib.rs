//! Daily realized-volatility forecasting with a monotone transformation
//! co-trained against a HAR linear predictor under a change-of-variable
//! maximum-likelihood objective.
//!
//! The pipeline: [`market_data`] turns quotes into standardized RV panels,
//! [`transforms`] provides the invertible map families (including the
//! neural-ODE flow), [`har`] the linear predictor, [`cotrain`] the joint
//! training loop, [`eval`] the out-of-sample and Gaussianity metrics,
//! [`synth`] controlled data with known ground truth, and [`experiment`]
//! the end-to-end multi-method driver.

pub mod autodiff;
pub mod cotrain;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod har;
pub mod market_data;
pub mod optim;
pub mod residual;
pub mod rng;
pub mod special;
pub mod synth;
pub mod transforms;

pub use error::{Error, Result};
