pub mod artifact;
pub mod baselines;
pub mod cavi;
pub mod compare;
pub mod cv;
pub mod data;
pub mod error;
pub mod gibbs;
pub mod math;
pub mod model;
pub mod predictive;
pub mod ranking;
pub mod synthetic;

pub use error::{Error, Result};
