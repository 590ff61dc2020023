pub mod error;
pub mod math;
pub mod measurement;
pub mod decay;
pub mod engine;
pub mod ensemble;
pub mod quadrature;
pub mod record;
pub mod rng;
pub mod special;
pub mod spin;
pub mod state;

pub use error::{Error, Result};
