pub mod algorithms;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod multipliers;
pub mod scenario;
pub mod single_user;

pub use error::{Error, Result};
