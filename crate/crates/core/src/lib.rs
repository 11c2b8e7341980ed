pub mod analysis;
pub mod error;
pub mod linalg;
pub mod recovery;
pub mod sampling;
pub mod seed;

pub use error::{Error, Result};
