pub mod cli;
pub mod datagen;
pub mod error;
pub mod gibbs;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod study;

pub use error::{Error, Result};
