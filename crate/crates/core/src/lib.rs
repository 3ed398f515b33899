pub mod charfns;
pub mod codegen;
pub mod dd;
pub mod diagnostics;
pub mod diffring;
pub mod error;
pub mod moments;
pub mod pipeline;
pub mod quadrature;
pub mod sampler;
pub mod series;
pub mod special;
pub mod tails;

pub use error::{Error, Result};
