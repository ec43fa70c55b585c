//! Product-quantization nearest-neighbor search with irregular subquantizer
//! widths, packed transposed code blocks and saturating integer lookup tables.

pub mod dataset;
pub mod cli;
pub mod distance;
pub mod error;
pub mod eval;
pub mod index;
pub mod layout;
pub mod quantizer;
pub mod scan;
pub mod vectors;

pub use error::{Error, Result};
