//! Product quantizers with possibly irregular subquantizer widths.

mod codebook;
pub mod kmeans;
mod spec;

pub use codebook::{Code, Codebook, CODEBOOK_MAGIC, CODEBOOK_VERSION};
pub(crate) use codebook::write_spec;
pub use kmeans::{kmeans, KMeans, KMeansConfig};
pub use spec::{allocate_dims, CodeStructure, PqSpec, WordWidth, MAX_SUB_BITS, SUPPORTED_FAMILIES};
