//! Numeric kernels shared by both codecs: one-level orthonormal Haar DWT,
//! orthonormal block DCT-II and one-sided Jacobi SVD for small tiles.

mod blocks;
mod dct;
mod haar;
mod svd;

pub use blocks::BlockGrid;
pub use dct::{dct2_block, idct2_block, zigzag_order};
pub use haar::{dwt2_haar, idwt2_haar, Subbands};
pub use svd::{svd_block, Svd};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("plane is empty or too small to transform")]
    EmptyPlane,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("block size must be 4 or 8, got {0}")]
    BadBlockSize(usize),
    #[error("tile contains non-finite values")]
    NonFiniteInput,
}
