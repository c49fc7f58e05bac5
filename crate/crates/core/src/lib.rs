//! Watermark-based detection of unauthorized style-mimicry fine-tuning.
//!
//! * [`imagecore`]: 8-bit buffers, BT.601 colour, PSNR, PNG/JPEG/BMP I/O
//! * [`transforms`]: Haar DWT, block DCT, small-tile Jacobi SVD
//! * [`watermark`]: the `dwt-dct` and `dwt-dct-svd` blind codecs
//! * [`attacks`]: image attacks addressed by compact spec strings
//! * [`channel`]: simulated fine-tune channel, presets and surrogate degradation
//! * [`verify`]: histograms, hypothesis tests, verdicts, authorization matching
//! * [`stats`]: discrete distributions and test statistics
//! * [`corpus`]: seeded procedural test imagery

pub mod attacks;
pub mod channel;
pub mod corpus;
pub mod imagecore;
pub mod stats;
pub mod transforms;
pub mod verify;
pub mod watermark;
