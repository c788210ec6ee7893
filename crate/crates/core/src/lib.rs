//! Fixed-point software model of a keyword-spotting accelerator.
//!
//! The pipeline is MFCC feature extraction ([`frontend`]), vector
//! quantization against an offline-trained codebook ([`vq`]) and template
//! matching by dynamic time warping or its fixed-diagonal simplification
//! ([`matcher`]). [`costmodel`] turns instrumented operation counts into
//! cycles and latency, [`oracle`] holds independent floating-point
//! references, and [`harness`] covers corpus I/O, training, evaluation and
//! the model file format.

pub mod costmodel;
pub mod error;
pub mod frontend;
pub mod harness;
pub mod matcher;
pub mod numerics;
pub mod ops;
pub mod oracle;
pub mod synth;
pub mod vq;

pub use error::{Error, Result};
