//! Block-based adaptive compressive sensing for fixed-camera video.
//!
//! Each frame is measured block by block at a high rate. From the second
//! frame on, only blocks whose low-frequency measurements changed are
//! transmitted, at a rate set by a block-storage budget that keeps the
//! sequence average at or below a target. The decoder fills the missing
//! blocks with the most recent measurements it holds for them and recovers
//! each frame with a proximal-gradient solver.

pub mod bitstream;
pub mod config;
pub mod control;
pub mod dct;
pub mod detect;
pub mod error;
pub mod frame;
pub mod measurement;
pub mod metrics;
pub mod pipeline;
pub mod recon;
pub mod sensing;
pub mod synth;
pub mod video_io;

pub use config::CodecConfig;
pub use error::{Error, Result};
pub use frame::{BlockGrid, Frame};
pub use measurement::{BlockMap, MeasurementSet};
pub use sensing::SamplingOperator;
