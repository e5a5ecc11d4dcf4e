use thiserror::Error;

use crate::bitstream::StreamError;
use crate::config::ConfigError;
use crate::control::ControlError;
use crate::detect::DetectError;
use crate::frame::FrameError;
use crate::metrics::MetricsError;
use crate::recon::ReconError;
use crate::sensing::SensingError;
use crate::video_io::VideoIoError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Recon(#[from] ReconError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    VideoIo(#[from] VideoIoError),
    #[error("{0}")]
    Input(String),
}

impl Error {
    /// Process exit status: 2 config, 3 I/O, 4 stream corruption, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Control(_) => 2,
            Self::VideoIo(_) => 3,
            Self::Stream(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
