use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point ({x}, {y}) lies outside the area of interest")]
    OutOfArea { x: f64, y: f64 },
    #[error("channel {0} is not in the channel plan")]
    UnknownChannel(u16),
    #[error("distance must be positive and finite, got {0}")]
    InvalidDistance(f64),
    #[error("target field {target_dbu} dBuV/m is not attained between {min_m} m and {max_m} m")]
    OutOfRange {
        target_dbu: f64,
        min_m: f64,
        max_m: f64,
    },
    #[error("no separation rule for a {0} mW transmitter")]
    UnknownPower(f64),
    #[error("report from {contributor} at t={timestamp} is older than its latest report at t={latest}")]
    StaleTimestamp {
        contributor: String,
        timestamp: i64,
        latest: i64,
    },
    #[error("invalid {field}: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
}

impl Error {
    pub fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            message: message.into(),
        }
    }
}
