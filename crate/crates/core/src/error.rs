use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid reflection path: {0}")]
    InvalidPath(String),
    #[error("{what} outside its domain (value {value})")]
    Domain { what: &'static str, value: f64 },
    #[error("bessel_j({order}, {argument}) outside supported range |l| <= 64, 0 <= z <= 100")]
    BesselRange { order: i32, argument: f64 },
    #[error("tap offset {offset} exceeds cyclic prefix length {cp_length}")]
    CyclicPrefixTooShort { offset: i64, cp_length: usize },
    #[error("negative tap offset {offset} for reflection path {path}")]
    NegativeOffset { offset: i64, path: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("channel entry {index} is singular (|h| = {magnitude:e})")]
    SingularChannel { index: usize, magnitude: f64 },
    #[error("water level bracket could not be established: {0}")]
    Bracket(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
