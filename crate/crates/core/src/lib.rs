pub mod analytics;
pub mod chargrid;
pub mod corpus;
pub mod decoding;
pub mod error;
pub mod jsonl;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod synthetic;
pub mod training;

pub use error::{Error, ErrorKind, Result};
