//! CSV ingestion, model files and the batch command line around
//! [`flowsentinel_core`].

pub mod cli;
pub mod dataset_io;
pub mod error;
pub mod model_store;

pub use error::{Error, Result};
