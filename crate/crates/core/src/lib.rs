//! Lowest-floor elevation extraction, imputation and flood-loss assessment
//! for residential parcels.

pub mod ensemble;
pub mod error;
pub mod features;
pub mod geo;
pub mod pipeline;
pub mod raster;
pub mod risk;

pub use error::{Error, Result};
