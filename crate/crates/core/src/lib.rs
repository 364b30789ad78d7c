//! Probabilistic forecasting of unplanned outage durations.
//!
//! An initial Gamma forecast comes from onset features; a recurrent update
//! network refines it as free-text repair logs arrive.

pub mod datastore;
pub mod error;
pub mod evalreport;
pub mod features;
pub mod gammadist;
pub mod io_util;
pub mod kv;
pub mod netmodel;
pub mod numcore;
pub mod textprep;
pub mod training;

pub use error::{Error, ErrorClass, Result};
pub use gammadist::GammaParams;
pub use numcore::{Graph, ParamSet, Tensor, Var};
