//! Frame files, exports, parallel drivers and the command-line front end for
//! [`twophoton_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bifr;
pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod model;
pub mod run;
pub mod stats;

pub use config::ExperimentConfig;
pub use error::{AppError, Result};
