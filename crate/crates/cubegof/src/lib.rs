// SPDX-License-Identifier: Apache-2.0

//! Std companion of `cubegof-core`: on-disk table store, file formats,
//! parallel execution, simulation studies and the command line.

#![forbid(unsafe_code)]

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod format;
pub mod io;
pub mod store;
pub mod study;

pub use error::{Error, Result};
pub use exec::Parallel;
pub use store::{StoreConfig, SurfaceSpec, TableStore};
