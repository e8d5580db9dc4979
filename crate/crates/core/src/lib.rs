// SPDX-License-Identifier: Apache-2.0

//! Goodness-of-fit tests and upper limits for arbitrary multivariate models.
//!
//! Data are first mapped into the unit hypercube under the proposed model
//! ([`transform`]). Uniformity of the transformed sample is then tested either
//! through its axis projections or through the volume transformation, with
//! univariate statistics ([`stats`]) whose null distributions are tabulated by
//! Monte Carlo ([`null`]). The same machinery, averaged over a Poisson event
//! count, yields upper limits on an event rate ([`limits`]).
//!
//! The crate is `no_std` and only needs `alloc`. Table persistence, parallel
//! execution and the command line live in the `cubegof` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod density;
pub mod discovery;
pub mod error;
pub mod exec;
pub mod fft;
pub mod interp;
pub mod limits;
pub mod marginal;
pub mod mgrid;
pub mod null;
pub mod poisson;
pub mod rng;
pub mod roots;
pub mod sim;
pub mod source;
pub mod special;
pub mod stats;
pub mod transform;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use marginal::MarginalModel;
pub use source::{MemoryNulls, NullSource};
pub use stats::{OrderedSample, Spacings, TestId};
pub use transform::{HierarchicalModel, ProductModel, SampleMatrix, UnitCubeSample};
