// SPDX-License-Identifier: Apache-2.0

use alloc::boxed::Box;
use alloc::string::String;

use crate::stats::TestId;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("value {value} at row {row}, column {col} is outside the support of {model}")]
    OutsideSupport {
        row: usize,
        col: usize,
        value: f64,
        model: String,
    },

    #[error("value {0} is outside the unit interval")]
    OutOfUnitInterval(f64),

    #[error("argument out of range: {0}")]
    InvalidArgument(&'static str),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("transform failed for sample {index}: {source}")]
    Transform { index: usize, source: Box<Error> },

    #[error("statistic requires at least {required} events, got {found}")]
    EmptySample { required: usize, found: usize },

    #[error("test {0} is not supported here")]
    UnsupportedTest(TestId),

    #[error("no null table for {test} at {what}")]
    MissingTable { test: TestId, what: String },

    #[error("at least {required} Monte Carlo trials are required, got {found}")]
    InsufficientTrials { required: u64, found: u64 },

    #[error("non-finite statistic encountered during tabulation")]
    NonFiniteStatistic,

    #[error("standard deviation estimate is not positive at m = {0}")]
    DegenerateSpread(usize),

    #[error("m = {m} is below the asymptotic threshold {threshold}")]
    BelowAsymptoticThreshold { m: usize, threshold: usize },

    #[error("density is zero everywhere")]
    ZeroDensity,

    #[error("convolution aliasing: {0:e} of the mass reached the padded boundary")]
    Aliasing(f64),

    #[error("Poisson-averaged curve is not monotone between mu = {lo} and mu = {hi}")]
    NonMonotone { lo: f64, hi: f64 },

    #[error("no root below mu = {0}")]
    NoRoot(f64),

    #[error("correction surface would need extrapolation: {0}")]
    Extrapolation(&'static str),

    #[error("bisection did not converge after {0} iterations")]
    NonConvergence(usize),

    #[error("correction surface has empty cells")]
    IncompleteSurface,
}
