// SPDX-License-Identifier: Apache-2.0

//! Single-dataset goodness-of-fit p-values: projections combined by their
//! smallest p-value or their product, and the volume transformation.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::exec::Executor;
use crate::null::{gather_components, trial_statistic, Scratch, TableKind, TabulatedNull, MAX_KNOTS, MIN_TRIALS};
use crate::rng::{block_count, block_len, stream};
use crate::source::{component_cdf, component_cdfs, scalar_cdf, NullSource};
use crate::stats::{component_grid, component_values, scalar_statistic, OrderedSample, TestId};
use crate::transform::{product_uniform_cdf, volume_uniforms, UnitCubeSample};
use crate::{Error, Result};

/// Smallest p-value fed to the product combiner.
pub const MIN_PVALUE: f64 = 1e-300;

const DOMAIN_COMBINED: u64 = 0x636f_6d62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    MinP,
    ProdP,
    Volume,
}

impl Method {
    pub const ALL: [Method; 3] = [Self::MinP, Self::ProdP, Self::Volume];

    pub fn name(self) -> &'static str {
        match self {
            Self::MinP => "min-p",
            Self::ProdP => "prod-p",
            Self::Volume => "volume",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or(Error::InvalidArgument("unknown discovery method"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPValues {
    pub test: TestId,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryResult {
    pub method: Method,
    pub p_final: f64,
    /// Per-axis p-values of the projection methods.
    pub axes: Option<ProjectionPValues>,
    /// Volume-transformed sample of the volume method.
    pub volume_sample: Option<Vec<f64>>,
    /// Number of p-values (projection) or volumes clamped before taking logs.
    pub clamped: usize,
}

/// CDF of the smallest of `n` uniforms, `1 - (1 - x)^n`.
pub fn beta_min_cdf(x: f64, n: usize) -> f64 {
    -libm::expm1(n as f64 * libm::log1p(-x.clamp(0.0, 1.0)))
}

/// CDF of the largest of `n` uniforms, `x^n`.
pub fn beta_max_cdf(x: f64, n: usize) -> f64 {
    libm::pow(x.clamp(0.0, 1.0), n as f64)
}

/// Upper-tail p-value of a univariate sample under `test`.
///
/// Vector tests use the smallest per-component p-value, calibrated by its
/// own Monte Carlo null.
pub fn univariate_pvalue<S: NullSource + ?Sized>(src: &S, test: TestId, values: &[f64]) -> Result<f64> {
    let s = OrderedSample::new(values.to_vec())?;
    let m = s.m();
    if m == 0 {
        return Err(Error::EmptySample { required: 1, found: 0 });
    }
    if !test.is_vector() {
        let t = scalar_statistic(test, &s)?;
        return Ok(1.0 - scalar_cdf(src, test, m, t)?);
    }
    let comps = component_grid(m);
    let x = component_values(test, &s, &comps)?;
    let mut f = vec![None; comps.len()];
    component_cdfs(src, TableKind::Fixed, test, m, &comps, &x, &mut f)?;
    let q = f.into_iter().flatten().fold(1.0f64, |q, f| q.min(1.0 - f));
    Ok(component_cdf(src, TableKind::CombinedFixed, test, 0, m, q)?.unwrap_or(q))
}

pub fn project_pvalues<S: NullSource + ?Sized>(src: &S, data: &UnitCubeSample, test: TestId) -> Result<ProjectionPValues> {
    if data.m() == 0 {
        return Err(Error::EmptySample { required: 1, found: 0 });
    }
    let p = (0..data.n())
        .map(|j| univariate_pvalue(src, test, &data.axis(j)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProjectionPValues { test, p })
}

pub fn min_p_combine(p: &ProjectionPValues) -> DiscoveryResult {
    let min = p.p.iter().copied().fold(1.0, f64::min);
    DiscoveryResult {
        method: Method::MinP,
        p_final: beta_min_cdf(min, p.p.len()),
        axes: Some(p.clone()),
        volume_sample: None,
        clamped: 0,
    }
}

pub fn prod_p_combine(p: &ProjectionPValues) -> DiscoveryResult {
    let mut clamped = 0;
    let prod = p
        .p
        .iter()
        .map(|&x| {
            if x < MIN_PVALUE {
                clamped += 1;
                MIN_PVALUE
            } else {
                x.min(1.0)
            }
        })
        .product::<f64>()
        .max(f64::MIN_POSITIVE);
    let p_final = product_uniform_cdf(prod, p.p.len()).unwrap_or(0.0);
    DiscoveryResult { method: Method::ProdP, p_final, axes: Some(p.clone()), volume_sample: None, clamped }
}

pub fn volume_method_pvalue<S: NullSource + ?Sized>(src: &S, data: &UnitCubeSample, test: TestId) -> Result<DiscoveryResult> {
    if data.m() == 0 {
        return Err(Error::EmptySample { required: 1, found: 0 });
    }
    let (z, clamped) = volume_uniforms(data);
    let p_final = univariate_pvalue(src, test, &z)?;
    Ok(DiscoveryResult { method: Method::Volume, p_final, axes: None, volume_sample: Some(z), clamped })
}

pub fn discover<S: NullSource + ?Sized>(src: &S, data: &UnitCubeSample, test: TestId, method: Method) -> Result<DiscoveryResult> {
    match method {
        Method::MinP => Ok(min_p_combine(&project_pvalues(src, data, test)?)),
        Method::ProdP => Ok(prod_p_combine(&project_pvalues(src, data, test)?)),
        Method::Volume => volume_method_pvalue(src, data, test),
    }
}

/// Null of the smallest per-component p-value of a vector test at grid point `m`.
pub fn tabulate_combined_fixed<S: NullSource + ?Sized, E: Executor>(
    src: &S,
    test: TestId,
    m: usize,
    trials: u64,
    seed: u64,
    exec: &E,
) -> Result<TabulatedNull> {
    if !test.is_vector() {
        return Err(Error::UnsupportedTest(test));
    }
    if trials < MIN_TRIALS {
        return Err(Error::InsufficientTrials { required: MIN_TRIALS, found: trials });
    }
    let fixed = src.fixed(test, m)?;
    let comps = component_grid(m);
    let blocks = exec.map_blocks(block_count(trials), |b| {
        let mut rng = stream(seed, &[DOMAIN_COMBINED, test.code() as u64, m as u64, b as u64]);
        let mut scratch = Scratch::default();
        let mut row = vec![0.0; comps.len()];
        (0..block_len(trials, b))
            .map(|_| {
                trial_statistic(test, m, &comps, &mut rng, &mut scratch, &mut row);
                fixed
                    .components()
                    .iter()
                    .zip(&row)
                    .map(|(c, &x)| 1.0 - c.eval(x))
                    .fold(1.0, f64::min)
            })
            .collect::<Vec<f64>>()
    });
    let components = gather_components(&blocks, trials, &[0], MAX_KNOTS)?;
    TabulatedNull::from_parts(TableKind::CombinedFixed, test, m, trials, seed, components)
}
