// SPDX-License-Identifier: Apache-2.0

use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

use crate::exec::Executor;
use crate::mgrid::{rate, rate_bracket, RATE_POINTS};
use crate::null::{component_from_samples, draw_sorted_uniform, TableKind, TabulatedNull, MAX_KNOTS, MIN_TRIALS};
use crate::poisson::{sample_count_positive, PoissonWindow};
use crate::rng::{block_count, block_len, stream};
use crate::source::{component_cdfs, pcs_sum_cdf, scalar_cdf, NullSource};
use crate::stats::{component_grid, component_values, scalar_statistic, OrderedSample, TestId};
use crate::{Error, Result};

/// Slack allowed when checking that a curve is non-decreasing.
const MONOTONE_TOL_SCALAR: f64 = 1e-3;
const MONOTONE_TOL_COMBINED: f64 = 1e-2;

const DOMAIN_COMBINED_POISSON: u64 = 0x706f_6973;

/// How `F_T(t_obs | m)` is formed at each event count.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveKind {
    /// The event count itself; fewer events are more extreme.
    Counting,
    /// Scalar statistic.
    Scalar { test: TestId, t_obs: f64 },
    /// Largest of `n` independent PCS statistics.
    MaxOf { t_obs: f64, n: usize },
    /// Sum of `n` independent PCS statistics.
    Sum { t_obs: f64, n: usize },
    /// Vector test: each component is Poisson-averaged separately, the
    /// largest average is the statistic, and its law at the rate is read
    /// from a calibration table.
    Combined { test: TestId, comps: Vec<usize>, x_obs: Vec<f64> },
}

/// `mu -> F_{T,Pois}(t_obs | mu)` for one observed dataset, with per-`m`
/// table lookups cached across rates.
pub struct PoissonAveragedCurve<'a, S: NullSource + ?Sized> {
    src: &'a S,
    kind: CurveKind,
    m_obs: usize,
    /// Per-`m` CDF values, indexed by `m`; empty until computed.
    cache: RefCell<Vec<Vec<f64>>>,
    log: RefCell<Vec<(f64, f64)>>,
}

impl<'a, S: NullSource + ?Sized> PoissonAveragedCurve<'a, S> {
    pub fn new(src: &'a S, kind: CurveKind, m_obs: usize) -> Self {
        let kind = if m_obs == 0 { CurveKind::Counting } else { kind };
        Self { src, kind, m_obs, cache: RefCell::new(Vec::new()), log: RefCell::new(Vec::new()) }
    }

    pub fn counting(src: &'a S, m_obs: usize) -> Self {
        Self::new(src, CurveKind::Counting, m_obs)
    }

    /// Curve of a univariate sample under `test`.
    pub fn from_sample(src: &'a S, test: TestId, values: &[f64]) -> Result<Self> {
        let s = OrderedSample::new(values.to_vec())?;
        let m = s.m();
        if m == 0 {
            return Ok(Self::counting(src, 0));
        }
        let kind = if test.is_vector() {
            let comps = component_grid(m);
            let x_obs = component_values(test, &s, &comps)?;
            CurveKind::Combined { test, comps, x_obs }
        } else {
            CurveKind::Scalar { test, t_obs: scalar_statistic(test, &s)? }
        };
        Ok(Self::new(src, kind, m))
    }

    pub fn kind(&self) -> &CurveKind {
        &self.kind
    }

    pub fn m_obs(&self) -> usize {
        self.m_obs
    }

    pub(crate) fn evaluations(&self) -> usize {
        self.log.borrow().len()
    }

    /// Makes sure every `m >= 1` of the window is cached.
    fn fill(&self, w: &PoissonWindow) -> Result<()> {
        let hi = w.hi();
        if self.cache.borrow().len() <= hi {
            self.cache.borrow_mut().resize(hi + 1, Vec::new());
        }
        for m in w.lo.max(1)..=hi {
            if self.cache.borrow()[m].is_empty() {
                let v = self.compute(m)?;
                self.cache.borrow_mut()[m] = v;
            }
        }
        Ok(())
    }

    fn compute(&self, m: usize) -> Result<Vec<f64>> {
        let v = match &self.kind {
            CurveKind::Counting => vec![if m > self.m_obs { 1.0 } else { 0.0 }],
            CurveKind::Scalar { test, t_obs } => vec![self.scalar(*test, m, *t_obs)?],
            CurveKind::MaxOf { t_obs, n } => {
                vec![libm::pow(self.scalar(TestId::Pcs, m, *t_obs)?, *n as f64)]
            }
            CurveKind::Sum { t_obs, n } => {
                if *n == 1 || *t_obs == f64::INFINITY {
                    vec![self.scalar(TestId::Pcs, m, *t_obs)?]
                } else {
                    vec![pcs_sum_cdf(self.src, m, *n, *t_obs)?]
                }
            }
            CurveKind::Combined { test, comps, x_obs } => {
                // Components at or above `m` do not exist at this count.
                let k = comps.partition_point(|&c| c < m);
                let mut f = vec![None; k];
                component_cdfs(self.src, TableKind::Fixed, *test, m, &comps[..k], &x_obs[..k], &mut f)?;
                let mut v: Vec<f64> = f.into_iter().map(|x| x.unwrap_or(0.0)).collect();
                v.resize(comps.len(), 0.0);
                v
            }
        };
        Ok(v)
    }

    fn scalar(&self, test: TestId, m: usize, t: f64) -> Result<f64> {
        if t == f64::INFINITY {
            return Ok(1.0);
        }
        scalar_cdf(self.src, test, m, t)
    }

    /// Largest Poisson-averaged component CDF of a vector test at `mu`;
    /// `+inf` for non-combined curves.
    pub fn combined_statistic(&self, mu: f64) -> Result<f64> {
        let CurveKind::Combined { comps, .. } = &self.kind else {
            return Ok(f64::INFINITY);
        };
        let window = PoissonWindow::new(mu);
        self.fill(&window)?;
        let cache = self.cache.borrow();
        let mut acc = vec![0.0; comps.len()];
        for (m, w) in window.iter().filter(|&(m, _)| m > 0) {
            for (a, v) in acc.iter_mut().zip(&cache[m]) {
                *a += w * v;
            }
        }
        Ok(acc.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }

    /// `F_{T,Pois}(t_obs | mu)`.
    pub fn cdf(&self, mu: f64) -> Result<f64> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidArgument("rate must be finite and non-negative"));
        }
        let value = match &self.kind {
            CurveKind::Combined { test, .. } => {
                if mu == 0.0 {
                    0.0
                } else {
                    let c_obs = self.combined_statistic(mu)?;
                    -libm::expm1(-mu) * self.combined_null(*test, mu, c_obs)?
                }
            }
            _ => {
                let window = PoissonWindow::new(mu);
                self.fill(&window)?;
                let cache = self.cache.borrow();
                let total: f64 = window.iter().filter(|&(m, _)| m > 0).map(|(m, w)| w * cache[m][0]).sum();
                total.clamp(0.0, 1.0)
            }
        };
        self.log.borrow_mut().push((mu, value));
        Ok(value)
    }

    /// Upper-tail probability `1 - F`, the Poisson-averaged p-value.
    pub fn pvalue(&self, mu: f64) -> Result<f64> {
        Ok(1.0 - self.cdf(mu)?)
    }

    fn combined_null(&self, test: TestId, mu: f64, c: f64) -> Result<f64> {
        let (i, j, w) = rate_bracket(mu).ok_or(Error::MissingTable {
            test,
            what: alloc::format!("{} mu = {mu}", TableKind::CombinedPoisson.name()),
        })?;
        let gi = self.src.table(TableKind::CombinedPoisson, test, i)?.eval(c);
        if i == j {
            return Ok(gi);
        }
        let gj = self.src.table(TableKind::CombinedPoisson, test, j)?.eval(c);
        Ok((1.0 - w) * gi + w * gj)
    }

    /// Fails if the evaluations recorded so far in `[lo, hi]` decrease.
    pub fn check_monotone(&self, lo: f64, hi: f64) -> Result<()> {
        let tol = match self.kind {
            CurveKind::Combined { .. } => MONOTONE_TOL_COMBINED,
            _ => MONOTONE_TOL_SCALAR,
        };
        let mut pts: Vec<(f64, f64)> =
            self.log.borrow().iter().copied().filter(|&(mu, _)| mu >= lo && mu <= hi).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut run_max = (f64::NEG_INFINITY, 0.0);
        for &(mu, v) in &pts {
            if v < run_max.0 - tol {
                return Err(Error::NonMonotone { lo: run_max.1, hi: mu });
            }
            if v > run_max.0 {
                run_max = (v, mu);
            }
        }
        Ok(())
    }
}

/// Null of the combined vector statistic at rate `rate(index)`, over
/// datasets with a Poisson number of events conditional on at least one.
pub fn tabulate_combined_poisson<S: NullSource + ?Sized, E: Executor>(
    src: &S,
    test: TestId,
    index: usize,
    trials: u64,
    seed: u64,
    exec: &E,
) -> Result<TabulatedNull> {
    if !test.is_vector() {
        return Err(Error::UnsupportedTest(test));
    }
    if index >= RATE_POINTS {
        return Err(Error::InvalidArgument("rate index out of range"));
    }
    if trials < MIN_TRIALS {
        return Err(Error::InsufficientTrials { required: MIN_TRIALS, found: trials });
    }
    let mu = rate(index);
    let blocks = exec.map_blocks(block_count(trials), |b| -> Result<Vec<f64>> {
        let mut rng = stream(seed, &[DOMAIN_COMBINED_POISSON, test.code() as u64, index as u64, b as u64]);
        let (mut gaps, mut sorted) = (Vec::new(), Vec::new());
        (0..block_len(trials, b))
            .map(|_| {
                let m = sample_count_positive(&mut rng, mu);
                draw_sorted_uniform(&mut rng, m, &mut gaps, &mut sorted);
                let curve = PoissonAveragedCurve::from_sample(src, test, &sorted)?;
                curve.combined_statistic(mu)
            })
            .collect()
    });
    let mut all = Vec::with_capacity(trials as usize);
    for b in blocks {
        all.extend(b?);
    }
    let component = component_from_samples(0, &mut all, MAX_KNOTS)?;
    TabulatedNull::from_parts(TableKind::CombinedPoisson, test, index, trials, seed, vec![component])
}
