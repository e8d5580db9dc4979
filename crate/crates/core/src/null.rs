// SPDX-License-Identifier: Apache-2.0

//! Monte Carlo null distributions of the test statistics.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::Exp1;

use crate::exec::Executor;
use crate::interp::MonotoneCubic;
use crate::rng::{block_count, block_len, stream, TrialRng};
use crate::special::normal_cdf;
use crate::stats::{component_grid, interval_with_k, ks_sorted, pcs_from_gaps, TestId};
use crate::{Error, Result};

/// Smallest trial count accepted for a persisted table.
pub const MIN_TRIALS: u64 = 100_000;
/// Knot budget for scalar statistics.
pub const MAX_KNOTS: usize = 2048;
/// Knot budget per component of a vector statistic.
pub const MAX_COMPONENT_KNOTS: usize = 512;
/// Null tables are tabulated up to this event count; above it only the
/// Gaussian asymptote is available.
pub const ASYMPTOTIC_THRESHOLD: usize = 10_000;

const DOMAIN_FIXED: u64 = 0x7461_6231;
const DOMAIN_ASYMPTOTE: u64 = 0x6173_796d;

/// What a table describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TableKind {
    /// Statistic of `m` uniform points; vector tests carry one component per index.
    Fixed,
    /// Smallest per-component p-value of a vector test at fixed `m`.
    CombinedFixed,
    /// Largest Poisson-averaged component CDF of a vector test, at the rate
    /// with index `m` on the rate grid, conditional on at least one event.
    CombinedPoisson,
}

impl TableKind {
    pub fn code(self) -> u8 {
        match self {
            Self::Fixed => 1,
            Self::CombinedFixed => 2,
            Self::CombinedPoisson => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        [Self::Fixed, Self::CombinedFixed, Self::CombinedPoisson]
            .into_iter()
            .find(|k| k.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Fixed => "fixed",
            Self::CombinedFixed => "combined",
            Self::CombinedPoisson => "combined-poisson",
        }
    }
}

/// Interpolated CDF of one statistic (or one component of a vector statistic).
#[derive(Debug, Clone, PartialEq)]
pub struct NullComponent {
    index: usize,
    mean: f64,
    sd: f64,
    cdf: MonotoneCubic,
}

impl NullComponent {
    pub fn new(index: usize, mean: f64, sd: f64, knots: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        if cdf.iter().any(|v| !(0.0..=1.0).contains(v)) || cdf.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("CDF values must be non-decreasing in [0, 1]"));
        }
        if !(mean.is_finite() && sd.is_finite() && sd >= 0.0) {
            return Err(Error::InvalidArgument("component moments must be finite"));
        }
        Ok(Self { index, mean, sd, cdf: MonotoneCubic::new(knots, cdf)? })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }

    pub fn knots(&self) -> &[f64] {
        self.cdf.knots()
    }

    pub fn cdf_values(&self) -> &[f64] {
        self.cdf.values()
    }

    /// `F(t)`: 0 below the first knot, 1 above the last.
    pub fn eval(&self, t: f64) -> f64 {
        let x = self.cdf.knots();
        if t < x[0] {
            0.0
        } else if t > x[x.len() - 1] {
            1.0
        } else {
            self.cdf.eval(t)
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.cdf.inverse(p)
    }
}

/// Tabulated null CDF `F_T(t | m)` with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedNull {
    pub kind: TableKind,
    pub test: TestId,
    /// Event count, or the rate-grid index for [`TableKind::CombinedPoisson`].
    pub m: usize,
    pub trials: u64,
    pub seed: u64,
    components: Vec<NullComponent>,
}

impl TabulatedNull {
    pub fn from_parts(
        kind: TableKind,
        test: TestId,
        m: usize,
        trials: u64,
        seed: u64,
        components: Vec<NullComponent>,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("a table needs at least one component"));
        }
        if components.windows(2).any(|w| w[1].index <= w[0].index) {
            return Err(Error::InvalidArgument("component indices must be increasing"));
        }
        Ok(Self { kind, test, m, trials, seed, components })
    }

    pub fn components(&self) -> &[NullComponent] {
        &self.components
    }

    pub fn component(&self, index: usize) -> Option<&NullComponent> {
        self.components
            .binary_search_by_key(&index, |c| c.index)
            .ok()
            .map(|i| &self.components[i])
    }

    /// CDF of the first component, i.e. of a scalar statistic.
    pub fn eval(&self, t: f64) -> f64 {
        self.components[0].eval(t)
    }
}

/// Uniform spacings of `m` points: normalized exponential variates.
pub(crate) fn draw_spacings(rng: &mut TrialRng, m: usize, gaps: &mut Vec<f64>) {
    gaps.clear();
    let mut total = 0.0;
    for _ in 0..=m {
        let e: f64 = rng.sample(Exp1);
        total += e;
        gaps.push(e);
    }
    let inv = 1.0 / total;
    for g in gaps.iter_mut() {
        *g *= inv;
    }
}

/// Sorted uniform sample of size `m`.
pub(crate) fn draw_sorted_uniform(rng: &mut TrialRng, m: usize, gaps: &mut Vec<f64>, out: &mut Vec<f64>) {
    draw_spacings(rng, m, gaps);
    out.clear();
    let mut acc = 0.0;
    for &g in &gaps[..m] {
        acc += g;
        out.push(acc.min(1.0));
    }
}

#[derive(Default)]
pub(crate) struct Scratch {
    gaps: Vec<f64>,
    work: Vec<f64>,
}

/// Statistic components of a fresh uniform sample of size `m`.
pub(crate) fn trial_statistic(
    test: TestId,
    m: usize,
    comps: &[usize],
    rng: &mut TrialRng,
    s: &mut Scratch,
    out: &mut [f64],
) {
    draw_spacings(rng, m, &mut s.gaps);
    statistic_from_spacings(test, comps, s, out);
}

fn statistic_from_spacings(test: TestId, comps: &[usize], s: &mut Scratch, out: &mut [f64]) {
    let m = s.gaps.len() - 1;
    match test {
        TestId::Ks => {
            s.work.clear();
            let mut acc = 0.0;
            for &g in &s.gaps[..m] {
                acc += g;
                s.work.push(acc.min(1.0));
            }
            out[0] = ks_sorted(&s.work);
        }
        TestId::Pcs => out[0] = pcs_from_gaps(&s.gaps),
        TestId::MaxGap => out[0] = s.gaps.iter().copied().fold(0.0, f64::max),
        TestId::Slss => {
            s.work.clear();
            s.work.extend_from_slice(&s.gaps);
            s.work.sort_unstable_by(|a, b| b.total_cmp(a));
            let mut acc = 0.0;
            for g in s.work.iter_mut() {
                acc += *g;
                *g = acc;
            }
            for (o, &c) in out.iter_mut().zip(comps) {
                *o = s.work[c];
            }
        }
        TestId::Oi => {
            s.work.clear();
            s.work.push(0.0);
            let mut acc = 0.0;
            for &g in &s.gaps[..m] {
                acc += g;
                s.work.push(acc.min(1.0));
            }
            s.work.push(1.0);
            for (o, &c) in out.iter_mut().zip(comps) {
                *o = interval_with_k(&s.work, c);
            }
        }
    }
}

/// Compresses raw Monte Carlo values into a [`NullComponent`].
///
/// Knots are order statistics at equally spaced ranks plus geometrically
/// spaced ranks in both tails; each knot carries the right-continuous
/// empirical CDF `r / (N - 1)` at the last rank `r` of its tie group.
pub fn component_from_samples(index: usize, values: &mut [f64], max_knots: usize) -> Result<NullComponent> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientTrials { required: 2, found: n as u64 });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteStatistic);
    }
    values.sort_unstable_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;

    let mut ranks = Vec::with_capacity(max_knots + 2);
    let mut tail = 1usize;
    let equal = max_knots.saturating_sub(2 * (usize::BITS - n.leading_zeros()) as usize).max(2);
    let stride = (n - 1) as f64 / (equal - 1) as f64;
    while (tail as f64) < stride && tail < n {
        ranks.push(tail - 1);
        ranks.push(n - tail);
        tail *= 2;
    }
    ranks.extend((0..equal).map(|k| libm::round(k as f64 * stride) as usize));
    ranks.sort_unstable();
    ranks.dedup();

    let denom = (n - 1) as f64;
    let mut knots: Vec<f64> = Vec::with_capacity(ranks.len());
    let mut cdf: Vec<f64> = Vec::with_capacity(ranks.len());
    for r in ranks {
        let v = values[r];
        if knots.last() == Some(&v) {
            continue;
        }
        let last = values.partition_point(|&x| x <= v) - 1;
        knots.push(v);
        cdf.push(last as f64 / denom);
    }
    NullComponent::new(index, mean, libm::sqrt(var), knots, cdf)
}

/// Builds the fixed-`m` null of `test` from `trials` uniform samples.
pub fn tabulate_null<E: Executor>(test: TestId, m: usize, trials: u64, seed: u64, exec: &E) -> Result<TabulatedNull> {
    if m < 1 {
        return Err(Error::EmptySample { required: 1, found: m });
    }
    if trials < MIN_TRIALS {
        return Err(Error::InsufficientTrials { required: MIN_TRIALS, found: trials });
    }
    let comps = if test.is_vector() { component_grid(m) } else { vec![0] };
    let max_knots = if test.is_vector() { MAX_COMPONENT_KNOTS } else { MAX_KNOTS };
    let nc = comps.len();
    let blocks = exec.map_blocks(block_count(trials), |b| {
        let len = block_len(trials, b);
        let mut rng = stream(seed, &[DOMAIN_FIXED, test.code() as u64, m as u64, b as u64]);
        let mut scratch = Scratch::default();
        let mut row = vec![0.0; nc];
        let mut vals = vec![0.0; len * nc];
        for t in 0..len {
            trial_statistic(test, m, &comps, &mut rng, &mut scratch, &mut row);
            for (ci, &v) in row.iter().enumerate() {
                vals[ci * len + t] = v;
            }
        }
        vals
    });
    let components = gather_components(&blocks, trials, &comps, max_knots)?;
    TabulatedNull::from_parts(TableKind::Fixed, test, m, trials, seed, components)
}

/// Regroups block-major values (component-major inside each block) into
/// one sample per component and compresses each.
pub(crate) fn gather_components(
    blocks: &[Vec<f64>],
    trials: u64,
    comps: &[usize],
    max_knots: usize,
) -> Result<Vec<NullComponent>> {
    let nc = comps.len();
    let mut out = Vec::with_capacity(nc);
    let mut buf = Vec::with_capacity(trials as usize);
    for (ci, &c) in comps.iter().enumerate() {
        buf.clear();
        for (b, vals) in blocks.iter().enumerate() {
            let len = block_len(trials, b);
            buf.extend_from_slice(&vals[ci * len..(ci + 1) * len]);
        }
        out.push(component_from_samples(c, &mut buf, max_knots)?);
    }
    Ok(out)
}

/// Gaussian approximation of a scalar statistic for large `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianAsymptote {
    pub test: TestId,
    pub trials: u64,
    pub seed: u64,
    m: Vec<usize>,
    mean: Vec<f64>,
    sd: Vec<f64>,
}

impl GaussianAsymptote {
    pub fn from_parts(test: TestId, trials: u64, seed: u64, m: Vec<usize>, mean: Vec<f64>, sd: Vec<f64>) -> Result<Self> {
        if m.is_empty() || m.len() != mean.len() || m.len() != sd.len() {
            return Err(Error::InvalidArgument("asymptote grids must be non-empty and aligned"));
        }
        if m[0] < ASYMPTOTIC_THRESHOLD || m.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("asymptote grid must be increasing and above the threshold"));
        }
        if let Some(i) = sd.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::DegenerateSpread(m[i]));
        }
        Ok(Self { test, trials, seed, m, mean, sd })
    }

    pub fn grid(&self) -> (&[usize], &[f64], &[f64]) {
        (&self.m, &self.mean, &self.sd)
    }

    pub fn threshold(&self) -> usize {
        ASYMPTOTIC_THRESHOLD
    }

    /// Mean and standard deviation at `m`, interpolated (or extrapolated
    /// from the last two grid points): the mean linearly in `1/m`, `ln sd`
    /// linearly in `ln m`. Both are exact for moments of the form
    /// `a + b/m` and `c m^p`.
    pub fn moments(&self, m: usize) -> Result<(f64, f64)> {
        if m < ASYMPTOTIC_THRESHOLD {
            return Err(Error::BelowAsymptoticThreshold { m, threshold: ASYMPTOTIC_THRESHOLD });
        }
        if self.m.len() == 1 {
            return Ok((self.mean[0], self.sd[0]));
        }
        let k = self.m.partition_point(|&x| x <= m).clamp(1, self.m.len() - 1);
        let (m0, m1, mf) = (self.m[k - 1] as f64, self.m[k] as f64, m as f64);
        let w_inv = (1.0 / mf - 1.0 / m0) / (1.0 / m1 - 1.0 / m0);
        let mean = self.mean[k - 1] + w_inv * (self.mean[k] - self.mean[k - 1]);
        let w_log = libm::log(mf / m0) / libm::log(m1 / m0);
        let ls = libm::log(self.sd[k - 1]) + w_log * (libm::log(self.sd[k]) - libm::log(self.sd[k - 1]));
        Ok((mean, libm::exp(ls)))
    }

    pub fn cdf(&self, m: usize, t: f64) -> Result<f64> {
        let (mean, sd) = self.moments(m)?;
        Ok(normal_cdf((t - mean) / sd))
    }
}

/// Estimates the mean and spread of a scalar statistic at each `m` in `m_grid`.
pub fn fit_asymptote<E: Executor>(
    test: TestId,
    m_grid: &[usize],
    trials: u64,
    seed: u64,
    exec: &E,
) -> Result<GaussianAsymptote> {
    if test.is_vector() {
        return Err(Error::UnsupportedTest(test));
    }
    if let Some(&m) = m_grid.iter().find(|&&m| m < ASYMPTOTIC_THRESHOLD) {
        return Err(Error::BelowAsymptoticThreshold { m, threshold: ASYMPTOTIC_THRESHOLD });
    }
    if trials < 2 {
        return Err(Error::InsufficientTrials { required: 2, found: trials });
    }
    let mut means = Vec::with_capacity(m_grid.len());
    let mut sds = Vec::with_capacity(m_grid.len());
    for &m in m_grid {
        let sums = exec.map_blocks(block_count(trials), |b| {
            let mut rng = stream(seed, &[DOMAIN_ASYMPTOTE, test.code() as u64, m as u64, b as u64]);
            let mut scratch = Scratch::default();
            let mut v = [0.0];
            let mut vals = Vec::with_capacity(block_len(trials, b));
            for _ in 0..block_len(trials, b) {
                trial_statistic(test, m, &[0], &mut rng, &mut scratch, &mut v);
                vals.push(v[0]);
            }
            vals
        });
        let all: Vec<f64> = sums.into_iter().flatten().collect();
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteStatistic);
        }
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (all.len() - 1) as f64;
        means.push(mean);
        sds.push(libm::sqrt(var));
    }
    GaussianAsymptote::from_parts(test, trials, seed, m_grid.to_vec(), means, sds)
}

/// Draws `trials` values of a scalar statistic at `m`, without compression.
/// Used by oracles and diagnostics.
pub fn sample_statistic<E: Executor>(test: TestId, m: usize, trials: u64, seed: u64, exec: &E) -> Vec<f64> {
    let comps = [0usize];
    exec.map_blocks(block_count(trials), |b| {
        let mut rng = stream(seed, &[DOMAIN_FIXED ^ 0xffff, test.code() as u64, m as u64, b as u64]);
        let mut scratch = Scratch::default();
        let mut v = [0.0];
        (0..block_len(trials, b))
            .map(|_| {
                trial_statistic(test, m, &comps, &mut rng, &mut scratch, &mut v);
                v[0]
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}
