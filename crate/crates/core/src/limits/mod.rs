// SPDX-License-Identifier: Apache-2.0

//! Poisson-averaged upper limits on an event rate.
//!
//! A dataset with `m_obs` events and statistic `t_obs` defines the curve
//! `F(mu) = sum_m F_T(t_obs | m) Pois(m; mu)`, the probability that a
//! dataset at rate `mu` looks less extreme than the observed one. The
//! limit at confidence `CL` is the root of `F(mu) = CL`. The empty dataset
//! is the most extreme one, so `F_T(t | 0) = 0` here; equivalently its
//! upper-tail probability is 1 and an empty observation yields
//! `mu_lim = -ln(1 - CL)`.

mod correction;
mod curve;

pub use correction::{
    calibrate_correction, corrected_projection_limit, naive_coverage, CorrectionSurface, DEFAULT_C1_GRID,
};
pub use curve::{tabulate_combined_poisson, CurveKind, PoissonAveragedCurve};

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::roots::brent;
use crate::source::NullSource;
use crate::stats::{pcs_statistic, OrderedSample, TestId};
use crate::transform::{volume_uniforms, UnitCubeSample};
use crate::{Error, Result};

/// Upper end of the rate search.
pub const MU_CAP: f64 = 1e6;
const ROOT_XTOL: f64 = 1e-9;
const ROOT_MAX_ITER: usize = 200;
const CHECK_POINTS: usize = 8;

/// Limit construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LimitMethod {
    /// Event count only.
    Poisson,
    /// Univariate test on one-dimensional data.
    Single(TestId),
    /// Smallest per-axis limit with the calibrated confidence correction.
    Projection(TestId),
    /// Largest per-axis PCS statistic.
    PcsBest,
    /// Sum of per-axis PCS statistics.
    PcsSum,
    /// Univariate test on the volume-transformed sample.
    Volume(TestId),
}

impl LimitMethod {
    pub fn label(self) -> String {
        match self {
            Self::Poisson => "poisson".into(),
            Self::Single(t) => alloc::format!("single-{t}"),
            Self::Projection(t) => alloc::format!("projection-{t}"),
            Self::PcsBest => "pcs-best".into(),
            Self::PcsSum => "pcs-sum".into(),
            Self::Volume(t) => alloc::format!("volume-{t}"),
        }
    }
}

impl fmt::Display for LimitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for LimitMethod {
    type Err = Error;

    /// Parses labels such as `poisson`, `pcs-sum` or `volume-oi`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => return Ok(Self::Poisson),
            "pcs-best" => return Ok(Self::PcsBest),
            "pcs-sum" => return Ok(Self::PcsSum),
            _ => {}
        }
        let (head, test) = s.split_once('-').ok_or(Error::InvalidArgument("unknown limit method"))?;
        let test: TestId = test.parse()?;
        match head {
            "single" => Ok(Self::Single(test)),
            "projection" => Ok(Self::Projection(test)),
            "volume" => Ok(Self::Volume(test)),
            _ => Err(Error::InvalidArgument("unknown limit method")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// Curve evaluations spent in root finding.
    pub evaluations: usize,
    pub bracket: (f64, f64),
    /// `F(mu_lim) - target`.
    pub residual: f64,
    /// Per-axis confidence actually used by the projection methods.
    pub c1: Option<f64>,
    /// Per-axis limits of the projection methods.
    pub axes: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitResult {
    pub mu_lim: f64,
    pub cl: f64,
    pub method: LimitMethod,
    pub diagnostics: Diagnostics,
}

fn check_cl(cl: f64) -> Result<()> {
    if cl > 0.0 && cl < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument("confidence level must lie in (0, 1)"))
    }
}

/// Solves `F(mu) = cl` on a curve, after checking that `F` is non-decreasing
/// over the final bracket.
pub fn solve_curve<S: NullSource + ?Sized>(
    curve: &PoissonAveragedCurve<'_, S>,
    cl: f64,
    method: LimitMethod,
) -> Result<LimitResult> {
    check_cl(cl)?;
    let start = curve.evaluations();
    let mo = curve.m_obs() as f64;
    let mut lo = 0.0;
    let mut hi = mo + 10.0 * libm::sqrt(mo + 1.0) + 20.0;
    let mut f_hi = curve.cdf(hi)? - cl;
    while f_hi < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > MU_CAP {
            return Err(Error::NoRoot(MU_CAP));
        }
        f_hi = curve.cdf(hi)? - cl;
    }
    let f_lo = curve.cdf(lo)? - cl;
    let mu = brent(|x| Ok(curve.cdf(x)? - cl), lo, hi, f_lo, f_hi, ROOT_XTOL * hi.max(1.0), ROOT_MAX_ITER)?;
    for i in 1..CHECK_POINTS {
        curve.cdf(hi * i as f64 / CHECK_POINTS as f64)?;
    }
    curve.check_monotone(0.0, hi)?;
    let residual = curve.cdf(mu)? - cl;
    Ok(LimitResult {
        mu_lim: mu,
        cl,
        method,
        diagnostics: Diagnostics {
            evaluations: curve.evaluations() - start,
            bracket: (lo, hi),
            residual,
            ..Diagnostics::default()
        },
    })
}

/// Limit from a univariate sample in `[0, 1]`.
pub fn solve_limit<S: NullSource + ?Sized>(src: &S, test: TestId, values: &[f64], cl: f64) -> Result<LimitResult> {
    let curve = PoissonAveragedCurve::from_sample(src, test, values)?;
    solve_curve(&curve, cl, LimitMethod::Single(test))
}

/// Textbook limit from the event count alone.
pub fn counting_limit<S: NullSource + ?Sized>(src: &S, m_obs: usize, cl: f64) -> Result<LimitResult> {
    solve_curve(&PoissonAveragedCurve::counting(src, m_obs), cl, LimitMethod::Poisson)
}

/// One curve per axis projection.
pub fn axis_curves<'a, S: NullSource + ?Sized>(
    src: &'a S,
    data: &UnitCubeSample,
    test: TestId,
) -> Result<Vec<PoissonAveragedCurve<'a, S>>> {
    (0..data.n()).map(|j| PoissonAveragedCurve::from_sample(src, test, &data.axis(j))).collect()
}

/// Smallest of the per-axis limits at per-axis confidence `c1`.
pub fn best_projection_limit<S: NullSource + ?Sized>(
    src: &S,
    data: &UnitCubeSample,
    test: TestId,
    c1: f64,
) -> Result<LimitResult> {
    best_of_curves(&axis_curves(src, data, test)?, c1, LimitMethod::Projection(test))
}

pub(crate) fn best_of_curves<S: NullSource + ?Sized>(
    curves: &[PoissonAveragedCurve<'_, S>],
    c1: f64,
    method: LimitMethod,
) -> Result<LimitResult> {
    let mut axes = Vec::with_capacity(curves.len());
    let mut best: Option<LimitResult> = None;
    let mut evaluations = 0;
    for c in curves {
        let r = solve_curve(c, c1, method)?;
        evaluations += r.diagnostics.evaluations;
        axes.push(r.mu_lim);
        if best.as_ref().map_or(true, |b| r.mu_lim < b.mu_lim) {
            best = Some(r);
        }
    }
    let mut best = best.ok_or(Error::InvalidArgument("data need at least one axis"))?;
    best.diagnostics.axes = axes;
    best.diagnostics.c1 = Some(c1);
    best.diagnostics.evaluations = evaluations;
    Ok(best)
}

fn axis_pcs(data: &UnitCubeSample) -> Result<Vec<f64>> {
    (0..data.n()).map(|j| Ok(pcs_statistic(&OrderedSample::new(data.axis(j))?))).collect()
}

/// Limit from the largest per-axis PCS statistic, whose null at fixed `m`
/// is `F_PCS(t | m)^n`.
pub fn pcs_best_projection_limit<S: NullSource + ?Sized>(src: &S, data: &UnitCubeSample, cl: f64) -> Result<LimitResult> {
    let t_max = axis_pcs(data)?.into_iter().fold(f64::NEG_INFINITY, f64::max);
    let curve = PoissonAveragedCurve::new(src, CurveKind::MaxOf { t_obs: t_max, n: data.n() }, data.m());
    solve_curve(&curve, cl, LimitMethod::PcsBest)
}

/// Limit from the sum of per-axis PCS statistics, whose null at fixed `m`
/// is the `n`-fold self-convolution of the PCS density.
pub fn pcs_sum_projection_limit<S: NullSource + ?Sized>(src: &S, data: &UnitCubeSample, cl: f64) -> Result<LimitResult> {
    let t_sum: f64 = axis_pcs(data)?.into_iter().sum();
    let curve = PoissonAveragedCurve::new(src, CurveKind::Sum { t_obs: t_sum, n: data.n() }, data.m());
    solve_curve(&curve, cl, LimitMethod::PcsSum)
}

/// Univariate limit on the volume-transformed sample.
pub fn volume_limit<S: NullSource + ?Sized>(src: &S, data: &UnitCubeSample, test: TestId, cl: f64) -> Result<LimitResult> {
    let (z, _) = volume_uniforms(data);
    let curve = PoissonAveragedCurve::from_sample(src, test, &z)?;
    solve_curve(&curve, cl, LimitMethod::Volume(test))
}

/// Dispatches any limit method. Projection needs a surface unless `n = 1`.
pub fn limit<S: NullSource + ?Sized>(
    src: &S,
    data: &UnitCubeSample,
    method: LimitMethod,
    cl: f64,
    surface: Option<&CorrectionSurface>,
) -> Result<LimitResult> {
    match method {
        LimitMethod::Poisson => counting_limit(src, data.m(), cl),
        LimitMethod::Single(t) => {
            if data.n() != 1 {
                return Err(Error::DimensionMismatch { expected: 1, found: data.n() });
            }
            solve_limit(src, t, &data.axis(0), cl)
        }
        LimitMethod::Projection(t) => corrected_projection_limit(src, data, t, cl, surface),
        LimitMethod::PcsBest => pcs_best_projection_limit(src, data, cl),
        LimitMethod::PcsSum => pcs_sum_projection_limit(src, data, cl),
        LimitMethod::Volume(t) => volume_limit(src, data, t, cl),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::MemoryNulls;

    #[test]
    fn textbook_counting_limits() {
        let src = MemoryNulls::new();
        let r0 = counting_limit(&src, 0, 0.9).unwrap();
        assert!((r0.mu_lim - core::f64::consts::LN_10).abs() < 1e-8);
        let r1 = counting_limit(&src, 1, 0.9).unwrap();
        assert!((r1.mu_lim - 3.889_720_169_867_429).abs() < 1e-8);
        assert!(r1.diagnostics.residual.abs() < 1e-6);
    }

    #[test]
    fn empty_data_reduce_to_counting() {
        let src = MemoryNulls::new();
        let empty = UnitCubeSample::empty(3).unwrap();
        for m in [LimitMethod::PcsBest, LimitMethod::PcsSum, LimitMethod::Volume(TestId::Oi)] {
            let r = limit(&src, &empty, m, 0.9, None).unwrap();
            assert!((r.mu_lim - core::f64::consts::LN_10).abs() < 1e-8, "{m}");
        }
    }

    #[test]
    fn method_labels_round_trip() {
        for m in [
            LimitMethod::Poisson,
            LimitMethod::Single(TestId::Ks),
            LimitMethod::Projection(TestId::Slss),
            LimitMethod::PcsBest,
            LimitMethod::PcsSum,
            LimitMethod::Volume(TestId::Oi),
        ] {
            assert_eq!(m.label().parse::<LimitMethod>().unwrap(), m);
        }
        assert!(check_cl(1.0).is_err());
    }
}
