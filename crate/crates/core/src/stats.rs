// SPDX-License-Identifier: Apache-2.0

//! Univariate uniformity statistics on `[0, 1]`.
//!
//! Every statistic is oriented so that large values are extreme: a p-value
//! is always an upper tail probability.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Result};

/// Registered univariate tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TestId {
    Ks,
    Pcs,
    Slss,
    MaxGap,
    Oi,
}

impl TestId {
    pub const ALL: [TestId; 5] = [Self::Ks, Self::Pcs, Self::Slss, Self::MaxGap, Self::Oi];

    /// Stable numeric code used in file headers and RNG keys.
    pub fn code(self) -> u8 {
        match self {
            Self::Ks => 1,
            Self::Pcs => 2,
            Self::Slss => 3,
            Self::MaxGap => 4,
            Self::Oi => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Ks => "ks",
            Self::Pcs => "pcs",
            Self::Slss => "slss",
            Self::MaxGap => "maxgap",
            Self::Oi => "oi",
        }
    }

    /// Whether the statistic is a family indexed by a component `k`.
    pub fn is_vector(self) -> bool {
        matches!(self, Self::Slss | Self::Oi)
    }

    /// Smallest event count at which the statistic is defined.
    pub fn min_events(self) -> usize {
        match self {
            Self::Ks => 1,
            _ => 0,
        }
    }
}

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ks" => Ok(Self::Ks),
            "pcs" => Ok(Self::Pcs),
            "slss" => Ok(Self::Slss),
            "maxgap" | "max-gap" => Ok(Self::MaxGap),
            "oi" => Ok(Self::Oi),
            _ => Err(Error::InvalidArgument("unknown test id")),
        }
    }
}

/// Sorted sample in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedSample {
    values: Vec<f64>,
}

impl OrderedSample {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if let Some(&v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfUnitInterval(v));
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spacings(&self) -> Spacings {
        Spacings::new(self)
    }
}

/// The `m + 1` gaps of a sample with boundary points `u_0 = 0`, `u_{m+1} = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spacings {
    gaps: Vec<f64>,
}

impl Spacings {
    pub fn new(s: &OrderedSample) -> Self {
        let mut gaps = Vec::with_capacity(s.m() + 1);
        let mut prev = 0.0;
        for &u in s.values() {
            gaps.push(u - prev);
            prev = u;
        }
        gaps.push(1.0 - prev);
        Self { gaps }
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }
}

/// Kolmogorov-Smirnov distance to the uniform CDF.
pub fn ks_statistic(s: &OrderedSample) -> Result<f64> {
    let m = s.m();
    if m == 0 {
        return Err(Error::EmptySample { required: 1, found: 0 });
    }
    Ok(ks_sorted(s.values()))
}

pub(crate) fn ks_sorted(u: &[f64]) -> f64 {
    let mf = u.len() as f64;
    u.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let above = (i + 1) as f64 / mf - x;
        let below = x - i as f64 / mf;
        d.max(above).max(below)
    })
}

/// Product of complementary spacings, `-sum ln(1 - g_i)`; `+inf` when a gap is 1.
pub fn pcs_statistic(s: &OrderedSample) -> f64 {
    pcs_from_gaps(s.spacings().gaps())
}

pub(crate) fn pcs_from_gaps(gaps: &[f64]) -> f64 {
    let mut t = 0.0;
    for &g in gaps {
        if g >= 1.0 {
            return f64::INFINITY;
        }
        t -= libm::log1p(-g);
    }
    t
}

/// Sums of the `k` largest gaps for `k = 1..=m+1`.
pub fn slss_statistic(s: &OrderedSample) -> Vec<f64> {
    let mut gaps = s.spacings().gaps;
    gaps.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut out: Vec<f64> = gaps
        .iter()
        .map(|g| {
            acc += g;
            acc
        })
        .collect();
    // The gaps telescope to 1; pin the last sum against rounding.
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// Longest sub-interval of `[0, 1]` holding at most `k` points, for `k = 0..=m`.
pub fn oi_statistic(s: &OrderedSample) -> Vec<f64> {
    let a = augmented(s);
    (0..=s.m()).map(|k| interval_with_k(&a, k)).collect()
}

/// Largest gap `G_0`.
pub fn max_gap_statistic(s: &OrderedSample) -> f64 {
    s.spacings().gaps.iter().copied().fold(0.0, f64::max)
}

fn augmented(s: &OrderedSample) -> Vec<f64> {
    let mut a = Vec::with_capacity(s.m() + 2);
    a.push(0.0);
    a.extend_from_slice(s.values());
    a.push(1.0);
    a
}

pub(crate) fn interval_with_k(a: &[f64], k: usize) -> f64 {
    a.windows(k + 2).map(|w| w[k + 1] - w[0]).fold(0.0, f64::max)
}

/// Components retained for the vector statistics at event count `m`:
/// every index below 32, then a geometric progression with ratio 1.25.
/// Only indices below `m` are kept; the others are degenerate.
pub fn component_grid(m: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut c = 0usize;
    while c < m {
        out.push(c);
        c = if c < 31 { c + 1 } else { (c * 5).div_ceil(4) };
    }
    out
}

/// Value of component `c` of a vector statistic: `S_{c+1}` for SLSS and
/// `G_c` for the optimum interval. Returns 1 for degenerate components.
pub fn component_values(test: TestId, s: &OrderedSample, comps: &[usize]) -> Result<Vec<f64>> {
    match test {
        TestId::Slss => {
            let full = slss_statistic(s);
            Ok(comps.iter().map(|&c| full.get(c).copied().unwrap_or(1.0)).collect())
        }
        TestId::Oi => {
            let a = augmented(s);
            Ok(comps
                .iter()
                .map(|&c| if c >= s.m() { 1.0 } else { interval_with_k(&a, c) })
                .collect())
        }
        other => Err(Error::UnsupportedTest(other)),
    }
}

/// Scalar statistic of a univariate sample.
pub fn scalar_statistic(test: TestId, s: &OrderedSample) -> Result<f64> {
    match test {
        TestId::Ks => ks_statistic(s),
        TestId::Pcs => Ok(pcs_statistic(s)),
        TestId::MaxGap => Ok(max_gap_statistic(s)),
        other => Err(Error::UnsupportedTest(other)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn os(v: &[f64]) -> OrderedSample {
        OrderedSample::new(v.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Brute force over all 2m candidate deviations.
    fn ks_oracle(v: &[f64]) -> f64 {
        let m = v.len() as f64;
        let mut d = 0.0f64;
        for (i, &u) in v.iter().enumerate() {
            let i = i as f64 + 1.0;
            d = d.max((i / m - u).abs()).max(((i - 1.0) / m - u).abs());
        }
        d
    }

    /// Scans every interval between augmented points.
    fn oi_oracle(v: &[f64], k: usize) -> f64 {
        let mut a = vec![0.0];
        a.extend_from_slice(v);
        a.push(1.0);
        let mut best = 0.0f64;
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                let inside = a[i + 1..j].len();
                if inside <= k {
                    best = best.max(a[j] - a[i]);
                }
            }
        }
        best
    }

    #[test]
    fn ks_reference_points() {
        assert_eq!(ks_statistic(&os(&[0.5])).unwrap(), 0.5);
        assert_eq!(ks_statistic(&os(&[0.25, 0.75])).unwrap(), 0.25);
        let eq = [0.25, 0.5, 0.75];
        assert!(close(ks_statistic(&os(&eq)).unwrap(), ks_oracle(&eq), 1e-15));
        assert!(close(ks_oracle(&eq), 0.25, 1e-15));
        assert!(ks_statistic(&os(&[])).is_err());
    }

    #[test]
    fn pcs_reference_points() {
        assert!(close(pcs_statistic(&os(&[0.5])), 1.386_294_361_119_890_6, 1e-12));
        assert!(close(pcs_statistic(&os(&[1.0 / 3.0, 2.0 / 3.0])), 1.216_395_324_324_493, 1e-12));
        assert_eq!(pcs_statistic(&os(&[])), f64::INFINITY);
    }

    #[test]
    fn pcs_single_point_minimum_is_centre() {
        let t0 = pcs_statistic(&os(&[0.5]));
        for i in 1..1000 {
            let u = i as f64 / 1000.0;
            let direct = -libm::log(1.0 - u) - libm::log(u);
            let t = pcs_statistic(&os(&[u]));
            assert!(close(t, direct, 1e-12));
            assert!(t - t0 >= -1e-15);
        }
    }

    #[test]
    fn slss_reference_points() {
        assert_eq!(slss_statistic(&os(&[0.5])), vec![0.5, 1.0]);
        assert_eq!(slss_statistic(&os(&[0.2])), vec![0.8, 1.0]);
        let s = slss_statistic(&os(&[0.1, 0.2, 0.9]));
        for (a, b) in s.iter().zip([0.7, 0.8, 0.9, 1.0]) {
            assert!(close(*a, b, 1e-12));
        }
        assert_eq!(slss_statistic(&os(&[])), vec![1.0]);
    }

    #[test]
    fn oi_reference_points() {
        assert_eq!(oi_statistic(&os(&[0.5]))[0], 0.5);
        let g = oi_statistic(&os(&[0.2, 0.9]));
        assert!(close(g[0], 0.7, 1e-12));
        assert!(close(g[1], 0.9, 1e-12));
        assert!(close(g[1], oi_oracle(&[0.2, 0.9], 1), 1e-15));
        assert_eq!(oi_statistic(&os(&[])), vec![1.0]);
    }

    #[test]
    fn component_grid_shape() {
        assert!(component_grid(0).is_empty());
        assert_eq!(component_grid(3), vec![0, 1, 2]);
        let g = component_grid(1000);
        assert_eq!(&g[..32], &(0..32).collect::<Vec<_>>()[..]);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(*g.last().unwrap() < 1000);
        assert_eq!(g[32], 39);
    }

    #[test]
    fn test_ids_round_trip() {
        for t in TestId::ALL {
            assert_eq!(TestId::from_code(t.code()), Some(t));
            assert_eq!(t.name().parse::<TestId>().unwrap(), t);
        }
    }

    fn sample() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..=1.0, 0..40)
    }

    proptest! {
        #[test]
        fn gaps_sum_to_one(v in sample()) {
            let s = os(&v);
            let g = s.spacings();
            prop_assert_eq!(g.gaps().len(), s.m() + 1);
            prop_assert!(g.gaps().iter().all(|&x| x >= 0.0));
            prop_assert!(close(g.gaps().iter().sum::<f64>(), 1.0, 1e-12));
        }

        #[test]
        fn pcs_reflection_invariant(v in prop::collection::vec(0.0f64..1.0, 1..40)) {
            let r: Vec<f64> = v.iter().map(|u| 1.0 - u).collect();
            let a = pcs_statistic(&os(&v));
            let b = pcs_statistic(&os(&r));
            prop_assert!(close(a, b, 1e-9 * a.max(1.0)));
        }

        #[test]
        fn pcs_lower_bound(v in prop::collection::vec(0.0f64..1.0, 1..6)) {
            let m = v.len() as f64;
            let bound = -(m + 1.0) * libm::log1p(-1.0 / (m + 1.0));
            prop_assert!(pcs_statistic(&os(&v)) >= bound - 1e-12);
        }

        #[test]
        fn ks_matches_oracle_and_bounds(v in prop::collection::vec(0.0f64..=1.0, 1..40)) {
            let s = os(&v);
            let d = ks_statistic(&s).unwrap();
            prop_assert!(close(d, ks_oracle(s.values()), 1e-12));
            prop_assert!(d >= 0.5 / s.m() as f64 - 1e-12 && d <= 1.0);
        }

        #[test]
        fn oi_matches_scan(v in prop::collection::vec(0.0f64..=1.0, 0..15)) {
            let s = os(&v);
            let g = oi_statistic(&s);
            prop_assert_eq!(g.len(), s.m() + 1);
            for (k, &gk) in g.iter().enumerate() {
                prop_assert!(close(gk, oi_oracle(s.values(), k), 1e-15));
            }
            prop_assert!(g.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(g[0], max_gap_statistic(&s));
            prop_assert_eq!(*g.last().unwrap(), 1.0);
        }

        #[test]
        fn slss_monotone_and_ends_at_one(v in sample()) {
            let s = slss_statistic(&os(&v));
            prop_assert!(s.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(*s.last().unwrap(), 1.0);
        }

        #[test]
        fn components_agree_with_full_vectors(v in prop::collection::vec(0.0f64..=1.0, 1..50)) {
            let s = os(&v);
            let comps = component_grid(s.m());
            let slss = slss_statistic(&s);
            let oi = oi_statistic(&s);
            let cs = component_values(TestId::Slss, &s, &comps).unwrap();
            let co = component_values(TestId::Oi, &s, &comps).unwrap();
            for (i, &c) in comps.iter().enumerate() {
                prop_assert_eq!(cs[i], slss[c]);
                prop_assert_eq!(co[i], oi[c]);
            }
        }
    }
}
