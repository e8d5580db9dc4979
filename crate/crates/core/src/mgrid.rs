// SPDX-License-Identifier: Apache-2.0

//! Event-count and rate grids on which null tables are tabulated, and
//! interpolation between neighbouring tables.

use alloc::vec::Vec;

use crate::null::ASYMPTOTIC_THRESHOLD;

/// Every event count up to this value has its own table.
pub const DENSE_MAX: usize = 200;
const PER_DECADE: f64 = 30.0;

/// Tabulated event counts: `1..=200`, then about 30 per decade up to `10^4`.
pub fn m_grid() -> Vec<usize> {
    let mut g: Vec<usize> = (1..=DENSE_MAX).collect();
    let start = libm::ceil(libm::log10(DENSE_MAX as f64) * PER_DECADE) as i32;
    let stop = libm::round(libm::log10(ASYMPTOTIC_THRESHOLD as f64) * PER_DECADE) as i32;
    for j in start..=stop {
        let m = libm::round(libm::pow(10.0, j as f64 / PER_DECADE)) as usize;
        if m > *g.last().unwrap() {
            g.push(m);
        }
    }
    g
}

pub fn is_grid_point(m: usize) -> bool {
    if m == 0 {
        return false;
    }
    m <= DENSE_MAX || m_grid().binary_search(&m).is_ok()
}

/// Grid neighbours `(lo, hi)` with `lo <= m <= hi`; equal when `m` is on the grid.
pub fn bracket(m: usize) -> Option<(usize, usize)> {
    if m == 0 || m > ASYMPTOTIC_THRESHOLD {
        return None;
    }
    if m <= DENSE_MAX {
        return Some((m, m));
    }
    let g = m_grid();
    match g.binary_search(&m) {
        Ok(_) => Some((m, m)),
        Err(i) => Some((g[i - 1], g[i])),
    }
}

/// Location and scale of a null distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
}

/// CDF at an off-grid `m` from the two neighbouring tables.
///
/// The target mean and `ln sd` are interpolated linearly in `ln m`; `t` is
/// standardized with them, mapped back onto each neighbour's own scale, and
/// the two CDF values are blended linearly in `ln m`. Degenerate spreads
/// fall back to plain blending at `t`.
pub fn interp_cdf(
    m: usize,
    lo: (usize, Moments, &dyn Fn(f64) -> f64),
    hi: (usize, Moments, &dyn Fn(f64) -> f64),
    t: f64,
) -> f64 {
    let (m0, a, f0) = lo;
    let (m1, b, f1) = hi;
    if m0 == m1 {
        return f0(t);
    }
    let w = (libm::log(m as f64) - libm::log(m0 as f64)) / (libm::log(m1 as f64) - libm::log(m0 as f64));
    let (v0, v1) = if a.sd > 0.0 && b.sd > 0.0 && t.is_finite() {
        let mean = a.mean + w * (b.mean - a.mean);
        let sd = libm::exp(libm::log(a.sd) + w * (libm::log(b.sd) - libm::log(a.sd)));
        let z = (t - mean) / sd;
        (f0(a.mean + z * a.sd), f1(b.mean + z * b.sd))
    } else {
        (f0(t), f1(t))
    };
    ((1.0 - w) * v0 + w * v1).clamp(0.0, 1.0)
}

/// Rates on which Poisson-averaged combination tables are built:
/// `mu_i = 10^((i - 20) / 20)` for `i = 0..=100`.
pub const RATE_POINTS: usize = 101;

pub fn rate(i: usize) -> f64 {
    libm::pow(10.0, (i as f64 - 20.0) / 20.0)
}

/// Neighbouring rate indices and the weight of the upper one, linear in
/// `ln mu`; rates below the first grid point clamp to it.
pub fn rate_bracket(mu: f64) -> Option<(usize, usize, f64)> {
    let x = 20.0 * libm::log10(mu) + 20.0;
    if !(x <= (RATE_POINTS - 1) as f64) {
        return None;
    }
    if x <= 0.0 {
        return Some((0, 0, 0.0));
    }
    let i = libm::floor(x) as usize;
    if i >= RATE_POINTS - 1 {
        return Some((i, i, 0.0));
    }
    Some((i, i + 1, x - i as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let g = m_grid();
        assert_eq!(&g[..200], &(1..=200).collect::<Vec<_>>()[..]);
        assert_eq!(*g.last().unwrap(), 10_000);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(g[200], 215);
        let per_decade = g.iter().filter(|&&m| (1000..10_000).contains(&m)).count();
        assert!((28..=31).contains(&per_decade));
    }

    #[test]
    fn brackets() {
        assert_eq!(bracket(0), None);
        assert_eq!(bracket(17), Some((17, 17)));
        assert_eq!(bracket(1000), Some((1000, 1000)));
        let (a, b) = bracket(1010).unwrap();
        assert!(a < 1010 && 1010 < b);
        assert_eq!(bracket(10_001), None);
        assert!(is_grid_point(215) && !is_grid_point(216));
    }

    #[test]
    fn aligned_interpolation_tracks_location_scale_family() {
        use crate::special::normal_cdf;
        // Mean ln m and sd m^(-1/2) are exactly linear in ln m.
        let mom = |m: f64| Moments { mean: libm::log(m), sd: libm::exp(-0.5 * libm::log(m)) };
        let f = |m: f64| move |t: f64| normal_cdf((t - mom(m).mean) / mom(m).sd);
        let (m0, m1, m) = (1000usize, 1080usize, 1040usize);
        let (f0, f1) = (f(m0 as f64), f(m1 as f64));
        for i in -30..=30 {
            let t = mom(m as f64).mean + i as f64 * 0.1 * mom(m as f64).sd;
            let got = interp_cdf(m, (m0, mom(m0 as f64), &f0), (m1, mom(m1 as f64), &f1), t);
            assert!((got - f(m as f64)(t)).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn rate_grid() {
        assert!((rate(0) - 0.1).abs() < 1e-15);
        assert!((rate(20) - 1.0).abs() < 1e-15);
        assert!((rate(100) - 1e4).abs() < 1e-9);
        assert_eq!(rate_bracket(0.01), Some((0, 0, 0.0)));
        let (i, j, w) = rate_bracket(1.5).unwrap();
        assert_eq!((i, j), (23, 24));
        assert!(w > 0.0 && w < 1.0);
        assert_eq!(rate_bracket(2e4), None);
    }
}
