// SPDX-License-Identifier: Apache-2.0

//! Densities on equally spaced grids and their self-convolution, used for
//! the null distribution of a sum of independent statistics.

use alloc::vec;
use alloc::vec::Vec;

use crate::fft::{fft, Complex};
use crate::null::NullComponent;
use crate::special::normal_cdf;
use crate::{Error, Result};

/// Mass allowed beyond the linear-convolution support after the inverse transform.
pub const ALIAS_TOLERANCE: f64 = 1e-6;
pub const MIN_GRID: usize = 1024;

/// Density values `f(start + i * step)`; node `i` stands for the cell
/// `[x_i - step/2, x_i + step/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    start: f64,
    step: f64,
    density: Vec<f64>,
}

impl DensityGrid {
    pub fn new(start: f64, step: f64, density: Vec<f64>) -> Result<Self> {
        if density.is_empty() || !(step > 0.0) || !start.is_finite() {
            return Err(Error::InvalidArgument("density grid needs nodes and a positive step"));
        }
        if density.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::InvalidArgument("densities must be finite and non-negative"));
        }
        Ok(Self { start, step, density })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn end(&self) -> f64 {
        self.start + (self.density.len() - 1) as f64 * self.step
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn x(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn total_mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.step
    }

    pub fn mean(&self) -> f64 {
        let h = self.step;
        self.density.iter().enumerate().map(|(i, d)| self.x(i) * d * h).sum::<f64>() / self.total_mass()
    }

    /// CDF at the upper cell edges `x_i + step/2`.
    pub fn edge_cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.density
            .iter()
            .map(|d| {
                acc += d * self.step;
                acc
            })
            .collect()
    }
}

/// Differentiates a tabulated CDF on `grid_size` nodes spanning exactly
/// `[first knot, last knot]`. Node masses are CDF increments across cells,
/// so the result has unit mass by construction.
pub fn density_from_null(c: &NullComponent, grid_size: usize) -> Result<DensityGrid> {
    if grid_size < MIN_GRID {
        return Err(Error::InvalidArgument("grid_size must be at least 1024"));
    }
    let knots = c.knots();
    let (a, b) = (knots[0], knots[knots.len() - 1]);
    if !(b > a) {
        return Err(Error::ZeroDensity);
    }
    let h = (b - a) / (grid_size - 1) as f64;
    let mut prev = 0.0;
    let mut density: Vec<f64> = (0..grid_size)
        .map(|i| {
            let upper = if i + 1 == grid_size { 1.0 } else { c.eval(a + (i as f64 + 0.5) * h) };
            let mass = (upper - prev).max(0.0);
            prev = upper;
            mass / h
        })
        .collect();
    normalize(&mut density, h)?;
    DensityGrid::new(a, h, density)
}

fn normalize(density: &mut [f64], h: f64) -> Result<()> {
    let mass: f64 = density.iter().sum::<f64>() * h;
    if !(mass > 0.0) {
        return Err(Error::ZeroDensity);
    }
    for d in density.iter_mut() {
        *d /= mass;
    }
    Ok(())
}

/// Density of the sum of `n` independent draws from `f`, by a zero-padded
/// FFT raised to the `n`-th power.
pub fn convolve_power(f: &DensityGrid, n: usize) -> Result<DensityGrid> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1"));
    }
    let h = f.step;
    let len = f.density.len();
    let support = n * (len - 1) + 1;
    if n == 1 {
        let mut d = f.density.clone();
        normalize(&mut d, h)?;
        return DensityGrid::new(f.start, h, d);
    }
    let padded = support.next_power_of_two();
    let mut buf = vec![Complex::default(); padded];
    for (z, &d) in buf.iter_mut().zip(&f.density) {
        z.re = d * h;
    }
    fft(&mut buf, false);
    let power = u32::try_from(n).map_err(|_| Error::InvalidArgument("n too large"))?;
    for z in buf.iter_mut() {
        *z = z.powu(power);
    }
    fft(&mut buf, true);
    let spill: f64 = buf[support..].iter().map(|z| z.re.abs()).sum();
    if spill > ALIAS_TOLERANCE {
        return Err(Error::Aliasing(spill));
    }
    let mut density: Vec<f64> = buf[..support].iter().map(|z| z.re.max(0.0) / h).collect();
    normalize(&mut density, h)?;
    DensityGrid::new(n as f64 * f.start, h, density)
}

/// Null CDF of a sum of `n` independent copies of a statistic.
#[derive(Debug, Clone, PartialEq)]
pub enum SumNull {
    Grid {
        mean: f64,
        sd: f64,
        /// Centre of the first cell.
        start: f64,
        step: f64,
        /// CDF at the upper edge of each cell.
        edges: Vec<f64>,
    },
    Gaussian { mean: f64, sd: f64 },
}

impl SumNull {
    /// Tabulated sum from a fixed-`m` component.
    pub fn from_component(c: &NullComponent, n: usize, grid_size: usize) -> Result<Self> {
        let grid = convolve_power(&density_from_null(c, grid_size)?, n)?;
        Ok(Self::Grid {
            mean: n as f64 * c.mean(),
            sd: libm::sqrt(n as f64) * c.sd(),
            start: grid.start,
            step: grid.step,
            edges: grid.edge_cdf(),
        })
    }

    /// Sum of `n` Gaussians with the given per-copy moments.
    pub fn gaussian(mean: f64, sd: f64, n: usize) -> Self {
        Self::Gaussian { mean: n as f64 * mean, sd: libm::sqrt(n as f64) * sd }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Grid { mean, .. } | Self::Gaussian { mean, .. } => *mean,
        }
    }

    pub fn sd(&self) -> f64 {
        match self {
            Self::Grid { sd, .. } | Self::Gaussian { sd, .. } => *sd,
        }
    }

    /// CDF, linear within each cell.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Gaussian { mean, sd } => normal_cdf((t - mean) / sd),
            Self::Grid { start, step, edges, .. } => {
                let s = (t - (start - 0.5 * step)) / step;
                if !(s > 0.0) {
                    return 0.0;
                }
                let k = libm::floor(s) as usize;
                if k >= edges.len() {
                    return 1.0;
                }
                let lower = if k == 0 { 0.0 } else { edges[k - 1] };
                (lower + (s - k as f64) * (edges[k] - lower)).clamp(0.0, 1.0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal_pdf;

    fn normal_grid(mu: f64, sigma: f64) -> DensityGrid {
        let (a, b, n) = (mu - 8.0 * sigma, mu + 8.0 * sigma, 2048);
        let h = (b - a) / (n - 1) as f64;
        let d = (0..n).map(|i| normal_pdf((a + i as f64 * h - mu) / sigma) / sigma).collect();
        DensityGrid::new(a, h, d).unwrap()
    }

    #[test]
    fn gaussian_self_convolution() {
        let f = normal_grid(2.0, 0.3);
        let g = convolve_power(&f, 2).unwrap();
        let s = 0.3 * core::f64::consts::SQRT_2;
        assert!((g.total_mass() - 1.0).abs() < 1e-6);
        for (i, &d) in g.density().iter().enumerate() {
            let want = normal_pdf((g.x(i) - 4.0) / s) / s;
            assert!((d - want).abs() < 1e-3, "x = {}", g.x(i));
        }
        assert!((g.mean() - 2.0 * f.mean()).abs() < 1e-3 * 4.0);
    }

    #[test]
    fn single_power_is_identity() {
        let f = normal_grid(0.0, 1.0);
        let g = convolve_power(&f, 1).unwrap();
        for (a, b) in f.density().iter().zip(g.density()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn power_conserves_mass_and_scales_mean() {
        let f = normal_grid(1.3, 0.2);
        for n in 2..=5 {
            let g = convolve_power(&f, n).unwrap();
            assert!((g.total_mass() - 1.0).abs() < 1e-6);
            assert!((g.mean() / (n as f64 * f.mean()) - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn sum_null_cdf_is_monotone_and_bounded() {
        let f = normal_grid(0.5, 0.1);
        let g = convolve_power(&f, 3).unwrap();
        let s = SumNull::Grid { mean: 1.5, sd: 0.17, start: g.start(), step: g.step(), edges: g.edge_cdf() };
        let mut prev = 0.0;
        for i in 0..=1000 {
            let v = s.eval(i as f64 * 0.003);
            assert!(v >= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
        assert!((s.eval(1.5) - 0.5).abs() < 1e-3);
        assert_eq!(s.eval(-1.0), 0.0);
        assert_eq!(s.eval(10.0), 1.0);
    }
}
