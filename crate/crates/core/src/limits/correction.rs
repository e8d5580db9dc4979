// SPDX-License-Identifier: Apache-2.0

//! Calibrated confidence correction for the best-of-projections limit.
//!
//! Taking the smallest of `n` per-axis limits at per-axis confidence `C_1`
//! covers the true rate with probability `C_n(mu, C_1 | n)`, which is not
//! `C_1^n` because all axes share one event count. The surface is measured
//! by simulation and inverted per dataset.

use alloc::vec;
use alloc::vec::Vec;

use super::{axis_curves, best_of_curves, check_cl, solve_curve, LimitMethod, LimitResult, PoissonAveragedCurve};
use crate::exec::Executor;
use crate::null::draw_sorted_uniform;
use crate::poisson::sample_count;
use crate::rng::{block_count, block_len, stream};
use crate::source::NullSource;
use crate::stats::TestId;
use crate::transform::UnitCubeSample;
use crate::{Error, Result};

pub const DEFAULT_C1_GRID: [f64; 8] = [0.90, 0.92, 0.94, 0.95, 0.96, 0.97, 0.98, 0.99];
pub const MIN_CALIBRATION_TRIALS: u64 = 10_000;
/// Target accuracy of the interpolated coverage at the corrected `C_1`.
pub const COVERAGE_TOL: f64 = 5e-3;
const MAX_BISECTIONS: usize = 60;

const DOMAIN_CALIBRATION: u64 = 0x6361_6c69;

/// Coverage of the best-of-projections limit on a `(mu, C_1)` grid.
///
/// Rows are true rates `mu*`; the surface is evaluated at the reconstructed
/// `mu_final` of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionSurface {
    pub n: usize,
    pub test: TestId,
    pub trials: u64,
    pub seed: u64,
    mu: Vec<f64>,
    c1: Vec<f64>,
    raw: Vec<f64>,
    coverage: Vec<f64>,
}

/// Baseline that treats the per-axis limits as independent, `C_1^n`.
/// It is not a valid coverage and is kept only for comparison.
pub fn naive_coverage(c1: f64, n: usize) -> f64 {
    libm::pow(c1, n as f64)
}

impl CorrectionSurface {
    /// Builds a surface from raw coverage fractions, row-major in `mu`.
    /// Each row is made non-decreasing in `C_1` by isotonic regression.
    pub fn from_parts(
        n: usize,
        test: TestId,
        trials: u64,
        seed: u64,
        mu: Vec<f64>,
        c1: Vec<f64>,
        raw: Vec<f64>,
    ) -> Result<Self> {
        if mu.is_empty() || c1.is_empty() || raw.len() != mu.len() * c1.len() {
            return Err(Error::InvalidArgument("surface grids must be non-empty and match the values"));
        }
        if mu.windows(2).any(|w| !(w[1] > w[0])) || c1.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("surface grids must be strictly increasing"));
        }
        if !(mu[0] > 0.0) || !(c1[0] > 0.0 && c1[c1.len() - 1] < 1.0) {
            return Err(Error::InvalidArgument("surface grids out of range"));
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::IncompleteSurface);
        }
        let mut coverage = Vec::with_capacity(raw.len());
        for row in raw.chunks_exact(c1.len()) {
            coverage.extend(isotonic(row).into_iter().map(|v| v.clamp(0.0, 1.0)));
        }
        Ok(Self { n, test, trials, seed, mu, c1, raw, coverage })
    }

    pub fn mu_grid(&self) -> &[f64] {
        &self.mu
    }

    pub fn c1_grid(&self) -> &[f64] {
        &self.c1
    }

    /// Measured fractions, row-major in `mu`.
    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    /// Smoothed coverage, row-major in `mu`.
    pub fn coverage(&self) -> &[f64] {
        &self.coverage
    }

    /// Bilinear interpolation in `(ln mu, C_1)`; leaving the grid is an error.
    pub fn eval(&self, mu: f64, c1: f64) -> Result<f64> {
        let (i, wm) = locate(&self.mu, mu, true).ok_or(Error::Extrapolation("rate outside the calibrated grid"))?;
        let (k, wc) = locate(&self.c1, c1, false).ok_or(Error::Extrapolation("C_1 outside the calibrated grid"))?;
        let nc = self.c1.len();
        let at = |r: usize, c: usize| self.coverage[r * nc + c];
        let (i1, k1) = ((i + 1).min(self.mu.len() - 1), (k + 1).min(nc - 1));
        let lower = (1.0 - wc) * at(i, k) + wc * at(i, k1);
        let upper = (1.0 - wc) * at(i1, k) + wc * at(i1, k1);
        Ok((1.0 - wm) * lower + wm * upper)
    }
}

/// Cell index and weight of `x` on `grid`, optionally in log coordinates.
fn locate(grid: &[f64], x: f64, log: bool) -> Option<(usize, f64)> {
    let (first, last) = (grid[0], grid[grid.len() - 1]);
    if !(x >= first && x <= last) {
        return None;
    }
    if grid.len() == 1 {
        return Some((0, 0.0));
    }
    let k = grid.partition_point(|&g| g <= x).clamp(1, grid.len() - 1) - 1;
    let f = |v: f64| if log { libm::log(v) } else { v };
    Some((k, ((f(x) - f(grid[k])) / (f(grid[k + 1]) - f(grid[k]))).clamp(0.0, 1.0)))
}

/// Pool-adjacent-violators fit of a non-decreasing sequence.
fn isotonic(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.pop();
            let last = blocks.len() - 1;
            blocks[last] = ((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb);
        }
    }
    blocks.into_iter().flat_map(|(v, k)| core::iter::repeat(v).take(k)).collect()
}

/// Measures `C_n(mu*, C_1 | n)` with `trials` uniform experiments per true
/// rate. All `C_1` levels share the same datasets.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_correction<S: NullSource + ?Sized, E: Executor>(
    src: &S,
    test: TestId,
    n: usize,
    c1_grid: &[f64],
    mu_grid: &[f64],
    trials: u64,
    seed: u64,
    exec: &E,
) -> Result<CorrectionSurface> {
    if n == 0 || c1_grid.is_empty() || mu_grid.is_empty() {
        return Err(Error::InvalidArgument("calibration needs n >= 1 and non-empty grids"));
    }
    if trials < MIN_CALIBRATION_TRIALS {
        return Err(Error::InsufficientTrials { required: MIN_CALIBRATION_TRIALS, found: trials });
    }
    for &c in c1_grid {
        check_cl(c)?;
    }
    let per_row = block_count(trials);
    let jobs = exec.map_blocks(mu_grid.len() * per_row, |job| -> Result<Vec<u64>> {
        let (row, b) = (job / per_row, job % per_row);
        let mu_true = mu_grid[row];
        let keys = [DOMAIN_CALIBRATION, test.code() as u64, n as u64, mu_true.to_bits(), b as u64];
        let mut rng = stream(seed, &keys);
        let (mut gaps, mut axis) = (Vec::new(), Vec::new());
        let mut covered = vec![0u64; c1_grid.len()];
        for _ in 0..block_len(trials, b) {
            let m = sample_count(&mut rng, mu_true);
            let mut curves = Vec::with_capacity(n);
            for _ in 0..n {
                draw_sorted_uniform(&mut rng, m, &mut gaps, &mut axis);
                curves.push(PoissonAveragedCurve::from_sample(src, test, &axis)?);
            }
            for (k, &c1) in c1_grid.iter().enumerate() {
                let best = best_of_curves(&curves, c1, LimitMethod::Projection(test))?;
                covered[k] += (best.mu_lim >= mu_true) as u64;
            }
        }
        Ok(covered)
    });
    let mut raw = vec![0.0; mu_grid.len() * c1_grid.len()];
    let mut counts = vec![0u64; raw.len()];
    for (job, r) in jobs.into_iter().enumerate() {
        let row = job / per_row;
        for (k, c) in r?.into_iter().enumerate() {
            counts[row * c1_grid.len() + k] += c;
        }
    }
    for (v, c) in raw.iter_mut().zip(counts) {
        *v = c as f64 / trials as f64;
    }
    CorrectionSurface::from_parts(n, test, trials, seed, mu_grid.to_vec(), c1_grid.to_vec(), raw)
}

/// Best-of-projections limit at overall confidence `cl`: bisection on the
/// per-axis confidence `C_1` until `C_n(mu_final(C_1), C_1 | n) = cl`.
/// At `n = 1` this is the single-axis limit at `cl` and needs no surface.
pub fn corrected_projection_limit<S: NullSource + ?Sized>(
    src: &S,
    data: &UnitCubeSample,
    test: TestId,
    cl: f64,
    surface: Option<&CorrectionSurface>,
) -> Result<LimitResult> {
    check_cl(cl)?;
    let method = LimitMethod::Projection(test);
    let curves = axis_curves(src, data, test)?;
    if data.n() == 1 {
        let mut r = solve_curve(&curves[0], cl, method)?;
        r.diagnostics.c1 = Some(cl);
        r.diagnostics.axes = vec![r.mu_lim];
        return Ok(r);
    }
    let surface = surface.ok_or(Error::InvalidArgument("projection limits need a correction surface"))?;
    if surface.n != data.n() {
        return Err(Error::DimensionMismatch { expected: surface.n, found: data.n() });
    }
    if surface.test != test {
        return Err(Error::UnsupportedTest(test));
    }
    let eval = |c1: f64| -> Result<(LimitResult, f64)> {
        let r = best_of_curves(&curves, c1, method)?;
        let g = surface.eval(r.mu_lim, c1)? - cl;
        Ok((r, g))
    };
    let finish = |mut r: LimitResult, iterations: usize, g: f64| {
        r.cl = cl;
        r.diagnostics.iterations = iterations;
        r.diagnostics.residual = g;
        r
    };

    let mut lo = cl.max(surface.c1[0]);
    let mut hi = surface.c1[surface.c1.len() - 1];
    let (r_lo, g_lo) = eval(lo)?;
    if g_lo >= 0.0 {
        return Ok(finish(r_lo, 0, g_lo));
    }
    let (mut r_hi, mut g_hi) = eval(hi)?;
    if g_hi < 0.0 {
        return Err(Error::Extrapolation("target confidence above the calibrated C_1 range"));
    }
    for it in 1..=MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let (r, g) = eval(mid)?;
        if g >= 0.0 {
            hi = mid;
            r_hi = r;
            g_hi = g;
        } else {
            lo = mid;
        }
        if g_hi < COVERAGE_TOL * 0.1 || hi - lo < 1e-7 {
            if g_hi.abs() >= COVERAGE_TOL {
                return Err(Error::NonConvergence(it));
            }
            return Ok(finish(r_hi, it, g_hi));
        }
    }
    Err(Error::NonConvergence(MAX_BISECTIONS))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotonic_fit() {
        let close = |a: Vec<f64>, b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(isotonic(&[0.1, 0.3, 0.2, 0.4]), &[0.1, 0.25, 0.25, 0.4]));
        assert!(close(isotonic(&[0.5, 0.4, 0.3]), &[0.4, 0.4, 0.4]));
        assert_eq!(isotonic(&[0.1, 0.2]), vec![0.1, 0.2]);
    }

    #[test]
    fn surface_interpolation_and_bounds() {
        let s = CorrectionSurface::from_parts(
            2,
            TestId::Pcs,
            10_000,
            0,
            vec![2.0, 8.0],
            vec![0.9, 0.99],
            vec![0.8, 0.98, 0.84, 0.97],
        )
        .unwrap();
        assert_eq!(s.coverage(), &[0.8, 0.98, 0.84, 0.97][..]);
        assert!((s.eval(2.0, 0.9).unwrap() - 0.8).abs() < 1e-12);
        assert!((s.eval(4.0, 0.9).unwrap() - 0.82).abs() < 1e-12);
        assert!(matches!(s.eval(1.0, 0.95), Err(Error::Extrapolation(_))));
        assert!(matches!(s.eval(3.0, 0.999), Err(Error::Extrapolation(_))));
    }

    #[test]
    fn naive_baseline() {
        assert!((naive_coverage(0.9, 2) - 0.81).abs() < 1e-15);
    }
}
