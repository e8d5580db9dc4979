// SPDX-License-Identifier: Apache-2.0

//! Poisson weights over a truncated window of event counts, and sampling.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::special::poisson_pmf;

/// Largest Poisson mass omitted from each tail of a window.
pub const TAIL_TOLERANCE: f64 = 1e-10;

/// Poisson probabilities for `m` in `lo..lo + weights.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonWindow {
    pub mu: f64,
    pub lo: usize,
    pub weights: Vec<f64>,
}

impl PoissonWindow {
    /// Grows the window outward from the mode until the omitted mass in
    /// each tail is provably below [`TAIL_TOLERANCE`].
    pub fn new(mu: f64) -> Self {
        assert!(mu >= 0.0 && mu.is_finite(), "rate must be finite and non-negative");
        if mu == 0.0 {
            return Self { mu, lo: 0, weights: alloc::vec![1.0] };
        }
        let mode = libm::floor(mu) as usize;
        let p_mode = poisson_pmf(mode as u64, mu);

        let mut lower = Vec::new();
        let (mut k, mut p) = (mode, p_mode);
        while k > 0 {
            // Below the mode the pmf ratio p(k-1)/p(k) = k/mu is at most
            // r = (k-1)/mu, so the remaining tail is below p(k-1)/(1-r).
            let next = p * k as f64 / mu;
            let r = (k - 1) as f64 / mu;
            if next / (1.0 - r) < TAIL_TOLERANCE {
                break;
            }
            k -= 1;
            p = next;
            lower.push(p);
        }
        let lo = k;

        let mut weights: Vec<f64> = lower.into_iter().rev().collect();
        weights.push(p_mode);
        let (mut k, mut p) = (mode, p_mode);
        loop {
            let next = p * mu / (k + 1) as f64;
            let r = mu / (k + 2) as f64;
            if r < 1.0 && next / (1.0 - r) < TAIL_TOLERANCE {
                break;
            }
            k += 1;
            p = next;
            weights.push(p);
        }
        Self { mu, lo, weights }
    }

    pub fn hi(&self) -> usize {
        self.lo + self.weights.len() - 1
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().enumerate().map(move |(i, &w)| (self.lo + i, w))
    }
}

/// Draws a Poisson count; a zero rate always yields 0.
pub fn sample_count<R: Rng + ?Sized>(rng: &mut R, mu: f64) -> usize {
    if mu <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mu).expect("positive finite rate");
    d.sample(rng) as usize
}

/// Draws a Poisson count conditional on being at least 1.
pub fn sample_count_positive<R: Rng + ?Sized>(rng: &mut R, mu: f64) -> usize {
    assert!(mu > 0.0, "conditioning on an event needs a positive rate");
    if mu >= 2.0 {
        loop {
            let m = sample_count(rng, mu);
            if m > 0 {
                return m;
            }
        }
    }
    // Inversion of the zero-truncated law.
    let u: f64 = rng.random::<f64>() * -libm::expm1(-mu);
    let mut k = 1usize;
    let mut p = mu * libm::exp(-mu);
    let mut acc = p;
    while acc < u {
        k += 1;
        p *= mu / k as f64;
        acc += p;
        if p == 0.0 {
            break;
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn windows_hold_nearly_all_mass() {
        for &mu in &[1e-3, 0.5, 2.3, 10.0, 123.4, 5000.0] {
            let w = PoissonWindow::new(mu);
            let total: f64 = w.weights.iter().sum();
            assert!((total - 1.0).abs() < 3.0 * TAIL_TOLERANCE + 1e-12, "mu = {mu}: {total}");
            assert!(w.lo as f64 <= mu && w.hi() as f64 >= mu);
        }
        let w = PoissonWindow::new(0.0);
        assert_eq!((w.lo, w.hi()), (0, 0));
    }

    #[test]
    fn positive_counts_have_right_mean() {
        let mut rng = stream(5, &[9]);
        for &mu in &[0.1, 1.0, 4.0] {
            let n = 200_000;
            let mean = (0..n).map(|_| sample_count_positive(&mut rng, mu)).sum::<usize>() as f64 / n as f64;
            let want = mu / -libm::expm1(-mu);
            assert!((mean - want).abs() < 0.02 * want, "mu = {mu}: {mean} vs {want}");
        }
    }
}
