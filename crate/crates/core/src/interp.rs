// SPDX-License-Identifier: Apache-2.0

//! Shape-preserving piecewise cubic Hermite interpolation (PCHIP).

use alloc::vec::Vec;

use crate::{Error, Result};

/// Monotone cubic through `(x, y)` knots with Fritsch–Butland slopes.
///
/// Monotone data give a monotone interpolant; outside the knot range the
/// end values are held constant.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::InvalidArgument("knot vectors must be non-empty and of equal length"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("knots must be strictly increasing"));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("knots must be finite"));
        }
        let d = slopes(&x, &y);
        Ok(Self { x, y, d })
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    fn interval(&self, t: f64) -> usize {
        // Index k with x[k] <= t < x[k+1].
        self.x.partition_point(|&v| v <= t).saturating_sub(1).min(self.x.len() - 2)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if n == 1 || t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let k = self.interval(t);
        self.hermite(k, t)
    }

    fn hermite(&self, k: usize, t: f64) -> f64 {
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }

    /// Smallest `t` in the knot range with `eval(t) >= v`, for non-decreasing
    /// data. Values outside the range of `y` clamp to the end knots.
    pub fn inverse(&self, v: f64) -> f64 {
        let n = self.x.len();
        if n == 1 || v <= self.y[0] {
            return self.x[0];
        }
        if v >= self.y[n - 1] {
            return self.x[n - 1];
        }
        let k = self.y.partition_point(|&w| w < v).saturating_sub(1).min(n - 2);
        let (mut lo, mut hi) = (self.x[k], self.x[k + 1]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.hermite(k, mid) < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

fn slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 1 {
        return alloc::vec![0.0];
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = y.windows(2).zip(&h).map(|(w, &hk)| (w[1] - w[0]) / hk).collect();
    if n == 2 {
        return alloc::vec![delta[0], delta[0]];
    }
    let mut d = alloc::vec![0.0; n];
    for k in 1..n - 1 {
        let (d0, d1) = (delta[k - 1], delta[k]);
        if d0 * d1 <= 0.0 {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d * del0 <= 0.0 {
        0.0
    } else if del0 * del1 <= 0.0 && libm::fabs(d) > libm::fabs(3.0 * del0) {
        3.0 * del0
    } else {
        d
    }
}
