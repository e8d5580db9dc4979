// SPDX-License-Identifier: Apache-2.0

//! One-dimensional model distributions used by the probability integral
//! transform.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::interp::MonotoneCubic;
use crate::special::{normal_cdf, normal_quantile, normal_sf};
use crate::{Error, Result};

/// A continuous marginal with a CDF and its inverse.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginalModel {
    Uniform { a: f64, b: f64 },
    Normal { mu: f64, sigma: f64 },
    Exponential { rate: f64 },
    TruncatedNormal { mu: f64, sigma: f64, a: f64, b: f64 },
    Tabulated(TabulatedCdf),
}

/// A CDF given by user-supplied `(x, F)` pairs, interpolated monotonically.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCdf {
    label: String,
    spline: MonotoneCubic,
}

impl TabulatedCdf {
    pub fn new(label: impl Into<String>, x: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if x.len() < 2 {
            return Err(Error::InvalidModel(format!("{label}: need at least two (x, F) pairs")));
        }
        if f.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidModel(format!("{label}: F must be strictly increasing")));
        }
        if f[0] < 0.0 || f[f.len() - 1] > 1.0 {
            return Err(Error::InvalidModel(format!("{label}: F must lie in [0, 1]")));
        }
        let spline = MonotoneCubic::new(x, f).map_err(|_| {
            Error::InvalidModel(format!("{label}: x must be finite and strictly increasing"))
        })?;
        Ok(Self { label, spline })
    }
}

fn check(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidModel(what.to_string()))
    }
}

impl MarginalModel {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        check(a.is_finite() && b.is_finite() && a < b, "uniform(a,b) needs finite a < b")?;
        Ok(Self::Uniform { a, b })
    }

    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        check(mu.is_finite() && sigma.is_finite() && sigma > 0.0, "normal(mu,sigma) needs sigma > 0")?;
        Ok(Self::Normal { mu, sigma })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        check(rate.is_finite() && rate > 0.0, "exponential(rate) needs rate > 0")?;
        Ok(Self::Exponential { rate })
    }

    pub fn truncated_normal(mu: f64, sigma: f64, a: f64, b: f64) -> Result<Self> {
        check(
            mu.is_finite() && sigma.is_finite() && sigma > 0.0 && a < b && !a.is_nan() && !b.is_nan(),
            "truncated-normal(mu,sigma,a,b) needs sigma > 0 and a < b",
        )?;
        let m = Self::TruncatedNormal { mu, sigma, a, b };
        check(m.tn_mass() > 0.0, "truncated-normal interval carries no mass")?;
        Ok(m)
    }

    /// Parses descriptors such as `normal(0,1)`, `exponential(0.1)`,
    /// `uniform(0,10)` or `truncated-normal(0.5,0.1,0,1)`.
    pub fn parse(desc: &str) -> Result<Self> {
        let desc = desc.trim();
        let bad = || Error::InvalidModel(format!("cannot parse marginal `{desc}`"));
        let open = desc.find('(').ok_or_else(bad)?;
        if !desc.ends_with(')') {
            return Err(bad());
        }
        let name = desc[..open].trim().to_ascii_lowercase();
        let args: Vec<f64> = desc[open + 1..desc.len() - 1]
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<core::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match (name.as_str(), args.as_slice()) {
            ("uniform", [a, b]) => Self::uniform(*a, *b),
            ("normal", [mu, s]) => Self::normal(*mu, *s),
            ("exponential", [r]) => Self::exponential(*r),
            ("truncated-normal", [mu, s, a, b]) => Self::truncated_normal(*mu, *s, *a, *b),
            _ => Err(bad()),
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            Self::Uniform { a, b } => format!("uniform({a},{b})"),
            Self::Normal { mu, sigma } => format!("normal({mu},{sigma})"),
            Self::Exponential { rate } => format!("exponential({rate})"),
            Self::TruncatedNormal { mu, sigma, a, b } => {
                format!("truncated-normal({mu},{sigma},{a},{b})")
            }
            Self::Tabulated(t) => format!("tabulated({})", t.label),
        }
    }

    /// Closed support `[lo, hi]`.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::Uniform { a, b } | Self::TruncatedNormal { a, b, .. } => (*a, *b),
            Self::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Self::Exponential { .. } => (0.0, f64::INFINITY),
            Self::Tabulated(t) => {
                let k = t.spline.knots();
                (k[0], k[k.len() - 1])
            }
        }
    }

    fn tn_bounds(&self) -> (f64, f64) {
        match *self {
            Self::TruncatedNormal { mu, sigma, a, b } => ((a - mu) / sigma, (b - mu) / sigma),
            _ => unreachable!(),
        }
    }

    fn tn_mass(&self) -> f64 {
        let (lo, hi) = self.tn_bounds();
        if lo > 0.0 {
            normal_sf(lo) - normal_sf(hi)
        } else {
            normal_cdf(hi) - normal_cdf(lo)
        }
    }

    /// CDF value; points outside the support clamp to 0 or 1.
    pub fn cdf(&self, x: f64) -> f64 {
        let v = match *self {
            Self::Uniform { a, b } => (x - a) / (b - a),
            Self::Normal { mu, sigma } => normal_cdf((x - mu) / sigma),
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -libm::expm1(-rate * x)
                }
            }
            Self::TruncatedNormal { mu, sigma, .. } => {
                let (lo, hi) = self.tn_bounds();
                let z = ((x - mu) / sigma).clamp(lo, hi);
                if lo > 0.0 {
                    (normal_sf(lo) - normal_sf(z)) / self.tn_mass()
                } else {
                    (normal_cdf(z) - normal_cdf(lo)) / self.tn_mass()
                }
            }
            Self::Tabulated(ref t) => t.spline.eval(x),
        };
        v.clamp(0.0, 1.0)
    }

    /// Quantile function on `[0, 1]`.
    pub fn inverse_cdf(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        match *self {
            Self::Uniform { a, b } => a + q * (b - a),
            Self::Normal { mu, sigma } => mu + sigma * normal_quantile(q),
            Self::Exponential { rate } => -libm::log1p(-q) / rate,
            Self::TruncatedNormal { mu, sigma, a, b } => {
                let (lo, _) = self.tn_bounds();
                let z = if lo > 0.0 {
                    -normal_quantile(normal_sf(lo) - q * self.tn_mass())
                } else {
                    normal_quantile(normal_cdf(lo) + q * self.tn_mass())
                };
                (mu + sigma * z).clamp(a, b)
            }
            Self::Tabulated(ref t) => t.spline.inverse(q),
        }
    }

    /// Probability integral transform of a single coordinate with support
    /// checking; `row`/`col` only label the error.
    pub fn transform(&self, x: f64, row: usize, col: usize) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFinite { row, col });
        }
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return Err(Error::OutsideSupport { row, col, value: x, model: self.descriptor() });
        }
        Ok(self.cdf(x))
    }
}
