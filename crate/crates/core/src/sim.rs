// SPDX-License-Identifier: Apache-2.0

//! Background and signal generators for the simulation studies.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::marginal::MarginalModel;
use crate::poisson::sample_count;
use crate::transform::{ProductModel, SampleMatrix};
use crate::{Error, Result};

const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BackgroundKind {
    /// Uniform in `[0, 1]^n`.
    Uniform,
    /// Independent exponentials of `rate` per axis, truncated to
    /// `[0, extent]`; the proposed model is uniform on that box.
    ExpProduct { rate: f64, extent: f64 },
    /// Normal around the cube centre with spread `sigma`, truncated to the cube.
    GaussCentered { sigma: f64 },
    /// Uniform raw data in `[0, 1]^n`; the proposed model is a normal
    /// `(mu, sigma)` truncated to `[0, 1]`, so the transformed background
    /// piles up at the cube faces.
    ConcaveBowl { mu: f64, sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSpec {
    pub kind: BackgroundKind,
    pub n: usize,
    pub mean_count: f64,
}

impl BackgroundSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            BackgroundKind::Uniform => true,
            BackgroundKind::ExpProduct { rate, extent } => rate > 0.0 && extent > 0.0,
            BackgroundKind::GaussCentered { sigma } => sigma > 0.0,
            BackgroundKind::ConcaveBowl { mu, sigma } => sigma > 0.0 && (0.0..=1.0).contains(&mu),
        };
        if !ok || self.n == 0 || !(self.mean_count >= 0.0 && self.mean_count.is_finite()) {
            return Err(Error::InvalidArgument("invalid background specification"));
        }
        Ok(())
    }

    /// Model under which raw data are mapped to the unit cube.
    pub fn proposed_model(&self) -> Result<ProductModel> {
        let marginal = match self.kind {
            BackgroundKind::Uniform | BackgroundKind::GaussCentered { .. } => MarginalModel::uniform(0.0, 1.0)?,
            BackgroundKind::ExpProduct { extent, .. } => MarginalModel::uniform(0.0, extent)?,
            BackgroundKind::ConcaveBowl { mu, sigma } => MarginalModel::truncated_normal(mu, sigma, 0.0, 1.0)?,
        };
        ProductModel::iid(marginal, self.n)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> Result<()> {
        for x in out.iter_mut() {
            *x = match self.kind {
                BackgroundKind::Uniform | BackgroundKind::ConcaveBowl { .. } => rng.random::<f64>(),
                BackgroundKind::ExpProduct { rate, extent } => {
                    // Inversion of the exponential truncated to [0, extent].
                    let u: f64 = rng.random();
                    -libm::log1p(u * libm::expm1(-rate * extent)) / rate
                }
                BackgroundKind::GaussCentered { sigma } => {
                    let mut tries = 0;
                    loop {
                        let z: f64 = rng.sample(StandardNormal);
                        let v = 0.5 + sigma * z;
                        if (0.0..=1.0).contains(&v) {
                            break v;
                        }
                        tries += 1;
                        if tries > MAX_REJECTIONS {
                            return Err(Error::InvalidArgument("background rejection sampling stalled"));
                        }
                    }
                }
            };
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalKind {
    /// Isotropic normal with per-axis spread `sigma`.
    GaussCluster { sigma: f64 },
    /// Points at distance `radius ~ N(radius, sigma_r)` from the centre
    /// along an isotropic direction.
    GaussShell { radius: f64, sigma_r: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub n: usize,
    pub mean_count: f64,
    /// The centre is uniform in `[center_lo, center_hi]^n`.
    pub center_lo: f64,
    pub center_hi: f64,
}

impl SignalSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            SignalKind::GaussCluster { sigma } => sigma > 0.0,
            SignalKind::GaussShell { radius, sigma_r } => radius > 0.0 && radius <= 0.5 && sigma_r >= 0.0,
        };
        let box_ok = 0.0 <= self.center_lo && self.center_lo <= self.center_hi && self.center_hi <= 1.0;
        if !ok || !box_ok || self.n == 0 || !(self.mean_count >= 0.0 && self.mean_count.is_finite()) {
            return Err(Error::InvalidArgument("invalid signal specification"));
        }
        Ok(())
    }

    /// Draws one point inside the cube, returning its radius for shells.
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, center: &[f64], out: &mut [f64]) -> Result<Option<f64>> {
        for _ in 0..MAX_REJECTIONS {
            let radius = match self.kind {
                SignalKind::GaussCluster { sigma } => {
                    for (x, c) in out.iter_mut().zip(center) {
                        let z: f64 = rng.sample(StandardNormal);
                        *x = c + sigma * z;
                    }
                    None
                }
                SignalKind::GaussShell { radius, sigma_r } => {
                    let z: f64 = rng.sample(StandardNormal);
                    let r = radius + sigma_r * z;
                    let mut norm = 0.0;
                    for x in out.iter_mut() {
                        *x = rng.sample(StandardNormal);
                        norm += *x * *x;
                    }
                    let scale = r / libm::sqrt(norm);
                    for (x, c) in out.iter_mut().zip(center) {
                        *x = c + scale * *x;
                    }
                    Some(r)
                }
            };
            if out.iter().all(|x| (0.0..=1.0).contains(x)) {
                return Ok(radius);
            }
        }
        Err(Error::InvalidArgument("signal rejection sampling stalled"))
    }
}

/// Everything drawn for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub n_bkg: usize,
    pub n_sig: usize,
    pub center: Option<Vec<f64>>,
    /// Shell radii of the signal points, in row order.
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    /// Background rows first, then signal rows.
    pub raw: SampleMatrix,
    pub truth: Truth,
}

/// Poisson-fluctuated background plus optional signal.
pub fn generate_experiment<R: Rng + ?Sized>(
    bkg: &BackgroundSpec,
    sig: Option<&SignalSpec>,
    rng: &mut R,
) -> Result<Experiment> {
    bkg.validate()?;
    let n = bkg.n;
    if let Some(s) = sig {
        s.validate()?;
        if s.n != n {
            return Err(Error::DimensionMismatch { expected: n, found: s.n });
        }
    }
    let n_bkg = sample_count(rng, bkg.mean_count);
    let n_sig = sig.map_or(0, |s| sample_count(rng, s.mean_count));
    let mut data = vec![0.0; (n_bkg + n_sig) * n];
    for row in data[..n_bkg * n].chunks_exact_mut(n) {
        bkg.draw(rng, row)?;
    }
    let mut center = None;
    let mut radii = Vec::new();
    if let Some(s) = sig {
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(s.center_lo..=s.center_hi)).collect();
        for row in data[n_bkg * n..].chunks_exact_mut(n) {
            if let Some(r) = s.draw(rng, &c, row)? {
                radii.push(r);
            }
        }
        center = Some(c);
    }
    Ok(Experiment { raw: SampleMatrix::new(n, data)?, truth: Truth { n_bkg, n_sig, center, radii } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn uniform(n: usize, mean: f64) -> BackgroundSpec {
        BackgroundSpec { kind: BackgroundKind::Uniform, n, mean_count: mean }
    }

    #[test]
    fn zero_signal_rate_gives_background_only() {
        let mut rng = stream(1, &[2]);
        let sig = SignalSpec {
            kind: SignalKind::GaussCluster { sigma: 0.1 },
            n: 3,
            mean_count: 0.0,
            center_lo: 0.2,
            center_hi: 0.8,
        };
        for _ in 0..50 {
            let e = generate_experiment(&uniform(3, 20.0), Some(&sig), &mut rng).unwrap();
            assert_eq!(e.truth.n_sig, 0);
            assert_eq!(e.raw.m(), e.truth.n_bkg);
        }
    }

    #[test]
    fn degenerate_shell_has_fixed_radius() {
        let mut rng = stream(1, &[3]);
        let sig = SignalSpec {
            kind: SignalKind::GaussShell { radius: 0.25, sigma_r: 0.0 },
            n: 5,
            mean_count: 200.0,
            center_lo: 0.25,
            center_hi: 0.75,
        };
        let e = generate_experiment(&uniform(5, 0.0), Some(&sig), &mut rng).unwrap();
        let c = e.truth.center.as_ref().unwrap();
        assert_eq!(e.truth.radii.len(), e.truth.n_sig);
        for (i, row) in e.raw.rows().enumerate() {
            let d = libm::sqrt(row.iter().zip(c).map(|(x, y)| (x - y) * (x - y)).sum::<f64>());
            assert!((d - 0.25).abs() < 1e-12);
            assert!((e.truth.radii[i] - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn backgrounds_stay_in_model_support() {
        let mut rng = stream(1, &[4]);
        let kinds = [
            BackgroundKind::ExpProduct { rate: 0.1, extent: 10.0 },
            BackgroundKind::GaussCentered { sigma: 0.1 },
            BackgroundKind::ConcaveBowl { mu: 0.5, sigma: 0.1 },
        ];
        for kind in kinds {
            let spec = BackgroundSpec { kind, n: 2, mean_count: 500.0 };
            let e = generate_experiment(&spec, None, &mut rng).unwrap();
            let model = spec.proposed_model().unwrap();
            crate::transform::pit_independent(&e.raw, &model).unwrap();
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad = BackgroundSpec { kind: BackgroundKind::GaussCentered { sigma: -1.0 }, n: 2, mean_count: 1.0 };
        assert!(bad.validate().is_err());
        let shell = SignalSpec {
            kind: SignalKind::GaussShell { radius: 0.7, sigma_r: 0.1 },
            n: 2,
            mean_count: 1.0,
            center_lo: 0.2,
            center_hi: 0.8,
        };
        assert!(shell.validate().is_err());
    }
}
