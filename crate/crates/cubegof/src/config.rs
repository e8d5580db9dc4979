// SPDX-License-Identifier: Apache-2.0

//! TOML study configurations.

use std::path::{Path, PathBuf};

use cubegof_core::discovery::Method;
use cubegof_core::limits::LimitMethod;
use cubegof_core::null::MIN_TRIALS;
use cubegof_core::sim::{BackgroundKind, BackgroundSpec, SignalKind, SignalSpec};
use cubegof_core::TestId;
use serde::{Deserialize, Serialize};

use crate::store::{StoreConfig, SurfaceSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    Discovery,
    Limit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BackgroundConfig {
    Uniform,
    ExpProduct { rate: f64, extent: f64 },
    GaussCentered { sigma: f64 },
    ConcaveBowl { mu: f64, sigma: f64 },
}

impl BackgroundConfig {
    pub fn kind(&self) -> BackgroundKind {
        match *self {
            Self::Uniform => BackgroundKind::Uniform,
            Self::ExpProduct { rate, extent } => BackgroundKind::ExpProduct { rate, extent },
            Self::GaussCentered { sigma } => BackgroundKind::GaussCentered { sigma },
            Self::ConcaveBowl { mu, sigma } => BackgroundKind::ConcaveBowl { mu, sigma },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalConfig {
    GaussCluster {
        sigma: f64,
        #[serde(default = "default_center")]
        center: [f64; 2],
    },
    GaussShell {
        radius: f64,
        sigma_r: f64,
        #[serde(default = "default_center")]
        center: [f64; 2],
    },
}

fn default_center() -> [f64; 2] {
    [0.2, 0.8]
}

impl SignalConfig {
    pub fn spec(&self, n: usize, mean_count: f64) -> SignalSpec {
        let (kind, c) = match *self {
            Self::GaussCluster { sigma, center } => (SignalKind::GaussCluster { sigma }, center),
            Self::GaussShell { radius, sigma_r, center } => (SignalKind::GaussShell { radius, sigma_r }, center),
        };
        SignalSpec { kind, n, mean_count, center_lo: c[0], center_hi: c[1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TablesConfig {
    #[serde(default = "min_trials")]
    pub trials_fixed: u64,
    #[serde(default = "min_trials")]
    pub trials_combined: u64,
    #[serde(default = "min_trials")]
    pub trials_poisson: u64,
    #[serde(default = "asymptote_trials")]
    pub trials_asymptote: u64,
    #[serde(default = "one")]
    pub seed: u64,
}

fn min_trials() -> u64 {
    MIN_TRIALS
}

fn asymptote_trials() -> u64 {
    StoreConfig::default().trials_asymptote
}

fn one() -> u64 {
    1
}

impl Default for TablesConfig {
    fn default() -> Self {
        let d = StoreConfig::default();
        Self {
            trials_fixed: d.trials_fixed,
            trials_combined: d.trials_combined,
            trials_poisson: d.trials_poisson,
            trials_asymptote: d.trials_asymptote,
            seed: d.seed,
        }
    }
}

impl TablesConfig {
    pub fn store_config(&self, dir: Option<PathBuf>) -> StoreConfig {
        StoreConfig {
            dir,
            trials_fixed: self.trials_fixed,
            trials_combined: self.trials_combined,
            trials_poisson: self.trials_poisson,
            trials_asymptote: self.trials_asymptote,
            seed: self.seed,
            build: true,
        }
    }
}

/// Rate range and effort of the correction surfaces used by projection limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub trials: u64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self { mu_lo: 2.0, mu_hi: 200.0, trials: 10_000 }
    }
}

impl SurfaceConfig {
    pub fn spec(&self, test: TestId, n: usize) -> SurfaceSpec {
        SurfaceSpec::new(test, n, self.mu_lo, self.mu_hi, self.trials)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub kind: StudyKind,
    pub name: String,
    pub dims: usize,
    pub trials: usize,
    pub seed: u64,
    /// Scanned mean counts: of the signal in discovery studies, of the
    /// (unknown-rate) population in limit studies.
    pub scan: Vec<f64>,
    /// Discovery: combiners (`min-p`, `prod-p`, `volume`). Limit: method
    /// labels such as `poisson`, `projection-oi` or `volume-slss`.
    pub methods: Vec<String>,
    /// Tests crossed with the discovery combiners.
    #[serde(default)]
    pub tests: Vec<String>,
    #[serde(default = "default_cl")]
    pub cl: f64,
    /// Mean background count of discovery studies.
    #[serde(default)]
    pub background_count: f64,
}

fn default_cl() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: StudySection,
    pub background: BackgroundConfig,
    #[serde(default)]
    pub signal: Option<SignalConfig>,
    #[serde(default)]
    pub tables: TablesConfig,
    #[serde(default)]
    pub surface: SurfaceConfig,
}

/// A discovery method crossed with a test, labelled `prod-p/ks`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiscoveryMethod {
    pub method: Method,
    pub test: TestId,
}

impl DiscoveryMethod {
    pub fn label(&self) -> String {
        format!("{}/{}", self.method, self.test)
    }
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialise")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.study;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if s.dims == 0 || s.trials == 0 || s.scan.is_empty() || s.methods.is_empty() {
            return bad("dims, trials, scan and methods must be non-empty");
        }
        if s.scan.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("scan values must be finite and non-negative");
        }
        self.background_spec(0.0).validate()?;
        if let Some(sig) = &self.signal {
            sig.spec(s.dims, 0.0).validate()?;
        }
        match s.kind {
            StudyKind::Discovery => {
                self.discovery_methods()?;
            }
            StudyKind::Limit => {
                self.limit_methods()?;
                if !(s.cl > 0.0 && s.cl < 1.0) {
                    return bad("cl must lie in (0, 1)");
                }
            }
        }
        Ok(())
    }

    pub fn background_spec(&self, mean_count: f64) -> BackgroundSpec {
        BackgroundSpec { kind: self.background.kind(), n: self.study.dims, mean_count }
    }

    pub fn discovery_methods(&self) -> Result<Vec<DiscoveryMethod>> {
        if self.study.tests.is_empty() {
            return Err(Error::Config("discovery studies need at least one test".into()));
        }
        let mut out = Vec::new();
        for m in &self.study.methods {
            let method: Method = m.parse()?;
            for t in &self.study.tests {
                out.push(DiscoveryMethod { method, test: t.parse()? });
            }
        }
        Ok(out)
    }

    pub fn limit_methods(&self) -> Result<Vec<LimitMethod>> {
        self.study.methods.iter().map(|m| Ok(m.parse()?)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LIMIT: &str = r#"
[study]
kind = "limit"
name = "demo"
dims = 2
trials = 10
seed = 3
scan = [5.0, 10.0]
methods = ["poisson", "pcs-sum", "projection-oi"]

[background]
kind = "exp-product"
rate = 0.1
extent = 10.0
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = StudyConfig::from_toml(LIMIT).unwrap();
        assert_eq!(c.limit_methods().unwrap()[2], LimitMethod::Projection(TestId::Oi));
        assert_eq!(c.background.kind(), BackgroundKind::ExpProduct { rate: 0.1, extent: 10.0 });
        assert_eq!(c.tables, TablesConfig::default());
        assert_eq!(StudyConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(StudyConfig::from_toml(&LIMIT.replace("pcs-sum", "pcs-avg")).is_err());
        assert!(StudyConfig::from_toml(&LIMIT.replace("rate = 0.1", "rate = -1")).is_err());
        assert!(StudyConfig::from_toml(&LIMIT.replace("seed = 3", "seed = 3\nbogus = 1")).is_err());
        let disc = LIMIT.replace("\"limit\"", "\"discovery\"");
        assert!(StudyConfig::from_toml(&disc).is_err());
    }
}
