// SPDX-License-Identifier: Apache-2.0

//! Discovery and limit studies over simulated experiments.

use std::sync::Arc;

use cubegof_core::discovery::discover;
use cubegof_core::limits::{limit, CorrectionSurface, LimitMethod};
use cubegof_core::rng::stream;
use cubegof_core::sim::generate_experiment;
use cubegof_core::transform::pit_independent;
use cubegof_core::{Error as CoreError, TestId};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{StudyConfig, StudyKind};
use crate::store::TableStore;
use crate::Result;

const DOMAIN_STUDY: u64 = 0x7374_7564;

/// One method applied to one simulated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Scanned mean count of this experiment.
    pub point: f64,
    pub trial: usize,
    pub method: String,
    /// `p_final` for discovery, `mu_lim` for limits; empty on failure.
    pub value: Option<f64>,
    pub m: usize,
    pub n_bkg: usize,
    pub n_sig: usize,
    /// Clamped p-values or volumes.
    pub clamped: usize,
    pub error: Option<String>,
}

/// Per-(point, method) summary with the 16/50/84 % quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub point: f64,
    pub method: String,
    pub trials: usize,
    pub failures: usize,
    pub median: Option<f64>,
    pub q16: Option<f64>,
    pub q84: Option<f64>,
    /// Fraction of limits at or above the true rate.
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub name: String,
    pub seed: u64,
    pub config: StudyConfig,
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
}

impl StudyReport {
    pub fn row(&self, point: f64, method: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.point == point && r.method == method)
    }

    pub fn values(&self, point: f64, method: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.point == point && r.method == method)
            .filter_map(|r| r.value)
            .collect()
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (i, w) = (h.floor() as usize, h - h.floor());
    let j = (i + 1).min(sorted.len() - 1);
    Some(sorted[i] + w * (sorted[j] - sorted[i]))
}

/// Counts of values in `bins` equal-width bins over `[0, 1]`.
pub fn histogram(values: &[f64], bins: usize) -> Vec<usize> {
    let mut h = vec![0; bins];
    for &v in values {
        let b = ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        h[b] += 1;
    }
    h
}

/// Data-dependent failures are recorded per trial; missing tables and
/// similar setup problems abort the study.
fn is_setup_error(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::MissingTable { .. }
            | CoreError::InsufficientTrials { .. }
            | CoreError::UnsupportedTest(_)
            | CoreError::InvalidModel(_)
            | CoreError::DimensionMismatch { .. }
    )
}

enum Methods {
    Discovery(Vec<crate::config::DiscoveryMethod>),
    Limit(Vec<(LimitMethod, Option<Arc<CorrectionSurface>>)>),
}

impl Methods {
    fn labels(&self) -> Vec<String> {
        match self {
            Self::Discovery(v) => v.iter().map(|d| d.label()).collect(),
            Self::Limit(v) => v.iter().map(|(m, _)| m.label()).collect(),
        }
    }
}

fn run_trial(
    config: &StudyConfig,
    store: &TableStore,
    methods: &Methods,
    pi: usize,
    trial: usize,
) -> std::result::Result<Vec<TrialRecord>, CoreError> {
    let s = &config.study;
    let point = s.scan[pi];
    let mut rng = stream(s.seed, &[DOMAIN_STUDY, pi as u64, trial as u64]);
    let (bkg, sig) = match s.kind {
        StudyKind::Discovery => (
            config.background_spec(s.background_count),
            config.signal.as_ref().map(|c| c.spec(s.dims, point)),
        ),
        StudyKind::Limit => (config.background_spec(point), None),
    };
    let exp = generate_experiment(&bkg, sig.as_ref(), &mut rng)?;
    let cube = pit_independent(&exp.raw, &bkg.proposed_model()?)?;
    let record = |method: String, out: std::result::Result<(f64, usize), CoreError>| {
        let (value, clamped, error) = match out {
            Ok((v, c)) => (Some(v), c, None),
            Err(e) => (None, 0, Some(e.to_string())),
        };
        TrialRecord {
            point,
            trial,
            method,
            value,
            m: cube.m(),
            n_bkg: exp.truth.n_bkg,
            n_sig: exp.truth.n_sig,
            clamped,
            error,
        }
    };
    let mut out = Vec::new();
    match methods {
        Methods::Discovery(ms) => {
            for d in ms {
                let r = discover(store, &cube, d.test, d.method).map(|r| (r.p_final, r.clamped));
                if let Err(e) = &r {
                    if is_setup_error(e) {
                        return Err(e.clone());
                    }
                }
                out.push(record(d.label(), r));
            }
        }
        Methods::Limit(ms) => {
            for (m, surface) in ms {
                let r = limit(store, &cube, *m, s.cl, surface.as_deref()).map(|r| (r.mu_lim, 0));
                if let Err(e) = &r {
                    if is_setup_error(e) {
                        return Err(e.clone());
                    }
                }
                out.push(record(m.label(), r));
            }
        }
    }
    Ok(out)
}

/// Runs a configured study. Results depend only on the configuration and
/// the tables, not on the thread count.
pub fn run_study(config: &StudyConfig, store: &TableStore) -> Result<StudyReport> {
    config.validate()?;
    let s = &config.study;
    let methods = match s.kind {
        StudyKind::Discovery => Methods::Discovery(config.discovery_methods()?),
        StudyKind::Limit => {
            let mut v = Vec::new();
            for m in config.limit_methods()? {
                let surface = match m {
                    LimitMethod::Projection(t) if s.dims > 1 => Some(store.surface(&config.surface.spec(t, s.dims))?),
                    _ => None,
                };
                v.push((m, surface));
            }
            Methods::Limit(v)
        }
    };
    let jobs: Vec<(usize, usize)> = (0..s.scan.len()).flat_map(|p| (0..s.trials).map(move |t| (p, t))).collect();
    let per_trial: Vec<std::result::Result<Vec<TrialRecord>, CoreError>> =
        jobs.par_iter().map(|&(p, t)| run_trial(config, store, &methods, p, t)).collect();
    let mut records = Vec::with_capacity(jobs.len() * methods.labels().len());
    for r in per_trial {
        records.extend(r?);
    }
    let summary = summarize(config, &methods.labels(), &records);
    Ok(StudyReport { name: s.name.clone(), seed: s.seed, config: config.clone(), records, summary })
}

fn summarize(config: &StudyConfig, labels: &[String], records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &point in &config.study.scan {
        for label in labels {
            let sel: Vec<&TrialRecord> = records.iter().filter(|r| r.point == point && &r.method == label).collect();
            let mut v: Vec<f64> = sel.iter().filter_map(|r| r.value).collect();
            v.sort_by(f64::total_cmp);
            let coverage = (config.study.kind == StudyKind::Limit && !sel.is_empty())
                .then(|| v.iter().filter(|&&x| x >= point).count() as f64 / sel.len() as f64);
            rows.push(SummaryRow {
                point,
                method: label.clone(),
                trials: sel.len(),
                failures: sel.len() - v.len(),
                median: quantile(&v, 0.5),
                q16: quantile(&v, 0.16),
                q84: quantile(&v, 0.84),
                coverage,
            });
        }
    }
    rows
}

/// Median of a method at a scan point, for ordering checks.
pub fn median(report: &StudyReport, point: f64, method: &str) -> Option<f64> {
    report.row(point, method).and_then(|r| r.median)
}

/// Method label helper for the common tests.
pub fn discovery_label(method: cubegof_core::discovery::Method, test: TestId) -> String {
    crate::config::DiscoveryMethod { method, test }.label()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_and_histograms() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), Some(2.5));
        assert_eq!(quantile(&v, 0.0), Some(1.0));
        assert_eq!(quantile(&v, 1.0), Some(4.0));
        assert_eq!(quantile(&[], 0.5), None);
        assert_eq!(histogram(&[0.0, 0.05, 0.5, 1.0], 10), vec![2, 0, 0, 0, 0, 1, 0, 0, 0, 1]);
    }
}
