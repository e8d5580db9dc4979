// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::path::PathBuf;

use cubegof::{StoreConfig, TableStore};
use cubegof_core::null::MIN_TRIALS;
use cubegof_core::rng::stream;
use cubegof_core::UnitCubeSample;
use rand::Rng;

/// Shared table cache; `CUBEGOF_TABLES` overrides the default location.
pub fn tables_dir() -> PathBuf {
    std::env::var_os("CUBEGOF_TABLES")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("tables"))
}

pub fn store_with(trials_fixed: u64) -> TableStore {
    TableStore::new(StoreConfig { trials_fixed, ..StoreConfig::in_dir(tables_dir()) })
}

pub fn store() -> TableStore {
    store_with(MIN_TRIALS)
}

/// `m` uniform points in `[0, 1]^n`.
pub fn uniform_cube<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> UnitCubeSample {
    let data = (0..n * m).map(|_| rng.random::<f64>()).collect();
    UnitCubeSample::new(n, data).unwrap()
}

pub fn rng(seed: u64, keys: &[u64]) -> cubegof_core::rng::TrialRng {
    stream(seed, keys)
}

/// Kolmogorov distance of a sample from the uniform distribution.
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max)
}

/// Kolmogorov distance between a sample and a CDF.
pub fn ks_against(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let u: Vec<f64> = values.iter().map(|&x| cdf(x)).collect();
    ks_uniform(&u)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}
