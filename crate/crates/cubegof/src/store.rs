// SPDX-License-Identifier: Apache-2.0

//! Lazily built, disk-cached null tables, asymptotes and correction surfaces.

use std::collections::HashMap;
use std::fs;
use std::hash::Hash;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use cubegof_core::density::SumNull;
use cubegof_core::discovery::tabulate_combined_fixed;
use cubegof_core::limits::{calibrate_correction, tabulate_combined_poisson, CorrectionSurface, DEFAULT_C1_GRID};
use cubegof_core::null::{fit_asymptote, tabulate_null, GaussianAsymptote, TableKind, TabulatedNull, MIN_TRIALS};
use cubegof_core::source::SUM_GRID;
use cubegof_core::{NullSource, TestId};

use crate::exec::Parallel;
use crate::format;
use crate::{Error, Result};

type CoreResult<T> = cubegof_core::Result<T>;

pub const MANIFEST: &str = "manifest.tsv";
const EXTENSION: &str = "cgof";

/// Grid of event counts used to fit the large-`m` PCS asymptote.
pub const ASYMPTOTE_GRID: [usize; 4] = [10_000, 20_000, 50_000, 100_000];

#[derive(Debug, Clone, PartialEq)]
pub struct StoreConfig {
    /// Cache directory; `None` keeps everything in memory.
    pub dir: Option<PathBuf>,
    pub trials_fixed: u64,
    pub trials_combined: u64,
    pub trials_poisson: u64,
    pub trials_asymptote: u64,
    pub seed: u64,
    /// Build missing artifacts instead of failing.
    pub build: bool,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            dir: None,
            trials_fixed: MIN_TRIALS,
            trials_combined: MIN_TRIALS,
            trials_poisson: MIN_TRIALS,
            trials_asymptote: 4_000,
            seed: 1,
            build: true,
        }
    }
}

impl StoreConfig {
    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        Self { dir: Some(dir.into()), ..Self::default() }
    }

    pub fn trials(&self, kind: TableKind) -> u64 {
        match kind {
            TableKind::Fixed => self.trials_fixed,
            TableKind::CombinedFixed => self.trials_combined,
            TableKind::CombinedPoisson => self.trials_poisson,
        }
    }
}

/// Grids and effort of one correction surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSpec {
    pub test: TestId,
    pub n: usize,
    pub c1: Vec<f64>,
    pub mu: Vec<f64>,
    pub trials: u64,
}

impl SurfaceSpec {
    /// Default `C_1` grid and roughly ten rates per decade over `[mu_lo, mu_hi]`.
    pub fn new(test: TestId, n: usize, mu_lo: f64, mu_hi: f64, trials: u64) -> Self {
        let decades = (mu_hi / mu_lo).log10();
        let steps = ((decades * 10.0).ceil() as usize).max(1);
        let mu = (0..=steps).map(|i| mu_lo * (mu_hi / mu_lo).powf(i as f64 / steps as f64)).collect();
        Self { test, n, c1: DEFAULT_C1_GRID.to_vec(), mu, trials }
    }

    fn grid_hash(&self) -> u64 {
        // FNV-1a over the grid bit patterns.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.c1.iter().chain(&[f64::NAN]).chain(&self.mu) {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

struct Memo<K, V> {
    cells: Mutex<HashMap<K, Arc<OnceLock<CoreResult<Arc<V>>>>>>,
}

impl<K: Eq + Hash, V> Default for Memo<K, V> {
    fn default() -> Self {
        Self { cells: Mutex::new(HashMap::new()) }
    }
}

impl<K: Eq + Hash, V> Memo<K, V> {
    fn get(&self, key: K, init: impl FnOnce() -> CoreResult<Arc<V>>) -> CoreResult<Arc<V>> {
        let cell = self.cells.lock().unwrap().entry(key).or_default().clone();
        cell.get_or_init(init).clone()
    }
}

/// [`NullSource`] backed by a directory of table files.
///
/// Every artifact is identified by its kind, test, `m` (or rate index),
/// trial count and seed, so stores with different settings can share a
/// directory.
pub struct TableStore {
    config: StoreConfig,
    tables: Memo<(TableKind, TestId, usize), TabulatedNull>,
    asymptotes: Memo<TestId, GaussianAsymptote>,
    sums: Memo<(usize, usize), SumNull>,
    surfaces: Memo<(TestId, usize, u64, u64), CorrectionSurface>,
    warnings: Mutex<Vec<String>>,
}

impl TableStore {
    pub fn new(config: StoreConfig) -> Self {
        Self {
            config,
            tables: Memo::default(),
            asymptotes: Memo::default(),
            sums: Memo::default(),
            surfaces: Memo::default(),
            warnings: Mutex::new(Vec::new()),
        }
    }

    pub fn in_memory() -> Self {
        Self::new(StoreConfig::default())
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    /// Failures to write cache files; the artifacts themselves stay usable.
    pub fn warnings(&self) -> Vec<String> {
        self.warnings.lock().unwrap().clone()
    }

    pub fn table_path(&self, kind: TableKind, test: TestId, m: usize) -> Option<PathBuf> {
        let dir = self.config.dir.as_ref()?;
        let tag = if kind == TableKind::CombinedPoisson { 'r' } else { 'm' };
        let name = format!("{tag}{m:05}-t{}-s{}.{EXTENSION}", self.config.trials(kind), self.config.seed);
        Some(dir.join(kind.name()).join(test.name()).join(name))
    }

    pub fn asymptote_path(&self, test: TestId) -> Option<PathBuf> {
        let dir = self.config.dir.as_ref()?;
        let name = format!("{}-t{}-s{}.{EXTENSION}", test.name(), self.config.trials_asymptote, self.config.seed);
        Some(dir.join("asymptote").join(name))
    }

    pub fn surface_path(&self, spec: &SurfaceSpec) -> Option<PathBuf> {
        let dir = self.config.dir.as_ref()?;
        let name = format!(
            "{}-n{}-t{}-s{}-g{:016x}.{EXTENSION}",
            spec.test.name(),
            spec.n,
            spec.trials,
            self.config.seed,
            spec.grid_hash()
        );
        Some(dir.join("surface").join(name))
    }

    fn load_or_build<V>(
        &self,
        path: Option<PathBuf>,
        decode: impl Fn(&[u8]) -> Result<V>,
        valid: impl Fn(&V) -> bool,
        encode: impl Fn(&V) -> Vec<u8>,
        build: impl FnOnce() -> CoreResult<V>,
        missing: impl FnOnce() -> cubegof_core::Error,
    ) -> CoreResult<Arc<V>> {
        if let Some(p) = &path {
            if let Ok(bytes) = fs::read(p) {
                if let Ok(v) = decode(&bytes) {
                    if valid(&v) {
                        return Ok(Arc::new(v));
                    }
                }
            }
        }
        if !self.config.build {
            return Err(missing());
        }
        let v = build()?;
        if let Some(p) = &path {
            if let Err(e) = write_atomic(p, &encode(&v)) {
                self.warnings.lock().unwrap().push(e.to_string());
            }
        }
        Ok(Arc::new(v))
    }

    /// Builds (or loads) a table without going through the memo.
    fn make_table(&self, kind: TableKind, test: TestId, m: usize) -> CoreResult<Arc<TabulatedNull>> {
        let trials = self.config.trials(kind);
        let seed = self.config.seed;
        self.load_or_build(
            self.table_path(kind, test, m),
            format::decode_table,
            |t: &TabulatedNull| t.kind == kind && t.test == test && t.m == m && t.trials == trials && t.seed == seed,
            format::encode_table,
            || match kind {
                TableKind::Fixed => tabulate_null(test, m, trials, seed, &Parallel),
                TableKind::CombinedFixed => tabulate_combined_fixed(self, test, m, trials, seed, &Parallel),
                TableKind::CombinedPoisson => tabulate_combined_poisson(self, test, m, trials, seed, &Parallel),
            },
            || cubegof_core::Error::MissingTable { test, what: format!("{} m = {m} (building disabled)", kind.name()) },
        )
    }

    /// Builds or loads a correction surface with this store's seed.
    pub fn surface(&self, spec: &SurfaceSpec) -> Result<Arc<CorrectionSurface>> {
        let key = (spec.test, spec.n, spec.trials, spec.grid_hash());
        let seed = self.config.seed;
        let s = self.surfaces.get(key, || {
            self.load_or_build(
                self.surface_path(spec),
                format::decode_surface,
                |s: &CorrectionSurface| {
                    s.test == spec.test
                        && s.n == spec.n
                        && s.trials == spec.trials
                        && s.seed == seed
                        && s.mu_grid() == spec.mu.as_slice()
                        && s.c1_grid() == spec.c1.as_slice()
                },
                format::encode_surface,
                || calibrate_correction(self, spec.test, spec.n, &spec.c1, &spec.mu, spec.trials, seed, &Parallel),
                || cubegof_core::Error::MissingTable { test: spec.test, what: format!("correction surface n = {}", spec.n) },
            )
        })?;
        Ok(s)
    }

    /// Writes `manifest.tsv` listing every artifact under the store directory.
    pub fn write_manifest(&self) -> Result<Option<PathBuf>> {
        let Some(dir) = &self.config.dir else { return Ok(None) };
        let text = manifest(dir)?;
        let path = dir.join(MANIFEST);
        write_atomic(&path, text.as_bytes())?;
        Ok(Some(path))
    }
}

impl NullSource for TableStore {
    fn table(&self, kind: TableKind, test: TestId, m: usize) -> CoreResult<Arc<TabulatedNull>> {
        self.tables.get((kind, test, m), || self.make_table(kind, test, m))
    }

    fn asymptote(&self, test: TestId) -> CoreResult<Arc<GaussianAsymptote>> {
        let (trials, seed) = (self.config.trials_asymptote, self.config.seed);
        self.asymptotes.get(test, || {
            self.load_or_build(
                self.asymptote_path(test),
                format::decode_asymptote,
                |a: &GaussianAsymptote| a.test == test && a.trials == trials && a.seed == seed,
                format::encode_asymptote,
                || fit_asymptote(test, &ASYMPTOTE_GRID, trials, seed, &Parallel),
                || cubegof_core::Error::MissingTable { test, what: "asymptote (building disabled)".into() },
            )
        })
    }

    fn pcs_sum(&self, m: usize, n: usize) -> CoreResult<Arc<SumNull>> {
        self.sums.get((m, n), || {
            let t = self.table(TableKind::Fixed, TestId::Pcs, m)?;
            Ok(Arc::new(SumNull::from_component(&t.components()[0], n, SUM_GRID)?))
        })
    }
}

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let tmp = parent.join(format!(
        ".{}.{}.tmp",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("artifact"),
        std::process::id()
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let rd = match fs::read_dir(dir) {
        Ok(rd) => rd,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(Error::io(dir, e)),
    };
    for entry in rd {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_dir() {
            collect_files(&p, out)?;
        } else if p.extension().is_some_and(|x| x == EXTENSION) {
            out.push(p);
        }
    }
    Ok(())
}

/// Tab-separated listing of the artifacts under `dir`, sorted by path.
pub fn manifest(dir: &Path) -> Result<String> {
    let mut files = Vec::new();
    collect_files(dir, &mut files)?;
    files.sort();
    let mut out = String::from("path\tartifact\ttest\tm\ttrials\tseed\tcomponents\n");
    for p in files {
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        let rel = p.strip_prefix(dir).unwrap_or(&p).display().to_string();
        if let Ok(h) = format::table_header(&bytes) {
            out += &format!("{rel}\t{}\t{}\t{}\t{}\t{}\t{}\n", h.kind.name(), h.test, h.m, h.trials, h.seed, h.components);
        } else if let Ok(a) = format::decode_asymptote(&bytes) {
            out += &format!("{rel}\tasymptote\t{}\t-\t{}\t{}\t-\n", a.test, a.trials, a.seed);
        } else if let Ok(s) = format::decode_surface(&bytes) {
            out += &format!("{rel}\tsurface\t{}\tn={}\t{}\t{}\t-\n", s.test, s.n, s.trials, s.seed);
        }
    }
    Ok(out)
}
