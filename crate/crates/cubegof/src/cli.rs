// SPDX-License-Identifier: Apache-2.0

//! Command-line interface.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use cubegof_core::discovery::{discover, Method};
use cubegof_core::limits::{limit, naive_coverage, LimitMethod};
use cubegof_core::marginal::MarginalModel;
use cubegof_core::mgrid::{m_grid, RATE_POINTS};
use cubegof_core::null::TableKind;
use cubegof_core::transform::{
    hierarchical_transform, pit_independent, volume_uniforms, HierarchicalModel, StageModel,
};
use cubegof_core::{NullSource, ProductModel, SampleMatrix, TestId, UnitCubeSample};
use serde::{Deserialize, Serialize};

use crate::config::{StudyConfig, SurfaceConfig, TablesConfig};
use crate::exec::init_threads;
use crate::io::{read_sample, write_records, write_sample, OutputFormat};
use crate::store::{StoreConfig, SurfaceSpec, TableStore};
use crate::study::run_study;
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cubegof", version, about = "Unit-hypercube goodness-of-fit tests and upper limits")]
pub struct Cli {
    /// Table directory; tables are built and cached there on demand.
    #[arg(long, global = true, value_name = "DIR")]
    pub tables: Option<PathBuf>,
    /// Seed of tables and surfaces (of the simulation for `study`).
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// TOML file; `[tables]` and `[surface]` sections apply to every command.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long, global = true, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build null tables.
    Tabulate(TabulateArgs),
    /// Build a correction surface for projection limits.
    Calibrate(CalibrateArgs),
    /// Map a sample into the unit cube.
    Transform(TransformArgs),
    /// Goodness-of-fit p-value of a unit-cube sample.
    Discover(DiscoverArgs),
    /// Upper limit on the rate of a unit-cube sample.
    Limit(LimitArgs),
    /// Run a configured simulation study (needs --config).
    Study(StudyArgs),
}

fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 => Ok(v as u64),
        _ => Err(format!("`{s}` is not a non-negative integer")),
    }
}

fn parse_test(s: &str) -> std::result::Result<TestId, String> {
    s.parse().map_err(|_| format!("unknown test `{s}` (ks, pcs, slss, maxgap, oi)"))
}

fn parse_kind(s: &str) -> std::result::Result<TableKind, String> {
    [TableKind::Fixed, TableKind::CombinedFixed, TableKind::CombinedPoisson]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| format!("unknown table kind `{s}` (fixed, combined, combined-poisson)"))
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|_| format!("unknown method `{s}` (min-p, prod-p, volume)"))
}

fn parse_limit_method(s: &str) -> std::result::Result<LimitMethod, String> {
    s.parse().map_err(|_| format!("unknown limit method `{s}`"))
}

/// Event counts or rate indices given on the command line.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MList(pub Vec<usize>);

fn parse_m_arg(s: &str) -> std::result::Result<MList, String> {
    parse_m_list(s).map(MList)
}

/// Parses `5`, `1:200`, `1,2,10` or `grid` (the full event-count grid).
pub fn parse_m_list(s: &str) -> std::result::Result<Vec<usize>, String> {
    if s == "grid" {
        return Ok(m_grid());
    }
    let mut out = Vec::new();
    if s.trim().is_empty() {
        return Ok(out);
    }
    for part in s.split(',') {
        let part = part.trim();
        if let Some((a, b)) = part.split_once(':') {
            let a: usize = a.parse().map_err(|_| format!("bad range `{part}`"))?;
            let b: usize = b.parse().map_err(|_| format!("bad range `{part}`"))?;
            if a > b {
                return Err(format!("empty range `{part}`"));
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| format!("bad value `{part}`"))?);
        }
    }
    Ok(out)
}

#[derive(Debug, Args)]
pub struct TabulateArgs {
    #[arg(long, value_parser = parse_test)]
    pub test: TestId,
    /// Event counts (`1:200`, `5,10`, `grid`); rate indices for combined-poisson.
    #[arg(long, value_parser = parse_m_arg, default_value = "")]
    pub m: MList,
    #[arg(long, value_parser = parse_count)]
    pub trials: Option<u64>,
    #[arg(long, value_parser = parse_kind, default_value = "fixed")]
    pub kind: TableKind,
    /// Also fit the large-m Gaussian asymptote (PCS only).
    #[arg(long)]
    pub asymptote: bool,
    /// Rebuild tables even when a matching file exists.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, value_parser = parse_test)]
    pub test: TestId,
    #[arg(long)]
    pub dims: usize,
    #[arg(long, value_parser = parse_count)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub mu_lo: Option<f64>,
    #[arg(long)]
    pub mu_hi: Option<f64>,
    /// Per-axis confidence grid (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub c1: Vec<f64>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Marginal per column, or one for all columns. `tabulated:FILE` reads
    /// an `(x, F)` file; `$k` refers to the raw value of column `k` and
    /// makes the column conditional on it.
    #[arg(long, required = true)]
    pub model: Vec<String>,
    /// Emit the volume-method uniforms instead of the cube coordinates.
    #[arg(long)]
    pub volume: bool,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Unit-cube sample (CSV, optional header).
    #[arg(long)]
    pub input: PathBuf,
    /// Dimension to assume for files without rows or header.
    #[arg(long)]
    pub dims: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[arg(long, value_parser = parse_test)]
    pub test: TestId,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    #[arg(long, value_parser = parse_limit_method)]
    pub method: LimitMethod,
    #[arg(long, default_value_t = 0.9)]
    pub cl: f64,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Also write the per-trial records (CSV) here.
    #[arg(long)]
    pub records: Option<PathBuf>,
}

/// Sections of a config file shared by all commands.
#[derive(Debug, Default, Deserialize)]
struct SharedConfig {
    #[serde(default)]
    tables: Option<TablesConfig>,
    #[serde(default)]
    surface: Option<SurfaceConfig>,
}

fn shared_config(path: Option<&Path>) -> Result<SharedConfig> {
    let Some(p) = path else { return Ok(SharedConfig::default()) };
    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
}

fn store_config(cli: &Cli, shared: &SharedConfig) -> StoreConfig {
    let mut c = shared.tables.clone().unwrap_or_default().store_config(cli.tables.clone());
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRecord {
    pub kind: String,
    pub test: String,
    pub m: usize,
    pub trials: u64,
    pub seed: u64,
    pub components: usize,
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRecord {
    pub test: String,
    pub n: usize,
    pub mu: f64,
    pub c1: f64,
    pub raw: f64,
    pub coverage: f64,
    pub naive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoverRecord {
    pub method: String,
    pub test: String,
    pub n: usize,
    pub m: usize,
    pub p_final: f64,
    /// Per-axis p-values separated by `;` (projection methods).
    pub axes: String,
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRecord {
    pub method: String,
    pub cl: f64,
    pub n: usize,
    pub m: usize,
    pub mu_lim: f64,
    pub c1: Option<f64>,
    pub evaluations: usize,
    pub residual: f64,
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

/// Marginal for one column: a descriptor, with `$k` replaced by `x_high`
/// values when the column is conditional.
fn marginal(desc: &str) -> Result<MarginalModel> {
    if let Some(path) = desc.strip_prefix("tabulated:") {
        return Ok(MarginalModel::Tabulated(crate::io::read_tabulated_cdf(Path::new(path))?));
    }
    Ok(MarginalModel::parse(desc)?)
}

/// Raw columns referenced as `$k` in a template.
fn references(template: &str) -> Vec<usize> {
    let mut out = Vec::new();
    let b = template.as_bytes();
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'$' {
            let j = (i + 1..b.len()).find(|&j| !b[j].is_ascii_digit()).unwrap_or(b.len());
            if let Ok(k) = template[i + 1..j].parse() {
                out.push(k);
            }
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

fn substitute(template: &str, values: &dyn Fn(usize) -> f64) -> String {
    let b = template.as_bytes();
    let mut out = String::new();
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'$' {
            let j = (i + 1..b.len()).find(|&j| !b[j].is_ascii_digit()).unwrap_or(b.len());
            match template[i + 1..j].parse::<usize>() {
                Ok(k) => out += &values(k).to_string(),
                Err(_) => out += &template[i..j],
            }
            i = j;
        } else {
            let c = template[i..].chars().next().unwrap();
            out.push(c);
            i += c.len_utf8();
        }
    }
    out
}

/// Transforms raw data with per-column model descriptors; columns whose
/// descriptors reference other columns form the conditional stage.
pub fn transform_sample(raw: &SampleMatrix, models: &[String]) -> Result<UnitCubeSample> {
    let n = raw.n();
    let models: Vec<String> = match models.len() {
        1 => vec![models[0].clone(); n],
        k if k == n => models.to_vec(),
        k => return Err(Error::Input(format!("{k} models given for {n} columns"))),
    };
    let low: Vec<usize> = (0..n).filter(|&j| !references(&models[j]).is_empty()).collect();
    if low.is_empty() {
        let p = ProductModel::new(models.iter().map(|d| marginal(d)).collect::<Result<_>>()?)?;
        return Ok(pit_independent(raw, &p)?);
    }
    let high: Vec<usize> = (0..n).filter(|j| !low.contains(j)).collect();
    for &j in &low {
        if let Some(&k) = references(&models[j]).iter().find(|k| !high.contains(k)) {
            return Err(Error::Input(format!("column {j} refers to ${k}, which is not an unconditional column")));
        }
    }
    let high_model = ProductModel::new(high.iter().map(|&j| marginal(&models[j])).collect::<Result<_>>()?)?;
    let templates: Vec<String> = low.iter().map(|&j| models[j].clone()).collect();
    let pos: Vec<Option<usize>> = (0..n).map(|k| high.iter().position(|&h| h == k)).collect();
    let factory = move |x_high: &[f64]| -> cubegof_core::Result<ProductModel> {
        let lookup = |k: usize| pos[k].map_or(f64::NAN, |p| x_high[p]);
        let ms = templates
            .iter()
            .map(|t| MarginalModel::parse(&substitute(t, &lookup)))
            .collect::<cubegof_core::Result<Vec<_>>>()?;
        ProductModel::new(ms)
    };
    let model = HierarchicalModel::new(high, low, StageModel::Product(high_model), Box::new(factory))?;
    Ok(hierarchical_transform(raw, &model)?)
}

fn read_cube(args: &DataArgs) -> Result<UnitCubeSample> {
    let s = read_sample(&args.input, args.dims)?;
    Ok(UnitCubeSample::new(s.data.n(), s.data.as_slice().to_vec())?)
}

fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let shared = shared_config(cli.config.as_deref())?;
    let mut cfg = store_config(cli, &shared);
    let surface_cfg = shared.surface.clone().unwrap_or_default();
    match &cli.command {
        Command::Tabulate(a) => {
            let ms = &a.m.0;
            if ms.is_empty() && !a.asymptote {
                return Err(Error::Input("nothing to tabulate: pass --m or --asymptote".into()));
            }
            if cfg.dir.is_none() {
                return Err(Error::Input("tabulate needs --tables DIR".into()));
            }
            if let Some(t) = a.trials {
                match a.kind {
                    TableKind::Fixed => cfg.trials_fixed = t,
                    TableKind::CombinedFixed => cfg.trials_combined = t,
                    TableKind::CombinedPoisson => cfg.trials_poisson = t,
                }
            }
            if a.kind == TableKind::CombinedPoisson {
                if let Some(&i) = ms.iter().find(|&&i| i >= RATE_POINTS) {
                    return Err(Error::Input(format!("rate index {i} out of range 0..{RATE_POINTS}")));
                }
            }
            let store = TableStore::new(cfg);
            let mut recs = Vec::new();
            for &m in ms {
                let path = store.table_path(a.kind, a.test, m).expect("directory set");
                if a.force {
                    let _ = std::fs::remove_file(&path);
                }
                let t = store.table(a.kind, a.test, m)?;
                recs.push(TableRecord {
                    kind: a.kind.name().into(),
                    test: a.test.name().into(),
                    m,
                    trials: t.trials,
                    seed: t.seed,
                    components: t.components().len(),
                    path: Some(path.display().to_string()),
                });
            }
            if a.asymptote {
                let path = store.asymptote_path(a.test).expect("directory set");
                if a.force {
                    let _ = std::fs::remove_file(&path);
                }
                let asy = store.asymptote(a.test)?;
                recs.push(TableRecord {
                    kind: "asymptote".into(),
                    test: a.test.name().into(),
                    m: asy.threshold(),
                    trials: asy.trials,
                    seed: asy.seed,
                    components: 1,
                    path: Some(path.display().to_string()),
                });
            }
            if let Some(w) = store.warnings().first() {
                return Err(Error::Format(format!("could not write tables: {w}")));
            }
            store.write_manifest()?;
            write_records(out, &recs, cli.format)
        }
        Command::Calibrate(a) => {
            let mut s = surface_cfg;
            if let Some(t) = a.trials {
                s.trials = t;
            }
            s.mu_lo = a.mu_lo.unwrap_or(s.mu_lo);
            s.mu_hi = a.mu_hi.unwrap_or(s.mu_hi);
            let mut spec: SurfaceSpec = s.spec(a.test, a.dims);
            if !a.c1.is_empty() {
                spec.c1 = a.c1.clone();
            }
            let store = TableStore::new(cfg);
            if a.force {
                if let Some(p) = store.surface_path(&spec) {
                    let _ = std::fs::remove_file(p);
                }
            }
            let surface = store.surface(&spec)?;
            if let Some(w) = store.warnings().first() {
                return Err(Error::Format(format!("could not write artifacts: {w}")));
            }
            store.write_manifest()?;
            let nc = surface.c1_grid().len();
            let mut recs = Vec::new();
            for (i, &mu) in surface.mu_grid().iter().enumerate() {
                for (k, &c1) in surface.c1_grid().iter().enumerate() {
                    recs.push(SurfaceRecord {
                        test: a.test.name().into(),
                        n: a.dims,
                        mu,
                        c1,
                        raw: surface.raw()[i * nc + k],
                        coverage: surface.coverage()[i * nc + k],
                        naive: naive_coverage(c1, a.dims),
                    });
                }
            }
            write_records(out, &recs, cli.format)
        }
        Command::Transform(a) => {
            let s = read_sample(&a.input, None)?;
            let cube = transform_sample(&s.data, &a.model)?;
            if a.volume {
                let (z, _) = volume_uniforms(&cube);
                write_sample(out, Some(&["volume".to_string()]), 1, &z)
            } else {
                write_sample(out, s.header.as_deref(), cube.n(), cube.as_slice())
            }
        }
        Command::Discover(a) => {
            let cube = read_cube(&a.data)?;
            let store = TableStore::new(cfg);
            let r = discover(&store, &cube, a.test, a.method)?;
            let rec = DiscoverRecord {
                method: a.method.name().into(),
                test: a.test.name().into(),
                n: cube.n(),
                m: cube.m(),
                p_final: r.p_final,
                axes: r.axes.as_ref().map_or(String::new(), |p| join(&p.p)),
                clamped: r.clamped,
            };
            write_records(out, &[rec], cli.format)
        }
        Command::Limit(a) => {
            let cube = read_cube(&a.data)?;
            let store = TableStore::new(cfg);
            let surface = match a.method {
                LimitMethod::Projection(t) if cube.n() > 1 && cube.m() > 0 => {
                    Some(store.surface(&surface_cfg.spec(t, cube.n()))?)
                }
                _ => None,
            };
            let r = limit(&store, &cube, a.method, a.cl, surface.as_deref())?;
            let rec = LimitRecord {
                method: a.method.label(),
                cl: a.cl,
                n: cube.n(),
                m: cube.m(),
                mu_lim: r.mu_lim,
                c1: r.diagnostics.c1,
                evaluations: r.diagnostics.evaluations,
                residual: r.diagnostics.residual,
            };
            write_records(out, &[rec], cli.format)
        }
        Command::Study(a) => {
            let path = cli.config.as_deref().ok_or_else(|| Error::Input("study needs --config FILE".into()))?;
            let mut sc = StudyConfig::load(path)?;
            if let Some(s) = cli.seed {
                sc.study.seed = s;
            }
            let store = TableStore::new(sc.tables.store_config(cli.tables.clone()));
            let report = run_study(&sc, &store)?;
            if let Some(p) = &a.records {
                let f = File::create(p).map_err(|e| Error::io(p, e))?;
                write_records(BufWriter::new(f), &report.records, OutputFormat::Csv)?;
            }
            match cli.format {
                OutputFormat::Csv => write_records(out, &report.summary, OutputFormat::Csv),
                OutputFormat::Json => {
                    serde_json::to_writer_pretty(&mut *out, &report)?;
                    writeln!(out).map_err(|e| Error::io("<output>", e))
                }
            }
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
/// Messages go to `err`; results go to `--output` or `out`.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_threads(cli.threads);
    let result = match &cli.output {
        Some(p) => open_output(Some(p)).and_then(|mut w| {
            run(&cli, &mut *w)?;
            w.flush().map_err(|e| Error::io(p, e))
        }),
        None => run(&cli, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DATA
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn m_lists() {
        assert_eq!(parse_m_list("3").unwrap(), vec![3]);
        assert_eq!(parse_m_list("1:3,7").unwrap(), vec![1, 2, 3, 7]);
        assert_eq!(parse_m_list("grid").unwrap().len(), m_grid().len());
        assert!(parse_m_list("5:1").is_err());
        assert_eq!(parse_count("1e6").unwrap(), 1_000_000);
        assert!(parse_count("1.5").is_err());
    }

    #[test]
    fn templates() {
        assert_eq!(references("normal($0,$12)"), vec![0, 12]);
        let v = |k: usize| k as f64 + 0.5;
        assert_eq!(substitute("normal($0,$12)", &v), "normal(0.5,12.5)");
    }

    #[test]
    fn hierarchical_columns() {
        let raw = SampleMatrix::from_rows(2, &[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let cube = transform_sample(&raw, &["normal(0,1)".into(), "normal($0,1)".into()]).unwrap();
        assert_eq!(cube.row(0), &[0.5, 0.5]);
        assert!((cube.row(1)[0] - 0.841_344_746_068_543).abs() < 1e-12);
        assert!((cube.row(1)[1] - 0.5).abs() < 1e-15);
        assert!(transform_sample(&raw, &["normal($1,1)".into(), "normal($0,1)".into()]).is_err());
    }
}
