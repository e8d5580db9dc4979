// SPDX-License-Identifier: Apache-2.0

//! Access to null tables, and lookups of `F_T(t | m)` at arbitrary `m`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;

use crate::density::SumNull;
use crate::mgrid::{bracket, interp_cdf, Moments};
use crate::null::{GaussianAsymptote, NullComponent, TableKind, TabulatedNull, ASYMPTOTIC_THRESHOLD};
use crate::stats::TestId;
use crate::{Error, Result};

/// Grid size used when differentiating a table for the sum test.
pub const SUM_GRID: usize = 2048;

/// Supplier of null tables. Implementations may build tables lazily.
pub trait NullSource: Sync {
    /// Table of `kind` for `test` at grid point `m` (rate index for
    /// [`TableKind::CombinedPoisson`]).
    fn table(&self, kind: TableKind, test: TestId, m: usize) -> Result<Arc<TabulatedNull>>;

    fn asymptote(&self, test: TestId) -> Result<Arc<GaussianAsymptote>>;

    /// Null of the sum of `n` independent PCS statistics at grid point `m`.
    fn pcs_sum(&self, m: usize, n: usize) -> Result<Arc<SumNull>> {
        let t = self.table(TableKind::Fixed, TestId::Pcs, m)?;
        Ok(Arc::new(SumNull::from_component(&t.components()[0], n, SUM_GRID)?))
    }

    fn fixed(&self, test: TestId, m: usize) -> Result<Arc<TabulatedNull>> {
        self.table(TableKind::Fixed, test, m)
    }
}

impl<S: NullSource + ?Sized> NullSource for &S {
    fn table(&self, kind: TableKind, test: TestId, m: usize) -> Result<Arc<TabulatedNull>> {
        (**self).table(kind, test, m)
    }

    fn asymptote(&self, test: TestId) -> Result<Arc<GaussianAsymptote>> {
        (**self).asymptote(test)
    }

    fn pcs_sum(&self, m: usize, n: usize) -> Result<Arc<SumNull>> {
        (**self).pcs_sum(m, n)
    }
}

/// Fixed in-memory collection of prebuilt tables.
#[derive(Debug, Clone, Default)]
pub struct MemoryNulls {
    tables: BTreeMap<(TableKind, TestId, usize), Arc<TabulatedNull>>,
    asymptotes: BTreeMap<TestId, Arc<GaussianAsymptote>>,
}

impl MemoryNulls {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, table: TabulatedNull) {
        self.tables.insert((table.kind, table.test, table.m), Arc::new(table));
    }

    pub fn insert_asymptote(&mut self, a: GaussianAsymptote) {
        self.asymptotes.insert(a.test, Arc::new(a));
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }
}

impl NullSource for MemoryNulls {
    fn table(&self, kind: TableKind, test: TestId, m: usize) -> Result<Arc<TabulatedNull>> {
        self.tables.get(&(kind, test, m)).cloned().ok_or_else(|| Error::MissingTable {
            test,
            what: format!("{} m = {m}", kind.name()),
        })
    }

    fn asymptote(&self, test: TestId) -> Result<Arc<GaussianAsymptote>> {
        self.asymptotes
            .get(&test)
            .cloned()
            .ok_or_else(|| Error::MissingTable { test, what: "asymptote".into() })
    }
}

fn moments(c: &NullComponent) -> Moments {
    Moments { mean: c.mean(), sd: c.sd() }
}

/// `F(t | m)` of component `comp` of a fixed-`m` or combined table kind,
/// interpolating between grid points. Tables lacking the component (the
/// component is degenerate there) yield `None`.
pub fn component_cdf<S: NullSource + ?Sized>(
    src: &S,
    kind: TableKind,
    test: TestId,
    comp: usize,
    m: usize,
    t: f64,
) -> Result<Option<f64>> {
    let mut out = [None];
    component_cdfs(src, kind, test, m, &[comp], &[t], &mut out)?;
    Ok(out[0])
}

/// [`component_cdf`] for several components at one `m`, fetching each
/// neighbouring table once.
pub fn component_cdfs<S: NullSource + ?Sized>(
    src: &S,
    kind: TableKind,
    test: TestId,
    m: usize,
    comps: &[usize],
    t: &[f64],
    out: &mut [Option<f64>],
) -> Result<()> {
    if m > ASYMPTOTIC_THRESHOLD {
        if kind == TableKind::Fixed && test == TestId::Pcs {
            let a = src.asymptote(test)?;
            for (o, &x) in out.iter_mut().zip(t) {
                *o = Some(a.cdf(m, x)?);
            }
            return Ok(());
        }
        return Err(Error::MissingTable { test, what: format!("{} m = {m}", kind.name()) });
    }
    let (lo, hi) = bracket(m).ok_or(Error::InvalidArgument("event count must be positive"))?;
    let a = src.table(kind, test, lo)?;
    let b = if lo == hi { None } else { Some(src.table(kind, test, hi)?) };
    for ((o, &comp), &x) in out.iter_mut().zip(comps).zip(t) {
        let Some(ca) = a.component(comp) else {
            *o = None;
            continue;
        };
        let cb = b.as_ref().and_then(|b| b.component(comp));
        *o = Some(match cb {
            None => ca.eval(x),
            Some(cb) => {
                let fa = |y: f64| ca.eval(y);
                let fb = |y: f64| cb.eval(y);
                interp_cdf(m, (lo, moments(ca), &fa), (hi, moments(cb), &fb), x)
            }
        });
    }
    Ok(())
}

/// `F_T(t | m)` of a scalar test.
pub fn scalar_cdf<S: NullSource + ?Sized>(src: &S, test: TestId, m: usize, t: f64) -> Result<f64> {
    if test.is_vector() {
        return Err(Error::UnsupportedTest(test));
    }
    Ok(component_cdf(src, TableKind::Fixed, test, 0, m, t)?.unwrap_or(1.0))
}

/// CDF of the sum of `n` independent PCS statistics at `m` events.
pub fn pcs_sum_cdf<S: NullSource + ?Sized>(src: &S, m: usize, n: usize, t: f64) -> Result<f64> {
    if m > ASYMPTOTIC_THRESHOLD {
        let (mean, sd) = src.asymptote(TestId::Pcs)?.moments(m)?;
        return Ok(SumNull::gaussian(mean, sd, n).eval(t));
    }
    let (lo, hi) = bracket(m).ok_or(Error::InvalidArgument("event count must be positive"))?;
    let a = src.pcs_sum(lo, n)?;
    if lo == hi {
        return Ok(a.eval(t));
    }
    let b = src.pcs_sum(hi, n)?;
    let fa = |x: f64| a.eval(x);
    let fb = |x: f64| b.eval(x);
    let ma = Moments { mean: a.mean(), sd: a.sd() };
    let mb = Moments { mean: b.mean(), sd: b.sd() };
    Ok(interp_cdf(m, (lo, ma, &fa), (hi, mb, &fb), t))
}
