// SPDX-License-Identifier: Apache-2.0

//! Maps data under a proposed model into the unit hypercube, and reduces
//! points in the cube to one dimension through the volume transformation.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;

use crate::marginal::MarginalModel;
use crate::{Error, Result};

/// Volumes below this value are clamped before the log-domain CDF.
pub const MIN_VOLUME: f64 = 1e-300;

/// Row-major `m x n` matrix of real-valued observations.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1"));
        }
        if data.len() % n != 0 {
            return Err(Error::DimensionMismatch { expected: n, found: data.len() % n });
        }
        Ok(Self { n, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(n: usize, rows: &[R]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * n);
        for r in rows {
            let r = r.as_ref();
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::new(n, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// `m` points in `[0, 1]^n`; under the null they are i.i.d. uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitCubeSample {
    n: usize,
    data: Vec<f64>,
}

impl UnitCubeSample {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        let matrix = SampleMatrix::new(n, data)?;
        if let Some(&v) = matrix.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfUnitInterval(v));
        }
        Ok(Self { n, data: matrix.data })
    }

    pub fn empty(n: usize) -> Result<Self> {
        Self::new(n, Vec::new())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.n)
    }

    /// Projection of all points on axis `j`, in row order.
    pub fn axis(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Same points with the coordinates reordered: new axis `k` is old axis `perm[k]`.
    pub fn permute_axes(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: perm.len() });
        }
        let mut data = Vec::with_capacity(self.data.len());
        for r in self.rows() {
            data.extend(perm.iter().map(|&p| r[p]));
        }
        Ok(Self { n: self.n, data })
    }
}

/// A model whose dimensions are independent: `M = [M_1, .., M_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductModel {
    marginals: Vec<MarginalModel>,
}

impl ProductModel {
    pub fn new(marginals: Vec<MarginalModel>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidArgument("a product model needs at least one marginal"));
        }
        Ok(Self { marginals })
    }

    /// `n` copies of the same marginal.
    pub fn iid(marginal: MarginalModel, n: usize) -> Result<Self> {
        Self::new(alloc::vec![marginal; n])
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[MarginalModel] {
        &self.marginals
    }

    fn transform_into(&self, x: &[f64], row: usize, cols: &[usize], out: &mut [f64]) -> Result<()> {
        for ((k, model), &col) in self.marginals.iter().enumerate().zip(cols) {
            out[k] = model.transform(x[k], row, col)?;
        }
        Ok(())
    }
}

/// Per-coordinate probability integral transform `u_ij = F_j(x_ij)`.
pub fn pit_independent(samples: &SampleMatrix, model: &ProductModel) -> Result<UnitCubeSample> {
    let n = model.dim();
    if samples.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: samples.n() });
    }
    let cols: Vec<usize> = (0..n).collect();
    let mut data = alloc::vec![0.0; samples.as_slice().len()];
    for (i, (x, u)) in samples.rows().zip(data.chunks_exact_mut(n)).enumerate() {
        model.transform_into(x, i, &cols, u)?;
    }
    Ok(UnitCubeSample { n, data })
}

/// Builds the conditional model of the dependent coordinates from the
/// observed hyper-parameters.
pub type ConditionalFactory = dyn Fn(&[f64]) -> Result<ProductModel> + Send + Sync;

/// Transform applied to the hyper-parameter block of a hierarchical model.
pub enum StageModel {
    Product(ProductModel),
    Hierarchical(HierarchicalModel),
}

impl StageModel {
    pub fn dim(&self) -> usize {
        match self {
            Self::Product(p) => p.dim(),
            Self::Hierarchical(h) => h.dim(),
        }
    }

    fn transform_into(&self, x: &[f64], row: usize, cols: &[usize], out: &mut [f64]) -> Result<()> {
        match self {
            Self::Product(p) => p.transform_into(x, row, cols, out),
            Self::Hierarchical(h) => h.transform_into(x, row, cols, out),
        }
    }
}

/// Two-stage model: hyper-parameters `x_high` follow `high`, and the
/// dependent coordinates `x_low` follow a product model built from `x_high`.
/// Deeper hierarchies nest through [`StageModel::Hierarchical`].
pub struct HierarchicalModel {
    high_indices: Vec<usize>,
    low_indices: Vec<usize>,
    high: Box<StageModel>,
    conditional: Box<ConditionalFactory>,
}

impl fmt::Debug for HierarchicalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HierarchicalModel")
            .field("high_indices", &self.high_indices)
            .field("low_indices", &self.low_indices)
            .finish_non_exhaustive()
    }
}

impl HierarchicalModel {
    /// `high_indices` and `low_indices` must partition `0..n`.
    pub fn new(
        high_indices: Vec<usize>,
        low_indices: Vec<usize>,
        high: StageModel,
        conditional: Box<ConditionalFactory>,
    ) -> Result<Self> {
        let n = high_indices.len() + low_indices.len();
        let mut seen = alloc::vec![false; n];
        for &i in high_indices.iter().chain(&low_indices) {
            if i >= n || seen[i] {
                return Err(Error::InvalidArgument("index split must partition 0..n"));
            }
            seen[i] = true;
        }
        if high_indices.is_empty() {
            return Err(Error::InvalidArgument("at least one hyper-parameter coordinate is required"));
        }
        if high.dim() != high_indices.len() {
            return Err(Error::DimensionMismatch { expected: high_indices.len(), found: high.dim() });
        }
        Ok(Self { high_indices, low_indices, high: Box::new(high), conditional })
    }

    pub fn dim(&self) -> usize {
        self.high_indices.len() + self.low_indices.len()
    }

    fn transform_into(&self, x: &[f64], row: usize, cols: &[usize], out: &mut [f64]) -> Result<()> {
        let x_high: Vec<f64> = self.high_indices.iter().map(|&i| x[i]).collect();
        let high_cols: Vec<usize> = self.high_indices.iter().map(|&i| cols[i]).collect();
        let mut u_high = alloc::vec![0.0; x_high.len()];
        self.high.transform_into(&x_high, row, &high_cols, &mut u_high)?;
        for (&i, &u) in self.high_indices.iter().zip(&u_high) {
            out[i] = u;
        }
        if self.low_indices.is_empty() {
            return Ok(());
        }
        let wrap = |e: Error| Error::Transform { index: row, source: Box::new(e) };
        let low = (self.conditional)(&x_high).map_err(wrap)?;
        if low.dim() != self.low_indices.len() {
            return Err(wrap(Error::DimensionMismatch {
                expected: self.low_indices.len(),
                found: low.dim(),
            }));
        }
        let x_low: Vec<f64> = self.low_indices.iter().map(|&i| x[i]).collect();
        let low_cols: Vec<usize> = self.low_indices.iter().map(|&i| cols[i]).collect();
        let mut u_low = alloc::vec![0.0; x_low.len()];
        low.transform_into(&x_low, row, &low_cols, &mut u_low)?;
        for (&i, &u) in self.low_indices.iter().zip(&u_low) {
            out[i] = u;
        }
        Ok(())
    }
}

/// Staged transform of a hierarchical model: `T_M1` on the hyper-parameters,
/// then the sample-dependent `T_M2` on the remaining coordinates.
pub fn hierarchical_transform(samples: &SampleMatrix, model: &HierarchicalModel) -> Result<UnitCubeSample> {
    let n = model.dim();
    if samples.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: samples.n() });
    }
    let cols: Vec<usize> = (0..n).collect();
    let mut data = alloc::vec![0.0; samples.as_slice().len()];
    for (i, (x, u)) in samples.rows().zip(data.chunks_exact_mut(n)).enumerate() {
        model.transform_into(x, i, &cols, u)?;
    }
    Ok(UnitCubeSample { n, data })
}

/// Volume of the box spanned by the origin and `u`: `prod_j u_j`.
pub fn volume_transform(u: &[f64]) -> Result<f64> {
    let mut v = 1.0;
    for &x in u {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfUnitInterval(x));
        }
        v *= x;
    }
    Ok(v)
}

/// CDF of the product of `n` independent uniforms,
/// `F(x; n) = x * sum_{j<n} (-ln x)^j / j!`.
///
/// The series is summed as Poisson masses `x (-ln x)^j / j!`, so no term
/// overflows for any `n`.
pub fn product_uniform_cdf(x: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1"));
    }
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::InvalidArgument("product_uniform_cdf needs 0 < x <= 1"));
    }
    let neg_log = -libm::log(x);
    let mut term = x;
    let mut sum = term;
    for j in 1..n {
        term *= neg_log / j as f64;
        sum += term;
    }
    Ok(sum.min(1.0))
}

/// Volume-transformed sample `z_i = F(prod_j u_ij; n)` plus the number of
/// volumes clamped to [`MIN_VOLUME`].
pub fn volume_uniforms(data: &UnitCubeSample) -> (Vec<f64>, usize) {
    let n = data.n();
    let mut clamped = 0;
    let z = data
        .rows()
        .map(|r| {
            // Coordinates were validated on construction.
            let mut v: f64 = r.iter().product();
            if v < MIN_VOLUME {
                v = MIN_VOLUME;
                clamped += 1;
            }
            product_uniform_cdf(v, n).unwrap_or(0.0)
        })
        .collect();
    (z, clamped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn pit_reference_points() {
        let model = ProductModel::new(vec![
            MarginalModel::normal(0.0, 1.0).unwrap(),
            MarginalModel::exponential(0.1).unwrap(),
            MarginalModel::uniform(0.0, 1.0).unwrap(),
        ])
        .unwrap();
        let x = SampleMatrix::from_rows(3, &[[0.0, core::f64::consts::LN_2 / 0.1, 0.37]]).unwrap();
        let u = pit_independent(&x, &model).unwrap();
        assert_eq!(u.row(0)[0], 0.5);
        assert!((u.row(0)[1] - 0.5).abs() < 1e-15);
        assert_eq!(u.row(0)[2], 0.37);
    }

    #[test]
    fn pit_errors() {
        let model = ProductModel::iid(MarginalModel::normal(0.0, 1.0).unwrap(), 2).unwrap();
        let x = SampleMatrix::from_rows(3, &[[0.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(pit_independent(&x, &model), Err(Error::DimensionMismatch { .. })));
        let x = SampleMatrix::from_rows(2, &[[0.0, 0.0], [f64::INFINITY, 0.0]]).unwrap();
        assert!(matches!(pit_independent(&x, &model), Err(Error::NonFinite { row: 1, col: 0 })));
    }

    fn two_layer() -> HierarchicalModel {
        HierarchicalModel::new(
            vec![0],
            vec![1],
            StageModel::Product(ProductModel::new(vec![MarginalModel::normal(0.0, 1.0).unwrap()]).unwrap()),
            Box::new(|h: &[f64]| ProductModel::new(vec![MarginalModel::normal(h[0], 1.0)?])),
        )
        .unwrap()
    }

    #[test]
    fn hierarchical_reference_points() {
        let x = SampleMatrix::from_rows(2, &[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let u = hierarchical_transform(&x, &two_layer()).unwrap();
        assert_eq!(u.row(0), &[0.5, 0.5]);
        assert!((u.row(1)[0] - 0.841_344_746_068_543).abs() < 1e-12);
        assert_eq!(u.row(1)[1], 0.5);
    }

    #[test]
    fn hierarchical_factory_errors_name_the_sample() {
        let model = HierarchicalModel::new(
            vec![0],
            vec![1],
            StageModel::Product(ProductModel::new(vec![MarginalModel::normal(0.0, 1.0).unwrap()]).unwrap()),
            Box::new(|h: &[f64]| ProductModel::new(vec![MarginalModel::normal(0.0, h[0])?])),
        )
        .unwrap();
        let x = SampleMatrix::from_rows(2, &[[1.0, 0.0], [-1.0, 0.0]]).unwrap();
        match hierarchical_transform(&x, &model) {
            Err(Error::Transform { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hierarchical_without_low_block_is_pit() {
        let product = ProductModel::iid(MarginalModel::normal(1.0, 2.0).unwrap(), 2).unwrap();
        let model = HierarchicalModel::new(
            vec![0, 1],
            vec![],
            StageModel::Product(product.clone()),
            Box::new(|_: &[f64]| Err(Error::InvalidArgument("unused"))),
        )
        .unwrap();
        let x = SampleMatrix::from_rows(2, &[[0.3, -1.0], [2.0, 5.0]]).unwrap();
        assert_eq!(hierarchical_transform(&x, &model).unwrap(), pit_independent(&x, &product).unwrap());
    }

    #[test]
    fn index_split_must_partition() {
        let high = StageModel::Product(ProductModel::new(vec![MarginalModel::normal(0.0, 1.0).unwrap()]).unwrap());
        let r = HierarchicalModel::new(vec![0], vec![0], high, Box::new(|_: &[f64]| unreachable!()));
        assert!(r.is_err());
    }

    #[test]
    fn volume_reference_points() {
        assert_eq!(volume_transform(&[0.5, 0.5]).unwrap(), 0.25);
        assert_eq!(volume_transform(&[0.3, 0.0, 0.9]).unwrap(), 0.0);
        assert!((volume_transform(&[0.9, 0.8, 0.5]).unwrap() - 0.36).abs() < 1e-15);
        assert!(volume_transform(&[0.5, 1.5]).is_err());
    }

    #[test]
    fn product_cdf_closed_forms() {
        for &x in &[1e-9, 0.01, 0.3, 0.77, 1.0] {
            assert!((product_uniform_cdf(x, 1).unwrap() - x).abs() < 1e-16);
        }
        let e1 = libm::exp(-1.0);
        assert!((product_uniform_cdf(e1, 2).unwrap() - 0.735_758_882_342_884_6).abs() < 1e-12);
        assert!(product_uniform_cdf(0.0, 2).is_err());
        for n in 1..=10 {
            assert_eq!(product_uniform_cdf(1.0, n).unwrap(), 1.0);
        }
    }

    #[test]
    fn product_cdf_extreme_dimensions() {
        let v = product_uniform_cdf(MIN_VOLUME, 60).unwrap();
        assert!(v.is_finite() && v > 0.0 && v < 1.0);
        assert!((product_uniform_cdf(MIN_VOLUME, 2000).unwrap() - 1.0).abs() < 1e-12);
    }
}
