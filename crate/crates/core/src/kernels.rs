//! Helmholtz and Laplace single-layer kernels and the weighted entry oracle.

use std::f64::consts::PI;
use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};

use faer::{c64, Mat, MatRef};

use crate::clustering::ClusterTree;
use crate::error::{invalid, Error, Result};
use crate::geometry::{Geometry, Point3};

/// Default element cap for dense materialisation (4e6 entries, 64 MB).
pub const DENSE_CAP: usize = 4_000_000;

/// Largest single block [`EntryOracle::dense_block`] will allocate.
pub const BLOCK_CAP: usize = 1 << 28;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Laplace,
    Helmholtz,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub kappa: f64,
    pub reg_dist: f64,
}

impl KernelSpec {
    pub fn laplace(reg_dist: f64) -> Result<Self> {
        Self::new(KernelKind::Laplace, 0.0, reg_dist)
    }

    pub fn helmholtz(kappa: f64, reg_dist: f64) -> Result<Self> {
        Self::new(KernelKind::Helmholtz, kappa, reg_dist)
    }

    pub fn new(kind: KernelKind, kappa: f64, reg_dist: f64) -> Result<Self> {
        if !(reg_dist > 0.0 && reg_dist.is_finite()) {
            return Err(invalid(format!(
                "reg_dist must be positive, got {reg_dist}"
            )));
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(invalid(format!("kappa must be non-negative, got {kappa}")));
        }
        let kappa = if kind == KernelKind::Laplace {
            0.0
        } else {
            kappa
        };
        Ok(Self {
            kind,
            kappa,
            reg_dist,
        })
    }

    /// Kernel with the default regularisation for `geometry`.
    pub fn for_geometry(kind: KernelKind, kappa: f64, geometry: &Geometry) -> Result<Self> {
        Self::new(kind, kappa, default_reg_dist(geometry))
    }

    fn is_static(&self) -> bool {
        self.kind == KernelKind::Laplace || self.kappa == 0.0
    }
}

/// Radius at which the clamped kernel times `w` equals the mean value of the
/// kernel over a flat disc of area `w`: `r = sqrt(w / pi) / 2` with `w` the
/// mean weight.
pub fn default_reg_dist(geometry: &Geometry) -> f64 {
    0.5 * (geometry.mean_weight() / PI).sqrt()
}

pub fn eval_kernel(x: Point3, y: Point3, spec: &KernelSpec) -> c64 {
    let r = x.distance(y).max(spec.reg_dist);
    let g = 1.0 / (4.0 * PI * r);
    if spec.is_static() {
        c64::new(g, 0.0)
    } else {
        let (s, c) = (spec.kappa * r).sin_cos();
        c64::new(g * c, g * s)
    }
}

/// Row or column access to a matrix block, used by cross approximation.
pub trait BlockEntries {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// Writes row `i` into `out` (`out.len() == ncols`).
    fn row(&self, i: usize, out: &mut [c64]);
    /// Writes column `j` into `out` (`out.len() == nrows`).
    fn col(&self, j: usize, out: &mut [c64]);
}

impl BlockEntries for MatRef<'_, c64> {
    fn nrows(&self) -> usize {
        MatRef::nrows(self)
    }
    fn ncols(&self) -> usize {
        MatRef::ncols(self)
    }
    fn row(&self, i: usize, out: &mut [c64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self[(i, j)];
        }
    }
    fn col(&self, j: usize, out: &mut [c64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self[(i, j)];
        }
    }
}

/// Entries given by a closure `f(i, j)`.
pub struct FnEntries<F> {
    pub nrows: usize,
    pub ncols: usize,
    pub f: F,
}

impl<F: Fn(usize, usize) -> c64> BlockEntries for FnEntries<F> {
    fn nrows(&self) -> usize {
        self.nrows
    }
    fn ncols(&self) -> usize {
        self.ncols
    }
    fn row(&self, i: usize, out: &mut [c64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = (self.f)(i, j);
        }
    }
    fn col(&self, j: usize, out: &mut [c64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (self.f)(i, j);
        }
    }
}

/// Evaluates `a_ij = w_i w_j g(x_i, y_j)` with `i`, `j` in tree order.
#[derive(Debug)]
pub struct EntryOracle {
    rows: Vec<Point3>,
    row_w: Vec<f64>,
    cols: Vec<Point3>,
    col_w: Vec<f64>,
    spec: KernelSpec,
    evaluations: AtomicU64,
}

impl EntryOracle {
    pub fn new(
        row_geometry: &Geometry,
        row_tree: &ClusterTree,
        col_geometry: &Geometry,
        col_tree: &ClusterTree,
        spec: KernelSpec,
    ) -> Result<Self> {
        if row_geometry.len() != row_tree.len() {
            return Err(Error::DimensionMismatch {
                expected: row_tree.len(),
                got: row_geometry.len(),
            });
        }
        if col_geometry.len() != col_tree.len() {
            return Err(Error::DimensionMismatch {
                expected: col_tree.len(),
                got: col_geometry.len(),
            });
        }
        Ok(Self {
            rows: row_tree.to_tree_order(row_geometry.points()),
            row_w: row_tree.to_tree_order(row_geometry.weights()),
            cols: col_tree.to_tree_order(col_geometry.points()),
            col_w: col_tree.to_tree_order(col_geometry.weights()),
            spec,
            evaluations: AtomicU64::new(0),
        })
    }

    /// Oracle with the same geometry and tree on both sides.
    pub fn symmetric(geometry: &Geometry, tree: &ClusterTree, spec: KernelSpec) -> Result<Self> {
        Self::new(geometry, tree, geometry, tree, spec)
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// Total number of entries evaluated so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn entry(&self, i: usize, j: usize) -> Result<c64> {
        if i >= self.nrows() || j >= self.ncols() {
            return Err(Error::Index {
                row: i,
                col: j,
                nrows: self.nrows(),
                ncols: self.ncols(),
            });
        }
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        Ok(self.value(i, j))
    }

    #[inline]
    fn value(&self, i: usize, j: usize) -> c64 {
        eval_kernel(self.rows[i], self.cols[j], &self.spec) * (self.row_w[i] * self.col_w[j])
    }

    /// Row `i` restricted to `cols`.
    pub fn fill_row(&self, i: usize, cols: Range<usize>, out: &mut [c64]) {
        debug_assert_eq!(out.len(), cols.len());
        for (o, j) in out.iter_mut().zip(cols.clone()) {
            *o = self.value(i, j);
        }
        self.evaluations
            .fetch_add(cols.len() as u64, Ordering::Relaxed);
    }

    /// Column `j` restricted to `rows`.
    pub fn fill_col(&self, j: usize, rows: Range<usize>, out: &mut [c64]) {
        debug_assert_eq!(out.len(), rows.len());
        for (o, i) in out.iter_mut().zip(rows.clone()) {
            *o = self.value(i, j);
        }
        self.evaluations
            .fetch_add(rows.len() as u64, Ordering::Relaxed);
    }

    pub fn dense_block(&self, rows: Range<usize>, cols: Range<usize>) -> Result<Mat<c64>> {
        if rows.end > self.nrows()
            || cols.end > self.ncols()
            || rows.start > rows.end
            || cols.start > cols.end
        {
            return Err(Error::Index {
                row: rows.end,
                col: cols.end,
                nrows: self.nrows(),
                ncols: self.ncols(),
            });
        }
        let requested = rows.len().saturating_mul(cols.len());
        if requested > BLOCK_CAP {
            return Err(Error::Capacity {
                requested,
                cap: BLOCK_CAP,
            });
        }
        Ok(self.dense_block_unchecked(rows, cols))
    }

    pub(crate) fn dense_block_unchecked(&self, rows: Range<usize>, cols: Range<usize>) -> Mat<c64> {
        let mut m = Mat::<c64>::zeros(rows.len(), cols.len());
        for (jj, j) in cols.clone().enumerate() {
            let col = m.col_as_slice_mut(jj);
            for (o, i) in col.iter_mut().zip(rows.clone()) {
                *o = self.value(i, j);
            }
        }
        self.evaluations
            .fetch_add((rows.len() * cols.len()) as u64, Ordering::Relaxed);
        m
    }

    /// The full matrix, subject to `cap` elements.
    pub fn dense_matrix(&self, cap: usize) -> Result<Mat<c64>> {
        let requested = self.nrows().saturating_mul(self.ncols());
        if requested > cap {
            return Err(Error::Capacity { requested, cap });
        }
        Ok(self.dense_block_unchecked(0..self.nrows(), 0..self.ncols()))
    }

    /// Block view for cross approximation.
    pub fn block(&self, rows: Range<usize>, cols: Range<usize>) -> OracleBlock<'_> {
        OracleBlock {
            oracle: self,
            rows,
            cols,
        }
    }
}

/// A rectangular window of an [`EntryOracle`].
pub struct OracleBlock<'a> {
    oracle: &'a EntryOracle,
    rows: Range<usize>,
    cols: Range<usize>,
}

impl BlockEntries for OracleBlock<'_> {
    fn nrows(&self) -> usize {
        self.rows.len()
    }
    fn ncols(&self) -> usize {
        self.cols.len()
    }
    fn row(&self, i: usize, out: &mut [c64]) {
        self.oracle
            .fill_row(self.rows.start + i, self.cols.clone(), out);
    }
    fn col(&self, j: usize, out: &mut [c64]) {
        self.oracle
            .fill_col(self.cols.start + j, self.rows.clone(), out);
    }
}
