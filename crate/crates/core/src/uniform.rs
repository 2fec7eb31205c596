//! Uniform H-matrices: admissible blocks share orthonormal cluster bases.
//!
//! A block `b = (t, s)` is stored as `U_t S_X S_Y^H V_s^H`. Bases are built
//! per cluster from the SVD of a thin proxy of the agglomeration matrix, the
//! concatenation of all admissible blocks in the cluster's row (or column).

use std::path::Path;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use faer::{c64, Mat, MatRef};

use crate::clustering::{storage_bounds, BlockClusterTree};
use crate::dense::{gemv_acc, gemv_adj, gemv_adj_acc, take_cols, thin_qr, thin_svd, ZERO};
use crate::error::{invalid, Error, Result};
use crate::hmatrix::{compress_block, reduce, slots, DenseLeaves, HMatrix, StorageReport};
use crate::kernels::{EntryOracle, DENSE_CAP};
use crate::lowrank::{truncation_rank, Pivoting, SvdForm, ToleranceSpec, TINY_FLOOR};
use crate::parallel::{for_each_dynamic, largest_first, map_dynamic};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Row,
    Col,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Row => "row",
            Side::Col => "col",
        }
    }
}

/// Orthonormal bases indexed by cluster id; clusters without admissible
/// blocks have none.
#[derive(Clone, Debug)]
pub struct ClusterBasis {
    side: Side,
    bases: Vec<Option<Mat<c64>>>,
}

impl ClusterBasis {
    pub fn side(&self) -> Side {
        self.side
    }

    pub fn get(&self, cluster: usize) -> Option<&Mat<c64>> {
        self.bases.get(cluster).and_then(|b| b.as_ref())
    }

    pub fn rank(&self, cluster: usize) -> usize {
        self.get(cluster).map_or(0, |b| b.ncols())
    }

    /// `(cluster id, basis)` for every stored basis.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &Mat<c64>)> {
        self.bases
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.as_ref().map(|b| (i, b)))
    }

    pub fn max_rank(&self) -> usize {
        self.iter().map(|(_, b)| b.ncols()).max().unwrap_or(0)
    }

    /// `sum |t| l_t`.
    pub fn storage(&self) -> u64 {
        self.iter()
            .map(|(_, b)| (b.nrows() * b.ncols()) as u64)
            .sum()
    }
}

/// Factorised coupling matrix `S_b = S_X S_Y^H`.
#[derive(Clone, Debug)]
pub struct CoefficientPair {
    pub s_x: Mat<c64>,
    pub s_y: Mat<c64>,
}

impl CoefficientPair {
    pub fn inner(&self) -> usize {
        self.s_x.ncols()
    }

    pub fn storage(&self) -> u64 {
        (self.inner() * (self.s_x.nrows() + self.s_y.nrows())) as u64
    }

    pub fn product(&self) -> Mat<c64> {
        &self.s_x * self.s_y.adjoint()
    }

    /// Shrinks the inner dimension to `min(k, l_t, l_s)` without changing the
    /// product.
    fn compact(self) -> Self {
        let (lt, ls, k) = (self.s_x.nrows(), self.s_y.nrows(), self.inner());
        if k <= lt.min(ls) {
            return self;
        }
        if lt <= ls {
            Self {
                s_y: &self.s_y * self.s_x.adjoint(),
                s_x: Mat::identity(lt, lt),
            }
        } else {
            Self {
                s_x: self.product(),
                s_y: Mat::identity(ls, ls),
            }
        }
    }
}

/// Truncation thresholds for cluster bases.
#[derive(Clone, Debug, PartialEq)]
pub enum ClusterTolerances {
    /// Same relative tolerance, measured against the largest singular value
    /// of each agglomeration.
    Relative(f64),
    /// Absolute spectral thresholds by cluster id.
    Absolute { row: Vec<f64>, col: Vec<f64> },
}

impl ClusterTolerances {
    pub fn spec(&self, side: Side, cluster: usize) -> ToleranceSpec {
        match self {
            ClusterTolerances::Relative(e) => ToleranceSpec::relative(*e),
            ClusterTolerances::Absolute { row, col } => {
                let v = match side {
                    Side::Row => row[cluster],
                    Side::Col => col[cluster],
                };
                ToleranceSpec::absolute(v)
            }
        }
    }
}

/// How coefficient factors are recovered from the truncated proxy SVD.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CoefficientScaling {
    /// Proxy `X_b R_{Y,b}^H` with `R_{Y,b}` from a QR of the other factor;
    /// coefficients by a triangular solve.
    Triangular,
    /// Proxy `U_b Sigma_b`; coefficients scaled by `Sigma_b^{-1/2}` on both
    /// sides.
    #[default]
    SigmaSplit,
}

/// Result of processing one cluster.
#[derive(Clone, Debug)]
pub struct ClusterBuild {
    pub basis: Mat<c64>,
    /// `(block id, S_X or S_Y)` in the order of the cluster's block list.
    pub coeffs: Vec<(usize, Mat<c64>)>,
}

/// SVD of the horizontally stacked `parts`, truncated by `tol`. Returns the
/// basis and, per part, the rows of `Sigma V^H` belonging to it.
fn basis_from_parts(
    parts: &[Mat<c64>],
    nrows: usize,
    tol: &ToleranceSpec,
) -> (Mat<c64>, Vec<Mat<c64>>) {
    let total: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut stacked = Mat::<c64>::zeros(nrows, total);
    let mut off = 0;
    for p in parts {
        stacked.as_mut().subcols_mut(off, p.ncols()).copy_from(p);
        off += p.ncols();
    }
    let (u, s, v) = thin_svd(stacked.as_ref());
    let r = truncation_rank(&s, tol);
    let basis = take_cols(&u, r);
    let mut out = Vec::with_capacity(parts.len());
    let mut off = 0;
    for p in parts {
        let k = p.ncols();
        // rows off..off+k of V, as the l x k block of Sigma V^H
        let w = Mat::from_fn(r, k, |i, j| v[(off + j, i)].conj() * s[i]);
        out.push(w);
        off += k;
    }
    (basis, out)
}

fn scale_cols_inv_sqrt(w: &Mat<c64>, sigma: &[f64]) -> Mat<c64> {
    Mat::from_fn(w.nrows(), w.ncols(), |i, j| {
        w[(i, j)] * (1.0 / sigma[j].sqrt())
    })
}

/// `w (R^H)^{-1}` for upper triangular `r`, solving on the leading minor
/// whose diagonal is numerically nonzero and leaving the rest zero.
fn solve_right_adjoint_upper(w: &Mat<c64>, r: &Mat<c64>) -> Mat<c64> {
    let k = r.ncols().min(r.nrows());
    let dmax = (0..k).map(|i| r[(i, i)].norm()).fold(0.0, f64::max);
    let cut = dmax * 1e-13 * k.max(1) as f64;
    let r0 = (0..k)
        .position(|i| r[(i, i)].norm() <= cut.max(TINY_FLOOR))
        .unwrap_or(k);
    // S R^H = W  <=>  R S^H = W^H
    let mut z = Mat::<c64>::zeros(r.ncols(), w.nrows());
    if r0 > 0 {
        let mut rhs = w.adjoint().subrows(0, r0).to_owned();
        r.as_ref()
            .submatrix(0, 0, r0, r0)
            .solve_upper_triangular_in_place(rhs.as_mut());
        z.as_mut().subrows_mut(0, r0).copy_from(&rhs);
    }
    z.adjoint().to_owned()
}

fn block_clusters(bct: &BlockClusterTree, side: Side, cluster: usize) -> &[usize] {
    match side {
        Side::Row => bct.row_blocks(cluster),
        Side::Col => bct.col_blocks(cluster),
    }
}

fn cluster_size(bct: &BlockClusterTree, side: Side, cluster: usize) -> usize {
    match side {
        Side::Row => bct.row_tree().node(cluster).size(),
        Side::Col => bct.col_tree().node(cluster).size(),
    }
}

fn side_clusters(bct: &BlockClusterTree, side: Side) -> &[usize] {
    match side {
        Side::Row => bct.lrc(),
        Side::Col => bct.lcc(),
    }
}

/// Agglomeration of a dense matrix: `A_t` (row side) or `A_s^H` (column side).
pub fn agglomeration(
    a: MatRef<'_, c64>,
    bct: &BlockClusterTree,
    side: Side,
    cluster: usize,
) -> Mat<c64> {
    let blocks = block_clusters(bct, side, cluster);
    let size = cluster_size(bct, side, cluster);
    let far: usize = match side {
        Side::Row => bct.row_far_size(cluster),
        Side::Col => bct.col_far_size(cluster),
    };
    let mut out = Mat::<c64>::zeros(size, far);
    let mut off = 0;
    for &b in blocks {
        let (r, c) = (bct.row_range(b), bct.col_range(b));
        let sub = a.submatrix(r.start, c.start, r.len(), c.len());
        match side {
            Side::Row => out.as_mut().subcols_mut(off, c.len()).copy_from(sub),
            Side::Col => out
                .as_mut()
                .subcols_mut(off, r.len())
                .copy_from(sub.adjoint()),
        }
        off += if side == Side::Row { c.len() } else { r.len() };
    }
    out
}

/// Cluster bases from a dense matrix by truncated SVD of each agglomeration.
pub fn optimal_cluster_basis_reference(
    a: MatRef<'_, c64>,
    bct: &BlockClusterTree,
    side: Side,
    tol: &ClusterTolerances,
) -> Result<ClusterBasis> {
    let requested = a.nrows().saturating_mul(a.ncols());
    if requested > DENSE_CAP {
        return Err(Error::Capacity {
            requested,
            cap: DENSE_CAP,
        });
    }
    if a.nrows() != bct.nrows() || a.ncols() != bct.ncols() {
        return Err(invalid(format!(
            "matrix is {}x{}, block tree is {}x{}",
            a.nrows(),
            a.ncols(),
            bct.nrows(),
            bct.ncols()
        )));
    }
    let n_clusters = match side {
        Side::Row => bct.row_tree().nodes().len(),
        Side::Col => bct.col_tree().nodes().len(),
    };
    let mut bases = vec![None; n_clusters];
    for &t in side_clusters(bct, side) {
        let ag = agglomeration(a, bct, side, t);
        let (u, s, _) = thin_svd(ag.as_ref());
        let r = truncation_rank(&s, &tol.spec(side, t));
        bases[t] = Some(take_cols(&u, r));
    }
    Ok(ClusterBasis { side, bases })
}

#[derive(Debug)]
pub struct UniformHMatrix {
    bct: Arc<BlockClusterTree>,
    row_basis: ClusterBasis,
    col_basis: ClusterBasis,
    coeffs: Vec<CoefficientPair>,
    dense: Arc<DenseLeaves>,
    slot: Vec<usize>,
    leaf_visits: AtomicU64,
}

impl UniformHMatrix {
    /// `coeffs` follows [`BlockClusterTree::admissible`].
    pub fn from_parts(
        bct: Arc<BlockClusterTree>,
        row_basis: ClusterBasis,
        col_basis: ClusterBasis,
        coeffs: Vec<CoefficientPair>,
        dense: Arc<DenseLeaves>,
    ) -> Result<Self> {
        if coeffs.len() != bct.admissible().len() {
            return Err(Error::DimensionMismatch {
                expected: bct.admissible().len(),
                got: coeffs.len(),
            });
        }
        for (p, &id) in bct.admissible().iter().enumerate() {
            let b = bct.block(id);
            let c = &coeffs[p];
            if c.s_x.nrows() != row_basis.rank(b.row)
                || c.s_y.nrows() != col_basis.rank(b.col)
                || c.s_x.ncols() != c.s_y.ncols()
            {
                return Err(invalid(format!(
                    "coefficient shapes of block {id} do not match its bases"
                )));
            }
        }
        let slot = slots(&bct);
        Ok(Self {
            bct,
            row_basis,
            col_basis,
            coeffs,
            dense,
            slot,
            leaf_visits: AtomicU64::new(0),
        })
    }

    pub fn bct(&self) -> &Arc<BlockClusterTree> {
        &self.bct
    }

    pub fn nrows(&self) -> usize {
        self.bct.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.bct.ncols()
    }

    pub fn row_basis(&self) -> &ClusterBasis {
        &self.row_basis
    }

    pub fn col_basis(&self) -> &ClusterBasis {
        &self.col_basis
    }

    pub fn basis(&self, side: Side) -> &ClusterBasis {
        match side {
            Side::Row => &self.row_basis,
            Side::Col => &self.col_basis,
        }
    }

    pub fn coefficients(&self, id: usize) -> Option<&CoefficientPair> {
        self.bct
            .block(id)
            .admissible
            .then(|| &self.coeffs[self.slot[id]])
    }

    pub fn dense_leaf(&self, id: usize) -> Option<&Mat<c64>> {
        (!self.bct.block(id).admissible).then(|| &self.dense.blocks[self.slot[id]])
    }

    pub fn leaf_visits(&self) -> u64 {
        self.leaf_visits.load(Ordering::Relaxed)
    }

    /// Dense block `U_t S_X S_Y^H V_s^H` of an admissible leaf.
    pub fn block_dense(&self, id: usize) -> Option<Mat<c64>> {
        let c = self.coefficients(id)?;
        let b = self.bct.block(id);
        let (u, v) = (self.row_basis.get(b.row)?, self.col_basis.get(b.col)?);
        Some(u * (c.s_x.as_ref() * c.s_y.adjoint()) * v.adjoint())
    }

    fn product(&self, v: &[c64], workers: usize, adjoint: bool) -> Result<Vec<c64>> {
        let (n_in, n_out) = if adjoint {
            (self.nrows(), self.ncols())
        } else {
            (self.ncols(), self.nrows())
        };
        if v.len() != n_in {
            return Err(Error::DimensionMismatch {
                expected: n_in,
                got: v.len(),
            });
        }
        let bct = &*self.bct;
        // forward: in = column side, out = row side
        let (in_side, out_side) = if adjoint {
            (Side::Row, Side::Col)
        } else {
            (Side::Col, Side::Row)
        };
        let range = |side: Side, t: usize| match side {
            Side::Row => bct.row_tree().node(t).range.clone(),
            Side::Col => bct.col_tree().node(t).range.clone(),
        };
        let in_clusters = largest_first(side_clusters(bct, in_side), |t| {
            cluster_size(bct, in_side, t)
        });

        // phase 1: project onto the input-side bases and apply S^H per block
        let staged = map_dynamic(workers, &in_clusters, |t| {
            let basis = self
                .basis(in_side)
                .get(t)
                .expect("basis for cluster in use");
            let mut u_t = vec![ZERO; basis.ncols()];
            gemv_adj(basis, &v[range(in_side, t)], &mut u_t);
            block_clusters(bct, in_side, t)
                .iter()
                .map(|&id| {
                    let c = &self.coeffs[self.slot[id]];
                    let s_in = if adjoint { &c.s_x } else { &c.s_y };
                    let mut u_b = vec![ZERO; c.inner()];
                    gemv_adj(s_in, &u_t, &mut u_b);
                    (id, u_b)
                })
                .collect::<Vec<_>>()
        });
        let mut staging: Vec<Vec<c64>> = vec![Vec::new(); self.coeffs.len()];
        for (id, u_b) in staged.into_iter().flatten() {
            staging[self.slot[id]] = u_b;
            self.leaf_visits.fetch_add(1, Ordering::Relaxed);
        }

        // phase 2: output-side clusters, then dense leaves
        let out_clusters = largest_first(side_clusters(bct, out_side), |t| {
            cluster_size(bct, out_side, t)
        });
        let n_clusters = match out_side {
            Side::Row => bct.row_tree().nodes().len(),
            Side::Col => bct.col_tree().nodes().len(),
        };
        let mut tasks: Vec<usize> = out_clusters.clone();
        let dense_order = largest_first(bct.inadmissible(), |id| {
            bct.row_range(id).len() * bct.col_range(id).len()
        });
        tasks.extend(dense_order.iter().map(|&id| n_clusters + id));
        let parts = for_each_dynamic(
            workers,
            &tasks,
            || vec![ZERO; n_out],
            |w, task| {
                if task < n_clusters {
                    let t = task;
                    let basis = self
                        .basis(out_side)
                        .get(t)
                        .expect("basis for cluster in use");
                    let mut acc = vec![ZERO; basis.ncols()];
                    for &id in block_clusters(bct, out_side, t) {
                        let c = &self.coeffs[self.slot[id]];
                        let s_out = if adjoint { &c.s_y } else { &c.s_x };
                        gemv_acc(s_out, &staging[self.slot[id]], &mut acc);
                    }
                    gemv_acc(basis, &acc, &mut w[range(out_side, t)]);
                } else {
                    let id = task - n_clusters;
                    let d = &self.dense.blocks[self.slot[id]];
                    let (r, c) = (bct.row_range(id), bct.col_range(id));
                    if adjoint {
                        gemv_adj_acc(d, &v[r], &mut w[c]);
                    } else {
                        gemv_acc(d, &v[c], &mut w[r]);
                    }
                    self.leaf_visits.fetch_add(1, Ordering::Relaxed);
                }
            },
        );
        Ok(reduce(parts, n_out))
    }

    /// Writes `cluster_id,side,size,rank` for all bases and
    /// `block_id,k_b,l_tau,l_sigma` for all coefficient pairs.
    pub fn write_structure_csv(
        &self,
        bases: impl AsRef<Path>,
        coeffs: impl AsRef<Path>,
    ) -> Result<()> {
        let mut w = csv::Writer::from_path(bases)?;
        w.write_record(["cluster_id", "side", "size", "rank"])?;
        for basis in [&self.row_basis, &self.col_basis] {
            for (id, b) in basis.iter() {
                w.write_record([
                    id.to_string(),
                    basis.side().name().to_string(),
                    b.nrows().to_string(),
                    b.ncols().to_string(),
                ])?;
            }
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(coeffs)?;
        w.write_record(["block_id", "k_b", "l_tau", "l_sigma"])?;
        for &id in self.bct.admissible() {
            let c = &self.coeffs[self.slot[id]];
            w.write_record([
                id.to_string(),
                c.inner().to_string(),
                c.s_x.nrows().to_string(),
                c.s_y.nrows().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn matvec_uh(u: &UniformHMatrix, v: &[c64], workers: usize) -> Result<Vec<c64>> {
    u.product(v, workers, false)
}

pub fn matvec_uh_adjoint(u: &UniformHMatrix, v: &[c64], workers: usize) -> Result<Vec<c64>> {
    u.product(v, workers, true)
}

/// Bases `sum |t| l_t + sum |s| l_s` plus couplings `sum k_b (l_t + l_s)`.
pub fn storage_report_uh(u: &UniformHMatrix) -> StorageReport {
    let adm = u.row_basis.storage()
        + u.col_basis.storage()
        + u.coeffs.iter().map(|c| c.storage()).sum::<u64>();
    let k_max = u.coeffs.iter().map(|c| c.inner()).max().unwrap_or(0);
    let l_max = u.row_basis.max_rank().max(u.col_basis.max_rank());
    StorageReport::new(adm, u.dense.elements(), &u.bct, k_max, l_max)
}

/// The uniform storage bound evaluated with the measured `l_max`, `c_sp`.
pub fn uh_storage_bound(u: &UniformHMatrix) -> u64 {
    let l_max = u.row_basis.max_rank().max(u.col_basis.max_rank());
    storage_bounds(&u.bct, 0, l_max).1
}

pub fn to_dense(u: &UniformHMatrix) -> Result<Mat<c64>> {
    let requested = u.nrows().saturating_mul(u.ncols());
    if requested > DENSE_CAP {
        return Err(Error::Capacity {
            requested,
            cap: DENSE_CAP,
        });
    }
    let mut out = Mat::<c64>::zeros(u.nrows(), u.ncols());
    for id in 0..u.bct.leaves().len() {
        let (r, c) = (u.bct.row_range(id), u.bct.col_range(id));
        let block = match u.block_dense(id) {
            Some(b) => b,
            None => u.dense.blocks[u.slot[id]].clone(),
        };
        out.as_mut()
            .submatrix_mut(r.start, c.start, r.len(), c.len())
            .copy_from(&block);
    }
    Ok(out)
}

/// Proxy part of block `id` for the given side of an H-matrix leaf.
fn proxy_part(
    s: &SvdForm,
    side: Side,
    scaling: CoefficientScaling,
) -> (Mat<c64>, Option<Mat<c64>>) {
    match scaling {
        CoefficientScaling::SigmaSplit => match side {
            Side::Row => (s.scaled_u(), None),
            Side::Col => (s.scaled_v(), None),
        },
        CoefficientScaling::Triangular => {
            // factors X = U Sigma, Y = V
            let (this, other) = match side {
                Side::Row => (s.scaled_u(), s.v.clone()),
                Side::Col => (s.v.clone(), s.scaled_u()),
            };
            let (_, r) = thin_qr(other.as_ref());
            (&this * r.adjoint(), Some(r))
        }
    }
}

fn finish_coeffs(w: Vec<Mat<c64>>, s: Vec<&SvdForm>, rs: Vec<Option<Mat<c64>>>) -> Vec<Mat<c64>> {
    w.into_iter()
        .zip(s)
        .zip(rs)
        .map(|((w, s), r)| match r {
            Some(r) => solve_right_adjoint_upper(&w, &r),
            None => scale_cols_inv_sqrt(&w, &s.sigma),
        })
        .collect()
}

/// Compresses an H-matrix into uniform form, one truncated proxy SVD per
/// cluster. Dense leaves are shared with `h`.
pub fn compress_h_to_uh(
    h: &HMatrix,
    tol: &ClusterTolerances,
    scaling: CoefficientScaling,
    workers: usize,
) -> UniformHMatrix {
    let bct = h.bct().clone();
    let mut per_block: Vec<[Option<Mat<c64>>; 2]> =
        (0..bct.admissible().len()).map(|_| [None, None]).collect();
    let slot = slots(&bct);
    let mut bases = Vec::new();
    for side in [Side::Row, Side::Col] {
        let clusters = largest_first(side_clusters(&bct, side), |t| cluster_size(&bct, side, t));
        let built = map_dynamic(workers, &clusters, |t| {
            let blocks = block_clusters(&bct, side, t);
            let forms: Vec<&SvdForm> = blocks.iter().map(|&id| h.lowrank(id).unwrap()).collect();
            let (parts, rs): (Vec<_>, Vec<_>) =
                forms.iter().map(|s| proxy_part(s, side, scaling)).unzip();
            let (basis, w) =
                basis_from_parts(&parts, cluster_size(&bct, side, t), &tol.spec(side, t));
            let coeffs = finish_coeffs(w, forms, rs);
            (
                t,
                ClusterBuild {
                    basis,
                    coeffs: blocks.iter().copied().zip(coeffs).collect(),
                },
            )
        });
        let n_clusters = match side {
            Side::Row => bct.row_tree().nodes().len(),
            Side::Col => bct.col_tree().nodes().len(),
        };
        let mut b = vec![None; n_clusters];
        for (t, cb) in built {
            for (id, m) in cb.coeffs {
                per_block[slot[id]][side as usize] = Some(m);
            }
            b[t] = Some(cb.basis);
        }
        bases.push(ClusterBasis { side, bases: b });
    }
    let coeffs = per_block
        .into_iter()
        .map(|[x, y]| {
            CoefficientPair {
                s_x: x.expect("row coefficient"),
                s_y: y.expect("column coefficient"),
            }
            .compact()
        })
        .collect();
    let col_basis = bases.pop().unwrap();
    let row_basis = bases.pop().unwrap();
    UniformHMatrix::from_parts(bct, row_basis, col_basis, coeffs, h.dense_leaves().clone())
        .expect("consistent uniform compression")
}

/// Tolerances for the per-block cross approximation and recompression.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockBuildParams {
    pub eps_aca: ToleranceSpec,
    pub eps_recompress: ToleranceSpec,
    pub pivoting: Pivoting,
}

#[derive(Debug, Default)]
struct Slot {
    computed: bool,
    u: Option<Mat<c64>>,
    v: Option<Mat<c64>>,
    sigma: Vec<f64>,
    pending: u8,
}

/// Per-block factor handoff between the row and the column cluster of each
/// admissible block. The first cluster to reach a block computes it; the
/// other side's factor is kept until its cluster consumes it.
#[derive(Debug)]
pub struct SharedFactors {
    slots: Vec<Mutex<Slot>>,
    slot: Vec<usize>,
    aca_calls: AtomicU64,
    retained: AtomicUsize,
    peak_retained: AtomicUsize,
}

impl SharedFactors {
    pub fn new(bct: &BlockClusterTree) -> Self {
        Self {
            slots: (0..bct.admissible().len())
                .map(|_| Mutex::new(Slot::default()))
                .collect(),
            slot: slots(bct),
            aca_calls: AtomicU64::new(0),
            retained: AtomicUsize::new(0),
            peak_retained: AtomicUsize::new(0),
        }
    }

    /// Admissible blocks approximated so far.
    pub fn aca_calls(&self) -> u64 {
        self.aca_calls.load(Ordering::Relaxed)
    }

    /// Blocks whose factors are currently held for a second cluster.
    pub fn retained(&self) -> usize {
        self.retained.load(Ordering::Relaxed)
    }

    pub fn peak_retained(&self) -> usize {
        self.peak_retained.load(Ordering::Relaxed)
    }

    /// Supplies precomputed factors for a block, as if approximated already.
    pub fn supply(&self, id: usize, s: SvdForm) {
        let mut g = self.slots[self.slot[id]].lock().unwrap();
        assert!(!g.computed, "block {id} already has factors");
        *g = Slot {
            computed: true,
            u: Some(s.u),
            v: Some(s.v),
            sigma: s.sigma,
            pending: 2,
        };
        let now = self.retained.fetch_add(1, Ordering::Relaxed) + 1;
        self.peak_retained.fetch_max(now, Ordering::Relaxed);
    }

    /// Takes this side's factor of block `id`, computing the block first if
    /// no cluster has reached it yet. Returns `(U_b or V_b, sigma_b)`.
    fn take(
        &self,
        oracle: &EntryOracle,
        bct: &BlockClusterTree,
        id: usize,
        side: Side,
        params: &BlockBuildParams,
    ) -> (Mat<c64>, Vec<f64>) {
        let mut g = self.slots[self.slot[id]].lock().unwrap();
        if !g.computed {
            let s = compress_block(
                oracle,
                bct,
                id,
                &params.eps_aca,
                &params.eps_recompress,
                params.pivoting,
            );
            self.aca_calls.fetch_add(1, Ordering::Relaxed);
            *g = Slot {
                computed: true,
                u: Some(s.u),
                v: Some(s.v),
                sigma: s.sigma,
                pending: 2,
            };
            let now = self.retained.fetch_add(1, Ordering::Relaxed) + 1;
            self.peak_retained.fetch_max(now, Ordering::Relaxed);
        }
        let factor = match side {
            Side::Row => g.u.take(),
            Side::Col => g.v.take(),
        }
        .expect("each side consumes a block once");
        g.pending -= 1;
        let sigma = if g.pending == 0 {
            self.retained.fetch_sub(1, Ordering::Relaxed);
            std::mem::take(&mut g.sigma)
        } else {
            g.sigma.clone()
        };
        (factor, sigma)
    }
}

/// Builds the basis of one cluster from the (possibly shared) factors of its
/// admissible blocks: stacks `U_b Sigma_b`, truncates its SVD and returns the
/// coefficient factors `Sigma V^H |_b Sigma_b^{-1/2}`.
pub fn build_cluster(
    oracle: &EntryOracle,
    bct: &BlockClusterTree,
    side: Side,
    cluster: usize,
    tol: &ToleranceSpec,
    params: &BlockBuildParams,
    shared: &SharedFactors,
) -> ClusterBuild {
    let blocks = block_clusters(bct, side, cluster);
    let mut parts = Vec::with_capacity(blocks.len());
    let mut sigmas = Vec::with_capacity(blocks.len());
    for &id in blocks {
        let (f, sigma) = shared.take(oracle, bct, id, side, params);
        parts.push(Mat::from_fn(f.nrows(), f.ncols(), |i, l| {
            f[(i, l)] * sigma[l]
        }));
        sigmas.push(sigma);
    }
    let (basis, w) = basis_from_parts(&parts, cluster_size(bct, side, cluster), tol);
    drop(parts);
    let coeffs = w
        .iter()
        .zip(&sigmas)
        .map(|(w, s)| scale_cols_inv_sqrt(w, s))
        .collect::<Vec<_>>();
    ClusterBuild {
        basis,
        coeffs: blocks.iter().copied().zip(coeffs).collect(),
    }
}

/// Options for [`direct_build_uh_with`]. The defaults split a global `eps`
/// into `eps/3` for cross approximation and cluster bases and `eps/10` for
/// recompression.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectBuildOptions {
    pub block: BlockBuildParams,
    pub clusters: ClusterTolerances,
    pub workers: usize,
}

impl DirectBuildOptions {
    pub fn from_eps(eps: f64, workers: usize) -> Self {
        Self {
            block: BlockBuildParams {
                eps_aca: ToleranceSpec::relative(eps / 3.0),
                eps_recompress: ToleranceSpec::relative(eps / 10.0),
                pivoting: Pivoting::Partial,
            },
            clusters: ClusterTolerances::Relative(eps / 3.0),
            workers,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DirectBuildStats {
    pub aca_calls: u64,
    pub peak_retained: usize,
    pub admissible_blocks: usize,
}

/// Processing order: all clusters in use on either side by size descending,
/// then id ascending, row side first on full ties.
pub fn cluster_schedule(bct: &BlockClusterTree) -> Vec<(Side, usize)> {
    let mut all: Vec<(Side, usize)> = bct
        .lrc()
        .iter()
        .map(|&t| (Side::Row, t))
        .chain(bct.lcc().iter().map(|&s| (Side::Col, s)))
        .collect();
    all.sort_by(|a, b| {
        cluster_size(bct, b.0, b.1)
            .cmp(&cluster_size(bct, a.0, a.1))
            .then(a.1.cmp(&b.1))
            .then((a.0 as u8).cmp(&(b.0 as u8)))
    });
    all
}

pub fn direct_build_uh(
    oracle: &EntryOracle,
    bct: &Arc<BlockClusterTree>,
    eps_global: ToleranceSpec,
    workers: usize,
) -> UniformHMatrix {
    direct_build_uh_with(
        oracle,
        bct,
        &DirectBuildOptions::from_eps(eps_global.rel_eps, workers),
    )
    .0
}

/// Builds a uniform H-matrix straight from the oracle without storing an
/// intermediate H-matrix. Clusters of both sides are processed largest first
/// on a shared queue; every admissible block is approximated exactly once by
/// whichever of its two clusters reaches it first.
pub fn direct_build_uh_with(
    oracle: &EntryOracle,
    bct: &Arc<BlockClusterTree>,
    opts: &DirectBuildOptions,
) -> (UniformHMatrix, DirectBuildStats) {
    direct_build(oracle, bct, opts, None)
}

/// Like [`direct_build_uh_with`] but shares already assembled dense leaves,
/// for instance those of an H-matrix on the same block tree.
pub fn direct_build_uh_reusing(
    oracle: &EntryOracle,
    bct: &Arc<BlockClusterTree>,
    opts: &DirectBuildOptions,
    dense: Arc<DenseLeaves>,
) -> Result<(UniformHMatrix, DirectBuildStats)> {
    if dense.blocks().len() != bct.inadmissible().len() {
        return Err(Error::DimensionMismatch {
            expected: bct.inadmissible().len(),
            got: dense.blocks().len(),
        });
    }
    Ok(direct_build(oracle, bct, opts, Some(dense)))
}

fn direct_build(
    oracle: &EntryOracle,
    bct: &Arc<BlockClusterTree>,
    opts: &DirectBuildOptions,
    dense: Option<Arc<DenseLeaves>>,
) -> (UniformHMatrix, DirectBuildStats) {
    let schedule = cluster_schedule(bct);
    let shared = SharedFactors::new(bct);
    let order: Vec<usize> = (0..schedule.len()).collect();
    let built = map_dynamic(opts.workers, &order, |k| {
        let (side, t) = schedule[k];
        let tol = opts.clusters.spec(side, t);
        build_cluster(oracle, bct, side, t, &tol, &opts.block, &shared)
    });
    let slot = slots(bct);
    let mut per_block: Vec<[Option<Mat<c64>>; 2]> =
        (0..bct.admissible().len()).map(|_| [None, None]).collect();
    let mut row = vec![None; bct.row_tree().nodes().len()];
    let mut col = vec![None; bct.col_tree().nodes().len()];
    for ((side, t), cb) in schedule.iter().zip(built) {
        for (id, m) in cb.coeffs {
            per_block[slot[id]][*side as usize] = Some(m);
        }
        match side {
            Side::Row => row[*t] = Some(cb.basis),
            Side::Col => col[*t] = Some(cb.basis),
        }
    }
    let coeffs = per_block
        .into_iter()
        .map(|[x, y]| {
            CoefficientPair {
                s_x: x.expect("row coefficient"),
                s_y: y.expect("column coefficient"),
            }
            .compact()
        })
        .collect();
    let dense = dense.unwrap_or_else(|| Arc::new(DenseLeaves::assemble(oracle, bct, opts.workers)));
    let stats = DirectBuildStats {
        aca_calls: shared.aca_calls(),
        peak_retained: shared.peak_retained(),
        admissible_blocks: bct.admissible().len(),
    };
    let uh = UniformHMatrix::from_parts(
        bct.clone(),
        ClusterBasis {
            side: Side::Row,
            bases: row,
        },
        ClusterBasis {
            side: Side::Col,
            bases: col,
        },
        coeffs,
        dense,
    )
    .expect("consistent direct build");
    (uh, stats)
}
