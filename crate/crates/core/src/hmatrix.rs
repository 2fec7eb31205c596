//! H-matrices: assembly by cross approximation, products and storage counts.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use faer::{c64, Mat};
use serde::Serialize;

use crate::clustering::{storage_bounds, BlockClusterTree};
use crate::dense::{gemv_acc, gemv_adj_acc, ZERO};
use crate::error::{Error, Result};
use crate::kernels::{EntryOracle, DENSE_CAP};
use crate::lowrank::{aca_with, recompress, Pivoting, SvdForm, ToleranceSpec};
use crate::parallel::{for_each_dynamic, largest_first, map_dynamic};

/// Dense leaves, stored in the order of [`BlockClusterTree::inadmissible`].
#[derive(Clone, Debug)]
pub struct DenseLeaves {
    pub(crate) blocks: Vec<Mat<c64>>,
}

impl DenseLeaves {
    pub fn assemble(oracle: &EntryOracle, bct: &BlockClusterTree, workers: usize) -> Self {
        let order = largest_first(&(0..bct.inadmissible().len()).collect::<Vec<_>>(), |p| {
            let id = bct.inadmissible()[p];
            bct.row_range(id).len() * bct.col_range(id).len()
        });
        let mut built = map_dynamic(workers, &order, |p| {
            let id = bct.inadmissible()[p];
            (
                p,
                oracle.dense_block_unchecked(bct.row_range(id), bct.col_range(id)),
            )
        });
        built.sort_by_key(|(p, _)| *p);
        Self {
            blocks: built.into_iter().map(|(_, m)| m).collect(),
        }
    }

    pub fn elements(&self) -> u64 {
        self.blocks
            .iter()
            .map(|m| (m.nrows() * m.ncols()) as u64)
            .sum()
    }

    pub fn blocks(&self) -> &[Mat<c64>] {
        &self.blocks
    }
}

/// Element counts of a compressed matrix. `bytes_estimate` assumes 16-byte
/// complex entries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StorageReport {
    pub adm_elements: u64,
    pub dense_elements: u64,
    pub total_elements: u64,
    pub bytes_estimate: u64,
    pub c_sp: usize,
    pub k_max: usize,
    pub l_max: usize,
    pub depth_row: usize,
    pub depth_col: usize,
}

impl StorageReport {
    pub(crate) fn new(
        adm: u64,
        dense: u64,
        bct: &BlockClusterTree,
        k_max: usize,
        l_max: usize,
    ) -> Self {
        Self {
            adm_elements: adm,
            dense_elements: dense,
            total_elements: adm + dense,
            bytes_estimate: (adm + dense) * 16,
            c_sp: bct.sparsity_constant(),
            k_max,
            l_max,
            depth_row: bct.row_tree().depth(),
            depth_col: bct.col_tree().depth(),
        }
    }
}

#[derive(Debug)]
pub struct HMatrix {
    bct: Arc<BlockClusterTree>,
    lowrank: Vec<SvdForm>,
    dense: Arc<DenseLeaves>,
    slot: Vec<usize>,
    eps_block: ToleranceSpec,
    eps_recompress: ToleranceSpec,
    leaf_visits: AtomicU64,
    order: Vec<usize>,
    adjoint_order: Vec<usize>,
}

/// Admissible then inadmissible leaves, each largest first.
pub(crate) fn leaf_schedule(
    bct: &BlockClusterTree,
    adm_cost: impl Fn(usize) -> usize,
) -> Vec<usize> {
    let mut order = largest_first(bct.admissible(), &adm_cost);
    order.extend(largest_first(bct.inadmissible(), |id| {
        bct.row_range(id).len() * bct.col_range(id).len()
    }));
    order
}

pub(crate) fn slots(bct: &BlockClusterTree) -> Vec<usize> {
    let mut slot = vec![0; bct.leaves().len()];
    for (p, &id) in bct.admissible().iter().enumerate() {
        slot[id] = p;
    }
    for (p, &id) in bct.inadmissible().iter().enumerate() {
        slot[id] = p;
    }
    slot
}

/// Builds one admissible block: cross approximation then recompression.
pub(crate) fn compress_block(
    oracle: &EntryOracle,
    bct: &BlockClusterTree,
    id: usize,
    eps_block: &ToleranceSpec,
    eps_recompress: &ToleranceSpec,
    pivoting: Pivoting,
) -> SvdForm {
    let f = aca_with(
        &oracle.block(bct.row_range(id), bct.col_range(id)),
        eps_block,
        pivoting,
    );
    recompress(&f, eps_recompress)
}

pub fn assemble_h(
    oracle: &EntryOracle,
    bct: &Arc<BlockClusterTree>,
    eps_block: ToleranceSpec,
    eps_recompress: ToleranceSpec,
    workers: usize,
) -> HMatrix {
    assemble_h_with(
        oracle,
        bct,
        eps_block,
        eps_recompress,
        workers,
        Pivoting::Partial,
    )
}

/// Assembles every admissible leaf by cross approximation followed by
/// recompression and every inadmissible leaf densely. Leaves are handed to
/// `workers` threads largest first.
pub fn assemble_h_with(
    oracle: &EntryOracle,
    bct: &Arc<BlockClusterTree>,
    eps_block: ToleranceSpec,
    eps_recompress: ToleranceSpec,
    workers: usize,
    pivoting: Pivoting,
) -> HMatrix {
    let adm = bct.admissible();
    let order = largest_first(&(0..adm.len()).collect::<Vec<_>>(), |p| {
        bct.row_range(adm[p]).len() * bct.col_range(adm[p]).len()
    });
    let mut built = map_dynamic(workers, &order, |p| {
        (
            p,
            compress_block(oracle, bct, adm[p], &eps_block, &eps_recompress, pivoting),
        )
    });
    built.sort_by_key(|(p, _)| *p);
    let lowrank = built.into_iter().map(|(_, s)| s).collect();
    let dense = Arc::new(DenseLeaves::assemble(oracle, bct, workers));
    HMatrix::from_parts(bct.clone(), lowrank, dense, eps_block, eps_recompress)
}

impl HMatrix {
    /// `lowrank` follows [`BlockClusterTree::admissible`], `dense` follows
    /// [`BlockClusterTree::inadmissible`].
    pub fn from_parts(
        bct: Arc<BlockClusterTree>,
        lowrank: Vec<SvdForm>,
        dense: Arc<DenseLeaves>,
        eps_block: ToleranceSpec,
        eps_recompress: ToleranceSpec,
    ) -> Self {
        assert_eq!(lowrank.len(), bct.admissible().len());
        assert_eq!(dense.blocks.len(), bct.inadmissible().len());
        let slot = slots(&bct);
        let cost = |id: usize| lowrank[slot[id]].storage();
        let order = leaf_schedule(&bct, cost);
        let adjoint_order = order.clone();
        Self {
            bct,
            lowrank,
            dense,
            slot,
            eps_block,
            eps_recompress,
            leaf_visits: AtomicU64::new(0),
            order,
            adjoint_order,
        }
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

    pub fn tolerances(&self) -> (ToleranceSpec, ToleranceSpec) {
        (self.eps_block, self.eps_recompress)
    }

    /// SVD form of an admissible leaf.
    pub fn lowrank(&self, id: usize) -> Option<&SvdForm> {
        self.bct
            .block(id)
            .admissible
            .then(|| &self.lowrank[self.slot[id]])
    }

    /// Entries of an inadmissible leaf.
    pub fn dense_leaf(&self, id: usize) -> Option<&Mat<c64>> {
        (!self.bct.block(id).admissible).then(|| &self.dense.blocks[self.slot[id]])
    }

    pub fn dense_leaves(&self) -> &Arc<DenseLeaves> {
        &self.dense
    }

    /// Leaves touched by products since construction.
    pub fn leaf_visits(&self) -> u64 {
        self.leaf_visits.load(Ordering::Relaxed)
    }

    pub fn k_max(&self) -> usize {
        self.lowrank.iter().map(|s| s.rank()).max().unwrap_or(0)
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
        let order = if adjoint {
            &self.adjoint_order
        } else {
            &self.order
        };
        let parts = for_each_dynamic(
            workers,
            order,
            || vec![ZERO; n_out],
            |w, id| {
                let (rows, cols) = (self.bct.row_range(id), self.bct.col_range(id));
                let s = self.slot[id];
                match (self.bct.block(id).admissible, adjoint) {
                    (true, false) => self.lowrank[s].apply_acc(&v[cols], &mut w[rows]),
                    (true, true) => self.lowrank[s].apply_adjoint_acc(&v[rows], &mut w[cols]),
                    (false, false) => gemv_acc(&self.dense.blocks[s], &v[cols], &mut w[rows]),
                    (false, true) => gemv_adj_acc(&self.dense.blocks[s], &v[rows], &mut w[cols]),
                }
                self.leaf_visits.fetch_add(1, Ordering::Relaxed);
            },
        );
        Ok(reduce(parts, n_out))
    }

    /// Serialises the leaf list as `block_id,row_lo,row_hi,col_lo,col_hi,kind,rank`.
    pub fn write_structure_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "block_id", "row_lo", "row_hi", "col_lo", "col_hi", "kind", "rank",
        ])?;
        for id in 0..self.bct.leaves().len() {
            let (r, c) = (self.bct.row_range(id), self.bct.col_range(id));
            let (kind, rank) = match self.lowrank(id) {
                Some(s) => ("admissible", s.rank()),
                None => ("dense", r.len().min(c.len())),
            };
            w.write_record([
                id.to_string(),
                r.start.to_string(),
                r.end.to_string(),
                c.start.to_string(),
                c.end.to_string(),
                kind.to_string(),
                rank.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn reduce(parts: Vec<Vec<c64>>, n: usize) -> Vec<c64> {
    let mut it = parts.into_iter();
    let mut out = it.next().unwrap_or_else(|| vec![ZERO; n]);
    for p in it {
        for (o, x) in out.iter_mut().zip(p) {
            *o += x;
        }
    }
    out
}

/// `w = A^H v` in tree order.
pub fn matvec_h(h: &HMatrix, v: &[c64], workers: usize) -> Result<Vec<c64>> {
    h.product(v, workers, false)
}

/// `w = (A^H)^* v`, the conjugate-transposed product.
pub fn matvec_h_adjoint(h: &HMatrix, v: &[c64], workers: usize) -> Result<Vec<c64>> {
    h.product(v, workers, true)
}

/// Exact element counts; admissible leaves count `k (|t| + |s| + 1)`.
pub fn storage_report(h: &HMatrix) -> StorageReport {
    let adm = h.lowrank.iter().map(|s| s.storage() as u64).sum();
    StorageReport::new(adm, h.dense.elements(), &h.bct, h.k_max(), 0)
}

/// The bound `c_sp k_max (L_I |I| + L_J |J|)` evaluated with the
/// measured constants of `h`.
pub fn h_storage_bound(h: &HMatrix) -> u64 {
    storage_bounds(&h.bct, h.k_max(), 0).0
}

pub fn to_dense(h: &HMatrix) -> Result<Mat<c64>> {
    to_dense_capped(h, DENSE_CAP)
}

pub fn to_dense_capped(h: &HMatrix, cap: usize) -> Result<Mat<c64>> {
    let requested = h.nrows().saturating_mul(h.ncols());
    if requested > cap {
        return Err(Error::Capacity { requested, cap });
    }
    let mut out = Mat::<c64>::zeros(h.nrows(), h.ncols());
    for id in 0..h.bct.leaves().len() {
        let (r, c) = (h.bct.row_range(id), h.bct.col_range(id));
        let block = match h.lowrank(id) {
            Some(s) => s.to_dense(),
            None => h.dense.blocks[h.slot[id]].clone(),
        };
        out.as_mut()
            .submatrix_mut(r.start, c.start, r.len(), c.len())
            .copy_from(&block);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{build_block_tree, build_cluster_tree, AdmissibilityParams, Criterion};
    use crate::geometry::{generate_sphere, Geometry, Point3};
    use crate::kernels::{KernelKind, KernelSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn setup(n: usize, eta: f64, kind: KernelKind) -> (Arc<BlockClusterTree>, EntryOracle) {
        let g = generate_sphere(n, 1.0, 0).unwrap();
        let t = Arc::new(build_cluster_tree(&g, 30).unwrap());
        let bct = Arc::new(build_block_tree(
            t.clone(),
            t.clone(),
            AdmissibilityParams::new(eta, Criterion::Weak).unwrap(),
        ));
        let spec = KernelSpec::for_geometry(kind, 3.0, &g).unwrap();
        (bct, EntryOracle::symmetric(&g, &t, spec).unwrap())
    }

    fn random_vec(n: usize, seed: u64) -> Vec<c64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                c64::new(
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                )
            })
            .collect()
    }

    fn dense_mv(d: &Mat<c64>, v: &[c64]) -> Vec<c64> {
        let mut y = vec![ZERO; d.nrows()];
        gemv_acc(d, v, &mut y);
        y
    }

    fn rel(a: &[c64], b: &[c64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den).sqrt()
    }

    fn tol(e: f64) -> (ToleranceSpec, ToleranceSpec) {
        (
            ToleranceSpec::relative(e),
            ToleranceSpec::relative(e / 10.0),
        )
    }

    #[test]
    fn all_dense_is_exact() {
        let (bct, o) = setup(300, 1e-12, KernelKind::Helmholtz);
        let (a, b) = tol(1e-4);
        let h = assemble_h(&o, &bct, a, b, 2);
        let d = o.dense_matrix(DENSE_CAP).unwrap();
        assert_eq!(to_dense(&h).unwrap(), d);
        let r = storage_report(&h);
        assert_eq!(r.adm_elements, 0);
        assert_eq!(r.dense_elements, 300 * 300);
        assert_eq!(r.total_elements, r.adm_elements + r.dense_elements);
    }

    #[test]
    fn single_admissible_root_block() {
        let a = generate_sphere(60, 1.0, 0).unwrap();
        let b = Geometry::new(
            a.points()
                .iter()
                .map(|&p| p + Point3::new(30.0, 0.0, 0.0))
                .collect(),
            a.weights().to_vec(),
            "",
        )
        .unwrap();
        let (ta, tb) = (
            Arc::new(build_cluster_tree(&a, 10).unwrap()),
            Arc::new(build_cluster_tree(&b, 10).unwrap()),
        );
        let bct = Arc::new(build_block_tree(
            ta.clone(),
            tb.clone(),
            AdmissibilityParams::new(10.0, Criterion::Strong).unwrap(),
        ));
        assert_eq!(bct.leaves().len(), 1);
        let o = EntryOracle::new(&a, &ta, &b, &tb, KernelSpec::laplace(1e-3).unwrap()).unwrap();
        let (e1, e2) = tol(1e-6);
        let h = assemble_h(&o, &bct, e1, e2, 1);
        let k = h.lowrank(0).unwrap().rank();
        assert_eq!(storage_report(&h).adm_elements, (k * (60 + 60 + 1)) as u64);
        let d = to_dense(&h).unwrap();
        assert!((&d - &h.lowrank(0).unwrap().to_dense()).norm_l2() == 0.0);
    }

    #[test]
    fn sphere_accuracy_and_products() {
        let (bct, o) = setup(1500, 10.0, KernelKind::Laplace);
        let (a, b) = tol(1e-4);
        let h = assemble_h(&o, &bct, a, b, 4);
        let d = o.dense_matrix(DENSE_CAP).unwrap();
        let hd = to_dense(&h).unwrap();
        let err = (&d - &hd).norm_l2() / d.norm_l2();
        assert!(err <= 1e-3, "relative error {err}");

        let v = random_vec(1500, 1);
        let before = h.leaf_visits();
        let w1 = matvec_h(&h, &v, 1).unwrap();
        assert_eq!(h.leaf_visits() - before, bct.leaves().len() as u64);
        let w8 = matvec_h(&h, &v, 8).unwrap();
        assert!(rel(&w1, &w8) <= 1e-12);
        assert!(rel(&w1, &dense_mv(&hd, &v)) <= 1e-12);

        let wa = matvec_h_adjoint(&h, &v, 3).unwrap();
        let hd_adj = hd.adjoint().to_owned();
        assert!(rel(&wa, &dense_mv(&hd_adj, &v)) <= 1e-12);

        let report = storage_report(&h);
        assert!(report.adm_elements <= h_storage_bound(&h));
    }

    #[test]
    fn workers_do_not_change_factors() {
        let (bct, o) = setup(900, 10.0, KernelKind::Helmholtz);
        let (a, b) = tol(1e-4);
        let h1 = assemble_h(&o, &bct, a, b, 1);
        let h8 = assemble_h(&o, &bct, a, b, 8);
        for &id in bct.admissible() {
            let (s1, s8) = (h1.lowrank(id).unwrap(), h8.lowrank(id).unwrap());
            assert_eq!(s1.sigma, s8.sigma);
            assert_eq!(s1.u, s8.u);
            assert_eq!(s1.v, s8.v);
        }
    }

    #[test]
    fn linearity_and_zero() {
        let (bct, o) = setup(600, 10.0, KernelKind::Helmholtz);
        let (a, b) = tol(1e-4);
        let h = assemble_h(&o, &bct, a, b, 2);
        let zero = vec![ZERO; 600];
        assert!(matvec_h(&h, &zero, 2).unwrap().iter().all(|x| *x == ZERO));
        let (u, v) = (random_vec(600, 2), random_vec(600, 3));
        let (al, be) = (c64::new(0.3, -1.2), c64::new(2.0, 0.5));
        let comb: Vec<c64> = u.iter().zip(&v).map(|(x, y)| al * x + be * y).collect();
        let lhs = matvec_h(&h, &comb, 2).unwrap();
        let (hu, hv) = (matvec_h(&h, &u, 2).unwrap(), matvec_h(&h, &v, 2).unwrap());
        let rhs: Vec<c64> = hu.iter().zip(&hv).map(|(x, y)| al * x + be * y).collect();
        assert!(rel(&lhs, &rhs) <= 1e-12);
        assert!(matches!(
            matvec_h(&h, &v[..10], 1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn approximately_symmetric() {
        let (bct, o) = setup(700, 10.0, KernelKind::Helmholtz);
        let eps = 1e-4;
        let (a, b) = tol(eps);
        let h = assemble_h(&o, &bct, a, b, 1);
        let hd = to_dense(&h).unwrap();
        let asym = (&hd - hd.transpose()).norm_l2();
        assert!(asym <= 2.0 * eps * 10.0 * hd.norm_l2());
    }

    #[test]
    fn structure_csv() {
        let (bct, o) = setup(400, 10.0, KernelKind::Laplace);
        let (a, b) = tol(1e-3);
        let h = assemble_h(&o, &bct, a, b, 1);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        h.write_structure_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("block_id,row_lo,row_hi,col_lo,col_hi,kind,rank"));
        assert_eq!(text.lines().count(), bct.leaves().len() + 1);
        assert!(matches!(
            to_dense_capped(&h, 10),
            Err(Error::Capacity { .. })
        ));
    }
}
