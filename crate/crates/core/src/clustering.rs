//! Cluster trees, admissibility and block cluster trees.

use std::fmt::Write as _;
use std::ops::Range;
use std::sync::Arc;

use faer::{Mat, Side};

use crate::error::{invalid, Result};
use crate::geometry::{bbox_of_points, Aabb, Geometry, Point3};

/// One node of a [`ClusterTree`]. `range` indexes tree order.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub range: Range<usize>,
    pub bbox: Aabb,
    pub level: usize,
    pub children: Option<[usize; 2]>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.range.len()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// Binary cluster tree over the indices of a geometry.
///
/// `perm[k]` is the original index of the point at tree position `k`. Node 0
/// is the root.
#[derive(Clone, Debug)]
pub struct ClusterTree {
    perm: Vec<usize>,
    inverse: Vec<usize>,
    nodes: Vec<Cluster>,
    n_min: usize,
}

impl ClusterTree {
    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn n_min(&self) -> usize {
        self.n_min
    }

    pub fn nodes(&self) -> &[Cluster] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Cluster {
        &self.nodes[id]
    }

    /// Tree position to original index.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Original index to tree position.
    pub fn inverse_permutation(&self) -> &[usize] {
        &self.inverse
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_leaf())
    }

    /// Number of levels, so a single-node tree has depth 1.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|c| c.level).max().unwrap_or(0) + 1
    }

    /// Reorders a vector given in original numbering into tree order.
    pub fn to_tree_order<T: Copy>(&self, v: &[T]) -> Vec<T> {
        self.perm.iter().map(|&i| v[i]).collect()
    }

    /// Reorders a vector given in tree order back into original numbering.
    pub fn from_tree_order<T: Copy>(&self, v: &[T]) -> Vec<T> {
        self.inverse.iter().map(|&k| v[k]).collect()
    }

    /// One line per node: `id range level lo hi children`.
    pub fn debug_dump(&self) -> String {
        let mut s = String::new();
        for (id, c) in self.nodes.iter().enumerate() {
            let kids = match c.children {
                Some([a, b]) => format!("{a},{b}"),
                None => "-".into(),
            };
            let _ = writeln!(
                s,
                "{id} [{}, {}) level={} lo=({:.6e},{:.6e},{:.6e}) hi=({:.6e},{:.6e},{:.6e}) children={kids}",
                c.range.start, c.range.end, c.level,
                c.bbox.lo.x, c.bbox.lo.y, c.bbox.lo.z, c.bbox.hi.x, c.bbox.hi.y, c.bbox.hi.z,
            );
        }
        s
    }
}

fn principal_axis(points: &[Point3], idx: &[usize]) -> Option<Point3> {
    let n = idx.len() as f64;
    let mut mean = Point3::default();
    for &i in idx {
        mean = mean + points[i];
    }
    mean = mean * (1.0 / n);
    let mut cov = [[0.0f64; 3]; 3];
    for &i in idx {
        let d = (points[i] - mean).to_array();
        for a in 0..3 {
            for b in 0..3 {
                cov[a][b] += d[a] * d[b];
            }
        }
    }
    let trace = cov[0][0] + cov[1][1] + cov[2][2];
    if !(trace > 0.0) {
        return None;
    }
    let m = Mat::<f64>::from_fn(3, 3, |a, b| cov[a][b]);
    let evd = m.self_adjoint_eigen(Side::Lower).ok()?;
    // eigenvalues ascend, so the dominant vector is the last column
    let v = evd.U().col(2);
    let mut axis = Point3::new(v[0], v[1], v[2]);
    let comps = axis.to_array();
    let big = (0..3)
        .max_by(|&a, &b| comps[a].abs().total_cmp(&comps[b].abs()))
        .unwrap();
    if comps[big] < 0.0 {
        axis = axis * -1.0;
    }
    Some(axis)
}

/// Builds a cluster tree by recursive principal-axis median splits.
///
/// A cluster is split when it holds more than `2 * n_min` points. Points are
/// ordered by their projection on the dominant covariance eigenvector, ties
/// broken by original index, and cut at the median. Coincident points are
/// split in index order.
pub fn build_cluster_tree(geometry: &Geometry, n_min: usize) -> Result<ClusterTree> {
    if n_min == 0 {
        return Err(invalid("n_min must be at least 1"));
    }
    let points = geometry.points();
    let n = points.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut nodes = vec![Cluster {
        range: 0..n,
        bbox: geometry.bounding_box(),
        level: 0,
        children: None,
    }];
    let mut stack = vec![0usize];
    while let Some(id) = stack.pop() {
        let range = nodes[id].range.clone();
        if range.len() <= 2 * n_min {
            continue;
        }
        let slice = &mut perm[range.clone()];
        if let Some(axis) = principal_axis(points, slice) {
            let mut keyed: Vec<(f64, usize)> =
                slice.iter().map(|&i| (points[i].dot(axis), i)).collect();
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for (dst, (_, i)) in slice.iter_mut().zip(keyed) {
                *dst = i;
            }
        } else {
            slice.sort_unstable();
        }
        let mid = range.start + range.len() / 2;
        let level = nodes[id].level + 1;
        let first = nodes.len();
        for r in [range.start..mid, mid..range.end] {
            let pts: Vec<Point3> = perm[r.clone()].iter().map(|&i| points[i]).collect();
            nodes.push(Cluster {
                bbox: bbox_of_points(&pts),
                range: r,
                level,
                children: None,
            });
        }
        nodes[id].children = Some([first, first + 1]);
        stack.push(first + 1);
        stack.push(first);
    }
    let mut inverse = vec![0; n];
    for (k, &i) in perm.iter().enumerate() {
        inverse[i] = k;
    }
    Ok(ClusterTree {
        perm,
        inverse,
        nodes,
        n_min,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    /// `eta * dist > max(diam)`
    Strong,
    /// `eta * dist > min(diam)`
    Weak,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmissibilityParams {
    pub eta: f64,
    pub criterion: Criterion,
}

impl AdmissibilityParams {
    pub fn new(eta: f64, criterion: Criterion) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(invalid(format!("eta must be positive, got {eta}")));
        }
        Ok(Self { eta, criterion })
    }
}

pub fn is_admissible(a: &Aabb, b: &Aabb, p: &AdmissibilityParams) -> bool {
    let (da, db) = (a.diam(), b.diam());
    let diam = match p.criterion {
        Criterion::Strong => da.max(db),
        Criterion::Weak => da.min(db),
    };
    p.eta * a.dist(b) > diam
}

/// A leaf of the block cluster tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block {
    pub row: usize,
    pub col: usize,
    pub admissible: bool,
}

/// Leaf partition of `I x J` into admissible and inadmissible blocks.
///
/// Block ids index [`BlockClusterTree::leaves`]. `row_blocks(t)` lists the
/// admissible blocks with row cluster `t` (that is, `row(t)` as blocks),
/// `col_blocks(s)` the admissible blocks with column cluster `s`.
#[derive(Clone, Debug)]
pub struct BlockClusterTree {
    row_tree: Arc<ClusterTree>,
    col_tree: Arc<ClusterTree>,
    params: AdmissibilityParams,
    leaves: Vec<Block>,
    admissible: Vec<usize>,
    inadmissible: Vec<usize>,
    row_map: Vec<Vec<usize>>,
    col_map: Vec<Vec<usize>>,
    lrc: Vec<usize>,
    lcc: Vec<usize>,
    node_count: usize,
}

pub fn build_block_tree(
    row: Arc<ClusterTree>,
    col: Arc<ClusterTree>,
    params: AdmissibilityParams,
) -> BlockClusterTree {
    let mut leaves = Vec::new();
    let mut node_count = 0;
    let mut stack = vec![(row.root(), col.root())];
    while let Some((t, s)) = stack.pop() {
        node_count += 1;
        let (ct, cs) = (row.node(t), col.node(s));
        if is_admissible(&ct.bbox, &cs.bbox, &params) {
            leaves.push(Block {
                row: t,
                col: s,
                admissible: true,
            });
            continue;
        }
        match (ct.children, cs.children) {
            (None, None) => leaves.push(Block {
                row: t,
                col: s,
                admissible: false,
            }),
            (Some([t1, t2]), Some([s1, s2])) => {
                stack.extend([(t2, s2), (t2, s1), (t1, s2), (t1, s1)]);
            }
            (Some([t1, t2]), None) => stack.extend([(t2, s), (t1, s)]),
            (None, Some([s1, s2])) => stack.extend([(t, s2), (t, s1)]),
        }
    }
    let mut row_map = vec![Vec::new(); row.nodes().len()];
    let mut col_map = vec![Vec::new(); col.nodes().len()];
    let mut admissible = Vec::new();
    let mut inadmissible = Vec::new();
    for (id, b) in leaves.iter().enumerate() {
        if b.admissible {
            admissible.push(id);
            row_map[b.row].push(id);
            col_map[b.col].push(id);
        } else {
            inadmissible.push(id);
        }
    }
    let lrc = (0..row_map.len())
        .filter(|&t| !row_map[t].is_empty())
        .collect();
    let lcc = (0..col_map.len())
        .filter(|&s| !col_map[s].is_empty())
        .collect();
    BlockClusterTree {
        row_tree: row,
        col_tree: col,
        params,
        leaves,
        admissible,
        inadmissible,
        row_map,
        col_map,
        lrc,
        lcc,
        node_count,
    }
}

impl BlockClusterTree {
    pub fn row_tree(&self) -> &ClusterTree {
        &self.row_tree
    }

    pub fn col_tree(&self) -> &ClusterTree {
        &self.col_tree
    }

    pub fn row_tree_arc(&self) -> &Arc<ClusterTree> {
        &self.row_tree
    }

    pub fn col_tree_arc(&self) -> &Arc<ClusterTree> {
        &self.col_tree
    }

    pub fn params(&self) -> AdmissibilityParams {
        self.params
    }

    pub fn nrows(&self) -> usize {
        self.row_tree.len()
    }

    pub fn ncols(&self) -> usize {
        self.col_tree.len()
    }

    /// Number of nodes visited, leaves included.
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn leaves(&self) -> &[Block] {
        &self.leaves
    }

    pub fn block(&self, id: usize) -> &Block {
        &self.leaves[id]
    }

    /// Ids of `P+`.
    pub fn admissible(&self) -> &[usize] {
        &self.admissible
    }

    /// Ids of `P-`.
    pub fn inadmissible(&self) -> &[usize] {
        &self.inadmissible
    }

    pub fn row_range(&self, id: usize) -> Range<usize> {
        self.row_tree.node(self.leaves[id].row).range.clone()
    }

    pub fn col_range(&self, id: usize) -> Range<usize> {
        self.col_tree.node(self.leaves[id].col).range.clone()
    }

    /// Admissible block ids whose row cluster is `t`.
    pub fn row_blocks(&self, t: usize) -> &[usize] {
        &self.row_map[t]
    }

    /// Admissible block ids whose column cluster is `s`.
    pub fn col_blocks(&self, s: usize) -> &[usize] {
        &self.col_map[s]
    }

    /// Row clusters occurring in admissible blocks, ascending id.
    pub fn lrc(&self) -> &[usize] {
        &self.lrc
    }

    /// Column clusters occurring in admissible blocks, ascending id.
    pub fn lcc(&self) -> &[usize] {
        &self.lcc
    }

    /// `|F(t)|`: total column count of the admissible blocks in row `t`.
    pub fn row_far_size(&self, t: usize) -> usize {
        self.row_map[t]
            .iter()
            .map(|&b| self.col_range(b).len())
            .sum()
    }

    /// `|F(s)|`: total row count of the admissible blocks in column `s`.
    pub fn col_far_size(&self, s: usize) -> usize {
        self.col_map[s]
            .iter()
            .map(|&b| self.row_range(b).len())
            .sum()
    }

    pub fn sparsity_constant(&self) -> usize {
        let r = self
            .lrc
            .iter()
            .map(|&t| self.row_map[t].len())
            .max()
            .unwrap_or(0);
        let c = self
            .lcc
            .iter()
            .map(|&s| self.col_map[s].len())
            .max()
            .unwrap_or(0);
        r.max(c)
    }
}

pub fn sparsity_constant(bct: &BlockClusterTree) -> usize {
    bct.sparsity_constant()
}

/// Storage bounds `(h_bound, uh_bound)` in matrix elements for the given
/// maximal block rank and maximal cluster rank.
pub fn storage_bounds(bct: &BlockClusterTree, k_max: usize, l_max: usize) -> (u64, u64) {
    let c_sp = bct.sparsity_constant() as u128;
    let (ni, nj) = (bct.nrows() as u128, bct.ncols() as u128);
    let depth_sum = bct.row_tree().depth() as u128 * ni + bct.col_tree().depth() as u128 * nj;
    let h = c_sp * k_max as u128 * depth_sum;
    let l = l_max as u128;
    let n_min = bct.row_tree().n_min().min(bct.col_tree().n_min()) as u128;
    let coupling = (l * l * 2 * c_sp * ni.min(nj)).div_ceil(n_min);
    let uh = l * depth_sum + coupling;
    (clamp_u64(h), clamp_u64(uh))
}

fn clamp_u64(x: u128) -> u64 {
    x.min(u64::MAX as u128) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generate_sphere;

    fn line(n: usize) -> Geometry {
        let pts = (0..n).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        Geometry::new(pts, vec![1.0; n], "line").unwrap()
    }

    fn check_partition(tree: &ClusterTree) {
        let mut seen = vec![false; tree.len()];
        for &i in tree.permutation() {
            assert!(!seen[i]);
            seen[i] = true;
        }
        for c in tree.nodes() {
            match c.children {
                Some([a, b]) => {
                    let (ra, rb) = (&tree.node(a).range, &tree.node(b).range);
                    assert_eq!(ra.start, c.range.start);
                    assert_eq!(ra.end, rb.start);
                    assert_eq!(rb.end, c.range.end);
                    assert!(!ra.is_empty() && !rb.is_empty());
                    assert_eq!(tree.node(a).level, c.level + 1);
                }
                None => {
                    assert!(c.size() >= 1 && c.size() <= 2 * tree.n_min());
                }
            }
        }
    }

    #[test]
    fn collinear_median_split() {
        let g = line(4);
        let tree = build_cluster_tree(&g, 1).unwrap();
        let root = tree.node(0);
        let [a, b] = root.children.unwrap();
        let left: Vec<usize> = tree.permutation()[tree.node(a).range.clone()].to_vec();
        let right: Vec<usize> = tree.permutation()[tree.node(b).range.clone()].to_vec();
        assert_eq!(left, vec![0, 1]);
        assert_eq!(right, vec![2, 3]);
        // size 2 <= 2 n_min, so the children are leaves
        assert!(tree.node(a).is_leaf() && tree.node(b).is_leaf());
        assert_eq!(tree.depth(), 2);

        let tree = build_cluster_tree(&line(8), 1).unwrap();
        assert_eq!(tree.depth(), 3);
        check_partition(&tree);
    }

    #[test]
    fn large_n_min_gives_single_node() {
        let g = generate_sphere(100, 1.0, 0).unwrap();
        let tree = build_cluster_tree(&g, 50).unwrap();
        assert_eq!(tree.nodes().len(), 1);
        assert!(tree.node(0).is_leaf());
        assert_eq!(tree.depth(), 1);
        assert!(build_cluster_tree(&g, 0).is_err());
    }

    #[test]
    fn sphere_tree_shape() {
        let g = generate_sphere(1000, 1.0, 0).unwrap();
        let tree = build_cluster_tree(&g, 30).unwrap();
        check_partition(&tree);
        for l in tree.leaves() {
            let s = tree.node(l).size();
            assert!((1..=60).contains(&s));
        }
        let bound = (1000f64 / 30.0).log2().ceil() as usize + 2;
        assert!(tree.depth() <= bound);
        for c in tree.nodes() {
            for &i in &tree.permutation()[c.range.clone()] {
                assert!(c.bbox.contains(g.points()[i]));
            }
        }
    }

    #[test]
    fn coincident_points_split_by_index() {
        let g = Geometry::new(vec![Point3::new(1.0, 1.0, 1.0); 10], vec![1.0; 10], "").unwrap();
        let tree = build_cluster_tree(&g, 1).unwrap();
        check_partition(&tree);
        assert_eq!(tree.permutation(), (0..10).collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn tree_order_round_trip() {
        let g = generate_sphere(200, 1.0, 4).unwrap();
        let tree = build_cluster_tree(&g, 8).unwrap();
        let v: Vec<usize> = (0..200).collect();
        assert_eq!(tree.from_tree_order(&tree.to_tree_order(&v)), v);
        assert_eq!(tree.debug_dump().lines().count(), tree.nodes().len());
    }

    fn cube(lo: f64, hi: f64) -> Aabb {
        Aabb::new(Point3::new(lo, lo, lo), Point3::new(hi, hi, hi)).unwrap()
    }

    #[test]
    fn admissibility_examples() {
        let unit = cube(0.0, 1.0);
        for c in [Criterion::Strong, Criterion::Weak] {
            let p = AdmissibilityParams::new(10.0, c).unwrap();
            assert!(!is_admissible(&unit, &unit, &p));
        }
        let weak = AdmissibilityParams::new(10.0, Criterion::Weak).unwrap();
        assert!(is_admissible(&unit, &cube(3.0, 4.0), &weak));
        let strong = AdmissibilityParams::new(0.1, Criterion::Strong).unwrap();
        assert!(!is_admissible(&unit, &cube(1.05, 2.05), &strong));
        assert!(AdmissibilityParams::new(0.0, Criterion::Weak).is_err());
    }

    #[test]
    fn admissibility_boundary_is_strict() {
        let a = Aabb::new(Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)).unwrap();
        let b = Aabb::new(Point3::new(2.0, 0.0, 0.0), Point3::new(3.0, 0.0, 0.0)).unwrap();
        // dist = diam = 1
        let p = AdmissibilityParams::new(1.0, Criterion::Strong).unwrap();
        assert!(!is_admissible(&a, &b, &p));
    }

    fn tree_arc(g: &Geometry, n_min: usize) -> Arc<ClusterTree> {
        Arc::new(build_cluster_tree(g, n_min).unwrap())
    }

    #[test]
    fn separated_geometries_give_one_block() {
        let a = generate_sphere(100, 1.0, 0).unwrap();
        let shifted: Vec<Point3> = a
            .points()
            .iter()
            .map(|&p| p + Point3::new(100.0, 0.0, 0.0))
            .collect();
        let b = Geometry::new(shifted, a.weights().to_vec(), "b").unwrap();
        let p = AdmissibilityParams::new(1e6, Criterion::Strong).unwrap();
        let bct = build_block_tree(tree_arc(&a, 10), tree_arc(&b, 10), p);
        assert_eq!(bct.admissible().len(), 1);
        assert!(bct.inadmissible().is_empty());
        assert_eq!(bct.sparsity_constant(), 1);
        let (h, _) = storage_bounds(&bct, 0, 0);
        assert_eq!(h, 0);
    }

    #[test]
    fn tiny_eta_gives_all_dense() {
        let g = generate_sphere(300, 1.0, 0).unwrap();
        let t = tree_arc(&g, 10);
        let p = AdmissibilityParams::new(1e-12, Criterion::Weak).unwrap();
        let bct = build_block_tree(t.clone(), t.clone(), p);
        assert!(bct.admissible().is_empty());
        assert_eq!(bct.sparsity_constant(), 0);
        assert!(bct.lrc().is_empty() && bct.lcc().is_empty());
        for b in bct.leaves() {
            assert!(t.node(b.row).is_leaf() && t.node(b.col).is_leaf());
        }
        let nl = t.leaves().count();
        assert_eq!(bct.leaves().len(), nl * nl);
    }

    #[test]
    fn leaves_partition_product_exhaustively() {
        let g = generate_sphere(500, 1.0, 2).unwrap();
        let t = tree_arc(&g, 10);
        for crit in [Criterion::Weak, Criterion::Strong] {
            let p = AdmissibilityParams::new(2.0, crit).unwrap();
            let bct = build_block_tree(t.clone(), t.clone(), p);
            let mut cover = vec![0u8; 500 * 500];
            for id in 0..bct.leaves().len() {
                for i in bct.row_range(id) {
                    for j in bct.col_range(id) {
                        cover[i * 500 + j] += 1;
                    }
                }
            }
            assert!(cover.iter().all(|&c| c == 1));
            for (id, b) in bct.leaves().iter().enumerate() {
                let (ct, cs) = (t.node(b.row), t.node(b.col));
                assert_eq!(
                    b.admissible,
                    is_admissible(&ct.bbox, &cs.bbox, &p),
                    "block {id}"
                );
                if !b.admissible {
                    assert!(ct.is_leaf() && cs.is_leaf());
                }
            }
        }
    }

    #[test]
    fn sphere_2000_coverage_and_maps() {
        let g = generate_sphere(2000, 1.0, 0).unwrap();
        let t = tree_arc(&g, 30);
        let p = AdmissibilityParams::new(10.0, Criterion::Weak).unwrap();
        let bct = build_block_tree(t.clone(), t.clone(), p);
        let area: usize = (0..bct.leaves().len())
            .map(|id| bct.row_range(id).len() * bct.col_range(id).len())
            .sum();
        assert_eq!(area, 2000 * 2000);

        // independent recount of the sparsity constant from the P+ list
        let mut row_count = vec![0usize; t.nodes().len()];
        let mut col_count = vec![0usize; t.nodes().len()];
        for &id in bct.admissible() {
            let b = bct.block(id);
            row_count[b.row] += 1;
            col_count[b.col] += 1;
        }
        let brute = row_count.iter().chain(&col_count).copied().max().unwrap();
        assert_eq!(bct.sparsity_constant(), brute);

        for &id in bct.admissible() {
            let b = *bct.block(id);
            assert!(bct.row_blocks(b.row).contains(&id));
            assert!(bct.col_blocks(b.col).contains(&id));
        }
        for &tau in bct.lrc() {
            for &id in bct.row_blocks(tau) {
                assert!(bct.block(id).admissible && bct.block(id).row == tau);
            }
        }
        for &sigma in bct.lcc() {
            for &id in bct.col_blocks(sigma) {
                assert!(bct.block(id).admissible && bct.block(id).col == sigma);
            }
        }
    }

    #[test]
    fn one_sided_split_refines_non_leaf() {
        let small = generate_sphere(10, 1.0, 0).unwrap();
        let big = generate_sphere(400, 1.0, 1).unwrap();
        let p = AdmissibilityParams::new(1e-9, Criterion::Weak).unwrap();
        let bct = build_block_tree(tree_arc(&small, 10), tree_arc(&big, 10), p);
        let cols = tree_arc(&big, 10);
        assert_eq!(bct.leaves().len(), cols.leaves().count());
        assert!(bct.leaves().iter().all(|b| b.row == 0));
    }

    #[test]
    fn storage_bound_substitution() {
        let a = generate_sphere(50, 1.0, 0).unwrap();
        let shifted: Vec<Point3> = a
            .points()
            .iter()
            .map(|&p| p + Point3::new(50.0, 0.0, 0.0))
            .collect();
        let b = Geometry::new(shifted, a.weights().to_vec(), "b").unwrap();
        let p = AdmissibilityParams::new(1e6, Criterion::Strong).unwrap();
        // single-node trees: L = 1
        let bct = build_block_tree(tree_arc(&a, 50), tree_arc(&b, 50), p);
        let (h, uh) = storage_bounds(&bct, 7, 3);
        assert_eq!(h, 2 * 7 * 50);
        assert_eq!(uh, 3 * 100 + (9 * 2 * 50u64).div_ceil(50));
    }
}
