//! Adaptive cross approximation, QR/SVD recompression and rank truncation.

use faer::{c64, Mat};

use crate::dense::{dotc, norm2, take_cols, thin_qr, thin_svd, ZERO};
use crate::kernels::BlockEntries;

/// Low-rank factors of a block `A ~ X Y^H`.
#[derive(Clone, Debug)]
pub struct LowRankFactors {
    pub x: Mat<c64>,
    pub y: Mat<c64>,
}

impl LowRankFactors {
    pub fn rank(&self) -> usize {
        self.x.ncols()
    }

    pub fn to_dense(&self) -> Mat<c64> {
        &self.x * self.y.adjoint()
    }
}

/// Block in SVD form `U diag(sigma) V^H` with orthonormal `U`, `V`.
#[derive(Clone, Debug)]
pub struct SvdForm {
    pub u: Mat<c64>,
    pub sigma: Vec<f64>,
    pub v: Mat<c64>,
}

impl SvdForm {
    pub fn empty(nrows: usize, ncols: usize) -> Self {
        Self {
            u: Mat::zeros(nrows, 0),
            sigma: Vec::new(),
            v: Mat::zeros(ncols, 0),
        }
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `k (m + n + 1)`.
    pub fn storage(&self) -> usize {
        self.rank() * (self.nrows() + self.ncols() + 1)
    }

    /// `U diag(sigma)`.
    pub fn scaled_u(&self) -> Mat<c64> {
        Mat::from_fn(self.nrows(), self.rank(), |i, l| {
            self.u[(i, l)] * self.sigma[l]
        })
    }

    /// `V diag(sigma)`.
    pub fn scaled_v(&self) -> Mat<c64> {
        Mat::from_fn(self.ncols(), self.rank(), |i, l| {
            self.v[(i, l)] * self.sigma[l]
        })
    }

    pub fn to_dense(&self) -> Mat<c64> {
        &self.scaled_u() * self.v.adjoint()
    }

    /// `y += U diag(sigma) V^H x`.
    pub fn apply_acc(&self, x: &[c64], y: &mut [c64]) {
        for l in 0..self.rank() {
            let t = dotc(self.v.col_as_slice(l), x) * self.sigma[l];
            crate::dense::axpy(t, self.u.col_as_slice(l), y);
        }
    }

    /// `y += V diag(sigma) U^H x`.
    pub fn apply_adjoint_acc(&self, x: &[c64], y: &mut [c64]) {
        for l in 0..self.rank() {
            let t = dotc(self.u.col_as_slice(l), x) * self.sigma[l];
            crate::dense::axpy(t, self.v.col_as_slice(l), y);
        }
    }
}

/// Truncation rule: keep singular values above `rel_eps * sigma_1` and above
/// `abs_floor`, at most `max_rank` of them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToleranceSpec {
    pub rel_eps: f64,
    pub max_rank: usize,
    pub abs_floor: f64,
}

/// Floor that only removes exact or denormal zeros.
pub const TINY_FLOOR: f64 = 1e-300;

impl ToleranceSpec {
    pub fn relative(rel_eps: f64) -> Self {
        Self {
            rel_eps,
            max_rank: usize::MAX,
            abs_floor: TINY_FLOOR,
        }
    }

    /// Keep every singular value above `threshold`.
    pub fn absolute(threshold: f64) -> Self {
        Self {
            rel_eps: 0.0,
            max_rank: usize::MAX,
            abs_floor: threshold.max(TINY_FLOOR),
        }
    }

    pub fn with_max_rank(self, max_rank: usize) -> Self {
        Self { max_rank, ..self }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Pivoting {
    #[default]
    Partial,
    Rook,
}

pub fn truncation_rank(sigma: &[f64], tol: &ToleranceSpec) -> usize {
    let Some(&s0) = sigma.first() else {
        return 0;
    };
    let cut = tol.rel_eps * s0;
    let l = sigma
        .iter()
        .position(|&s| s <= cut || s <= tol.abs_floor)
        .unwrap_or(sigma.len());
    l.min(tol.max_rank)
}

fn argmax_unused(v: &[c64], used: &[bool]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (x, &u)) in v.iter().zip(used).enumerate() {
        if u {
            continue;
        }
        let a = x.norm();
        if best.is_none_or(|(_, b)| a > b) {
            best = Some((i, a));
        }
    }
    best
}

struct Cross<'a, E: BlockEntries + ?Sized> {
    entries: &'a E,
    us: Vec<Vec<c64>>,
    vs: Vec<Vec<c64>>,
}

impl<E: BlockEntries + ?Sized> Cross<'_, E> {
    fn residual_row(&self, i: usize, out: &mut [c64]) {
        self.entries.row(i, out);
        for (u, v) in self.us.iter().zip(&self.vs) {
            let a = u[i];
            for (o, vj) in out.iter_mut().zip(v) {
                *o -= a * vj;
            }
        }
    }

    fn residual_col(&self, j: usize, out: &mut [c64]) {
        self.entries.col(j, out);
        for (u, v) in self.us.iter().zip(&self.vs) {
            let b = v[j];
            for (o, ui) in out.iter_mut().zip(u) {
                *o -= b * ui;
            }
        }
    }
}

pub fn aca<E: BlockEntries + ?Sized>(entries: &E, tol: &ToleranceSpec) -> LowRankFactors {
    aca_with(entries, tol, Pivoting::Partial)
}

/// Cross approximation with partial or rook pivoting.
///
/// Stops once the newest cross satisfies `|u| |v| <= rel_eps * |S|`, where
/// `|S|` is the running Frobenius norm of the approximation, or once the rank
/// reaches `min(m, n, max_rank)`.
pub fn aca_with<E: BlockEntries + ?Sized>(
    entries: &E,
    tol: &ToleranceSpec,
    pivoting: Pivoting,
) -> LowRankFactors {
    let (m, n) = (entries.nrows(), entries.ncols());
    let kmax = m.min(n).min(tol.max_rank);
    let mut cross = Cross {
        entries,
        us: Vec::new(),
        vs: Vec::new(),
    };
    let mut used_rows = vec![false; m];
    let mut used_cols = vec![false; n];
    let mut row = vec![ZERO; n];
    let mut col = vec![ZERO; m];
    let mut norm_sq = 0.0f64;
    let mut pivot_row = 0usize;
    let mut attempts = 0usize;

    while cross.us.len() < kmax && attempts < m {
        attempts += 1;
        used_rows[pivot_row] = true;
        cross.residual_row(pivot_row, &mut row);
        let Some((mut j, mut best)) = argmax_unused(&row, &used_cols) else {
            break;
        };
        if best == 0.0 {
            match used_rows.iter().position(|&u| !u) {
                Some(next) => {
                    pivot_row = next;
                    continue;
                }
                None => break,
            }
        }
        cross.residual_col(j, &mut col);
        if pivoting == Pivoting::Rook {
            for _ in 0..8 {
                let Some((i2, a2)) = argmax_unused(&col, &used_rows) else {
                    break;
                };
                if a2 <= col[pivot_row].norm() {
                    break;
                }
                pivot_row = i2;
                used_rows[pivot_row] = true;
                cross.residual_row(pivot_row, &mut row);
                let Some((j2, b2)) = argmax_unused(&row, &used_cols) else {
                    break;
                };
                let moved = j2 != j;
                j = j2;
                best = b2;
                if !moved {
                    break;
                }
                cross.residual_col(j, &mut col);
            }
            if best == 0.0 {
                continue;
            }
        }
        used_cols[j] = true;
        let scale = c64::new(1.0, 0.0) / row[j];
        let v: Vec<c64> = row.iter().map(|x| x * scale).collect();
        let u = col.clone();

        let (nu, nv) = (norm2(&u), norm2(&v));
        let mut mixed = 0.0;
        for (ul, vl) in cross.us.iter().zip(&cross.vs) {
            // <u_l v_l^T, u v^T>_F = (u_l^H u)(v_l^H v)
            mixed += (dotc(ul, &u) * dotc(vl, &v)).re;
        }
        norm_sq = (norm_sq + 2.0 * mixed + nu * nu * nv * nv).max(0.0);
        cross.us.push(u);
        cross.vs.push(v);

        if nu * nv <= tol.rel_eps * norm_sq.sqrt() {
            break;
        }
        let Some((next, _)) = argmax_unused(cross.us.last().unwrap(), &used_rows) else {
            break;
        };
        pivot_row = next;
    }

    let k = cross.us.len();
    LowRankFactors {
        x: Mat::from_fn(m, k, |i, l| cross.us[l][i]),
        y: Mat::from_fn(n, k, |j, l| cross.vs[l][j].conj()),
    }
}

/// Reduces `X Y^H` to truncated SVD form via thin QR of both factors and an
/// SVD of the small core.
pub fn recompress(f: &LowRankFactors, tol: &ToleranceSpec) -> SvdForm {
    let (m, n, k) = (f.x.nrows(), f.y.nrows(), f.rank());
    if k == 0 {
        return SvdForm::empty(m, n);
    }
    let (qx, rx) = thin_qr(f.x.as_ref());
    let (qy, ry) = thin_qr(f.y.as_ref());
    let core = &rx * ry.adjoint();
    let (w, s, z) = thin_svd(core.as_ref());
    let r = truncation_rank(&s, tol);
    SvdForm {
        u: &qx * take_cols(&w, r),
        sigma: s[..r].to_vec(),
        v: &qy * take_cols(&z, r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{build_block_tree, build_cluster_tree, AdmissibilityParams, Criterion};
    use crate::dense::orthonormality_defect;
    use crate::geometry::generate_sphere;
    use crate::kernels::{EntryOracle, FnEntries, KernelKind, KernelSpec};
    use faer::MatRef;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::sync::Arc;

    fn random(m: usize, n: usize, rng: &mut ChaCha8Rng) -> Mat<c64> {
        Mat::from_fn(m, n, |_, _| {
            c64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
        })
    }

    fn rel_err(a: &Mat<c64>, b: &Mat<c64>) -> f64 {
        (a - b).norm_l2() / b.norm_l2()
    }

    #[test]
    fn truncation_examples() {
        let t = ToleranceSpec::relative(1e-4);
        assert_eq!(truncation_rank(&[1.0, 1e-9], &t), 1);
        assert_eq!(truncation_rank(&[1.0, 1.0, 1.0], &t), 3);
        assert_eq!(truncation_rank(&[], &t), 0);
        assert_eq!(truncation_rank(&[0.0], &t), 0);

        let sigma: Vec<f64> = (0..12).map(|l| 0.1f64.powi(l)).collect();
        let rule = ToleranceSpec::relative(1e-6);
        let oracle = sigma.iter().position(|&s| s <= 1e-6 * sigma[0]).unwrap();
        assert_eq!(truncation_rank(&sigma, &rule), oracle);
        // 0.1^6 rounds to slightly above 1e-6
        assert_eq!(oracle, 7);
        assert_eq!(truncation_rank(&sigma, &rule.with_max_rank(3)), 3);
        assert_eq!(truncation_rank(&sigma, &ToleranceSpec::absolute(0.05)), 2);
    }

    #[test]
    fn truncation_monotone_in_eps() {
        let sigma: Vec<f64> = (0..30).map(|l| (-(l as f64) * 0.7).exp()).collect();
        let mut last = usize::MAX;
        for e in [1e-12, 1e-9, 1e-6, 1e-3, 1e-1, 1.0] {
            let r = truncation_rank(&sigma, &ToleranceSpec::relative(e));
            assert!(r <= last);
            last = r;
        }
    }

    #[test]
    fn rank_one_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(30, 1, &mut rng);
        let y = random(20, 1, &mut rng);
        let d = &x * y.adjoint();
        let f = aca(&d.as_ref(), &ToleranceSpec::relative(1e-8));
        assert!(f.rank() <= 2);
        assert!(rel_err(&f.to_dense(), &d) <= 1e-12);
    }

    #[test]
    fn zero_block_gives_rank_zero() {
        let d = Mat::<c64>::zeros(10, 7);
        let f = aca(&d.as_ref(), &ToleranceSpec::relative(1e-4));
        assert_eq!(f.rank(), 0);
        let s = recompress(&f, &ToleranceSpec::relative(1e-4));
        assert_eq!(s.rank(), 0);
    }

    #[test]
    fn leading_zero_rows_use_fallback() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random(12, 2, &mut rng);
        let y = random(9, 2, &mut rng);
        let mut d = &x * y.adjoint();
        for i in 0..5 {
            for j in 0..9 {
                d[(i, j)] = ZERO;
            }
        }
        for piv in [Pivoting::Partial, Pivoting::Rook] {
            let f = aca_with(&d.as_ref(), &ToleranceSpec::relative(1e-12), piv);
            assert!(rel_err(&f.to_dense(), &d) <= 1e-10, "{piv:?}");
        }
    }

    #[test]
    fn exact_low_rank_terminates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for r in 1..=5 {
            let x = random(50, r, &mut rng);
            let y = random(40, r, &mut rng);
            let d = &x * y.adjoint();
            for piv in [Pivoting::Partial, Pivoting::Rook] {
                let f = aca_with(&d.as_ref(), &ToleranceSpec::relative(1e-12), piv);
                assert!(f.rank() <= r + 1, "rank {} for r={r}", f.rank());
                assert!(rel_err(&f.to_dense(), &d) <= 1e-10);
            }
        }
    }

    #[test]
    fn full_rank_with_zero_eps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = random(6, 4, &mut rng);
        let f = aca(&d.as_ref(), &ToleranceSpec::relative(0.0));
        assert_eq!(f.rank(), 4);
        assert!(rel_err(&f.to_dense(), &d) <= 1e-12);
        let capped = aca(&d.as_ref(), &ToleranceSpec::relative(0.0).with_max_rank(2));
        assert_eq!(capped.rank(), 2);
    }

    #[test]
    fn helmholtz_block() {
        let g = generate_sphere(1500, 1.0, 0).unwrap();
        let t = Arc::new(build_cluster_tree(&g, 30).unwrap());
        let bct = build_block_tree(
            t.clone(),
            t.clone(),
            AdmissibilityParams::new(10.0, Criterion::Weak).unwrap(),
        );
        let spec = KernelSpec::for_geometry(KernelKind::Helmholtz, 5.0, &g).unwrap();
        let o = EntryOracle::symmetric(&g, &t, spec).unwrap();
        // an admissible block close to 80 x 60
        let id = *bct
            .admissible()
            .iter()
            .min_by_key(|&&b| {
                let (r, c) = (bct.row_range(b).len() as i64, bct.col_range(b).len() as i64);
                (r - 80).abs() + (c - 60).abs()
            })
            .unwrap();
        let (rows, cols) = (bct.row_range(id), bct.col_range(id));
        let d = o.dense_block(rows.clone(), cols.clone()).unwrap();
        for piv in [Pivoting::Partial, Pivoting::Rook] {
            let tol = ToleranceSpec::relative(1e-4);
            let f = aca_with(&o.block(rows.clone(), cols.clone()), &tol, piv);
            assert!(rel_err(&f.to_dense(), &d) <= 10.0 * 1e-4, "{piv:?}");
        }
    }

    #[test]
    fn recompress_unit_columns() {
        let mut x = Mat::<c64>::zeros(5, 1);
        x[(2, 0)] = c64::new(1.0, 0.0);
        let f = LowRankFactors {
            x: x.clone(),
            y: x.clone(),
        };
        let s = recompress(&f, &ToleranceSpec::relative(1e-12));
        assert_eq!(s.sigma.len(), 1);
        assert!((s.sigma[0] - 1.0).abs() < 1e-15);
        // U and V agree with X up to a common phase
        let phase = s.u[(2, 0)];
        assert!((phase.norm() - 1.0).abs() < 1e-15);
        assert!((s.v[(2, 0)] - phase).norm() < 1e-15);
    }

    #[test]
    fn recompress_removes_redundancy() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = 4;
        let a = random(60, k, &mut rng);
        let b = random(45, k, &mut rng);
        let mix = random(k, 3 * k, &mut rng);
        // 3k columns spanning a k-dimensional product
        let f = LowRankFactors {
            x: &a * &mix,
            y: &b * random(k, 3 * k, &mut rng),
        };
        let d = f.to_dense();
        let s = recompress(&f, &ToleranceSpec::relative(1e-12));
        let sv = d.singular_values().unwrap();
        let dense_rank = sv.iter().filter(|&&x| x > 1e-12 * sv[0]).count();
        assert_eq!(dense_rank, k);
        assert_eq!(s.rank(), k);
        assert!(rel_err(&s.to_dense(), &d) <= 1e-12);
    }

    #[test]
    fn recompress_error_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for (m, n, k, eps) in [(80, 70, 20, 1e-3), (150, 200, 35, 1e-6), (30, 30, 10, 0.0)] {
            // geometrically decaying spectrum
            let x = Mat::from_fn(m, k, |_, _| c64::new(StandardNormal.sample(&mut rng), 0.0));
            let y = random(n, k, &mut rng);
            let x = Mat::from_fn(m, k, |i, l| x[(i, l)] * 0.5f64.powi(l as i32));
            let f = LowRankFactors { x, y };
            let d = f.to_dense();
            let s = recompress(&f, &ToleranceSpec::relative(eps));
            let err = (&d - &s.to_dense()).singular_values().unwrap()[0];
            let s1 = d.singular_values().unwrap()[0];
            assert!(
                err <= (eps * s1).max(1e-12 * s1) * (1.0 + 1e-10),
                "{err} vs {}",
                eps * s1
            );
            let r = s.rank().max(1) as f64;
            assert!(orthonormality_defect(s.u.as_ref()) <= 1e-12 * r);
            assert!(orthonormality_defect(s.v.as_ref()) <= 1e-12 * r);
            assert!(s.sigma.iter().all(|&x| x > 0.0));
            assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn apply_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = LowRankFactors {
            x: random(20, 3, &mut rng),
            y: random(15, 3, &mut rng),
        };
        let s = recompress(&f, &ToleranceSpec::relative(0.0));
        let d = s.to_dense();
        let x = random(15, 1, &mut rng);
        let xs: Vec<c64> = (0..15).map(|i| x[(i, 0)]).collect();
        let mut y = vec![ZERO; 20];
        s.apply_acc(&xs, &mut y);
        let want = &d * &x;
        for i in 0..20 {
            assert!((y[i] - want[(i, 0)]).norm() <= 1e-12 * want.norm_l2());
        }
        let mut z = vec![ZERO; 15];
        s.apply_adjoint_acc(&y, &mut z);
        let want: Mat<c64> = d.adjoint() * MatRef::from_column_major_slice(&y, 20, 1);
        for i in 0..15 {
            assert!((z[i] - want[(i, 0)]).norm() <= 1e-12 * want.norm_l2());
        }
        let fe = FnEntries {
            nrows: 3,
            ncols: 3,
            f: |i: usize, j: usize| c64::new((i * j) as f64, 0.0),
        };
        assert_eq!(aca(&fe, &ToleranceSpec::relative(1e-12)).rank(), 1);
    }
}
