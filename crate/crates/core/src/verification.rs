//! Error estimation for compressed operators and the a-priori bound for
//! uniform compression.

use std::path::Path;

use faer::{c64, Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::clustering::BlockClusterTree;
use crate::dense::{norm2, spectral_norm};
use crate::error::{invalid, Error, Result};
use crate::hmatrix::{matvec_h, matvec_h_adjoint, HMatrix};
use crate::uniform::{
    agglomeration, matvec_uh, matvec_uh_adjoint, ClusterTolerances, Side, UniformHMatrix,
};

pub const DEFAULT_ITERS: usize = 50;
pub const STAGNATION: f64 = 1e-6;
/// Largest `|I| |J|` accepted by [`global_bound_check`].
pub const BOUND_CHECK_CAP: usize = 1_000_000;

pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &[c64]) -> Vec<c64>;
    fn apply_adjoint(&self, y: &[c64]) -> Vec<c64>;
}

impl LinearOperator for Mat<c64> {
    fn nrows(&self) -> usize {
        Mat::nrows(self)
    }

    fn ncols(&self) -> usize {
        Mat::ncols(self)
    }

    fn apply(&self, x: &[c64]) -> Vec<c64> {
        let mut y = vec![c64::new(0.0, 0.0); Mat::nrows(self)];
        crate::dense::gemv_acc(self, x, &mut y);
        y
    }

    fn apply_adjoint(&self, y: &[c64]) -> Vec<c64> {
        let mut x = vec![c64::new(0.0, 0.0); Mat::ncols(self)];
        crate::dense::gemv_adj(self, y, &mut x);
        x
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn nrows(&self) -> usize {
        (**self).nrows()
    }

    fn ncols(&self) -> usize {
        (**self).ncols()
    }

    fn apply(&self, x: &[c64]) -> Vec<c64> {
        (**self).apply(x)
    }

    fn apply_adjoint(&self, y: &[c64]) -> Vec<c64> {
        (**self).apply_adjoint(y)
    }
}

pub struct HOperator<'a> {
    pub h: &'a HMatrix,
    pub workers: usize,
}

impl LinearOperator for HOperator<'_> {
    fn nrows(&self) -> usize {
        self.h.nrows()
    }

    fn ncols(&self) -> usize {
        self.h.ncols()
    }

    fn apply(&self, x: &[c64]) -> Vec<c64> {
        matvec_h(self.h, x, self.workers).expect("operator dimension")
    }

    fn apply_adjoint(&self, y: &[c64]) -> Vec<c64> {
        matvec_h_adjoint(self.h, y, self.workers).expect("operator dimension")
    }
}

pub struct UhOperator<'a> {
    pub uh: &'a UniformHMatrix,
    pub workers: usize,
}

impl LinearOperator for UhOperator<'_> {
    fn nrows(&self) -> usize {
        self.uh.nrows()
    }

    fn ncols(&self) -> usize {
        self.uh.ncols()
    }

    fn apply(&self, x: &[c64]) -> Vec<c64> {
        matvec_uh(self.uh, x, self.workers).expect("operator dimension")
    }

    fn apply_adjoint(&self, y: &[c64]) -> Vec<c64> {
        matvec_uh_adjoint(self.uh, y, self.workers).expect("operator dimension")
    }
}

/// Operator given by a pair of closures.
pub struct FnOperator<F, G> {
    pub nrows: usize,
    pub ncols: usize,
    pub apply: F,
    pub apply_adjoint: G,
}

impl<F, G> LinearOperator for FnOperator<F, G>
where
    F: Fn(&[c64]) -> Vec<c64> + Sync,
    G: Fn(&[c64]) -> Vec<c64> + Sync,
{
    fn nrows(&self) -> usize {
        self.nrows
    }

    fn ncols(&self) -> usize {
        self.ncols
    }

    fn apply(&self, x: &[c64]) -> Vec<c64> {
        (self.apply)(x)
    }

    fn apply_adjoint(&self, y: &[c64]) -> Vec<c64> {
        (self.apply_adjoint)(y)
    }
}

/// `a - b`.
pub struct Difference<'a, A: ?Sized, B: ?Sized>(pub &'a A, pub &'a B);

impl<A: LinearOperator + ?Sized, B: LinearOperator + ?Sized> LinearOperator
    for Difference<'_, A, B>
{
    fn nrows(&self) -> usize {
        self.0.nrows()
    }

    fn ncols(&self) -> usize {
        self.0.ncols()
    }

    fn apply(&self, x: &[c64]) -> Vec<c64> {
        let mut y = self.0.apply(x);
        for (a, b) in y.iter_mut().zip(self.1.apply(x)) {
            *a -= b;
        }
        y
    }

    fn apply_adjoint(&self, y: &[c64]) -> Vec<c64> {
        let mut x = self.0.apply_adjoint(y);
        for (a, b) in x.iter_mut().zip(self.1.apply_adjoint(y)) {
            *a -= b;
        }
        x
    }
}

#[derive(Clone, Debug)]
pub struct PowerIteration {
    /// Estimate of the largest singular value.
    pub value: f64,
    pub iterations: usize,
    /// `||A^H A x - lambda x|| / lambda` at the last iterate.
    pub residual: f64,
    /// Singular value estimate after each iteration.
    pub history: Vec<f64>,
}

fn random_unit(n: usize, seed: u64) -> Vec<c64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<c64> = (0..n)
        .map(|_| {
            c64::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            )
        })
        .collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    x
}

/// Power iteration on `A^H A` from a seeded random unit vector. Stops after
/// `iters` steps or once the estimate changes by at most [`STAGNATION`]
/// relative.
pub fn power_iteration<A: LinearOperator + ?Sized>(
    op: &A,
    iters: usize,
    seed: u64,
) -> PowerIteration {
    let iters = iters.max(1);
    let mut out = PowerIteration {
        value: 0.0,
        iterations: 0,
        residual: 0.0,
        history: Vec::new(),
    };
    if op.nrows() == 0 || op.ncols() == 0 {
        return out;
    }
    let mut x = random_unit(op.ncols(), seed);
    let mut prev = 0.0;
    for it in 1..=iters {
        let y = op.apply(&x);
        let lambda = norm2(&y).powi(2);
        out.iterations = it;
        out.value = lambda.sqrt();
        out.history.push(out.value);
        if lambda == 0.0 {
            out.residual = 0.0;
            break;
        }
        let z = op.apply_adjoint(&y);
        let mut r = z.clone();
        for (ri, xi) in r.iter_mut().zip(&x) {
            *ri -= *xi * lambda;
        }
        out.residual = norm2(&r) / lambda;
        let nz = norm2(&z);
        x = z.into_iter().map(|v| v / nz).collect();
        if it > 1 && (lambda - prev).abs() <= STAGNATION * lambda {
            break;
        }
        prev = lambda;
    }
    out
}

pub fn spectral_norm_estimate<A: LinearOperator + ?Sized>(op: &A, iters: usize, seed: u64) -> f64 {
    power_iteration(op, iters, seed).value
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    /// `||A - B||_2 / ||A||_2`.
    pub rel_spectral_estimate: f64,
    /// Iterations spent on the difference operator.
    pub iterations: usize,
    pub residual: f64,
    pub reference_norm: f64,
}

/// Relative spectral error of `approx` against `reference`.
pub fn compression_error<A, B>(
    reference: &A,
    approx: &B,
    iters: usize,
    seed: u64,
) -> Result<ErrorReport>
where
    A: LinearOperator + ?Sized,
    B: LinearOperator + ?Sized,
{
    if reference.nrows() != approx.nrows() || reference.ncols() != approx.ncols() {
        return Err(Error::DimensionMismatch {
            expected: reference.nrows() * reference.ncols(),
            got: approx.nrows() * approx.ncols(),
        });
    }
    let norm = power_iteration(reference, iters, seed);
    let diff = power_iteration(&Difference(reference, approx), iters, seed);
    let rel = if norm.value > 0.0 {
        diff.value / norm.value
    } else {
        diff.value
    };
    Ok(ErrorReport {
        rel_spectral_estimate: rel,
        iterations: diff.iterations,
        residual: diff.residual,
        reference_norm: norm.value,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub instance: String,
    pub format: String,
    pub rel_spec_err: f64,
    pub iters: usize,
}

pub fn write_error_csv(path: impl AsRef<Path>, rows: &[ErrorRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    /// `||A - A_uh||_2`.
    pub lhs: f64,
    /// `sqrt(2) * sqrt(sum of squared cluster projection errors)`.
    pub rhs: f64,
    pub holds: bool,
}

/// Exact check of the global bound for a uniform matrix compressed from
/// `a` (the matrix whose agglomerations define the projection errors).
pub fn global_bound_check(a: MatRef<'_, c64>, uh: &UniformHMatrix) -> Result<BoundCheck> {
    let requested = a.nrows() * a.ncols();
    if requested > BOUND_CHECK_CAP {
        return Err(Error::Capacity {
            requested,
            cap: BOUND_CHECK_CAP,
        });
    }
    if a.nrows() != uh.nrows() || a.ncols() != uh.ncols() {
        return Err(Error::DimensionMismatch {
            expected: uh.nrows() * uh.ncols(),
            got: requested,
        });
    }
    let approx = crate::uniform::to_dense(uh)?;
    let lhs = spectral_norm((a - &approx).as_ref());
    let bct = uh.bct();
    let mut sum = 0.0;
    for side in [Side::Row, Side::Col] {
        let clusters = match side {
            Side::Row => bct.lrc(),
            Side::Col => bct.lcc(),
        };
        for &t in clusters {
            let ag = agglomeration(a, bct, side, t);
            let err = match uh.basis(side).get(t) {
                Some(u) => spectral_norm((&ag - u * (u.adjoint() * &ag)).as_ref()),
                None => spectral_norm(ag.as_ref()),
            };
            sum += err * err;
        }
    }
    let rhs = std::f64::consts::SQRT_2 * sum.sqrt();
    Ok(BoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-10),
    })
}

/// Local spectral error budgets by cluster id; entries for clusters without
/// admissible blocks are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ToleranceBudget {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
}

impl ToleranceBudget {
    /// Absolute thresholds `scale * eps_t`, with `scale` typically `||A||_2`.
    pub fn to_absolute(&self, scale: f64) -> ClusterTolerances {
        ClusterTolerances::Absolute {
            row: self.row.iter().map(|e| e * scale).collect(),
            col: self.col.iter().map(|e| e * scale).collect(),
        }
    }
}

/// `eps_t = eps/2 * sqrt(|t| |F(t)| / (|I| |J|))` with `F(t)` the union of the
/// far-field partners of `t`.
pub fn tolerance_budget(eps: f64, bct: &BlockClusterTree) -> Result<ToleranceBudget> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    let area = (bct.nrows() as f64) * (bct.ncols() as f64);
    let mut row = vec![0.0; bct.row_tree().nodes().len()];
    let mut col = vec![0.0; bct.col_tree().nodes().len()];
    for &t in bct.lrc() {
        let s = bct.row_tree().node(t).size() as f64;
        row[t] = 0.5 * eps * (s * bct.row_far_size(t) as f64 / area).sqrt();
    }
    for &s in bct.lcc() {
        let z = bct.col_tree().node(s).size() as f64;
        col[s] = 0.5 * eps * (z * bct.col_far_size(s) as f64 / area).sqrt();
    }
    Ok(ToleranceBudget { row, col })
}

/// `sum_t |t| |F(t)|` over the clusters of one side.
pub fn budget_area(bct: &BlockClusterTree, side: Side) -> u64 {
    match side {
        Side::Row => bct
            .lrc()
            .iter()
            .map(|&t| (bct.row_tree().node(t).size() * bct.row_far_size(t)) as u64)
            .sum(),
        Side::Col => bct
            .lcc()
            .iter()
            .map(|&s| (bct.col_tree().node(s).size() * bct.col_far_size(s)) as u64)
            .sum(),
    }
}
