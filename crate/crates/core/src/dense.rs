//! Small dense helpers on top of faer.

use faer::{c64, Mat, MatRef};

pub(crate) const ZERO: c64 = c64 { re: 0.0, im: 0.0 };

/// Thin QR: `a = q * r` with `q` of size `m x min(m, n)`.
pub(crate) fn thin_qr(a: MatRef<'_, c64>) -> (Mat<c64>, Mat<c64>) {
    let qr = a.qr();
    (qr.compute_thin_Q(), qr.thin_R().to_owned())
}

/// Thin SVD `a = u diag(s) v^H`, singular values descending.
pub(crate) fn thin_svd(a: MatRef<'_, c64>) -> (Mat<c64>, Vec<f64>, Mat<c64>) {
    let (m, n) = (a.nrows(), a.ncols());
    let p = m.min(n);
    if p == 0 {
        return (Mat::zeros(m, 0), Vec::new(), Mat::zeros(n, 0));
    }
    if m >= 2 * n {
        let (q, r) = thin_qr(a);
        let (w, s, v) = svd_core(r.as_ref());
        return (&q * &w, s, v);
    }
    if n >= 2 * m {
        let (v, s, u) = thin_svd(a.adjoint().to_owned().as_ref());
        return (u, s, v);
    }
    svd_core(a)
}

fn svd_core(a: MatRef<'_, c64>) -> (Mat<c64>, Vec<f64>, Mat<c64>) {
    let svd = a.thin_svd().expect("SVD failed to converge");
    let s = svd.S().column_vector().iter().map(|x| x.re).collect();
    (svd.U().to_owned(), s, svd.V().to_owned())
}

pub(crate) fn singular_values(a: MatRef<'_, c64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    if a.nrows() >= 2 * a.ncols() {
        let (_, r) = thin_qr(a);
        return singular_values(r.as_ref());
    }
    if a.ncols() >= 2 * a.nrows() {
        return singular_values(a.adjoint().to_owned().as_ref());
    }
    a.singular_values().expect("SVD failed to converge")
}

pub(crate) fn spectral_norm(a: MatRef<'_, c64>) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Leading `r` columns.
pub(crate) fn take_cols(a: &Mat<c64>, r: usize) -> Mat<c64> {
    a.as_ref().subcols(0, r).to_owned()
}

#[inline]
pub(crate) fn dotc(a: &[c64], b: &[c64]) -> c64 {
    // sum conj(a_i) b_i
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    c64::new(re, im)
}

#[inline]
pub(crate) fn axpy(alpha: c64, x: &[c64], y: &mut [c64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn norm2(x: &[c64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// `out = a^H x`.
pub(crate) fn gemv_adj(a: &Mat<c64>, x: &[c64], out: &mut [c64]) {
    for (j, o) in out.iter_mut().enumerate() {
        *o = dotc(a.col_as_slice(j), x);
    }
}

/// `y += a x`.
pub(crate) fn gemv_acc(a: &Mat<c64>, x: &[c64], y: &mut [c64]) {
    for (j, &xj) in x.iter().enumerate() {
        if xj != ZERO {
            axpy(xj, a.col_as_slice(j), y);
        }
    }
}

/// `y += a^H x` for a dense block, used by adjoint products.
pub(crate) fn gemv_adj_acc(a: &Mat<c64>, x: &[c64], y: &mut [c64]) {
    for (j, yj) in y.iter_mut().enumerate() {
        *yj += dotc(a.col_as_slice(j), x);
    }
}

/// `||a^H a - I||_F`.
pub fn orthonormality_defect(a: MatRef<'_, c64>) -> f64 {
    let g = a.adjoint() * a;
    let mut s = 0.0;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            s += (g[(i, j)] - c64::new(target, 0.0)).norm_sqr();
        }
    }
    s.sqrt()
}
