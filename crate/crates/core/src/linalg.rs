//! Small dense least-squares helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

/// Result of a multivariate least-squares regression `Y ~ X B`.
#[derive(Debug, Clone)]
pub(crate) struct OlsFit {
    /// `p x q`, one column per response.
    pub coef: DMatrix<f64>,
    /// `n x q`.
    pub resid: DMatrix<f64>,
}

/// Least squares via Householder QR. `design` is `n x p`, `resp` is `n x q`.
/// Returns `None` when the design is (numerically) rank deficient.
pub(crate) fn ols(design: &DMatrix<f64>, resp: &DMatrix<f64>) -> Option<OlsFit> {
    let (n, p) = design.shape();
    if n < p {
        return None;
    }
    if p == 0 {
        return Some(OlsFit {
            coef: DMatrix::zeros(0, resp.ncols()),
            resid: resp.clone(),
        });
    }
    let qr = design.clone().qr();
    let r = qr.r();
    for i in 0..p {
        let col_norm = design.column(i).norm();
        if col_norm == 0.0 || r[(i, i)].abs() <= 1e-10 * col_norm {
            return None;
        }
    }
    let mut qty = resp.clone();
    qr.q_tr_mul(&mut qty);
    let coef = r.solve_upper_triangular(&qty.rows(0, p).into_owned())?;
    let resid = resp - design * &coef;
    Some(OlsFit { coef, resid })
}

/// Solves `A x = b` for symmetric positive definite `A`. Returns `None`
/// when a pivot is not positive.
pub(crate) fn cholesky_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let factor = Cholesky::new(a)?;
    let mut x: Vec<f64> = b.iter().copied().collect();
    factor.solve_in_place(&mut x);
    Some(DVector::from_vec(x))
}

/// Lower Cholesky factor kept row by row, so that both triangular solves
/// walk contiguous memory.
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub(crate) fn new(a: &DMatrix<f64>) -> Option<Self> {
        let n = a.nrows();
        // `a` is symmetric, so its column-major storage is also row-major.
        let mut l = a.as_slice().to_vec();
        for i in 0..n {
            for k in 0..=i {
                let s = l[i * n + k] - dot(&l[i * n..i * n + k], &l[k * n..k * n + k]);
                if i == k {
                    if !(s > 0.0) {
                        return None;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + k] = s / l[k * n + k];
                }
            }
        }
        Some(Self { n, l })
    }

    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        self.forward_from(x, 0);
        self.backward(x);
    }

    /// `x <- L^{-1} x` for `x` whose first `start` entries are zero.
    pub(crate) fn forward_from(&self, x: &mut [f64], start: usize) {
        let (n, l) = (self.n, &self.l);
        for i in start..n {
            x[i] = (x[i] - dot(&l[i * n + start..i * n + i], &x[start..i])) / l[i * n + i];
        }
    }

    /// `x <- L^{-T} x`.
    pub(crate) fn backward(&self, x: &mut [f64]) {
        let (n, l) = (self.n, &self.l);
        for i in (0..n).rev() {
            x[i] /= l[i * n + i];
            let xi = x[i];
            for (xk, lk) in x[..i].iter_mut().zip(&l[i * n..i * n + i]) {
                *xk -= lk * xi;
            }
        }
    }

}

/// Dot product with four independent accumulators.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, ra) = a.split_at(a.len() / 4 * 4);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(4).zip(cb.chunks_exact(4)) {
        for j in 0..4 {
            acc[j] += x[j] * y[j];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `sum_e yy_e - b_e' G^{-1} b_e` from the lower triangle of the row-major
/// `G`; infinite when `G` is numerically singular.
pub(crate) fn segment_ssr(gram: &[f64], cross: &[f64], yy: &[f64], p: usize, chol: &mut [f64], v: &mut [f64]) -> f64 {
    chol.copy_from_slice(gram);
    let scale = (0..p).map(|i| gram[i * p + i]).fold(0.0f64, f64::max);
    for i in 0..p {
        for k in 0..=i {
            let mut s = chol[i * p + k];
            for l in 0..k {
                s -= chol[i * p + l] * chol[k * p + l];
            }
            if i == k {
                if s <= 1e-13 * scale {
                    return f64::INFINITY;
                }
                chol[i * p + i] = s.sqrt();
            } else {
                chol[i * p + k] = s / chol[k * p + k];
            }
        }
    }
    let mut total = 0.0;
    for (e, &yy_e) in yy.iter().enumerate() {
        let b = &cross[e * p..(e + 1) * p];
        let mut explained = 0.0;
        for i in 0..p {
            let mut s = b[i];
            for l in 0..i {
                s -= chol[i * p + l] * v[l];
            }
            v[i] = s / chol[i * p + i];
            explained += v[i] * v[i];
        }
        total += (yy_e - explained).max(0.0);
    }
    total
}

pub(crate) fn sum_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}
