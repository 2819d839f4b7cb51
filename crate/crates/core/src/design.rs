//! Kernels over the implicit block lower-triangular break design.
//!
//! Group `j` (1-based) multiplies `Z_t` for every `t >= j`, so its column block
//! in the stacked design is zero above row `j`. Every quantity the path
//! algorithm needs is therefore a suffix sum over time, and one backward pass
//! serves all `T` groups. The `Tq x Td` design is never formed.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{build_scaled_regressors, ScaledRegressors, SelectionMask, TimeSeriesPanel};

/// Regressors plus cumulative suffix Grams `G(k) = sum_{t >= k} Z_t Z_t'`.
#[derive(Debug, Clone)]
pub struct SuffixCache {
    z: ScaledRegressors,
    q: usize,
    /// `(T + 1) x p x p`, entry `k` holds `G(k + 1)`; the last slot is zero.
    grams: Vec<f64>,
}

impl SuffixCache {
    pub fn new(panel: &TimeSeriesPanel, scaled: bool) -> Self {
        Self::from_regressors(build_scaled_regressors(panel, scaled), panel.q())
    }

    pub fn from_regressors(z: ScaledRegressors, q: usize) -> Self {
        let p = z.dim();
        let t_len = z.t_len();
        let mut grams = vec![0.0; (t_len + 1) * p * p];
        for t in (0..t_len).rev() {
            let (head, tail) = grams.split_at_mut((t + 1) * p * p);
            let next = &tail[..p * p];
            let cur = &mut head[t * p * p..];
            let col = z.z.column(t);
            for a in 0..p {
                for b in 0..p {
                    cur[a * p + b] = next[a * p + b] + col[a] * col[b];
                }
            }
        }
        Self { z, q, grams }
    }

    pub fn regressors(&self) -> &ScaledRegressors {
        &self.z
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z.z
    }

    pub fn t_len(&self) -> usize {
        self.z.t_len()
    }

    pub fn p(&self) -> usize {
        self.z.dim()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn group_dim(&self) -> usize {
        self.q * self.p()
    }

    /// `G(k)` for 1-based `k` in `1..=T`.
    pub fn suffix_gram(&self, k: usize) -> Result<DMatrix<f64>> {
        let t_len = self.t_len();
        if k == 0 || k > t_len {
            return Err(Error::OutOfRange {
                index: k,
                len: t_len,
            });
        }
        Ok(DMatrix::from_row_slice(
            self.p(),
            self.p(),
            self.gram_slice(k - 1),
        ))
    }

    /// Row-major `G(g + 1)` for 0-based group `g`; `g == T` gives zeros.
    pub(crate) fn gram_slice(&self, g: usize) -> &[f64] {
        let pp = self.p() * self.p();
        &self.grams[g * pp..(g + 1) * pp]
    }

    /// Group correlations `sum_{t >= j} Z_t (x) r_t` for every group `j`.
    ///
    /// Row `j - 1` of the result is the stacked, equation-major gradient
    /// direction of the unpenalized loss with respect to group `j`.
    pub fn group_correlations(
        &self,
        residuals: &DMatrix<f64>,
        mask: Option<&SelectionMask>,
    ) -> Result<DMatrix<f64>> {
        self.group_correlations_with(residuals, mask, false)
    }

    /// As [`Self::group_correlations`], optionally with Kahan-compensated
    /// accumulation.
    pub fn group_correlations_with(
        &self,
        residuals: &DMatrix<f64>,
        mask: Option<&SelectionMask>,
        compensated: bool,
    ) -> Result<DMatrix<f64>> {
        let (t_len, q, p) = (self.t_len(), self.q, self.p());
        if residuals.nrows() != q || residuals.ncols() != t_len {
            return Err(Error::DimensionMismatch {
                matrix: "residuals",
                expected: format!("{q}x{t_len}"),
                found: format!("{}x{}", residuals.nrows(), residuals.ncols()),
            });
        }
        if let Some(m) = mask {
            m.check_shape(q, p)?;
        }
        let d = q * p;
        let mut flat = vec![0.0; t_len * d];
        if compensated {
            let mut acc = vec![0.0; d];
            let mut comp = vec![0.0; d];
            for t in (0..t_len).rev() {
                let z = self.z.z.column(t);
                for e in 0..q {
                    let r = residuals[(e, t)];
                    for i in 0..p {
                        let k = e * p + i;
                        let y = r * z[i] - comp[k];
                        let s = acc[k] + y;
                        comp[k] = (s - acc[k]) - y;
                        acc[k] = s;
                    }
                }
                flat[t * d..(t + 1) * d].copy_from_slice(&acc);
            }
        } else {
            suffix_correlations(&self.z.z, residuals, &mut flat);
        }
        let mut out = DMatrix::from_row_slice(t_len, d, &flat);
        if let Some(m) = mask {
            // The baseline group is never restricted.
            for (k, allowed) in (0..d).map(|k| (k, m.get(k / p, k % p))) {
                if !allowed {
                    for j in 1..t_len {
                        out[(j, k)] = 0.0;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Backward pass writing the `T x d` row-major suffix correlations of
/// `resid` (q x T) against `z` (p x T) into `out`.
pub(crate) fn suffix_correlations(z: &DMatrix<f64>, resid: &DMatrix<f64>, out: &mut [f64]) {
    let (p, t_len) = z.shape();
    let q = resid.nrows();
    let d = q * p;
    debug_assert_eq!(out.len(), t_len * d);
    let (zs, rs) = (z.as_slice(), resid.as_slice());
    let mut acc = vec![0.0; d];
    for t in (0..t_len).rev() {
        let zc = &zs[t * p..(t + 1) * p];
        for (e, &r) in rs[t * q..(t + 1) * q].iter().enumerate() {
            if r != 0.0 {
                for (a, zi) in acc[e * p..(e + 1) * p].iter_mut().zip(zc) {
                    *a += r * zi;
                }
            }
        }
        out[t * d..(t + 1) * d].copy_from_slice(&acc);
    }
}

/// Group correlations on the scaled regressors of `panel`.
pub fn group_correlations(
    panel: &TimeSeriesPanel,
    residuals: &DMatrix<f64>,
    mask: Option<&SelectionMask>,
) -> Result<DMatrix<f64>> {
    SuffixCache::new(panel, true).group_correlations(residuals, mask)
}

/// `sum_{t=k}^{T} Z_t Z_t'` on the scaled regressors of `panel`.
pub fn suffix_gram(panel: &TimeSeriesPanel, k: usize) -> Result<DMatrix<f64>> {
    SuffixCache::new(panel, true).suffix_gram(k)
}
