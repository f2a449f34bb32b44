//! Small dense factorizations used by the smoothers and the parametric stage.
//!
//! The systems here are at most a few dozen unknowns, so everything is dense
//! and written out directly on `ndarray` storage.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// Smallest admissible ratio `min(L_jj)^2 / max(L_jj)^2`, i.e. a reciprocal
/// condition-number bound for the factored matrix.
const MIN_RCOND: f64 = 1e-14;

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Array2<f64>,
}

impl Cholesky {
    /// Factor `a = L L'`. A non-positive or collapsing pivot is reported as a
    /// rank deficiency at that (1-based) dimension.
    pub fn factor(a: &Array2<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "Cholesky needs a non-empty square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let scale = (0..n).map(|i| a[[i, i]].abs()).fold(0.0, f64::max);
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::RankDeficient {
                dimension: 1,
                size: n,
            });
        }
        let mut l = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut d = a[[j, j]];
            for k in 0..j {
                d -= l[[j, k]] * l[[j, k]];
            }
            if !(d > MIN_RCOND * scale) {
                return Err(Error::RankDeficient {
                    dimension: j + 1,
                    size: n,
                });
            }
            let ljj = d.sqrt();
            l[[j, j]] = ljj;
            for i in (j + 1)..n {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / ljj;
            }
        }
        let (dmin, jmin, dmax) = (0..n).fold((f64::INFINITY, 0, 0.0f64), |(lo, at, hi), j| {
            let v = l[[j, j]];
            if v < lo {
                (v, j, hi.max(v))
            } else {
                (lo, at, hi.max(v))
            }
        });
        if (dmin / dmax).powi(2) < MIN_RCOND {
            return Err(Error::RankDeficient {
                dimension: jmin + 1,
                size: n,
            });
        }
        Ok(Cholesky { lower: l })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn solve(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let n = self.dim();
        let l = &self.lower;
        let mut y = b.to_owned();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[[i, k]] * y[k];
            }
            y[i] = s / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[[k, i]] * y[k];
            }
            y[i] = s / l[[i, i]];
        }
        y
    }

    pub fn inverse(&self) -> Array2<f64> {
        let n = self.dim();
        let mut inv = Array2::<f64>::zeros((n, n));
        let mut e = Array1::<f64>::zeros(n);
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            let col = self.solve(e.view());
            inv.column_mut(j).assign(&col);
        }
        // symmetrize away round-off
        for i in 0..n {
            for j in (i + 1)..n {
                let m = 0.5 * (inv[[i, j]] + inv[[j, i]]);
                inv[[i, j]] = m;
                inv[[j, i]] = m;
            }
        }
        inv
    }
}

/// Outcome of a least-squares solve that detected a dependent column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DependentColumn(pub usize);

/// Householder QR least squares `min ||a x - b||`. Returns the index of the
/// first column that is numerically in the span of its predecessors.
pub fn lstsq_qr(
    a: &Array2<f64>,
    b: ArrayView1<f64>,
) -> std::result::Result<Array1<f64>, DependentColumn> {
    let (n, m) = a.dim();
    assert_eq!(b.len(), n, "row count mismatch");
    if n < m {
        return Err(DependentColumn(n));
    }
    let mut r = a.clone();
    let mut qtb = b.to_owned();
    let col_norms: Vec<f64> = (0..m)
        .map(|j| r.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    for j in 0..m {
        let norm: f64 = (j..n).map(|i| r[[i, j]] * r[[i, j]]).sum::<f64>().sqrt();
        if !(norm > 1e-10 * col_norms[j]) || col_norms[j] == 0.0 {
            return Err(DependentColumn(j));
        }
        let alpha = if r[[j, j]] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..n).map(|i| r[[i, j]]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for c in j..m {
                let dot: f64 = v.iter().enumerate().map(|(k, vk)| vk * r[[j + k, c]]).sum();
                let f = 2.0 * dot / vnorm2;
                for (k, vk) in v.iter().enumerate() {
                    r[[j + k, c]] -= f * vk;
                }
            }
            let dot: f64 = v.iter().enumerate().map(|(k, vk)| vk * qtb[j + k]).sum();
            let f = 2.0 * dot / vnorm2;
            for (k, vk) in v.iter().enumerate() {
                qtb[j + k] -= f * vk;
            }
        }
    }
    let mut x = Array1::<f64>::zeros(m);
    for i in (0..m).rev() {
        let mut s = qtb[i];
        for k in (i + 1)..m {
            s -= r[[i, k]] * x[k];
        }
        x[i] = s / r[[i, i]];
    }
    Ok(x)
}

/// `a' a` for a tall matrix.
pub fn gram(a: &Array2<f64>) -> Array2<f64> {
    a.t().dot(a)
}

/// Quadratic form `u' m v`.
pub fn bilinear(u: ArrayView1<f64>, m: &Array2<f64>, v: ArrayView1<f64>) -> f64 {
    u.dot(&m.dot(&v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = array![[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]];
        let b = array![1.0, -2.0, 0.5];
        let ch = Cholesky::factor(&a).unwrap();
        let x = ch.solve(b.view());
        let resid = &a.dot(&x) - &b;
        assert!(resid.iter().all(|r| r.abs() < 1e-14));
        let inv = ch.inverse();
        let eye = a.dot(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((eye[[i, j]] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cholesky_reports_deficient_dimension() {
        // third row is the sum of the first two
        let a = array![[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 2.0]];
        match Cholesky::factor(&a) {
            Err(Error::RankDeficient { dimension, size }) => {
                assert_eq!(dimension, 3);
                assert_eq!(size, 3);
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn qr_matches_exact_solution_and_flags_dependence() {
        let a = array![[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]];
        let b = array![1.0, 3.0, 5.0, 7.0];
        let x = lstsq_qr(&a, b.view()).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-13 && (x[1] - 2.0).abs() < 1e-13);

        let dep = array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
        assert_eq!(lstsq_qr(&dep, array![1.0, 2.0, 3.0].view()), Err(DependentColumn(1)));
    }
}
