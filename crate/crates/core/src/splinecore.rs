//! B-spline bases on equally spaced knots, design matrices, difference
//! penalties and the exact polynomial-to-B-spline coefficient map.
//!
//! A basis of degree `p` with `K` segments on `[0, 1]` uses the knots
//! `kappa_k = k / K` for `k = -p, ..., K + p` and has `K + p` functions
//! `B_k`, `k = -p + 1, ..., K`. Function `B_k` is supported on
//! `[kappa_{k-1}, kappa_{k+p}]`; it is stored at vector position `k + p - 1`.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    degree: usize,
    segments: usize,
    knots: Vec<f64>,
}

impl SplineBasis {
    pub fn new(degree: usize, segments: usize) -> Result<Self> {
        if segments == 0 {
            return Err(Error::InvalidInput(
                "a spline basis needs at least one segment".into(),
            ));
        }
        let p = degree as i64;
        let kk = segments as f64;
        let knots = (-p..=segments as i64 + p).map(|k| k as f64 / kk).collect();
        Ok(SplineBasis {
            degree,
            segments,
            knots,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    /// Number of basis functions, `K + p`.
    pub fn dim(&self) -> usize {
        self.segments + self.degree
    }

    /// The extended knot vector `kappa_{-p}, ..., kappa_{K+p}`.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// `kappa_k` for a signed knot index.
    pub fn knot(&self, k: i64) -> f64 {
        self.knots[(k + self.degree as i64) as usize]
    }

    /// Zero-based segment `s` with `kappa_s <= x < kappa_{s+1}`; `x = 1`
    /// belongs to the last segment.
    pub fn segment_of(&self, x: f64) -> usize {
        let kk = self.segments;
        let mut s = ((x * kk as f64).floor().max(0.0) as usize).min(kk - 1);
        if s > 0 && x < self.knot(s as i64) {
            s -= 1;
        } else if s + 1 < kk && x >= self.knot(s as i64 + 1) {
            s += 1;
        }
        s
    }

    /// The `p + 1` possibly nonzero basis values at `x` and the vector
    /// position of the first one.
    pub fn eval_nonzero(&self, x: f64) -> Result<(usize, Vec<f64>)> {
        check_unit(x)?;
        Ok(self.eval_nonzero_unchecked(x))
    }

    pub(crate) fn eval_nonzero_unchecked(&self, x: f64) -> (usize, Vec<f64>) {
        let p = self.degree;
        let s = self.segment_of(x);
        // position of kappa_s in the knot array
        let span = s + p;
        let t = &self.knots;
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let tmp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            n[j] = saved;
        }
        (s, n)
    }

    /// Full vector `(B_{-p+1}(x), ..., B_K(x))`.
    pub fn eval_basis(&self, x: f64) -> Result<Array1<f64>> {
        let (first, vals) = self.eval_nonzero(x)?;
        let mut out = Array1::zeros(self.dim());
        for (i, v) in vals.into_iter().enumerate() {
            out[first + i] = v;
        }
        Ok(out)
    }

    /// Dense design matrix `Z` with rows `B(x_i)'`.
    pub fn design_matrix(&self, xs: &[f64]) -> Result<Array2<f64>> {
        Ok(self.sparse_design(xs)?.to_dense())
    }

    /// Row-compressed design matrix; each row stores only its `p + 1` nonzeros.
    pub fn sparse_design(&self, xs: &[f64]) -> Result<SparseDesign> {
        if xs.is_empty() {
            return Err(Error::InvalidInput("design points are empty".into()));
        }
        let width = self.degree + 1;
        let mut first = Vec::with_capacity(xs.len());
        let mut values = Vec::with_capacity(xs.len() * width);
        for &x in xs {
            let (f, v) = self.eval_nonzero(x)?;
            first.push(f);
            values.extend_from_slice(&v);
        }
        Ok(SparseDesign {
            dim: self.dim(),
            width,
            first,
            values,
        })
    }

    /// Evaluate the spline `sum_k c_k B_k(x)`.
    pub fn eval_spline(&self, coefs: &[f64], x: f64) -> Result<f64> {
        if coefs.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "expected {} spline coefficients, got {}",
                self.dim(),
                coefs.len()
            )));
        }
        let (first, vals) = self.eval_nonzero(x)?;
        Ok(vals.iter().enumerate().map(|(i, v)| v * coefs[first + i]).sum())
    }
}

/// Design matrix stored by rows of `p + 1` contiguous nonzeros.
#[derive(Debug, Clone)]
pub struct SparseDesign {
    dim: usize,
    width: usize,
    first: Vec<usize>,
    values: Vec<f64>,
}

impl SparseDesign {
    pub fn nrows(&self) -> usize {
        self.first.len()
    }

    pub fn ncols(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> (usize, &[f64]) {
        (self.first[i], &self.values[i * self.width..(i + 1) * self.width])
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut z = Array2::zeros((self.nrows(), self.dim));
        for i in 0..self.nrows() {
            let (f, v) = self.row(i);
            for (j, val) in v.iter().enumerate() {
                z[[i, f + j]] = *val;
            }
        }
        z
    }

    /// `Z' diag(w) Z`, or `Z'Z` when `weights` is `None`.
    pub fn weighted_gram(&self, weights: Option<&[f64]>) -> Array2<f64> {
        let mut g = Array2::zeros((self.dim, self.dim));
        for i in 0..self.nrows() {
            let w = weights.map_or(1.0, |w| w[i]);
            let (f, v) = self.row(i);
            for a in 0..self.width {
                let va = w * v[a];
                for b in 0..self.width {
                    g[[f + a, f + b]] += va * v[b];
                }
            }
        }
        g
    }

    pub fn gram(&self) -> Array2<f64> {
        self.weighted_gram(None)
    }

    /// `Z' y`.
    pub fn t_dot(&self, y: &[f64]) -> Array1<f64> {
        let mut out = Array1::zeros(self.dim);
        for (i, yi) in y.iter().enumerate() {
            let (f, v) = self.row(i);
            for (j, val) in v.iter().enumerate() {
                out[f + j] += val * yi;
            }
        }
        out
    }

    /// `Z c`.
    pub fn dot(&self, coefs: &[f64]) -> Vec<f64> {
        (0..self.nrows())
            .map(|i| {
                let (f, v) = self.row(i);
                v.iter().enumerate().map(|(j, val)| val * coefs[f + j]).sum()
            })
            .collect()
    }
}

/// `Q_m = D_m' D_m` for the `m`-th order forward-difference operator `D_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    order: usize,
    difference: Array2<f64>,
    matrix: Array2<f64>,
}

impl PenaltyMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `D_m`, of shape `(dim - m) x dim`.
    pub fn difference(&self) -> &Array2<f64> {
        &self.difference
    }

    /// `Q_m`.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }
}

fn first_difference(rows: usize) -> Array2<f64> {
    let mut d = Array2::zeros((rows, rows + 1));
    for i in 0..rows {
        d[[i, i]] = -1.0;
        d[[i, i + 1]] = 1.0;
    }
    d
}

pub fn difference_penalty(order: usize, dim: usize) -> Result<PenaltyMatrix> {
    if order == 0 || order >= dim {
        return Err(Error::InvalidInput(format!(
            "penalty order must satisfy 1 <= m < dim, got m = {order}, dim = {dim}"
        )));
    }
    let mut d = first_difference(dim - 1);
    for k in 2..=order {
        d = first_difference(dim - k).dot(&d);
    }
    let matrix = d.t().dot(&d);
    Ok(PenaltyMatrix {
        order,
        difference: d,
        matrix,
    })
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Coefficients `c` with `sum_k c_k B_k(x) = sum_j beta_j x^j` on `[0, 1]`,
/// using Marsden's identity through `phi_{k,p}(z) = prod_{i<p} (kappa_{k+i} - z)`:
/// `x^{p-j} = sum_k (-1)^j (p-j)!/p! phi_{k,p}^{(j)}(0) B_k(x)`.
pub fn poly_to_spline_coeffs(basis: &SplineBasis, poly: &[f64]) -> Result<Array1<f64>> {
    if poly.is_empty() {
        return Err(Error::InvalidInput("empty polynomial".into()));
    }
    let p = basis.degree();
    let q = poly.len() - 1;
    if q > p {
        return Err(Error::UnsupportedDegree {
            requested: q,
            max: p,
        });
    }
    let pf = factorial(p);
    let mut c = Array1::zeros(basis.dim());
    for k in (1 - p as i64)..=(basis.segments() as i64) {
        // expand phi_{k,p}(z) in powers of z
        let mut phi = vec![1.0];
        for i in 0..p as i64 {
            let root = basis.knot(k + i);
            let mut next = vec![0.0; phi.len() + 1];
            for (deg, a) in phi.iter().enumerate() {
                next[deg] += root * a;
                next[deg + 1] -= a;
            }
            phi = next;
        }
        let mut ck = 0.0;
        for j in (p - q)..=p {
            let dphi0 = factorial(j) * phi[j];
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            ck += poly[p - j] * sign * factorial(p - j) / pf * dphi0;
        }
        c[(k + p as i64 - 1) as usize] = ck;
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_zero_is_segment_indicator() {
        let b = SplineBasis::new(0, 4).unwrap();
        let v = b.eval_basis(0.3).unwrap();
        assert_eq!(v.to_vec(), vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn hat_peaks_at_its_knot() {
        let b = SplineBasis::new(1, 2).unwrap();
        let v = b.eval_basis(0.5).unwrap();
        assert_eq!(v.to_vec(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn right_endpoint_goes_to_last_segment() {
        let b = SplineBasis::new(2, 5).unwrap();
        assert_eq!(b.segment_of(1.0), 4);
        let v = b.eval_basis(1.0).unwrap();
        assert!((v.sum() - 1.0).abs() < 1e-15);
        assert!(v[b.dim() - 3].abs() < 1e-15);
        assert!((v[b.dim() - 2] - 0.5).abs() < 1e-15);
        assert!((v[b.dim() - 1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn knots_are_extended_uniformly() {
        let b = SplineBasis::new(3, 5).unwrap();
        assert_eq!(b.knots().len(), 5 + 2 * 3 + 1);
        assert_eq!(b.knot(-3), -0.6);
        assert_eq!(b.knot(8), 1.6);
    }

    #[test]
    fn out_of_range_is_domain_error() {
        let b = SplineBasis::new(1, 3).unwrap();
        assert!(matches!(b.eval_basis(1.2), Err(Error::Domain { .. })));
        assert!(matches!(b.eval_basis(-1e-9), Err(Error::Domain { .. })));
        assert!(matches!(b.design_matrix(&[]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn hand_computed_hat_design() {
        let b = SplineBasis::new(1, 3).unwrap();
        let z = b.design_matrix(&[0.0, 0.5, 1.0]).unwrap();
        let want = [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.5, 0.5, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        for i in 0..3 {
            for j in 0..4 {
                assert!((z[[i, j]] - want[i][j]).abs() < 1e-15, "({i},{j})");
            }
        }
    }

    #[test]
    fn second_difference_rows() {
        let q = difference_penalty(2, 5).unwrap();
        let d = q.difference();
        assert_eq!(d.dim(), (3, 5));
        assert_eq!(d.row(0).to_vec(), vec![1.0, -2.0, 1.0, 0.0, 0.0]);
        assert_eq!(d.row(1).to_vec(), vec![0.0, 1.0, -2.0, 1.0, 0.0]);
        assert_eq!(d.row(2).to_vec(), vec![0.0, 0.0, 1.0, -2.0, 1.0]);
    }

    #[test]
    fn first_order_penalty_by_hand() {
        let q = difference_penalty(1, 3).unwrap();
        let want = [[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(q.matrix()[[i, j]], want[i][j]);
            }
        }
    }

    #[test]
    fn penalty_order_must_be_below_dim() {
        assert!(difference_penalty(3, 3).is_err());
        assert!(difference_penalty(0, 3).is_err());
    }

    #[test]
    fn constant_polynomial_maps_to_constant_coefficients() {
        let b = SplineBasis::new(3, 6).unwrap();
        let c = poly_to_spline_coeffs(&b, &[2.5]).unwrap();
        assert!(c.iter().all(|v| (v - 2.5).abs() < 1e-14));
    }

    #[test]
    fn linear_hat_coefficients_are_knot_values() {
        let b = SplineBasis::new(1, 4).unwrap();
        let c = poly_to_spline_coeffs(&b, &[0.0, 1.0]).unwrap();
        for (i, ck) in c.iter().enumerate() {
            assert!((ck - b.knot(i as i64)).abs() < 1e-15);
        }
    }

    #[test]
    fn too_high_degree_is_rejected() {
        let b = SplineBasis::new(1, 4).unwrap();
        assert!(matches!(
            poly_to_spline_coeffs(&b, &[1.0, 1.0, 1.0]),
            Err(Error::UnsupportedDegree { requested: 2, max: 1 })
        ));
    }
}
