#![allow(dead_code)]

use semispline::simlab::{example_truth, generate_dataset};

pub type Mat = Vec<Vec<f64>>;

/// Gaussian elimination with partial pivoting.
pub fn solve(a: &Mat, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Mat = a.iter().zip(b).map(|(r, v)| {
        let mut r = r.clone();
        r.push(*v);
        r
    }).collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, piv);
        assert!(m[c][c].abs() > 1e-300, "singular oracle system");
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..=n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

pub fn inverse(a: &Mat) -> Mat {
    let n = a.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let e: Vec<f64> = (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
            solve(a, &e)
        })
        .collect();
    (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
}

pub fn transpose(a: &Mat) -> Mat {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .map(|r| (0..b[0].len()).map(|j| r.iter().zip(b).map(|(x, row)| x * row[j]).sum()).collect())
        .collect()
}

pub fn matvec(a: &Mat, v: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

/// `D_m^T D_m` built from repeated first differences.
pub fn penalty(order: usize, dim: usize) -> Mat {
    let mut rows: Mat = (0..dim).map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..order {
        rows = (0..rows.len() - 1)
            .map(|i| rows[i + 1].iter().zip(&rows[i]).map(|(a, b)| a - b).collect())
            .collect();
    }
    matmul(&transpose(&rows), &rows)
}

pub fn to_mat(a: &ndarray::Array2<f64>) -> Mat {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

/// Dense penalized least squares: coefficients, `(Z'Z + lambda Q)^{-1}`, and `tr H`.
pub fn pls(z: &Mat, y: &[f64], order: usize, lambda: f64) -> (Vec<f64>, Mat, f64) {
    let zt = transpose(z);
    let q = penalty(order, z[0].len());
    let mut a = matmul(&zt, z);
    for i in 0..a.len() {
        for j in 0..a.len() {
            a[i][j] += lambda * q[i][j];
        }
    }
    let b = solve(&a, &matvec(&zt, y));
    let inv = inverse(&a);
    let ztz = matmul(&zt, z);
    let tr = (0..a.len()).map(|i| (0..a.len()).map(|k| inv[i][k] * ztz[k][i]).sum::<f64>()).sum();
    (b, inv, tr)
}

/// Ordinary least squares through the normal equations.
pub fn ols(x: &Mat, y: &[f64]) -> Vec<f64> {
    let xt = transpose(x);
    solve(&matmul(&xt, x), &matvec(&xt, y))
}

pub fn example1(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    generate_dataset(&example_truth(1).unwrap(), n, seed)
}
