//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: usize = 40;

fn kronrod_panel<F>(f: &F, a: f64, b: f64, dim: usize) -> (Vec<f64>, f64)
where
    F: Fn(f64) -> Vec<f64>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    for (i, (&x, &w)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let pts: &[f64] = if x == 0.0 { &[0.0] } else { &[-x, x] };
        for &s in pts {
            let v = f(c + h * s);
            debug_assert_eq!(v.len(), dim);
            for d in 0..dim {
                k[d] += w * v[d];
                if i % 2 == 1 {
                    g[d] += WG[i / 2] * v[d];
                }
            }
        }
    }
    let mut err = 0.0f64;
    for d in 0..dim {
        k[d] *= h;
        g[d] *= h;
        err = err.max((k[d] - g[d]).abs());
    }
    (k, err)
}

fn adapt<F>(f: &F, a: f64, b: f64, dim: usize, tol: f64, depth: usize) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Vec<f64>,
{
    let (est, err) = kronrod_panel(f, a, b, dim);
    if err <= tol {
        return Ok(est);
    }
    if depth >= MAX_DEPTH || !err.is_finite() {
        return Err(Error::Quadrature { a, b });
    }
    let mid = 0.5 * (a + b);
    let mut left = adapt(f, a, mid, dim, 0.5 * tol, depth + 1)?;
    let right = adapt(f, mid, b, dim, 0.5 * tol, depth + 1)?;
    for (l, r) in left.iter_mut().zip(right) {
        *l += r;
    }
    Ok(left)
}

/// Integrate a vector-valued function componentwise to absolute tolerance `tol`.
pub fn integrate_vec<F>(f: F, a: f64, b: f64, dim: usize, tol: f64) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Vec<f64>,
{
    if a == b {
        return Ok(vec![0.0; dim]);
    }
    adapt(&f, a, b, dim, tol, 0)
}

pub fn integrate<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate_vec(|x| vec![f(x)], a, b, 1, tol).map(|v| v[0])
}

/// Nodes and weights of the composite 15-point Kronrod rule on `panels`
/// equal sub-intervals of `[a, b]`. Exact for polynomials of degree 22 per panel.
pub fn composite_rule(a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let width = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(15 * panels);
    let mut weights = Vec::with_capacity(15 * panels);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let c = lo + 0.5 * width;
        let h = 0.5 * width;
        for (&x, &w) in XGK.iter().zip(WGK.iter()) {
            if x == 0.0 {
                nodes.push(c);
                weights.push(w * h);
            } else {
                nodes.push(c - h * x);
                weights.push(w * h);
                nodes.push(c + h * x);
                weights.push(w * h);
            }
        }
    }
    (nodes, weights)
}
