//! Asymptotic bias and variance of the spline estimators, Bernoulli
//! polynomials, and the population projection `beta_0`.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernelreg::Kernel;
use crate::linalg::{lstsq_qr, Cholesky};
use crate::parametric::{FittedModel, ParametricModel, POSITIVITY_THRESHOLD};
use crate::pls::SmootherSpec;
use crate::quadrature::{composite_rule, integrate, integrate_vec};
use crate::splinecore::{difference_penalty, SplineBasis};
use crate::spse::Gamma;

const QUAD_TOL: f64 = 1e-11;
const PROJECTION_PANELS: usize = 64;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Bernoulli numbers `B_0..=B_p` with `B_1 = -1/2`.
pub fn bernoulli_numbers(p: usize) -> Vec<f64> {
    let mut b = vec![0.0; p + 1];
    b[0] = 1.0;
    for m in 1..=p {
        let s: f64 = (0..m).map(|k| binomial(m + 1, k) * b[k]).sum();
        b[m] = -s / (m + 1) as f64;
    }
    b
}

/// `B_p(x) = sum_k C(p, k) B_k x^{p-k}`.
pub fn bernoulli_poly(p: usize, x: f64) -> f64 {
    let b = bernoulli_numbers(p);
    (0..=p)
        .map(|k| binomial(p, k) * b[k] * x.powi((p - k) as i32))
        .sum()
}

/// Derivatives `h, h', ..., h^{(k)}` of `h = u / g` from those of `u` and `g`.
pub fn quotient_derivatives(u: &[f64], g: &[f64]) -> Vec<f64> {
    assert_eq!(u.len(), g.len());
    let mut h: Vec<f64> = Vec::with_capacity(u.len());
    for k in 0..u.len() {
        let s: f64 = (0..k).map(|i| binomial(k, i) * h[i] * g[k - i]).sum();
        h.push((u[k] - s) / g[0]);
    }
    h
}

/// Richardson-extrapolated central difference of order `k` with step `h`.
pub fn richardson_derivative<F: Fn(f64) -> f64>(f: F, x: f64, k: usize, h: f64) -> f64 {
    let central = |h: f64| -> f64 {
        (0..=k)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * binomial(k, i) * f(x + (k as f64 / 2.0 - i as f64) * h)
            })
            .sum::<f64>()
            / h.powi(k as i32)
    };
    (4.0 * central(h / 2.0) - central(h)) / 3.0
}

/// Regression function, error variance and design density on [0, 1]. All
/// three are linear combinations of analytic features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueModel {
    mean: FittedModel,
    variance: FittedModel,
    density: FittedModel,
}

impl TrueModel {
    pub fn new(mean: FittedModel, variance: FittedModel, density: FittedModel) -> Result<Self> {
        let grid = (0..=1000).map(|i| i as f64 / 1000.0);
        if grid.clone().any(|x| variance.value(x) < 0.0 || !variance.value(x).is_finite()) {
            return Err(Error::InvalidInput("error variance must be non-negative on [0, 1]".into()));
        }
        if grid.clone().any(|x| density.value(x) < 0.0) {
            return Err(Error::InvalidInput("design density must be non-negative on [0, 1]".into()));
        }
        let mass = integrate(|x| density.value(x), 0.0, 1.0, 1e-12)?;
        if (mass - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidInput(format!(
                "design density integrates to {mass}, not 1"
            )));
        }
        Ok(TrueModel {
            mean,
            variance,
            density,
        })
    }

    /// Constant error variance and a uniform design.
    pub fn homoscedastic(mean: FittedModel, sigma2: f64) -> Result<Self> {
        let c = ParametricModel::constant();
        Self::new(mean, c.with_coefficients(vec![sigma2])?, c.with_coefficients(vec![1.0])?)
    }

    pub fn with_variance(mut self, variance: FittedModel) -> Result<Self> {
        self.variance = variance;
        Self::new(self.mean, self.variance, self.density)
    }

    pub fn mean(&self) -> &FittedModel {
        &self.mean
    }

    pub fn variance_model(&self) -> &FittedModel {
        &self.variance
    }

    pub fn density_model(&self) -> &FittedModel {
        &self.density
    }

    pub fn f(&self, x: f64) -> f64 {
        self.mean.value(x)
    }

    pub fn derivative(&self, x: f64, k: usize) -> f64 {
        self.mean.derivative(x, k)
    }

    pub fn sigma2(&self, x: f64) -> f64 {
        self.variance.value(x).max(0.0)
    }

    pub fn q(&self, x: f64) -> f64 {
        self.density.value(x)
    }

    /// Whether the design density is identically 1.
    pub fn uniform_design(&self) -> bool {
        self.density.model().features() == [crate::parametric::Feature::Const]
            && self.density.coefficients() == [1.0]
    }
}

/// `argmin_beta int (f - f(.|beta))^2 q`, by weighted QR on a composite
/// Gauss-Kronrod discretization of [0, 1].
pub fn beta0_projection(truth: &TrueModel, model: &ParametricModel) -> Result<FittedModel> {
    let (nodes, weights) = composite_rule(0.0, 1.0, PROJECTION_PANELS);
    let m = model.num_params();
    let mut a = Array2::zeros((nodes.len(), m));
    let mut b = Array1::zeros(nodes.len());
    for (i, (&x, &w)) in nodes.iter().zip(&weights).enumerate() {
        let sw = (w * truth.q(x)).sqrt();
        for (k, g) in model.features().iter().enumerate() {
            a[[i, k]] = sw * g.eval(x);
        }
        b[i] = sw * truth.f(x);
    }
    let beta = lstsq_qr(&a, b.view()).map_err(|d| Error::Collinear {
        model: model.name().to_string(),
        feature: model.features()[d.0.min(m - 1)].to_string(),
    })?;
    model.with_coefficients(beta.to_vec())
}

/// Derivatives of order `0..=k` of `r_gamma = (f - f_par) / f_par^gamma`.
pub fn correction_derivatives(truth: &TrueModel, par: &FittedModel, gamma: Gamma, x: f64, k: usize) -> Vec<f64> {
    let u: Vec<f64> = (0..=k)
        .map(|j| truth.derivative(x, j) - par.derivative(x, j))
        .collect();
    match gamma {
        Gamma::Additive => u,
        Gamma::Multiplicative => {
            let g: Vec<f64> = (0..=k).map(|j| par.derivative(x, j)).collect();
            quotient_derivatives(&u, &g)
        }
    }
}

/// Integrate `B_i B_j w` per segment for every weight function in `weights`.
fn segment_grams(basis: &SplineBasis, weights: &[&dyn Fn(f64) -> f64]) -> Result<Vec<Array2<f64>>> {
    let dim = basis.dim();
    let w = basis.degree() + 1;
    let nw = weights.len();
    let mut out = vec![Array2::<f64>::zeros((dim, dim)); nw];
    for s in 0..basis.segments() {
        let a = basis.knot(s as i64);
        let b = basis.knot(s as i64 + 1);
        let vals = integrate_vec(
            |x| {
                let (_, v) = basis.eval_nonzero_unchecked(x);
                let mut r = Vec::with_capacity(nw * w * w);
                for wf in weights {
                    let q = wf(x);
                    for i in 0..w {
                        for j in 0..w {
                            r.push(v[i] * v[j] * q);
                        }
                    }
                }
                r
            },
            a,
            b,
            nw * w * w,
            QUAD_TOL,
        )?;
        for (t, g) in out.iter_mut().enumerate() {
            for i in 0..w {
                for j in 0..w {
                    g[[s + i, s + j]] += vals[t * w * w + i * w + j];
                }
            }
        }
    }
    Ok(out)
}

/// `G(q)` and `G(sigma, beta, gamma, q)`.
pub fn g_matrices(
    basis: &SplineBasis,
    truth: &TrueModel,
    par: &FittedModel,
    gamma: Gamma,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if gamma == Gamma::Multiplicative {
        par.check_positive(POSITIVITY_THRESHOLD)?;
    }
    let q = |x: f64| truth.q(x);
    let qs = |x: f64| {
        let s = gamma.scale(par.value(x));
        truth.sigma2(x) * truth.q(x) / (s * s)
    };
    let mut g = segment_grams(basis, &[&q, &qs])?;
    let gs = g.pop().expect("two matrices");
    Ok((g.pop().expect("two matrices"), gs))
}

/// `L2(q)` projection coefficients of `r_gamma(., beta)` onto the spline basis.
pub fn spline_projection(basis: &SplineBasis, truth: &TrueModel, par: &FittedModel, gamma: Gamma) -> Result<Array1<f64>> {
    let (g, _) = g_matrices(basis, truth, par, gamma)?;
    let w = basis.degree() + 1;
    let mut rhs = Array1::<f64>::zeros(basis.dim());
    for s in 0..basis.segments() {
        let vals = integrate_vec(
            |x| {
                let (_, v) = basis.eval_nonzero_unchecked(x);
                let f = par.value(x);
                let r = (truth.f(x) - f) / gamma.scale(f) * truth.q(x);
                v.iter().map(|b| b * r).collect()
            },
            basis.knot(s as i64),
            basis.knot(s as i64 + 1),
            w,
            QUAD_TOL,
        )?;
        for (i, v) in vals.into_iter().enumerate() {
            rhs[s + i] += v;
        }
    }
    Ok(Cholesky::factor(&g)?.solve(rhs.view()))
}

/// Asymptotic bias terms and variance on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub grid: Vec<f64>,
    pub b_a: Vec<f64>,
    /// Penalty bias with the population Gram matrix `G(q)`.
    pub b_lambda: Vec<f64>,
    /// Penalty bias with `Lambda = Z'Z + lambda Q_m` on a given design, when requested.
    pub b_lambda_empirical: Option<Vec<f64>>,
    pub variance: Vec<f64>,
}

/// Approximation bias `b_a(x)` at one point.
pub fn approximation_bias(basis: &SplineBasis, truth: &TrueModel, par: &FittedModel, gamma: Gamma, x: f64) -> f64 {
    let p = basis.degree();
    let kk = basis.segments() as f64;
    let s = basis.segment_of(x);
    let frac = (x - basis.knot(s as i64)) * kk;
    let r = correction_derivatives(truth, par, gamma, x, p + 1)[p + 1];
    -gamma.scale(par.value(x)) * r / (kk.powi(p as i32 + 1) * factorial(p + 1)) * bernoulli_poly(p + 1, frac)
}

/// `b_a`, `b_lambda` (with `b*` the `L2(q)` spline projection of `r_gamma`) and
/// `f_par^{2 gamma} / n B' G^{-1} G_sigma G^{-1} B` on `grid`.
pub fn asymptotic_bias(
    spec: &SmootherSpec,
    n: usize,
    truth: &TrueModel,
    par: &FittedModel,
    gamma: Gamma,
    grid: &[f64],
) -> Result<BiasReport> {
    let basis = &spec.basis;
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be positive".into()));
    }
    let penalty = difference_penalty(spec.order, basis.dim())?;
    let (g, gs) = g_matrices(basis, truth, par, gamma)?;
    let chol = Cholesky::factor(&g)?;
    let bstar = spline_projection(basis, truth, par, gamma)?;
    let shrink = chol.solve(penalty.matrix().dot(&bstar).view());
    let ginv = chol.inverse();
    let sandwich = ginv.dot(&gs).dot(&ginv);
    let nf = n as f64;
    let mut report = BiasReport {
        grid: grid.to_vec(),
        b_a: Vec::with_capacity(grid.len()),
        b_lambda: Vec::with_capacity(grid.len()),
        b_lambda_empirical: None,
        variance: Vec::with_capacity(grid.len()),
    };
    for &x in grid {
        let b = basis.eval_basis(x)?;
        let fg = gamma.scale(par.value(x));
        report.b_a.push(approximation_bias(basis, truth, par, gamma, x));
        report.b_lambda.push(-spec.lambda / nf * fg * b.dot(&shrink));
        report.variance.push(fg * fg / nf * b.dot(&sandwich.dot(&b)));
    }
    Ok(report)
}

impl BiasReport {
    /// Fill `b_lambda_empirical = -lambda f_par^gamma B' Lambda^{-1} Q_m b*` for the design `xs`.
    pub fn with_empirical(
        mut self,
        spec: &SmootherSpec,
        xs: &[f64],
        truth: &TrueModel,
        par: &FittedModel,
        gamma: Gamma,
    ) -> Result<Self> {
        let basis = &spec.basis;
        let penalty = difference_penalty(spec.order, basis.dim())?;
        let normal = basis.sparse_design(xs)?.gram() + penalty.matrix() * spec.lambda;
        let bstar = spline_projection(basis, truth, par, gamma)?;
        let shrink = Cholesky::factor(&normal)?.solve(penalty.matrix().dot(&bstar).view());
        let vals = self
            .grid
            .iter()
            .map(|&x| {
                let b = basis.eval_basis(x)?;
                Ok(-spec.lambda * gamma.scale(par.value(x)) * b.dot(&shrink))
            })
            .collect::<Result<Vec<_>>>()?;
        self.b_lambda_empirical = Some(vals);
        Ok(self)
    }
}

/// `int z^{p+1} H(z) dz` for odd `p`.
pub fn local_poly_bias_constant(p: usize, kernel: Kernel) -> Result<f64> {
    if p % 2 == 0 {
        return Err(Error::InvalidInput(format!(
            "the local polynomial bias constant is only available for odd degrees, got {p}"
        )));
    }
    kernel.moment(p as u32 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_low_orders() {
        assert_eq!(bernoulli_poly(0, 0.7), 1.0);
        assert!((bernoulli_poly(1, 0.3) - (0.3 - 0.5)).abs() < 1e-15);
        let x: f64 = 0.3;
        let b4 = x.powi(4) - 2.0 * x.powi(3) + x * x - 1.0 / 30.0;
        assert!((bernoulli_poly(4, x) - b4).abs() < 1e-14);
    }

    #[test]
    fn quotient_rule_recursion() {
        // h = x^2 / e^x at x = 0.4
        let x: f64 = 0.4;
        let u = [x * x, 2.0 * x, 2.0, 0.0];
        let g = [x.exp(); 4];
        let h = quotient_derivatives(&u, &g);
        let exact2 = (x * x - 4.0 * x + 2.0) * (-x).exp();
        assert!((h[2] - exact2).abs() < 1e-14);
        let exact3 = (-x * x + 6.0 * x - 6.0) * (-x).exp();
        assert!((h[3] - exact3).abs() < 1e-14);
    }

    #[test]
    fn richardson_matches_analytic() {
        let d = richardson_derivative(|x| (3.0 * x).sin(), 0.2, 2, 1e-2);
        assert!((d + 9.0 * (0.6f64).sin()).abs() < 1e-6);
    }

    #[test]
    fn degree_zero_gram_is_diagonal() {
        let truth = TrueModel::homoscedastic(ParametricModel::constant().with_coefficients(vec![1.0]).unwrap(), 1.0).unwrap();
        let basis = SplineBasis::new(0, 4).unwrap();
        let par = ParametricModel::constant().with_coefficients(vec![1.0]).unwrap();
        let (g, gs) = g_matrices(&basis, &truth, &par, Gamma::Additive).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 0.25 } else { 0.0 };
                assert!((g[[i, j]] - want).abs() < 1e-12);
                assert!((gs[[i, j]] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn odd_degree_only_for_kernel_constant() {
        assert!(local_poly_bias_constant(2, Kernel::Gaussian).is_err());
        assert!((local_poly_bias_constant(1, Kernel::Epanechnikov).unwrap() - 0.2).abs() < 1e-12);
    }
}
