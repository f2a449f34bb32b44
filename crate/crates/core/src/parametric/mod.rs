//! Parametric families `f(x|beta) = sum_k beta_k g_k(x)`, least-squares
//! fitting, and Gaussian information criteria.
//!
//! Every family is linear in `beta`, so the Gaussian maximum-likelihood
//! estimate of `beta` is the OLS solution.

mod feature;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

pub use feature::{parse_features, Feature};

use crate::error::{Error, Result};
use crate::linalg::{lstsq_qr, Cholesky, DependentColumn};

/// Default lower bound `a` for `f(x|beta)` in multiplicative pipelines.
pub const POSITIVITY_THRESHOLD: f64 = 1e-3;
/// Number of equally spaced points used by the positivity guard.
pub const POSITIVITY_GRID: usize = 1001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricModel {
    name: String,
    features: Vec<Feature>,
}

impl ParametricModel {
    pub fn new(name: impl Into<String>, features: Vec<Feature>) -> Result<Self> {
        let name = name.into();
        if features.is_empty() {
            return Err(Error::InvalidInput(format!("model `{name}` has no features")));
        }
        Ok(ParametricModel { name, features })
    }

    /// Build a model from an expression such as `1 + sin(2)` or `poly(3)`.
    pub fn parse(name: impl Into<String>, expr: &str) -> Result<Self> {
        Self::new(name, parse_features(expr)?)
    }

    /// `f(x|beta) = beta_0`.
    pub fn constant() -> Self {
        ParametricModel {
            name: "const".into(),
            features: vec![Feature::Const],
        }
    }

    /// `1, x, ..., x^q`, named `polyq`.
    pub fn polynomial(q: u32) -> Self {
        let mut features = vec![Feature::Const];
        features.extend((1..=q).map(Feature::Power));
        ParametricModel {
            name: format!("poly{q}"),
            features,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    /// Number of coefficients `M`.
    pub fn num_params(&self) -> usize {
        self.features.len()
    }

    pub fn design_row(&self, x: f64) -> Vec<f64> {
        self.features.iter().map(|g| g.eval(x)).collect()
    }

    pub fn design_matrix(&self, xs: &[f64]) -> Array2<f64> {
        let mut d = Array2::zeros((xs.len(), self.num_params()));
        for (i, &x) in xs.iter().enumerate() {
            for (k, g) in self.features.iter().enumerate() {
                d[[i, k]] = g.eval(x);
            }
        }
        d
    }

    /// `d^order f(x|beta) / dx^order` for explicit coefficients.
    pub fn derivative_with(&self, beta: &[f64], x: f64, order: usize) -> f64 {
        assert_eq!(beta.len(), self.num_params(), "coefficient count mismatch");
        self.features
            .iter()
            .zip(beta)
            .map(|(g, b)| b * g.derivative(x, order))
            .sum()
    }

    pub fn value_with(&self, beta: &[f64], x: f64) -> f64 {
        self.derivative_with(beta, x, 0)
    }

    /// Attach coefficients without fitting.
    pub fn with_coefficients(&self, beta: Vec<f64>) -> Result<FittedModel> {
        if beta.len() != self.num_params() || beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "model `{}` needs {} finite coefficients, got {:?}",
                self.name,
                self.num_params(),
                beta
            )));
        }
        Ok(FittedModel {
            model: self.clone(),
            beta,
            rss: f64::NAN,
            n: 0,
            y_scale: 0.0,
        })
    }
}

/// Candidate families of the four reference examples, in their listed order.
pub fn model_library(example: u32) -> Result<Vec<ParametricModel>> {
    let p = |name: &str, expr: &str| ParametricModel::parse(name, expr);
    match example {
        1 => Ok(vec![
            p("sin", "1 + sin(2)")?,
            ParametricModel::polynomial(1),
            ParametricModel::polynomial(3),
        ]),
        2 | 3 => Ok((1..=6).map(ParametricModel::polynomial).collect()),
        4 => Ok(vec![
            p("sincos", "1 + expdamp(1 + sin(7) + cos(3))")?,
            p("sin", "1 + expdamp(1 + sin(7))")?,
            p("cos", "1 + expdamp(1 + cos(3))")?,
            p("poly1", "1 + expdamp(poly(1))")?,
            p("poly4", "1 + expdamp(poly(4))")?,
            p("poly8", "1 + expdamp(poly(8))")?,
        ]),
        other => Err(Error::InvalidInput(format!(
            "unknown example id {other}; expected 1, 2, 3 or 4"
        ))),
    }
}

/// Resolve a model token: a library name of `example` (if given), `const`,
/// `polyQ`, or otherwise an expression (named by the expression itself).
pub fn resolve_model(token: &str, example: Option<u32>) -> Result<ParametricModel> {
    let token = token.trim();
    if let Some(id) = example {
        if let Some(m) = model_library(id)?.into_iter().find(|m| m.name() == token) {
            return Ok(m);
        }
    }
    if token == "const" {
        return Ok(ParametricModel::constant());
    }
    if let Some(q) = token.strip_prefix("poly").and_then(|s| s.parse::<u32>().ok()) {
        return Ok(ParametricModel::polynomial(q));
    }
    if token == "sin" {
        return ParametricModel::parse("sin", "1 + sin(2)");
    }
    ParametricModel::parse(token, token)
}

/// A model with coefficients, plus the fit statistics needed by AIC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    model: ParametricModel,
    beta: Vec<f64>,
    rss: f64,
    n: usize,
    y_scale: f64,
}

impl FittedModel {
    pub fn model(&self) -> &ParametricModel {
        &self.model
    }

    pub fn name(&self) -> &str {
        self.model.name()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.beta
    }

    pub fn num_params(&self) -> usize {
        self.model.num_params()
    }

    /// Residual sum of squares on the training data (NaN if not fitted).
    pub fn rss(&self) -> f64 {
        self.rss
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value(&self, x: f64) -> f64 {
        self.model.value_with(&self.beta, x)
    }

    pub fn derivative(&self, x: f64, order: usize) -> f64 {
        self.model.derivative_with(&self.beta, x, order)
    }

    pub fn values(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.value(x)).collect()
    }

    /// Minimum of `f(x|beta)` over `POSITIVITY_GRID` equally spaced points of [0, 1].
    pub fn grid_minimum(&self) -> f64 {
        let last = (POSITIVITY_GRID - 1) as f64;
        (0..POSITIVITY_GRID)
            .map(|i| self.value(i as f64 / last))
            .fold(f64::INFINITY, f64::min)
    }

    /// Reject the model unless `f(x|beta) > threshold` on the guard grid.
    pub fn check_positive(&self, threshold: f64) -> Result<f64> {
        let min = self.grid_minimum();
        if min > threshold {
            Ok(min)
        } else {
            Err(Error::Positivity {
                model: self.name().to_string(),
                min,
                threshold,
            })
        }
    }

    fn sigma2(&self) -> Result<f64> {
        if self.n == 0 || !self.rss.is_finite() {
            return Err(Error::InvalidInput(format!(
                "model `{}` carries no training fit",
                self.name()
            )));
        }
        if self.n <= self.num_params() + 1 {
            return Err(Error::InvalidInput(format!(
                "information criteria need n > M + 1 (n = {}, M = {})",
                self.n,
                self.num_params()
            )));
        }
        let s2 = self.rss / self.n as f64;
        if !(s2 > f64::EPSILON * f64::EPSILON * self.y_scale) {
            return Err(Error::DegenerateFit(format!(
                "model `{}` interpolates the data (sigma^2 = {s2})",
                self.name()
            )));
        }
        Ok(s2)
    }
}

/// Ordinary least squares via Householder QR.
pub fn fit_ols(model: &ParametricModel, xs: &[f64], ys: &[f64]) -> Result<FittedModel> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!(
            "xs and ys differ in length ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    let m = model.num_params();
    if n < m {
        return Err(Error::InvalidInput(format!(
            "model `{}` has {m} coefficients but only {n} observations",
            model.name()
        )));
    }
    let design = model.design_matrix(xs);
    let y = Array1::from(ys.to_vec());
    let beta = match lstsq_qr(&design, y.view()) {
        Ok(b) => b,
        Err(DependentColumn(j)) => {
            return Err(Error::Collinear {
                model: model.name().to_string(),
                feature: model.features()[j.min(m - 1)].to_string(),
            })
        }
    };
    let fitted = design.dot(&beta);
    let rss = (&y - &fitted).mapv(|e| e * e).sum();
    Ok(FittedModel {
        model: model.clone(),
        beta: beta.to_vec(),
        rss,
        n,
        y_scale: ys.iter().map(|v| v * v).sum::<f64>() / n as f64,
    })
}

/// `n log(2 pi sigma^2) + n + 2 (M + 1)` with `sigma^2 = RSS / n`.
pub fn aic(fit: &FittedModel) -> Result<f64> {
    let s2 = fit.sigma2()?;
    let n = fit.n() as f64;
    Ok(n * (2.0 * std::f64::consts::PI * s2).ln() + n + 2.0 * (fit.num_params() + 1) as f64)
}

/// `tr(J^{-1} I)` for the Gaussian working likelihood in `(beta, sigma^2)`.
pub fn tic_penalty(fit: &FittedModel, xs: &[f64], ys: &[f64]) -> Result<f64> {
    let s2 = fit.sigma2()?;
    if xs.len() != fit.n() || ys.len() != fit.n() {
        return Err(Error::InvalidInput(
            "TIC must be evaluated on the training data".into(),
        ));
    }
    let m = fit.num_params();
    let d = m + 1;
    let n = fit.n() as f64;
    let mut info = Array2::<f64>::zeros((d, d));
    let mut hess = Array2::<f64>::zeros((d, d));
    for (&x, &y) in xs.iter().zip(ys) {
        let g = fit.model().design_row(x);
        let e = y - fit.value(x);
        let mut score = vec![0.0; d];
        for k in 0..m {
            score[k] = g[k] * e / s2;
        }
        score[m] = -0.5 / s2 + e * e / (2.0 * s2 * s2);
        for a in 0..d {
            for b in 0..d {
                info[[a, b]] += score[a] * score[b] / n;
            }
        }
        for a in 0..m {
            for b in 0..m {
                hess[[a, b]] += g[a] * g[b] / s2 / n;
            }
            let cross = g[a] * e / (s2 * s2) / n;
            hess[[a, m]] += cross;
            hess[[m, a]] += cross;
        }
        hess[[m, m]] += (e * e / (s2 * s2 * s2) - 0.5 / (s2 * s2)) / n;
    }
    let chol = Cholesky::factor(&hess)?;
    Ok((0..d).map(|j| chol.solve(info.column(j))[j]).sum())
}

/// AIC with `2 (M + 1)` replaced by `2 tr(J^{-1} I)`.
pub fn tic(fit: &FittedModel, xs: &[f64], ys: &[f64]) -> Result<f64> {
    let s2 = fit.sigma2()?;
    let n = fit.n() as f64;
    Ok(n * (2.0 * std::f64::consts::PI * s2).ln() + n + 2.0 * tic_penalty(fit, xs, ys)?)
}
