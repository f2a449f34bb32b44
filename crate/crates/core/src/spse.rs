//! Two-step semiparametric estimator
//! `f_hat(x) = f(x|beta_hat) + f(x|beta_hat)^gamma r_hat(x)`, where `r_hat`
//! is a penalized spline fitted to `R_i = (y_i - f(x_i|beta_hat)) / f(x_i|beta_hat)^gamma`.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::Prediction;
use crate::error::{check_unit, Error, Result};
use crate::parametric::{fit_ols, FittedModel, ParametricModel, POSITIVITY_THRESHOLD};
use crate::pls::{fit_penalized, SmootherChoice, SmootherFit};
use crate::splinecore::SparseDesign;

/// Additive (`gamma = 0`) or multiplicative (`gamma = 1`) correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Gamma {
    Additive,
    Multiplicative,
}

impl Gamma {
    pub fn exponent(self) -> i32 {
        match self {
            Gamma::Additive => 0,
            Gamma::Multiplicative => 1,
        }
    }

    /// `f^gamma`.
    pub fn scale(self, f: f64) -> f64 {
        match self {
            Gamma::Additive => 1.0,
            Gamma::Multiplicative => f,
        }
    }
}

impl TryFrom<u8> for Gamma {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Gamma::Additive),
            1 => Ok(Gamma::Multiplicative),
            other => Err(Error::InvalidInput(format!("gamma must be 0 or 1, got {other}"))),
        }
    }
}

impl From<Gamma> for u8 {
    fn from(g: Gamma) -> u8 {
        g.exponent() as u8
    }
}

impl std::fmt::Display for Gamma {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.exponent())
    }
}

#[derive(Debug, Clone)]
pub struct SpseFit {
    gamma: Gamma,
    parametric: FittedModel,
    smoother: SmootherFit,
    residuals: Vec<f64>,
    final_residuals: Vec<f64>,
    // (Z'Z + lambda Q)^{-1} Z' diag(e^2 / f^{2 gamma}) Z (Z'Z + lambda Q)^{-1}
    sandwich: Array2<f64>,
}

impl SpseFit {
    pub fn gamma(&self) -> Gamma {
        self.gamma
    }

    pub fn parametric(&self) -> &FittedModel {
        &self.parametric
    }

    pub fn smoother(&self) -> &SmootherFit {
        &self.smoother
    }

    /// The transformed responses `R_gamma` the smoother was fitted to.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// `y_i - f_hat(x_i)`.
    pub fn final_residuals(&self) -> &[f64] {
        &self.final_residuals
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        let f = self.parametric.value(x);
        Ok(f + self.gamma.scale(f) * self.smoother.predict(x)?)
    }

    pub fn evaluate_many(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.evaluate(x)).collect()
    }

    /// Sandwich estimate of `Var f_hat(x)`.
    pub fn variance(&self, x: f64) -> Result<f64> {
        let b = self.smoother.spec().basis.eval_basis(x)?;
        let f = self.gamma.scale(self.parametric.value(x));
        Ok(f * f * b.dot(&self.sandwich.dot(&b)).max(0.0))
    }

    /// Pointwise normal interval `f_hat(x) +- z sqrt(V(x))`.
    pub fn confidence_interval(&self, x: f64, level: f64) -> Result<(f64, f64)> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidInput(format!(
                "confidence level must lie in (0, 1), got {level}"
            )));
        }
        let z = Normal::standard().inverse_cdf(0.5 * (1.0 + level));
        let center = self.evaluate(x)?;
        let half = z * self.variance(x)?.sqrt();
        Ok((center - half, center + half))
    }

    /// Fitted values at `xs`, with pointwise intervals when `level` is given.
    pub fn predictions(&self, xs: &[f64], level: Option<f64>) -> Result<Vec<Prediction>> {
        xs.iter()
            .map(|&x| {
                Ok(Prediction {
                    x,
                    fhat: self.evaluate(x)?,
                    interval: level.map(|l| self.confidence_interval(x, l)).transpose()?,
                })
            })
            .collect()
    }
}

/// Fit the parametric stage by OLS, then smooth the corrected residuals.
pub fn fit_spse(
    xs: &[f64],
    ys: &[f64],
    model: &ParametricModel,
    gamma: Gamma,
    choice: &SmootherChoice,
) -> Result<SpseFit> {
    let parametric = fit_ols(model, xs, ys)?;
    fit_spse_from(parametric, xs, ys, gamma, choice, POSITIVITY_THRESHOLD)
}

/// As [`fit_spse`] with a given parametric stage and positivity threshold.
pub fn fit_spse_from(
    parametric: FittedModel,
    xs: &[f64],
    ys: &[f64],
    gamma: Gamma,
    choice: &SmootherChoice,
    threshold: f64,
) -> Result<SpseFit> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!(
            "xs and ys differ in length ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    for &x in xs {
        check_unit(x)?;
    }
    if gamma == Gamma::Multiplicative {
        parametric.check_positive(threshold)?;
    }
    let fpar = parametric.values(xs);
    let residuals: Vec<f64> = ys
        .iter()
        .zip(&fpar)
        .map(|(y, f)| (y - f) / gamma.scale(*f))
        .collect();
    let spec = choice.resolve(xs, &residuals)?;
    let smoother = fit_penalized(&spec, xs, &residuals)?;

    let design = spec.basis.sparse_design(xs)?;
    let rhat = design.dot(smoother.coefficients().as_slice().expect("contiguous"));
    let final_residuals: Vec<f64> = ys
        .iter()
        .zip(&fpar)
        .zip(&rhat)
        .map(|((y, f), r)| y - (f + gamma.scale(*f) * r))
        .collect();
    let weights: Vec<f64> = final_residuals
        .iter()
        .zip(&fpar)
        .map(|(e, f)| {
            let s = gamma.scale(*f);
            e * e / (s * s)
        })
        .collect();
    let sandwich = sandwich(&design, &weights, smoother.normal_inverse());
    Ok(SpseFit {
        gamma,
        parametric,
        smoother,
        residuals,
        final_residuals,
        sandwich,
    })
}

fn sandwich(design: &SparseDesign, weights: &[f64], inverse: &Array2<f64>) -> Array2<f64> {
    let meat = design.weighted_gram(Some(weights));
    inverse.dot(&meat).dot(inverse)
}

/// Fully nonparametric penalized spline fit to the raw data.
pub fn fit_npse(xs: &[f64], ys: &[f64], choice: &SmootherChoice) -> Result<SmootherFit> {
    choice.fit(xs, ys)
}

/// `n` equally spaced points from 0 to 1.
pub fn unit_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Evaluate a smoother on a grid.
pub fn predict_many(fit: &SmootherFit, xs: &[f64]) -> Result<Array1<f64>> {
    xs.iter().map(|&x| fit.predict(x)).collect::<Result<Vec<_>>>().map(Array1::from)
}
