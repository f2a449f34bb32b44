//! Penalized least-squares spline smoothing and GCV selection of `(K, lambda)`.

use log::warn;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::splinecore::{difference_penalty, PenaltyMatrix, SparseDesign, SplineBasis};

/// Basis, penalty order `m` and smoothing parameter `lambda` of a P-spline smoother.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmootherSpec {
    pub basis: SplineBasis,
    pub order: usize,
    pub lambda: f64,
}

impl SmootherSpec {
    pub fn new(degree: usize, segments: usize, order: usize, lambda: f64) -> Result<Self> {
        let basis = SplineBasis::new(degree, segments)?;
        Self::with_basis(basis, order, lambda)
    }

    pub fn with_basis(basis: SplineBasis, order: usize, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!(
                "smoothing parameter must be finite and >= 0, got {lambda}"
            )));
        }
        if order == 0 || order >= basis.dim() {
            return Err(Error::InvalidInput(format!(
                "penalty order {order} must lie in [1, {})",
                basis.dim()
            )));
        }
        Ok(SmootherSpec {
            basis,
            order,
            lambda,
        })
    }

    pub fn segments(&self) -> usize {
        self.basis.segments()
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }
}

#[derive(Debug, Clone)]
pub struct SmootherFit {
    spec: SmootherSpec,
    coefficients: Array1<f64>,
    normal_inverse: Array2<f64>,
    penalty: Array2<f64>,
    hat_trace: f64,
    rss: f64,
    n: usize,
}

impl SmootherFit {
    pub fn spec(&self) -> &SmootherSpec {
        &self.spec
    }

    /// Fitted spline coefficients `b`.
    pub fn coefficients(&self) -> &Array1<f64> {
        &self.coefficients
    }

    /// `(Z'Z + lambda Q_m)^{-1}`.
    pub fn normal_inverse(&self) -> &Array2<f64> {
        &self.normal_inverse
    }

    pub fn hat_trace(&self) -> f64 {
        self.hat_trace
    }

    pub fn rss(&self) -> f64 {
        self.rss
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `b' Q_m b`.
    pub fn roughness(&self) -> f64 {
        self.coefficients.dot(&self.penalty.dot(&self.coefficients))
    }

    /// Value of the penalized criterion at the optimum.
    pub fn objective(&self) -> f64 {
        self.rss + self.spec.lambda * self.roughness()
    }

    /// `n RSS / (n - tr H)^2`; infinite when the fit uses all degrees of freedom.
    pub fn gcv(&self) -> f64 {
        let n = self.n as f64;
        let denom = n - self.hat_trace;
        if denom <= 1e-10 * n {
            f64::INFINITY
        } else {
            n * self.rss / (denom * denom)
        }
    }

    pub fn predict(&self, x: f64) -> Result<f64> {
        let basis = &self.spec.basis;
        let (first, vals) = basis.eval_nonzero(x)?;
        Ok(vals
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.coefficients[first + i])
            .sum())
    }
}

/// Sufficient statistics of one basis on one dataset, reusable across `lambda`.
pub(crate) struct PenalizedSystem {
    basis: SplineBasis,
    order: usize,
    design: SparseDesign,
    gram: Array2<f64>,
    zty: Array1<f64>,
    penalty: PenaltyMatrix,
    ys: Vec<f64>,
}

impl PenalizedSystem {
    pub(crate) fn new(basis: SplineBasis, order: usize, xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidInput(format!(
                "xs and ys differ in length ({} vs {})",
                xs.len(),
                ys.len()
            )));
        }
        let design = basis.sparse_design(xs)?;
        let penalty = difference_penalty(order, basis.dim())?;
        if basis.dim() * 2 > xs.len() {
            warn!(
                "basis dimension {} exceeds half the sample size {}",
                basis.dim(),
                xs.len()
            );
        }
        Ok(PenalizedSystem {
            gram: design.gram(),
            zty: design.t_dot(ys),
            basis,
            order,
            design,
            penalty,
            ys: ys.to_vec(),
        })
    }

    pub(crate) fn gram(&self) -> &Array2<f64> {
        &self.gram
    }

    pub(crate) fn solve(&self, lambda: f64) -> Result<SmootherFit> {
        let spec = SmootherSpec::with_basis(self.basis.clone(), self.order, lambda)?;
        let normal = &self.gram + &(self.penalty.matrix() * lambda);
        let chol = Cholesky::factor(&normal)?;
        let coefficients = chol.solve(self.zty.view());
        let normal_inverse = chol.inverse();
        let hat_trace = (&normal_inverse * &self.gram).sum();
        let fitted = self.design.dot(coefficients.as_slice().expect("contiguous"));
        let rss = self
            .ys
            .iter()
            .zip(&fitted)
            .map(|(y, f)| (y - f) * (y - f))
            .sum();
        Ok(SmootherFit {
            spec,
            coefficients,
            normal_inverse,
            penalty: self.penalty.matrix().clone(),
            hat_trace,
            rss,
            n: self.ys.len(),
        })
    }
}

/// Minimize `(y - Z b)'(y - Z b) + lambda b' Q_m b`.
pub fn fit_penalized(spec: &SmootherSpec, xs: &[f64], ys: &[f64]) -> Result<SmootherFit> {
    PenalizedSystem::new(spec.basis.clone(), spec.order, xs, ys)?.solve(spec.lambda)
}

pub fn predict(fit: &SmootherFit, x: f64) -> Result<f64> {
    fit.predict(x)
}

/// Candidate grids for GCV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcvGrid {
    pub segments: Vec<usize>,
    pub lambdas: Vec<f64>,
}

impl GcvGrid {
    /// `K` in `5..=min(ceil(n/4), 40)` and `lambda` in `{0} U logspace(1e-4, 1e4, 17)`.
    pub fn default_for(n: usize) -> Self {
        let upper = n.div_ceil(4).clamp(5, 40);
        let mut lambdas = vec![0.0];
        lambdas.extend((0..17).map(|i| 10f64.powf(-4.0 + 0.5 * i as f64)));
        GcvGrid {
            segments: (5..=upper).collect(),
            lambdas,
        }
    }
}

/// GCV-optimal `(K, lambda)`; ties go to the smaller `K`, then the larger `lambda`.
pub fn gcv_select(
    xs: &[f64],
    ys: &[f64],
    grid: &GcvGrid,
    degree: usize,
    order: usize,
) -> Result<SmootherSpec> {
    gcv_select_where(xs, ys, grid, degree, order, |_| true)
}

/// As [`gcv_select`], restricted to the systems accepted by `admit`.
pub(crate) fn gcv_select_where<F>(
    xs: &[f64],
    ys: &[f64],
    grid: &GcvGrid,
    degree: usize,
    order: usize,
    admit: F,
) -> Result<SmootherSpec>
where
    F: Fn(&PenalizedSystem) -> bool,
{
    if grid.segments.is_empty() || grid.lambdas.is_empty() {
        return Err(Error::InvalidInput("GCV grid is empty".into()));
    }
    if let Some(l) = grid.lambdas.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::InvalidInput(format!("negative lambda {l} in GCV grid")));
    }
    let mut scored: Vec<(usize, f64, f64)> = Vec::new();
    for &k in &grid.segments {
        let basis = SplineBasis::new(degree, k)?;
        if order >= basis.dim() {
            continue;
        }
        let system = PenalizedSystem::new(basis, order, xs, ys)?;
        if !admit(&system) {
            continue;
        }
        for &lambda in &grid.lambdas {
            if let Ok(fit) = system.solve(lambda) {
                let score = fit.gcv();
                if score.is_finite() {
                    scored.push((k, lambda, score));
                }
            }
        }
    }
    let best = scored
        .into_iter()
        .min_by(|a, b| {
            a.2.total_cmp(&b.2)
                .then(a.0.cmp(&b.0))
                .then(b.1.total_cmp(&a.1))
        })
        .ok_or_else(|| Error::SelectionFailed("every GCV candidate is singular".into()))?;
    SmootherSpec::new(degree, best.0, order, best.1)
}

/// How the smoother hyperparameters are obtained for a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmootherChoice {
    Fixed(SmootherSpec),
    /// GCV over `grid`; the default grid for the sample size when `None`.
    Gcv {
        degree: usize,
        order: usize,
        grid: Option<GcvGrid>,
    },
    /// `K = ceil(n^{1/(2p+1)})`, `lambda = n^{p/(2p+1)}`.
    Rates { degree: usize, order: usize },
}

impl SmootherChoice {
    pub fn gcv(degree: usize, order: usize) -> Self {
        SmootherChoice::Gcv {
            degree,
            order,
            grid: None,
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            SmootherChoice::Fixed(s) => s.degree(),
            SmootherChoice::Gcv { degree, .. } | SmootherChoice::Rates { degree, .. } => *degree,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            SmootherChoice::Fixed(s) => s.order,
            SmootherChoice::Gcv { order, .. } | SmootherChoice::Rates { order, .. } => *order,
        }
    }

    /// Concrete `(K, lambda)` for the data `(xs, ys)`.
    pub fn resolve(&self, xs: &[f64], ys: &[f64]) -> Result<SmootherSpec> {
        match self {
            SmootherChoice::Fixed(s) => Ok(s.clone()),
            SmootherChoice::Gcv {
                degree,
                order,
                grid,
            } => {
                let default;
                let grid = match grid {
                    Some(g) => g,
                    None => {
                        default = GcvGrid::default_for(xs.len());
                        &default
                    }
                };
                gcv_select(xs, ys, grid, *degree, *order)
            }
            SmootherChoice::Rates { degree, order } => {
                let (k, lambda) = rate_hyperparameters(xs.len(), *degree);
                SmootherSpec::new(*degree, k.max(*order), *order, lambda)
            }
        }
    }

    pub fn fit(&self, xs: &[f64], ys: &[f64]) -> Result<SmootherFit> {
        fit_penalized(&self.resolve(xs, ys)?, xs, ys)
    }
}

/// `(ceil(n^{1/(2p+1)}), n^{p/(2p+1)})`.
pub fn rate_hyperparameters(n: usize, degree: usize) -> (usize, f64) {
    let n = n as f64;
    let e = 1.0 / (2 * degree + 1) as f64;
    ((n.powf(e).ceil() as usize).max(1), n.powf(degree as f64 * e))
}
