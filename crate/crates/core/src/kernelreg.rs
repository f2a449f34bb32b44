//! Local polynomial regression: derivative estimation for pilots and the
//! local-linear comparators (plain and parametrically guided).

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::linalg::lstsq_qr;
use crate::parametric::{fit_ols, FittedModel, ParametricModel, POSITIVITY_THRESHOLD};
use crate::quadrature::integrate;
use crate::spse::Gamma;

/// Maximum number of local bandwidth doublings when the local design is singular.
pub const MAX_DOUBLINGS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Gaussian,
    Epanechnikov,
}

impl Kernel {
    pub fn weight(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            Kernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
        }
    }

    /// `int z^k H(z) dz` by adaptive quadrature.
    pub fn moment(self, k: u32) -> Result<f64> {
        let (a, b) = match self {
            Kernel::Gaussian => (-40.0, 40.0),
            Kernel::Epanechnikov => (-1.0, 1.0),
        };
        integrate(|z| z.powi(k as i32) * self.weight(z), a, b, 1e-13)
    }
}

/// Bandwidth policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    /// Leave-one-out cross-validation over [`default_bandwidth_grid`].
    Cv,
    CvGrid(Vec<f64>),
}

/// 40 log-spaced bandwidths from 0.01 to 1.
pub fn default_bandwidth_grid() -> Vec<f64> {
    (0..40)
        .map(|i| 10f64.powf(-2.0 + 2.0 * i as f64 / 39.0))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalPolyFit {
    degree: usize,
    kernel: Kernel,
    bandwidth: f64,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl LocalPolyFit {
    pub fn new(degree: usize, kernel: Kernel, bandwidth: f64, xs: &[f64], ys: &[f64]) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::InvalidInput(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(Error::InvalidInput(format!(
                "local polynomial needs equally long non-empty xs and ys ({} vs {})",
                xs.len(),
                ys.len()
            )));
        }
        Ok(LocalPolyFit {
            degree,
            kernel,
            bandwidth,
            xs: xs.to_vec(),
            ys: ys.to_vec(),
        })
    }

    /// Choose `h` by leave-one-out cross-validation; ties go to the smaller `h`.
    pub fn with_cv(degree: usize, kernel: Kernel, grid: &[f64], xs: &[f64], ys: &[f64]) -> Result<Self> {
        let h = loocv_bandwidth(degree, kernel, grid, xs, ys)?;
        Self::new(degree, kernel, h, xs, ys)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Estimates of `m(x), m'(x), ..., m^{(d)}(x)`.
    pub fn derivatives(&self, x: f64) -> Result<Vec<f64>> {
        check_unit(x)?;
        local_fit(self.degree, self.kernel, self.bandwidth, &self.xs, &self.ys, x, None)
    }

    /// `j! beta_j(x)`, the local estimate of `m^{(j)}(x)`.
    pub fn estimate(&self, x: f64, j: usize) -> Result<f64> {
        if j > self.degree {
            return Err(Error::InvalidInput(format!(
                "derivative order {j} exceeds local degree {}",
                self.degree
            )));
        }
        Ok(self.derivatives(x)?[j])
    }
}

pub fn local_poly_estimate(fit: &LocalPolyFit, x: f64, j: usize) -> Result<f64> {
    fit.estimate(x, j)
}

fn local_fit(
    degree: usize,
    kernel: Kernel,
    bandwidth: f64,
    xs: &[f64],
    ys: &[f64],
    x: f64,
    skip: Option<usize>,
) -> Result<Vec<f64>> {
    let d = degree + 1;
    let mut h = bandwidth;
    for _ in 0..=MAX_DOUBLINGS {
        let rows: Vec<(f64, f64, f64)> = xs
            .iter()
            .zip(ys)
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .filter_map(|(_, (&xi, &yi))| {
                let u = (xi - x) / h;
                let w = kernel.weight(u);
                (w > 0.0).then_some((u, w.sqrt(), yi))
            })
            .collect();
        if rows.len() >= d {
            let mut a = Array2::<f64>::zeros((rows.len(), d));
            let mut b = Array1::<f64>::zeros(rows.len());
            for (r, &(u, sw, y)) in rows.iter().enumerate() {
                let mut pw = sw;
                for k in 0..d {
                    a[[r, k]] = pw;
                    pw *= u;
                }
                b[r] = sw * y;
            }
            if let Ok(beta) = lstsq_qr(&a, b.view()) {
                let mut fact = 1.0;
                return Ok((0..d)
                    .map(|j| {
                        if j > 0 {
                            fact *= j as f64;
                        }
                        fact * beta[j] / h.powi(j as i32)
                    })
                    .collect());
            }
        }
        h *= 2.0;
    }
    Err(Error::BandwidthTooSmall {
        x,
        bandwidth,
        degree,
    })
}

/// Leave-one-out CV bandwidth; candidates where any fit fails are skipped.
pub fn loocv_bandwidth(degree: usize, kernel: Kernel, grid: &[f64], xs: &[f64], ys: &[f64]) -> Result<f64> {
    if grid.is_empty() || grid.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidInput("bandwidth grid must be non-empty and positive".into()));
    }
    let mut best: Option<(f64, f64)> = None;
    for &h in grid {
        let mut score = 0.0;
        let mut ok = true;
        for i in 0..xs.len() {
            match local_fit(degree, kernel, h, xs, ys, xs[i], Some(i)) {
                Ok(v) => score += (ys[i] - v[0]).powi(2),
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok || !score.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some((s, bh)) => score < s || (score == s && h < bh),
        };
        if better {
            best = Some((score, h));
        }
    }
    best.map(|(_, h)| h)
        .ok_or_else(|| Error::SelectionFailed("no bandwidth in the CV grid gives a valid fit".into()))
}

fn resolve_bandwidth(bw: &Bandwidth, degree: usize, kernel: Kernel, xs: &[f64], ys: &[f64]) -> Result<f64> {
    match bw {
        Bandwidth::Fixed(h) => Ok(*h),
        Bandwidth::Cv => loocv_bandwidth(degree, kernel, &default_bandwidth_grid(), xs, ys),
        Bandwidth::CvGrid(g) => loocv_bandwidth(degree, kernel, g, xs, ys),
    }
}

/// Local linear smoothing (Gaussian kernel) of the corrected residuals of an
/// optional parametric stage; without a parametric stage this is the plain
/// local linear estimator.
#[derive(Debug, Clone)]
pub struct GuidedLocalLinear {
    gamma: Gamma,
    parametric: Option<FittedModel>,
    local: LocalPolyFit,
}

impl GuidedLocalLinear {
    pub fn gamma(&self) -> Gamma {
        self.gamma
    }

    pub fn parametric(&self) -> Option<&FittedModel> {
        self.parametric.as_ref()
    }

    pub fn local(&self) -> &LocalPolyFit {
        &self.local
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        let r = self.local.estimate(x, 0)?;
        Ok(match &self.parametric {
            None => r,
            Some(m) => {
                let f = m.value(x);
                f + self.gamma.scale(f) * r
            }
        })
    }

    pub fn evaluate_many(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.evaluate(x)).collect()
    }
}

/// Semiparametric local linear estimator.
pub fn fit_slle(
    xs: &[f64],
    ys: &[f64],
    model: &ParametricModel,
    gamma: Gamma,
    bandwidth: &Bandwidth,
) -> Result<GuidedLocalLinear> {
    let parametric = fit_ols(model, xs, ys)?;
    if gamma == Gamma::Multiplicative {
        parametric.check_positive(POSITIVITY_THRESHOLD)?;
    }
    let residuals: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(&x, y)| {
            let f = parametric.value(x);
            (y - f) / gamma.scale(f)
        })
        .collect();
    let h = resolve_bandwidth(bandwidth, 1, Kernel::Gaussian, xs, &residuals)?;
    Ok(GuidedLocalLinear {
        gamma,
        parametric: Some(parametric),
        local: LocalPolyFit::new(1, Kernel::Gaussian, h, xs, &residuals)?,
    })
}

/// Nonparametric local linear estimator.
pub fn fit_nlle(xs: &[f64], ys: &[f64], bandwidth: &Bandwidth) -> Result<GuidedLocalLinear> {
    let h = resolve_bandwidth(bandwidth, 1, Kernel::Gaussian, xs, ys)?;
    Ok(GuidedLocalLinear {
        gamma: Gamma::Additive,
        parametric: None,
        local: LocalPolyFit::new(1, Kernel::Gaussian, h, xs, ys)?,
    })
}

/// Pilot fit of degree `p + 2` with a cross-validated Gaussian-kernel bandwidth.
pub fn fit_pilot(xs: &[f64], ys: &[f64], spline_degree: usize) -> Result<LocalPolyFit> {
    LocalPolyFit::with_cv(spline_degree + 2, Kernel::Gaussian, &default_bandwidth_grid(), xs, ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_second_moments() {
        assert!((Kernel::Gaussian.moment(2).unwrap() - 1.0).abs() < 1e-10);
        assert!((Kernel::Epanechnikov.moment(2).unwrap() - 0.2).abs() < 1e-12);
        assert!((Kernel::Epanechnikov.moment(0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_data_reproduced_with_derivatives() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 / 39.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - x + 2.0 * x * x * x).collect();
        let fit = LocalPolyFit::new(3, Kernel::Epanechnikov, 0.2, &xs, &ys).unwrap();
        let d = fit.derivatives(0.4).unwrap();
        assert!((d[0] - (1.0 - 0.4 + 2.0 * 0.064)).abs() < 1e-10);
        assert!((d[1] - (-1.0 + 6.0 * 0.16)).abs() < 1e-9);
        assert!((d[2] - 12.0 * 0.4).abs() < 1e-8);
        assert!((d[3] - 12.0).abs() < 1e-7);
        assert!(fit.estimate(0.4, 4).is_err());
    }

    #[test]
    fn sparse_support_expands_bandwidth_or_fails() {
        let xs = [0.0, 0.5, 1.0];
        let ys = [1.0, 2.0, 3.0];
        // Epanechnikov with h = 0.3 sees one point at 0.5; doubling recovers.
        let fit = LocalPolyFit::new(1, Kernel::Epanechnikov, 0.3, &xs, &ys).unwrap();
        assert!((fit.estimate(0.5, 0).unwrap() - 2.0).abs() < 1e-12);
        let fit = LocalPolyFit::new(3, Kernel::Epanechnikov, 0.01, &xs, &ys).unwrap();
        assert!(matches!(fit.estimate(0.5, 0), Err(Error::BandwidthTooSmall { .. })));
    }
}
