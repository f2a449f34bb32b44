//! Choosing the parametric guide by estimated bias reduction.
//!
//! For each candidate, `L_a(z)` compares `|f^{(p+1)}|` with the corresponding
//! derivative of the corrected residual target, and `L_lambda(z)` compares the
//! penalty shrinkage of the pilot fit with that of the residual target. A
//! candidate scores one point at every grid value where both are strictly
//! positive; the highest score wins.

use std::collections::HashSet;
use std::io::Write;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernelreg::{default_bandwidth_grid, loocv_bandwidth, Bandwidth, Kernel, LocalPolyFit};
use crate::linalg::Cholesky;
use crate::parametric::{aic, fit_ols, tic, FittedModel, ParametricModel, POSITIVITY_THRESHOLD};
use crate::pls::{gcv_select_where, GcvGrid, SmootherChoice, SmootherSpec};
use crate::splinecore::{difference_penalty, SplineBasis};
use crate::spse::Gamma;
use crate::theory::quotient_derivatives;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaConfig {
    /// Number of grid points `z_j = j / J`.
    pub grid_j: usize,
    pub gamma: Gamma,
    /// Smoother whose `(K, lambda)` enter `L_lambda`; GCV runs on the raw data.
    pub working: SmootherChoice,
    /// Bandwidth of the degree `p + 2` pilot.
    pub pilot_bandwidth: Bandwidth,
}

impl CriteriaConfig {
    pub fn new(gamma: Gamma, degree: usize, order: usize) -> Self {
        CriteriaConfig {
            grid_j: 100,
            gamma,
            working: SmootherChoice::gcv(degree, order),
            pilot_bandwidth: Bandwidth::Cv,
        }
    }

    pub fn degree(&self) -> usize {
        self.working.degree()
    }

    pub fn grid(&self) -> Vec<f64> {
        let j = self.grid_j as f64;
        (1..=self.grid_j).map(|i| i as f64 / j).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.grid_j == 0 {
            return Err(Error::InvalidInput("grid size J must be at least 1".into()));
        }
        Ok(())
    }
}

/// `L_hat_a(x)` from pilot derivatives `d = (f^(0), ..., f^(p+1))` at `x`.
pub fn l_hat_a_from(derivs: &[f64], model: &FittedModel, gamma: Gamma, x: f64, p: usize) -> f64 {
    let k = p + 1;
    let u: Vec<f64> = (0..=k).map(|j| derivs[j] - model.derivative(x, j)).collect();
    let target = match gamma {
        Gamma::Additive => u[k],
        Gamma::Multiplicative => {
            let g: Vec<f64> = (0..=k).map(|j| model.derivative(x, j)).collect();
            g[0] * quotient_derivatives(&u, &g)[k]
        }
    };
    derivs[k].abs() - target.abs()
}

/// `L_hat_a(x)` with derivatives taken from a pilot of degree at least `p + 1`.
pub fn l_hat_a(x: f64, pilot: &LocalPolyFit, model: &FittedModel, gamma: Gamma, p: usize) -> Result<f64> {
    if pilot.degree() < p + 1 {
        return Err(Error::InvalidInput(format!(
            "pilot degree {} cannot estimate derivative {}",
            pilot.degree(),
            p + 1
        )));
    }
    Ok(l_hat_a_from(&pilot.derivatives(x)?, model, gamma, x, p))
}

/// The operator `Lambda^{-1} Q_m (Z'Z)^{-1} Z'` of a working smoother on a design.
#[derive(Debug, Clone)]
pub struct ShrinkageOperator {
    spec: SmootherSpec,
    xs: Vec<f64>,
    // dim x n
    operator: Array2<f64>,
}

impl ShrinkageOperator {
    pub fn new(spec: &SmootherSpec, xs: &[f64]) -> Result<Self> {
        let basis = &spec.basis;
        let design = basis.sparse_design(xs)?;
        let gram = design.gram();
        let penalty = difference_penalty(spec.order, basis.dim())?;
        let ztz = Cholesky::factor(&gram)?;
        let normal = Cholesky::factor(&(&gram + &(penalty.matrix() * spec.lambda)))?;
        let z = design.to_dense();
        let proj = ztz.inverse().dot(&z.t());
        let shrunk = penalty.matrix().dot(&proj);
        let mut operator = Array2::zeros(shrunk.dim());
        for (j, col) in shrunk.columns().into_iter().enumerate() {
            operator.column_mut(j).assign(&normal.solve(col));
        }
        Ok(ShrinkageOperator {
            spec: spec.clone(),
            xs: xs.to_vec(),
            operator,
        })
    }

    pub fn spec(&self) -> &SmootherSpec {
        &self.spec
    }

    pub fn basis(&self) -> &SplineBasis {
        &self.spec.basis
    }

    /// Coefficients `Lambda^{-1} Q_m (Z'Z)^{-1} Z' v`.
    pub fn apply(&self, v: &[f64]) -> Array1<f64> {
        self.operator.dot(&Array1::from(v.to_vec()))
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }
}

/// `L_hat_lambda(x)` given the pilot fitted values at the design points.
pub fn l_hat_lambda(
    x: f64,
    op: &ShrinkageOperator,
    pilot_fitted: &[f64],
    model: &FittedModel,
    gamma: Gamma,
) -> Result<f64> {
    let b = op.basis().eval_basis(x)?;
    let np = b.dot(&op.apply(pilot_fitted));
    let r = op.apply(&corrected(op.xs(), pilot_fitted, model, gamma));
    Ok(np.abs() - (gamma.scale(model.value(x)) * b.dot(&r)).abs())
}

fn corrected(xs: &[f64], fitted: &[f64], model: &FittedModel, gamma: Gamma) -> Vec<f64> {
    xs.iter()
        .zip(fitted)
        .map(|(&x, f)| {
            let m = model.value(x);
            (f - m) / gamma.scale(m)
        })
        .collect()
}

/// Per-dataset quantities shared by all candidates: the pilot and the working smoother.
#[derive(Debug, Clone)]
pub struct SelectionContext {
    config: CriteriaConfig,
    xs: Vec<f64>,
    ys: Vec<f64>,
    grid: Vec<f64>,
    pilot: LocalPolyFit,
    pilot_grid: Vec<Vec<f64>>,
    pilot_fitted: Vec<f64>,
    op: ShrinkageOperator,
    npse_shrinkage: Vec<f64>,
}

impl SelectionContext {
    pub fn new(xs: &[f64], ys: &[f64], config: &CriteriaConfig) -> Result<Self> {
        config.validate()?;
        let p = config.degree();
        let d = p + 2;
        let h = match &config.pilot_bandwidth {
            Bandwidth::Fixed(h) => *h,
            Bandwidth::Cv => loocv_bandwidth(d, Kernel::Gaussian, &default_bandwidth_grid(), xs, ys)?,
            Bandwidth::CvGrid(g) => loocv_bandwidth(d, Kernel::Gaussian, g, xs, ys)?,
        };
        let pilot = LocalPolyFit::new(d, Kernel::Gaussian, h, xs, ys)?;
        let grid = config.grid();
        let pilot_grid = grid
            .iter()
            .map(|&z| pilot.derivatives(z))
            .collect::<Result<Vec<_>>>()?;
        let pilot_fitted = xs
            .iter()
            .map(|&x| pilot.estimate(x, 0))
            .collect::<Result<Vec<_>>>()?;
        let spec = working_spec(&config.working, xs, ys)?;
        let op = ShrinkageOperator::new(&spec, xs)?;
        let coef = op.apply(&pilot_fitted);
        let npse_shrinkage = grid
            .iter()
            .map(|&z| Ok(op.basis().eval_basis(z)?.dot(&coef)))
            .collect::<Result<Vec<_>>>()?;
        Ok(SelectionContext {
            config: config.clone(),
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            grid,
            pilot,
            pilot_grid,
            pilot_fitted,
            op,
            npse_shrinkage,
        })
    }

    pub fn pilot(&self) -> &LocalPolyFit {
        &self.pilot
    }

    pub fn working_spec(&self) -> &SmootherSpec {
        self.op.spec()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// With `lambda = 0` the penalty bias vanishes and only `L_a` matters.
    pub fn unpenalized(&self) -> bool {
        self.op.spec().lambda == 0.0
    }

    /// `(L_hat_a(z_j), L_hat_lambda(z_j))` for a fitted candidate.
    pub fn criteria(&self, model: &FittedModel) -> Result<(Vec<f64>, Vec<f64>)> {
        let gamma = self.config.gamma;
        let p = self.config.degree();
        let la: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.pilot_grid)
            .map(|(&z, d)| l_hat_a_from(d, model, gamma, z, p))
            .collect();
        let r = self.op.apply(&corrected(&self.xs, &self.pilot_fitted, model, gamma));
        let ll = self
            .grid
            .iter()
            .zip(&self.npse_shrinkage)
            .map(|(&z, np)| {
                let b = self.op.basis().eval_basis(z)?;
                Ok(np.abs() - (gamma.scale(model.value(z)) * b.dot(&r)).abs())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((la, ll))
    }

    /// Fit one candidate and count its criteria.
    pub fn score(&self, model: &ParametricModel) -> CandidateScore {
        let mut out = CandidateScore {
            model: model.name().to_string(),
            num_params: model.num_params(),
            c_a: 0,
            c_lambda: 0,
            c_a_lambda: 0,
            aic: f64::NAN,
            tic: f64::NAN,
            failure: None,
        };
        let result = (|| -> Result<()> {
            let fit = fit_ols(model, &self.xs, &self.ys)?;
            if self.config.gamma == Gamma::Multiplicative {
                fit.check_positive(POSITIVITY_THRESHOLD)?;
            }
            out.aic = aic(&fit).unwrap_or(f64::NAN);
            out.tic = tic(&fit, &self.xs, &self.ys).unwrap_or(f64::NAN);
            let (la, ll) = self.criteria(&fit)?;
            let vacuous = self.unpenalized();
            for (a, l) in la.iter().zip(&ll) {
                let pa = *a > 0.0;
                let pl = vacuous || *l > 0.0;
                out.c_a += pa as usize;
                out.c_lambda += pl as usize;
                out.c_a_lambda += (pa && pl) as usize;
            }
            Ok(())
        })();
        if let Err(e) = result {
            out.failure = Some(e.to_string());
        }
        out
    }
}

fn working_spec(choice: &SmootherChoice, xs: &[f64], ys: &[f64]) -> Result<SmootherSpec> {
    match choice {
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
            gcv_select_where(xs, ys, grid, *degree, *order, |sys| {
                Cholesky::factor(sys.gram()).is_ok()
            })
        }
        other => other.resolve(xs, ys),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub model: String,
    pub num_params: usize,
    pub c_a: usize,
    pub c_lambda: usize,
    pub c_a_lambda: usize,
    pub aic: f64,
    pub tic: f64,
    /// Why the candidate could not be scored; such candidates are never selected.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub grid_j: usize,
    pub gamma: Gamma,
    pub working_segments: usize,
    pub working_lambda: f64,
    pub pilot_bandwidth: f64,
    pub candidates: Vec<CandidateScore>,
    pub selected_a_lambda: String,
    pub selected_a: String,
    pub selected_lambda: String,
    pub selected_aic: Option<String>,
    pub selected_tic: Option<String>,
    /// Candidates sharing the maximal `C_{a and lambda}`, in list order.
    pub tied_a_lambda: Vec<String>,
}

fn argmax_count<F: Fn(&CandidateScore) -> usize>(c: &[CandidateScore], key: F) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in c.iter().enumerate().filter(|(_, s)| s.failure.is_none()) {
        best = match best {
            None => Some(i),
            Some(b) => {
                let (kb, ks) = (key(&c[b]), key(s));
                if ks > kb || (ks == kb && s.num_params < c[b].num_params) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

fn argmin_ic<F: Fn(&CandidateScore) -> f64>(c: &[CandidateScore], key: F) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in c.iter().enumerate() {
        let v = key(s);
        if s.failure.is_some() || !v.is_finite() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let vb = key(&c[b]);
                if v < vb || (v == vb && s.num_params < c[b].num_params) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Score every candidate and apply the argmax rule (ties: fewer parameters, then list order).
pub fn count_criteria(
    xs: &[f64],
    ys: &[f64],
    candidates: &[ParametricModel],
    config: &CriteriaConfig,
) -> Result<SelectionReport> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no candidate models".into()));
    }
    let mut seen = HashSet::new();
    for m in candidates {
        if !seen.insert(m.name()) {
            return Err(Error::InvalidInput(format!("duplicate candidate name `{}`", m.name())));
        }
    }
    let ctx = SelectionContext::new(xs, ys, config)?;
    select_with(&ctx, candidates)
}

/// As [`count_criteria`] with a prepared context.
pub fn select_with(ctx: &SelectionContext, candidates: &[ParametricModel]) -> Result<SelectionReport> {
    let scores: Vec<CandidateScore> = candidates.iter().map(|m| ctx.score(m)).collect();
    let pick = |k: Option<usize>| k.map(|i| scores[i].model.clone());
    let best = argmax_count(&scores, |s| s.c_a_lambda).ok_or_else(|| {
        let reasons: Vec<String> = scores
            .iter()
            .map(|s| format!("{}: {}", s.model, s.failure.as_deref().unwrap_or("?")))
            .collect();
        Error::SelectionFailed(format!("every candidate failed ({})", reasons.join("; ")))
    })?;
    let top = scores[best].c_a_lambda;
    let spec = ctx.working_spec();
    Ok(SelectionReport {
        grid_j: ctx.config.grid_j,
        gamma: ctx.config.gamma,
        working_segments: spec.segments(),
        working_lambda: spec.lambda,
        pilot_bandwidth: ctx.pilot.bandwidth(),
        tied_a_lambda: scores
            .iter()
            .filter(|s| s.failure.is_none() && s.c_a_lambda == top)
            .map(|s| s.model.clone())
            .collect(),
        selected_a_lambda: scores[best].model.clone(),
        selected_a: pick(argmax_count(&scores, |s| s.c_a)).expect("non-empty"),
        selected_lambda: pick(argmax_count(&scores, |s| s.c_lambda)).expect("non-empty"),
        selected_aic: pick(argmin_ic(&scores, |s| s.aic)),
        selected_tic: pick(argmin_ic(&scores, |s| s.tic)),
        candidates: scores,
    })
}

impl SelectionReport {
    pub const CSV_HEADER: [&'static str; 13] = [
        "model",
        "M",
        "C_a",
        "C_lambda",
        "C_a_lambda",
        "AIC",
        "TIC",
        "selected_a_lambda",
        "selected_a",
        "selected_lambda",
        "selected_aic",
        "selected_tic",
        "status",
    ];

    /// One row per candidate.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Csv {
            path: "<selection report>".into(),
            message: e.to_string(),
        };
        w.write_record(Self::CSV_HEADER).map_err(csv_err)?;
        let flag = |sel: Option<&String>, name: &str| (sel.map(|s| s == name).unwrap_or(false) as u8).to_string();
        for c in &self.candidates {
            w.write_record([
                c.model.clone(),
                c.num_params.to_string(),
                c.c_a.to_string(),
                c.c_lambda.to_string(),
                c.c_a_lambda.to_string(),
                format!("{}", c.aic),
                format!("{}", c.tic),
                flag(Some(&self.selected_a_lambda), &c.model),
                flag(Some(&self.selected_a), &c.model),
                flag(Some(&self.selected_lambda), &c.model),
                flag(self.selected_aic.as_ref(), &c.model),
                flag(self.selected_tic.as_ref(), &c.model),
                c.failure.clone().unwrap_or_else(|| "ok".into()),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<selection report>".into(),
            source: e,
        })?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (Vec<f64>, Vec<f64>) {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64 + 0.5) / 40.0).collect();
        let ys = xs
            .iter()
            .map(|x| 2.0 + (2.0 * std::f64::consts::PI * x).sin() + 0.01 * ((x * 977.0).sin()))
            .collect();
        (xs, ys)
    }

    #[test]
    fn constant_model_has_null_criteria() {
        let (xs, ys) = data();
        let cfg = CriteriaConfig::new(Gamma::Additive, 1, 2);
        let ctx = SelectionContext::new(&xs, &ys, &cfg).unwrap();
        let fit = fit_ols(&ParametricModel::constant(), &xs, &ys).unwrap();
        let (la, ll) = ctx.criteria(&fit).unwrap();
        assert!(la.iter().all(|v| v.abs() < 1e-9));
        assert!(ll.iter().all(|v| v.abs() < 1e-10));
        let s = ctx.score(&ParametricModel::constant());
        assert_eq!((s.c_a, s.c_a_lambda), (0, 0));
    }

    #[test]
    fn duplicates_rejected_and_single_candidate_selected() {
        let (xs, ys) = data();
        let cfg = CriteriaConfig::new(Gamma::Additive, 1, 2);
        let m = ParametricModel::polynomial(1);
        assert!(count_criteria(&xs, &ys, &[m.clone(), m.clone()], &cfg).is_err());
        let r = count_criteria(&xs, &ys, &[m], &cfg).unwrap();
        assert_eq!(r.selected_a_lambda, "poly1");
        let csv = r.to_csv_string().unwrap();
        assert!(csv.starts_with("model,M,C_a,C_lambda,C_a_lambda,AIC,TIC,"));
        assert_eq!(csv.lines().count(), 2);
    }
}
