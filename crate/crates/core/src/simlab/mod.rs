//! Monte Carlo studies: repeated data generation, fitting of every estimator
//! arm on a grid, bias/variance summaries and model-selection frequencies.

mod examples;
mod normality;
mod report;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use examples::{example_candidates, example_sample_size, example_truth};
pub use normality::{anderson_darling, AndersonDarling, AD_CRITICAL_1PCT};
pub use report::{read_metrics_csv, report_csv, ReportFiles, write_grid_csv, write_metrics_csv, write_selection_csv, MetricsRow};

use crate::error::{Error, Result};
use crate::kernelreg::{fit_nlle, fit_slle, Bandwidth};
use crate::modelselect::{select_with, CriteriaConfig, SelectionContext, SelectionReport};
use crate::parametric::{Feature, ParametricModel};
use crate::pls::SmootherChoice;
use crate::spse::{fit_npse, fit_spse, Gamma};
use crate::theory::TrueModel;

/// Estimator evaluated by an arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ArmKind {
    Spse {
        model: ParametricModel,
        gamma: Gamma,
        smoother: SmootherChoice,
    },
    Npse {
        smoother: SmootherChoice,
    },
    Slle {
        model: ParametricModel,
        gamma: Gamma,
        bandwidth: Bandwidth,
    },
    Nlle {
        bandwidth: Bandwidth,
    },
    /// The true regression function itself.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub label: String,
    pub kind: ArmKind,
}

/// A model-selection experiment run on every replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSpec {
    pub label: String,
    pub candidates: Vec<ParametricModel>,
    pub criteria: CriteriaConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub truth: TrueModel,
    pub n: usize,
    pub reps: usize,
    /// Evaluation grid `z_j = j / J`, `j = 1..=J`.
    pub grid_j: usize,
    pub seed: u64,
    /// Draw the design once and reuse it in every replicate.
    pub fixed_design: bool,
    pub arms: Vec<Arm>,
    pub selections: Vec<SelectionSpec>,
}

impl SimulationSpec {
    pub fn grid(&self) -> Vec<f64> {
        let j = self.grid_j as f64;
        (1..=self.grid_j).map(|i| i as f64 / j).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.reps == 0 {
            problems.push("reps must be at least 1".to_string());
        }
        if self.n < 5 {
            problems.push(format!("n must be at least 5, got {}", self.n));
        }
        if self.grid_j == 0 {
            problems.push("grid_j must be at least 1".to_string());
        }
        if self.arms.is_empty() && self.selections.is_empty() {
            problems.push("a study needs at least one arm or selection block".to_string());
        }
        let mut labels = std::collections::HashSet::new();
        for a in &self.arms {
            if !labels.insert(a.label.as_str()) {
                problems.push(format!("duplicate arm label `{}`", a.label));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Design density draws by rejection from `max q` on a fine grid.
fn draw_design<R: Rng>(truth: &TrueModel, n: usize, rng: &mut R) -> Vec<f64> {
    if truth.uniform_design() {
        return (0..n).map(|_| rng.random::<f64>()).collect();
    }
    let bound = (0..=1000)
        .map(|i| truth.q(i as f64 / 1000.0))
        .fold(0.0, f64::max)
        * 1.05;
    let mut xs = Vec::with_capacity(n);
    while xs.len() < n {
        let x: f64 = rng.random();
        let u: f64 = rng.random();
        if u * bound <= truth.q(x) {
            xs.push(x);
        }
    }
    xs
}

fn draw_responses<R: Rng>(truth: &TrueModel, xs: &[f64], rng: &mut R) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let e: f64 = rng.sample(StandardNormal);
            truth.f(x) + truth.sigma2(x).sqrt() * e
        })
        .collect()
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `xs ~ q` iid and `ys = f(xs) + N(0, sigma^2(xs))`; deterministic in `seed`.
pub fn generate_dataset(truth: &TrueModel, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = stream_rng(seed, 0);
    let xs = draw_design(truth, n, &mut rng);
    let ys = draw_responses(truth, &xs, &mut rng);
    (xs, ys)
}

/// `ys = f(xs) + N(0, sigma^2(xs))` at a given design; deterministic in `seed`.
pub fn generate_responses(truth: &TrueModel, xs: &[f64], seed: u64) -> Vec<f64> {
    draw_responses(truth, xs, &mut stream_rng(seed, 0))
}

const FIXED_DESIGN_STREAM: u64 = u64::MAX;

/// Dataset of replicate `rep` in a study (streams `rep + 1`; the fixed design uses its own stream).
pub fn replicate_dataset(spec: &SimulationSpec, rep: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = stream_rng(spec.seed, rep as u64 + 1);
    let xs = if spec.fixed_design {
        draw_design(&spec.truth, spec.n, &mut stream_rng(spec.seed, FIXED_DESIGN_STREAM))
    } else {
        draw_design(&spec.truth, spec.n, &mut rng)
    };
    let ys = draw_responses(&spec.truth, &xs, &mut rng);
    (xs, ys)
}

/// Fit one arm on one dataset and evaluate on `grid`.
pub fn evaluate_arm(kind: &ArmKind, truth: &TrueModel, xs: &[f64], ys: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    match kind {
        ArmKind::Spse {
            model,
            gamma,
            smoother,
        } => fit_spse(xs, ys, model, *gamma, smoother)?.evaluate_many(grid),
        ArmKind::Npse { smoother } => {
            let fit = fit_npse(xs, ys, smoother)?;
            grid.iter().map(|&z| fit.predict(z)).collect()
        }
        ArmKind::Slle {
            model,
            gamma,
            bandwidth,
        } => fit_slle(xs, ys, model, *gamma, bandwidth)?.evaluate_many(grid),
        ArmKind::Nlle { bandwidth } => fit_nlle(xs, ys, bandwidth)?.evaluate_many(grid),
        ArmKind::Oracle => Ok(grid.iter().map(|&z| truth.f(z)).collect()),
    }
}

/// Polynomial guide whose span lies in both the spline space and the
/// penalty null space, so that the guided and unguided fits coincide.
fn reduces_to_npse(model: &ParametricModel, degree: usize, order: usize) -> bool {
    let mut q = 0;
    for f in model.features() {
        match f {
            Feature::Const => {}
            Feature::Power(k) => q = q.max(*k as usize),
            _ => return false,
        }
    }
    q <= degree && q < order
}

fn equivalence_pairs(arms: &[Arm]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, a) in arms.iter().enumerate() {
        if let ArmKind::Spse {
            model,
            gamma: Gamma::Additive,
            smoother,
        } = &a.kind
        {
            if !reduces_to_npse(model, smoother.degree(), smoother.order()) {
                continue;
            }
            for (j, b) in arms.iter().enumerate() {
                if let ArmKind::Npse { smoother: s } = &b.kind {
                    if s == smoother {
                        out.push((i, j));
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub label: String,
    /// Replicates that entered the metrics.
    pub used: usize,
    pub excluded: usize,
    /// Exclusion counts keyed by error message.
    pub exclusion_reasons: BTreeMap<String, usize>,
    /// `B_j`.
    pub bias: Vec<f64>,
    /// `V_j`.
    pub variance: Vec<f64>,
    pub isb: f64,
    pub v: f64,
    pub mise: f64,
    /// Grid evaluations per replicate (`None` when excluded).
    #[serde(skip)]
    pub evaluations: Vec<Option<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionFrequencies {
    pub label: String,
    pub candidates: Vec<String>,
    pub c_a: Vec<usize>,
    pub c_lambda: Vec<usize>,
    pub c_a_lambda: Vec<usize>,
    pub aic: Vec<usize>,
    pub tic: Vec<usize>,
    /// Replicates in which selection failed altogether.
    pub failed: usize,
    #[serde(skip)]
    pub reports: Vec<Option<SelectionReport>>,
}

impl SelectionFrequencies {
    /// Share of successful replicates in which `model` won under `C_{a and lambda}`.
    pub fn share_a_lambda(&self, model: &str) -> f64 {
        let total: usize = self.c_a_lambda.iter().sum();
        self.candidates
            .iter()
            .position(|m| m == model)
            .map_or(0.0, |i| self.c_a_lambda[i] as f64 / total.max(1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub n: usize,
    pub reps: usize,
    pub grid: Vec<f64>,
    pub arms: Vec<ArmResult>,
    pub selections: Vec<SelectionFrequencies>,
}

impl SimResult {
    pub fn arm(&self, label: &str) -> Option<&ArmResult> {
        self.arms.iter().find(|a| a.label == label)
    }

    pub fn selection(&self, label: &str) -> Option<&SelectionFrequencies> {
        self.selections.iter().find(|s| s.label == label)
    }
}

struct RepOutcome {
    arms: Vec<Result<Vec<f64>>>,
    selections: Vec<Result<SelectionReport>>,
}

fn run_rep(spec: &SimulationSpec, grid: &[f64], rep: usize) -> RepOutcome {
    let (xs, ys) = replicate_dataset(spec, rep);
    let arms = spec
        .arms
        .iter()
        .map(|a| evaluate_arm(&a.kind, &spec.truth, &xs, &ys, grid))
        .collect();
    let selections = spec
        .selections
        .iter()
        .map(|s| {
            let ctx = SelectionContext::new(&xs, &ys, &s.criteria)?;
            select_with(&ctx, &s.candidates)
        })
        .collect();
    RepOutcome { arms, selections }
}

fn summarize(label: &str, evaluations: Vec<Option<Vec<f64>>>, reasons: BTreeMap<String, usize>, truth: &[f64]) -> ArmResult {
    let used: Vec<&Vec<f64>> = evaluations.iter().flatten().collect();
    let r = used.len();
    let j = truth.len();
    let (bias, variance) = if r == 0 {
        (vec![f64::NAN; j], vec![f64::NAN; j])
    } else {
        let rf = r as f64;
        let mut bias = vec![0.0; j];
        let mut variance = vec![0.0; j];
        for k in 0..j {
            // shifted by the first replicate: exact when every replicate agrees
            let shift = used[0][k];
            let d = used.iter().map(|e| e[k] - shift).sum::<f64>() / rf;
            bias[k] = (shift - truth[k]) + d;
            variance[k] = used.iter().map(|e| (e[k] - shift - d).powi(2)).sum::<f64>() / rf;
        }
        (bias, variance)
    };
    let jf = j as f64;
    let isb = bias.iter().map(|b| b * b).sum::<f64>() / jf;
    let v = variance.iter().sum::<f64>() / jf;
    ArmResult {
        label: label.to_string(),
        used: r,
        excluded: evaluations.len() - r,
        exclusion_reasons: reasons,
        bias,
        variance,
        isb,
        v,
        mise: isb + v,
        evaluations,
    }
}

/// Run every replicate (in parallel), then aggregate in replicate order.
pub fn run_study(spec: &SimulationSpec) -> Result<SimResult> {
    spec.validate()?;
    let grid = spec.grid();
    let outcomes: Vec<RepOutcome> = (0..spec.reps)
        .into_par_iter()
        .map(|r| run_rep(spec, &grid, r))
        .collect();

    for (i, j) in equivalence_pairs(&spec.arms) {
        for (rep, o) in outcomes.iter().enumerate() {
            if let (Ok(a), Ok(b)) = (&o.arms[i], &o.arms[j]) {
                let gap = a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
                if gap > 1e-8 {
                    return Err(Error::Invariant(format!(
                        "arms `{}` and `{}` should coincide but differ by {gap:e} in replicate {rep}",
                        spec.arms[i].label, spec.arms[j].label
                    )));
                }
            }
        }
    }

    let truth: Vec<f64> = grid.iter().map(|&z| spec.truth.f(z)).collect();
    let arms = spec
        .arms
        .iter()
        .enumerate()
        .map(|(a, arm)| {
            let mut reasons = BTreeMap::new();
            let evals = outcomes
                .iter()
                .map(|o| match &o.arms[a] {
                    Ok(v) => Some(v.clone()),
                    Err(e) => {
                        *reasons.entry(e.to_string()).or_insert(0) += 1;
                        None
                    }
                })
                .collect();
            summarize(&arm.label, evals, reasons, &truth)
        })
        .collect();

    let selections = spec
        .selections
        .iter()
        .enumerate()
        .map(|(s, sel)| {
            let names: Vec<String> = sel.candidates.iter().map(|m| m.name().to_string()).collect();
            let k = names.len();
            let mut freq = SelectionFrequencies {
                label: sel.label.clone(),
                candidates: names.clone(),
                c_a: vec![0; k],
                c_lambda: vec![0; k],
                c_a_lambda: vec![0; k],
                aic: vec![0; k],
                tic: vec![0; k],
                failed: 0,
                reports: Vec::with_capacity(outcomes.len()),
            };
            let idx = |name: &str| names.iter().position(|m| m == name);
            for o in &outcomes {
                match &o.selections[s] {
                    Ok(rep) => {
                        for (pick, counts) in [
                            (Some(&rep.selected_a), &mut freq.c_a),
                            (Some(&rep.selected_lambda), &mut freq.c_lambda),
                            (Some(&rep.selected_a_lambda), &mut freq.c_a_lambda),
                            (rep.selected_aic.as_ref(), &mut freq.aic),
                            (rep.selected_tic.as_ref(), &mut freq.tic),
                        ] {
                            if let Some(i) = pick.and_then(|p| idx(p)) {
                                counts[i] += 1;
                            }
                        }
                        freq.reports.push(Some(rep.clone()));
                    }
                    Err(_) => {
                        freq.failed += 1;
                        freq.reports.push(None);
                    }
                }
            }
            freq
        })
        .collect();

    Ok(SimResult {
        n: spec.n,
        reps: spec.reps,
        grid,
        arms,
        selections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(reps: usize) -> SimulationSpec {
        SimulationSpec {
            truth: example_truth(1).unwrap(),
            n: 25,
            reps,
            grid_j: 10,
            seed: 7,
            fixed_design: false,
            arms: vec![
                Arm {
                    label: "oracle".into(),
                    kind: ArmKind::Oracle,
                },
                Arm {
                    label: "npse".into(),
                    kind: ArmKind::Npse {
                        smoother: SmootherChoice::gcv(1, 2),
                    },
                },
            ],
            selections: vec![],
        }
    }

    #[test]
    fn single_replicate_has_no_variance() {
        let r = run_study(&tiny(1)).unwrap();
        let a = r.arm("npse").unwrap();
        assert!(a.variance.iter().all(|v| *v == 0.0));
        assert_eq!(a.mise, a.isb);
        let o = r.arm("oracle").unwrap();
        assert_eq!((o.isb, o.v, o.mise), (0.0, 0.0, 0.0));
    }

    #[test]
    fn datasets_are_seeded() {
        let t = example_truth(1).unwrap();
        assert_eq!(generate_dataset(&t, 10, 3), generate_dataset(&t, 10, 3));
        assert_ne!(generate_dataset(&t, 10, 3).0, generate_dataset(&t, 10, 4).0);
        let spec = SimulationSpec {
            fixed_design: true,
            ..tiny(2)
        };
        let (x0, y0) = replicate_dataset(&spec, 0);
        let (x1, y1) = replicate_dataset(&spec, 1);
        assert_eq!(x0, x1);
        assert_ne!(y0, y1);
    }

    #[test]
    fn invalid_spec_lists_every_problem() {
        let spec = SimulationSpec {
            n: 2,
            reps: 0,
            ..tiny(1)
        };
        match spec.validate() {
            Err(Error::Config(v)) => assert_eq!(v.len(), 2),
            other => panic!("expected config error, got {other:?}"),
        }
    }
}
