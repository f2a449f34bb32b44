//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits 0 after printing every line; set `ACCEPTANCE_STRICT=1` to exit 1 when any
//! criterion fails. `ACCEPTANCE_ONLY=9,10` runs a subset.

mod common;

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use semispline::config::StudyConfig;
use semispline::kernelreg::Kernel;
use semispline::modelselect::{count_criteria, CriteriaConfig};
use semispline::parametric::{model_library, ParametricModel};
use semispline::pls::{fit_penalized, SmootherChoice, SmootherSpec};
use semispline::simlab::{
    anderson_darling, example_truth, replicate_dataset, run_study, Arm, ArmKind, SimResult, SimulationSpec,
};
use semispline::splinecore::{difference_penalty, poly_to_spline_coeffs, SplineBasis};
use semispline::spse::{fit_npse, fit_spse, fit_spse_from, predict_many, unit_grid, Gamma};
use semispline::theory::{asymptotic_bias, bernoulli_poly, local_poly_bias_constant};

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

// ---- property suite ----

fn c1_partition_of_unity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut violations = 0;
    for p in 0..=3 {
        for k in [2, 5, 10, 40] {
            let b = SplineBasis::new(p, k).unwrap();
            for _ in 0..1000 {
                let x: f64 = rng.random();
                let v = b.eval_basis(x).unwrap();
                worst = worst.max((v.sum() - 1.0).abs());
                for (i, &bi) in v.iter().enumerate() {
                    let kk = i as i64 - p as i64 + 1;
                    let outside = x < b.knot(kk - 1) || x > b.knot(kk + p as i64);
                    if bi < 0.0 || (outside && bi != 0.0) {
                        violations += 1;
                    }
                }
            }
        }
    }
    outcome(
        worst < 1e-12 && violations == 0,
        format!("max |sum - 1| = {worst:.1e}, support/sign violations = {violations}"),
    )
}

fn c2_polynomial_coefficients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let grid = unit_grid(501);
    let mut worst = 0.0f64;
    for p in 0..=3 {
        for k in 1..=10 {
            let b = SplineBasis::new(p, k).unwrap();
            for q in 0..=p {
                let poly: Vec<f64> = (0..=q).map(|_| rng.random_range(-3.0..3.0)).collect();
                let c = poly_to_spline_coeffs(&b, &poly).unwrap();
                for &x in &grid {
                    let want: f64 = poly.iter().enumerate().map(|(j, a)| a * x.powi(j as i32)).sum();
                    worst = worst.max((b.eval_spline(c.as_slice().unwrap(), x).unwrap() - want).abs());
                }
            }
        }
    }
    outcome(worst < 1e-10, format!("max grid residual {worst:.1e}"))
}

fn c3_penalty_identities() -> Outcome {
    let q2 = difference_penalty(2, 9).unwrap();
    let d = q2.difference();
    let mut rows_ok = true;
    for r in 0..d.nrows() {
        for c in 0..d.ncols() {
            let want = match c as i64 - r as i64 {
                0 | 2 => 1.0,
                1 => -2.0,
                _ => 0.0,
            };
            rows_ok &= d[[r, c]] == want;
        }
    }
    let mut ones = 0.0f64;
    for m in 1..=3 {
        for dim in [5, 12, 43] {
            let q = difference_penalty(m, dim).unwrap();
            let v = q.matrix().dot(&ndarray::Array1::<f64>::ones(dim));
            ones = ones.max(v.iter().map(|x| x.abs()).fold(0.0, f64::max));
        }
    }
    let mut lin = 0.0f64;
    for k in [2, 5, 10, 40] {
        let b = SplineBasis::new(1, k).unwrap();
        let c = poly_to_spline_coeffs(&b, &[0.7, -1.3]).unwrap();
        let q = difference_penalty(2, b.dim()).unwrap();
        lin = lin.max(q.matrix().dot(&c).iter().map(|x| x.abs()).fold(0.0, f64::max));
    }
    outcome(
        rows_ok && ones < 1e-12 && lin < 1e-12,
        format!("D2 rows exact: {rows_ok}, max |Q 1| = {ones:.1e}, max |Q2 c_line| = {lin:.1e}"),
    )
}

fn c4_polynomial_guides_reduce_to_npse() -> Outcome {
    let grid = unit_grid(201);
    let mut worst = 0.0f64;
    let mut cases = 0;
    let gap = |q: u32, spec: SmootherSpec, seed: u64| {
        let (xs, ys) = example1(60, seed);
        let choice = SmootherChoice::Fixed(spec);
        let semi = fit_spse(&xs, &ys, &ParametricModel::polynomial(q), Gamma::Additive, &choice).unwrap();
        let non = fit_npse(&xs, &ys, &choice).unwrap();
        max_gap(
            &semi.evaluate_many(&grid).unwrap(),
            predict_many(&non, &grid).unwrap().as_slice().unwrap(),
        )
    };
    for p in 1..=3 {
        for q in 0..=p as u32 {
            for k in [4, 8] {
                worst = worst.max(gap(q, SmootherSpec::new(p, k, 2, 0.0).unwrap(), 10 * p as u64 + q as u64));
                cases += 1;
            }
        }
    }
    for q in 0..=1 {
        for lambda in [0.5, 5.0, 50.0] {
            for k in [5, 10] {
                worst = worst.max(gap(q, SmootherSpec::new(1, k, 2, lambda).unwrap(), 100 + q as u64));
                cases += 1;
            }
        }
    }
    outcome(worst < 1e-8, format!("{cases} cases, max grid difference {worst:.1e}"))
}

fn c5_in_family_exactness() -> Outcome {
    let m = model_library(1).unwrap()[0].clone();
    let xs: Vec<f64> = (0..40).map(|i| ((i as f64) * 0.7548776662466927).fract()).collect();
    let grid = unit_grid(101);
    let mut worst = 0.0f64;
    for gamma in [Gamma::Additive, Gamma::Multiplicative] {
        for beta in [[2.0, 1.0], [3.0, -0.5]] {
            let ys: Vec<f64> = xs.iter().map(|&x| m.value_with(&beta, x)).collect();
            for choice in [SmootherChoice::gcv(1, 2), SmootherChoice::Fixed(SmootherSpec::new(2, 7, 2, 10.0).unwrap())] {
                let fit = fit_spse(&xs, &ys, &m, gamma, &choice).unwrap();
                for &t in &grid {
                    worst = worst.max((fit.evaluate(t).unwrap() - m.value_with(&beta, t)).abs());
                }
            }
        }
    }
    let guide = m.with_coefficients(vec![2.0, 1.0]).unwrap();
    let mut scaled = 0.0f64;
    for c in [0.5, 3.0] {
        let ys: Vec<f64> = xs.iter().map(|&x| c * guide.value(x)).collect();
        for lambda in [0.0, 1.0, 100.0] {
            let choice = SmootherChoice::Fixed(SmootherSpec::new(1, 8, 2, lambda).unwrap());
            let fit = fit_spse_from(guide.clone(), &xs, &ys, Gamma::Multiplicative, &choice, 1e-3).unwrap();
            for &t in &grid {
                scaled = scaled.max((fit.evaluate(t).unwrap() - c * guide.value(t)).abs());
            }
        }
    }
    outcome(
        worst < 1e-10 && scaled < 1e-10,
        format!("in-family max error {worst:.1e}, scaled-family max error {scaled:.1e}"),
    )
}

fn c6_pls_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let p = rng.random_range(0..=3);
        let k = rng.random_range(2..=12);
        let m = rng.random_range(1..=3usize.min(k + p - 1));
        let lambda = 10f64.powf(rng.random_range(-3.0..3.0));
        let (xs, ys) = example1(rng.random_range(30..=80), 600 + i);
        let spec = SmootherSpec::new(p, k, m, lambda).unwrap();
        let fit = fit_penalized(&spec, &xs, &ys).unwrap();
        let z = to_mat(&spec.basis.design_matrix(&xs).unwrap());
        let (b, _, _) = pls(&z, &ys, m, lambda);
        let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff = fit.coefficients().iter().zip(&b).map(|(g, w)| (g - w).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(diff / norm);
    }
    outcome(worst < 1e-8, format!("50 problems, max relative error {worst:.1e}"))
}

fn c7_bernoulli_and_kernels() -> Outcome {
    let b2 = (0..100)
        .map(|i| {
            let x = i as f64 / 99.0;
            (bernoulli_poly(2, x) - (x * x - x + 1.0 / 6.0)).abs()
        })
        .fold(0.0, f64::max);
    let g = local_poly_bias_constant(1, Kernel::Gaussian).unwrap();
    let e = local_poly_bias_constant(1, Kernel::Epanechnikov).unwrap();
    let sup = (0..=100_000)
        .map(|i| bernoulli_poly(2, i as f64 / 100_000.0).abs())
        .fold(0.0, f64::max);
    let pass = b2 < 1e-15 && (g - 1.0).abs() < 1e-6 && (e - 0.2).abs() < 1e-6 && (sup - 1.0 / 6.0).abs() < 1e-12 && sup < 0.2;
    outcome(
        pass,
        format!("B2 max error {b2:.1e}, Gaussian {g:.7}, Epanechnikov {e:.7}, sup|B2| = {sup:.7}"),
    )
}

fn c8_unpenalized_selection_mode() -> Outcome {
    let models = model_library(1).unwrap();
    let mut agree = 0;
    for seed in 0..20 {
        let (xs, ys) = example1(25, 800 + seed);
        let mut cfg = CriteriaConfig::new(Gamma::Additive, 1, 2);
        cfg.working = SmootherChoice::Fixed(SmootherSpec::new(1, 5, 2, 0.0).unwrap());
        let r = count_criteria(&xs, &ys, &models, &cfg).unwrap();
        agree += (r.selected_a_lambda == r.selected_a) as usize;
    }
    outcome(agree == 20, format!("argmax C_a_lambda = argmax C_a on {agree}/20 datasets"))
}

// ---- statistical suite ----

fn study(name: &str) -> SimResult {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../studies").join(name);
    let spec = StudyConfig::load(&path).unwrap().to_spec().unwrap();
    run_study(&spec).unwrap()
}

fn mise(r: &SimResult, arm: &str) -> f64 {
    r.arm(arm).unwrap_or_else(|| panic!("no arm `{arm}`")).mise * 1e3
}

fn isb(r: &SimResult, arm: &str) -> f64 {
    r.arm(arm).unwrap().isb * 1e3
}

fn c9_c10_example1() -> (Outcome, Outcome) {
    let r = study("example1.study");
    let (s, n, l) = (mise(&r, "SPSE1 sin"), mise(&r, "NPSE1"), mise(&r, "SLLE sin"));
    let c9 = outcome(
        (5.5..=11.5).contains(&s) && s < n && s < l,
        format!(
            "MISE x1e3: SPSE1 sin {s:.3} (bracket [5.5, 11.5]), NPSE1 {n:.3}, SLLE sin {l:.3}; \
             ISB/V of SPSE1 sin {:.3}/{:.3}; SLLE sin against the published 9.061 +/- 30%: {}",
            isb(&r, "SPSE1 sin"),
            r.arm("SPSE1 sin").unwrap().v * 1e3,
            if (l - 9.061).abs() <= 0.3 * 9.061 { "inside" } else { "outside" }
        ),
    );
    let sel = r.selection("SPSE1").unwrap();
    let share = sel.share_a_lambda("sin");
    let c10 = outcome(
        share >= 0.85,
        format!(
            "sin chosen in {:.1}% of reps (counts {:?} over {:?}, failed {})",
            100.0 * share,
            sel.c_a_lambda,
            sel.candidates,
            sel.failed
        ),
    );
    (c9, c10)
}

fn c11_example3() -> Outcome {
    let r = study("example3.study");
    let (i5, i3) = (isb(&r, "SPSE1 poly5"), isb(&r, "SPSE1 poly3"));
    let (s5, l5) = (mise(&r, "SPSE1 poly5"), mise(&r, "SLLE poly5"));
    let (s3, l3) = (mise(&r, "SPSE1 poly3"), mise(&r, "SLLE poly3"));
    outcome(
        i5 < i3 && s5 < l5,
        format!(
            "ISB x1e3 poly5 {i5:.3} vs poly3 {i3:.3}; MISE x1e3 poly5 SPSE {s5:.3} vs SLLE {l5:.3} \
             (poly3: {s3:.3} vs {l3:.3})"
        ),
    )
}

fn c12_example4() -> Outcome {
    let r = study("example4.study");
    let (s, c, n) = (mise(&r, "SPSE1 sin"), mise(&r, "SPSE1 cos"), mise(&r, "NPSE1"));
    let sel = r.selection("SPSE1").unwrap();
    let share = sel.share_a_lambda("sin");
    outcome(
        s < c && s < n && share >= 0.8,
        format!(
            "MISE x1e3 sin {s:.3}, cos {c:.3}, NPSE1 {n:.3}; sin chosen in {:.1}% (counts {:?} over {:?})",
            100.0 * share,
            sel.c_a_lambda,
            sel.candidates
        ),
    )
}

fn c13_bias_and_variance() -> Outcome {
    let truth = example_truth(1).unwrap();
    let smoother = SmootherSpec::new(1, 20, 2, 0.0).unwrap();
    let spec = SimulationSpec {
        truth: truth.clone(),
        n: 5000,
        reps: 500,
        grid_j: 10,
        seed: 13,
        // the population sandwich averages over designs
        fixed_design: false,
        arms: vec![Arm {
            label: "NPSE".into(),
            kind: ArmKind::Npse {
                smoother: SmootherChoice::Fixed(smoother.clone()),
            },
        }],
        selections: vec![],
    };
    let r = run_study(&spec).unwrap();
    let a = &r.arms[0];
    let grid: Vec<f64> = r.grid[..9].to_vec();
    let zero = ParametricModel::constant().with_coefficients(vec![0.0]).unwrap();
    let theory = asymptotic_bias(&smoother, spec.n, &truth, &zero, Gamma::Additive, &grid).unwrap();
    let mut bias_ok = 0;
    let mut worst_z = 0.0f64;
    let mut worst_ratio = 0.0f64;
    let mut var_ok = 0;
    for j in 0..9 {
        let se = (a.variance[j] / a.used as f64).sqrt();
        let predicted = theory.b_a[j] + theory.b_lambda[j];
        let z = (a.bias[j] - predicted).abs() / se;
        worst_z = worst_z.max(z);
        bias_ok += (z <= 3.0) as usize;
        let ratio = a.variance[j] / theory.variance[j];
        worst_ratio = worst_ratio.max((ratio - 1.0).abs());
        var_ok += ((ratio - 1.0).abs() <= 0.15) as usize;
    }
    outcome(
        bias_ok == 9 && var_ok == 9,
        format!(
            "bias within 3 MC SE at {bias_ok}/9 points (max {worst_z:.2} SE); \
             variance within 15% at {var_ok}/9 (max deviation {:.1}%)",
            100.0 * worst_ratio
        ),
    )
}

fn c14_normality() -> Outcome {
    let spec = SimulationSpec {
        truth: example_truth(1).unwrap(),
        n: 400,
        reps: 1000,
        grid_j: 2,
        seed: 14,
        fixed_design: true,
        arms: vec![Arm {
            label: "SPSE1 sin".into(),
            kind: ArmKind::Spse {
                model: model_library(1).unwrap()[0].clone(),
                gamma: Gamma::Additive,
                smoother: SmootherChoice::Rates { degree: 1, order: 2 },
            },
        }],
        selections: vec![],
    };
    let r = run_study(&spec).unwrap();
    let at_half: Vec<f64> = r.arms[0].evaluations.iter().flatten().map(|e| e[0]).collect();
    let ad = anderson_darling(&at_half).unwrap();
    outcome(
        ad.passes_at_1pct(),
        format!(
            "{} reps, A*2 = {:.3} (1% critical 1.035), p = {:.3}",
            ad.n, ad.a2_star, ad.p_value
        ),
    )
}

fn c15_coverage() -> Outcome {
    let truth = example_truth(1).unwrap();
    let spec = SimulationSpec {
        truth: truth.clone(),
        n: 200,
        reps: 500,
        grid_j: 1,
        seed: 15,
        fixed_design: false,
        arms: vec![],
        selections: vec![],
    };
    let model = model_library(1).unwrap()[0].clone();
    let points = [0.3, 0.5, 0.7];
    let hits: Vec<[bool; 3]> = (0..spec.reps)
        .into_par_iter()
        .map(|rep| {
            let (xs, ys) = replicate_dataset(&spec, rep);
            let fit = fit_spse(&xs, &ys, &model, Gamma::Additive, &SmootherChoice::Rates { degree: 1, order: 2 }).unwrap();
            points.map(|x| {
                let (lo, hi) = fit.confidence_interval(x, 0.95).unwrap();
                lo <= truth.f(x) && truth.f(x) <= hi
            })
        })
        .collect();
    let cover: Vec<f64> = (0..3)
        .map(|i| hits.iter().filter(|h| h[i]).count() as f64 / hits.len() as f64)
        .collect();
    outcome(
        cover.iter().all(|c| (0.90..=0.98).contains(c)),
        format!(
            "coverage at x = 0.3, 0.5, 0.7: {:.3}, {:.3}, {:.3}",
            cover[0], cover[1], cover[2]
        ),
    )
}

const TITLES: [&str; 15] = [
    "B-spline partition of unity, support, non-negativity",
    "polynomial-to-spline coefficients exact",
    "difference penalty identities",
    "polynomial guides reduce to NPSE",
    "noiseless in-family data reproduced",
    "penalized least squares matches dense oracle",
    "Bernoulli polynomial and kernel constants",
    "unpenalized selection mode uses C_a only",
    "Example 1 MISE bracket and ordering",
    "Example 1 selection picks sin",
    "Example 3 ISB and MISE orderings",
    "Example 4 MISE ordering and selection",
    "NPSE bias and variance match asymptotics",
    "normality of the estimator at x = 0.5",
    "95% interval coverage",
];

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |i: usize| only.as_ref().is_none_or(|o| o.contains(&i));
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");

    let start = Instant::now();
    let mut failed = Vec::new();
    let mut report = |i: usize, o: Outcome, t: Instant| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} {i:>2}  {}: {} [{:.1}s]",
            TITLES[i - 1],
            o.detail,
            t.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed.push(i);
        }
    };

    let simple: [(usize, fn() -> Outcome); 8] = [
        (1, c1_partition_of_unity),
        (2, c2_polynomial_coefficients),
        (3, c3_penalty_identities),
        (4, c4_polynomial_guides_reduce_to_npse),
        (5, c5_in_family_exactness),
        (6, c6_pls_oracle),
        (7, c7_bernoulli_and_kernels),
        (8, c8_unpenalized_selection_mode),
    ];
    for (i, f) in simple {
        if wanted(i) {
            let t = Instant::now();
            report(i, f(), t);
        }
    }
    if wanted(9) || wanted(10) {
        let t = Instant::now();
        let (c9, c10) = c9_c10_example1();
        if wanted(9) {
            report(9, c9, t);
        }
        if wanted(10) {
            report(10, c10, t);
        }
    }
    let rest: [(usize, fn() -> Outcome); 5] = [
        (11, c11_example3),
        (12, c12_example4),
        (13, c13_bias_and_variance),
        (14, c14_normality),
        (15, c15_coverage),
    ];
    for (i, f) in rest {
        if wanted(i) {
            let t = Instant::now();
            report(i, f(), t);
        }
    }

    println!(
        "acceptance: {} failed {:?} in {:.1}s{}",
        failed.len(),
        failed,
        start.elapsed().as_secs_f64(),
        if strict { "" } else { " (set ACCEPTANCE_STRICT=1 to fail the run)" }
    );
    if strict && !failed.is_empty() {
        std::process::exit(1);
    }
}
