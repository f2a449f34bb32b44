use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Anderson-Darling test of normality with mean and variance estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AndersonDarling {
    pub n: usize,
    /// Raw statistic `A^2`.
    pub a2: f64,
    /// Small-sample adjusted `A^2 (1 + 0.75/n + 2.25/n^2)`.
    pub a2_star: f64,
    /// Approximate p-value of the adjusted statistic.
    pub p_value: f64,
}

/// Critical value of the adjusted statistic at the 1% level.
pub const AD_CRITICAL_1PCT: f64 = 1.035;

impl AndersonDarling {
    pub fn passes_at_1pct(&self) -> bool {
        self.a2_star < AD_CRITICAL_1PCT
    }
}

pub fn anderson_darling(sample: &[f64]) -> Result<AndersonDarling> {
    let n = sample.len();
    if n < 8 {
        return Err(Error::InvalidInput(format!(
            "Anderson-Darling needs at least 8 observations, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = sample.iter().sum::<f64>() / nf;
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    if !(var > 0.0) {
        return Err(Error::DegenerateFit("sample has zero variance".into()));
    }
    let sd = var.sqrt();
    let mut z: Vec<f64> = sample.iter().map(|x| (x - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let norm = Normal::standard();
    let s: f64 = (0..n)
        .map(|i| {
            let lo = norm.cdf(z[i]).max(1e-300);
            let hi = (1.0 - norm.cdf(z[n - 1 - i])).max(1e-300);
            (2 * i + 1) as f64 * (lo.ln() + hi.ln())
        })
        .sum();
    let a2 = -nf - s / nf;
    let a2_star = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    let a = a2_star;
    let p_value = if a >= 0.6 {
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    } else if a >= 0.34 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else if a >= 0.2 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    };
    Ok(AndersonDarling {
        n,
        a2,
        a2_star,
        p_value: p_value.clamp(0.0, 1.0),
    })
}
