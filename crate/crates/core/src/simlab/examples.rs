use crate::error::{Error, Result};
use crate::parametric::{model_library, ParametricModel};
use crate::theory::TrueModel;

/// Sample size used for each reference example.
pub fn example_sample_size(id: u32) -> Result<usize> {
    match id {
        1 | 2 => Ok(25),
        3 => Ok(75),
        4 => Ok(50),
        other => Err(Error::InvalidInput(format!("unknown example id {other}"))),
    }
}

/// Regression function, error variance and (uniform) design of an example.
///
/// 1: `2 + sin(2 pi x)`, `sigma^2 = 0.25`; 2: same with `sigma^2 = 1`;
/// 3: same with `sigma^2(x) = (x - 0.5)^2 + 0.1`;
/// 4: `4 + exp(-x) (sin(7 pi x) + 2 cos(3 pi x))`, `sigma^2 = 0.5`.
pub fn example_truth(id: u32) -> Result<TrueModel> {
    let sine = || {
        ParametricModel::parse("truth", "1 + sin(2)")?.with_coefficients(vec![2.0, 1.0])
    };
    match id {
        1 => TrueModel::homoscedastic(sine()?, 0.25),
        2 => TrueModel::homoscedastic(sine()?, 1.0),
        3 => TrueModel::homoscedastic(sine()?, 1.0)?.with_variance(
            ParametricModel::polynomial(2).with_coefficients(vec![0.35, -1.0, 1.0])?,
        ),
        4 => TrueModel::homoscedastic(
            ParametricModel::parse("truth", "1 + expdamp(sin(7) + cos(3))")?
                .with_coefficients(vec![4.0, 1.0, 2.0])?,
            0.5,
        ),
        other => Err(Error::InvalidInput(format!("unknown example id {other}"))),
    }
}

/// Candidate models of an example (same as [`model_library`]).
pub fn example_candidates(id: u32) -> Result<Vec<ParametricModel>> {
    model_library(id)
}
