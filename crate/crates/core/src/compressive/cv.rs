//! K-fold cross-validation of the LASSO penalty.

use alloc::vec::Vec;

#[allow(unused_imports)] // needed without std
use num_traits::Float;

use super::dct::Dct2;
use super::lasso::{solve, DctSystem, LassoOptions};
use super::problem::{CsProblem, NormalSystem};
use crate::error::{Error, Result};

/// `points` logarithmically spaced values from `lambda_max` down to
/// `ratio * lambda_max`, in decreasing order.
pub fn lambda_grid(lambda_max: f64, points: usize, ratio: f64) -> Vec<f64> {
    if points <= 1 {
        return alloc::vec![lambda_max; points];
    }
    let lr = ratio.ln();
    (0..points)
        .map(|k| lambda_max * (lr * k as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Held-out errors over a penalty grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub lambda: f64,
    /// The grid in the order given.
    pub grid: Vec<f64>,
    /// Mean over folds of the held-out mean squared error, per grid value.
    pub errors: Vec<f64>,
}

/// Cross-validates over precomputed fold systems.
pub fn cross_validate_systems(
    folds: &[NormalSystem],
    dct: &Dct2,
    grid: &[f64],
    opts: &LassoOptions,
) -> Result<CvResult> {
    if folds.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "folds",
            reason: alloc::format!("need at least 2 folds, got {}", folds.len()),
        });
    }
    if grid.is_empty() || grid.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "lambda grid",
            reason: "must be non-empty and positive".into(),
        });
    }
    let mut total = NormalSystem::zeros(folds[0].dim);
    for f in folds {
        total.add(f);
    }
    // Solve in decreasing lambda order so each fit warm-starts the next.
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[b].total_cmp(&grid[a]));
    let mut errors = alloc::vec![0.0; grid.len()];
    for held in folds {
        let train = DctSystem::new(&total.sub(held), dct)?;
        let mut warm: Option<Vec<f64>> = None;
        for &g in &order {
            let fit = solve(&train, grid[g], opts, warm.as_deref())?;
            let x = dct.inverse(&fit.coefficients);
            errors[g] += held.residual_sq(&x) / held.rows.max(1) as f64;
            warm = Some(fit.coefficients);
        }
    }
    for e in &mut errors {
        *e /= folds.len() as f64;
    }
    // Ties go to the larger penalty.
    let mut best = order[0];
    for &g in &order[1..] {
        if errors[g] < errors[best] * (1.0 - 1e-12) {
            best = g;
        }
    }
    Ok(CvResult {
        lambda: grid[best],
        grid: grid.to_vec(),
        errors,
    })
}

/// Picks the penalty of `grid` with the smallest mean held-out squared
/// error over `k_folds` seeded row-wise folds.
pub fn cross_validate_lambda(
    problem: &CsProblem,
    k_folds: usize,
    grid: &[f64],
    seed: u64,
    opts: &LassoOptions,
) -> Result<CvResult> {
    let folds = problem.fold_systems(k_folds, seed)?;
    let g = problem.grid();
    cross_validate_systems(&folds, &Dct2::new(g.width, g.height), grid, opts)
}
