//! Compressive-sensing reconstruction: LASSO with a 2D-DCT sparsity basis,
//! solved by coordinate descent with a cross-validated penalty.

pub mod cv;
pub mod dct;
pub mod lasso;
pub mod problem;

use alloc::vec::Vec;

pub use cv::{cross_validate_lambda, lambda_grid, CvResult};
pub use dct::Dct2;
pub use lasso::{
    lambda_max, lasso_cd, soft_threshold, DctSystem, LassoFit, LassoOptions, LassoSolution,
};
pub use problem::{build_cs_problem, CsOptions, CsProblem, NormalSystem, RowMode};

use crate::error::Result;
use crate::frame::FramePairStream;
use crate::geometry::{ObjectGrid, OpticalConfig};
use crate::image::Image;
use crate::metrics::pearson;

/// How the penalty is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaChoice {
    Fixed(f64),
    /// Cross-validation over `points` log-spaced values in
    /// `[ratio * lambda_max, lambda_max]`.
    CrossValidate {
        folds: usize,
        points: usize,
        ratio: f64,
        seed: u64,
    },
}

impl Default for LambdaChoice {
    fn default() -> Self {
        LambdaChoice::CrossValidate {
            folds: 5,
            points: 20,
            ratio: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsSettings {
    pub rows: CsOptions,
    pub lambda: LambdaChoice,
    pub lasso: LassoOptions,
}

/// Output of [`cs_reconstruct`].
#[derive(Debug, Clone, PartialEq)]
pub struct CsReconstruction {
    pub image: Image,
    pub lambda: f64,
    pub lambda_max: f64,
    pub rows: usize,
    pub converged: bool,
    pub sweeps: usize,
    pub cv: Option<CvResult>,
    /// Pearson correlation against the reference, when one was given and the
    /// reconstruction is not constant (as it is when the penalty kills every
    /// coefficient but the mean).
    pub pearson: Option<f64>,
}

/// Builds the problem from `stream`, picks the penalty and solves.
pub fn cs_reconstruct(
    stream: &FramePairStream,
    cfg: &OpticalConfig,
    s_target: f64,
    grid: &ObjectGrid,
    settings: &CsSettings,
    reference: Option<&[f64]>,
) -> Result<CsReconstruction> {
    let problem = build_cs_problem(stream, cfg, s_target, grid, &settings.rows)?;
    solve_problem(&problem, settings, reference)
}

/// [`cs_reconstruct`] for an already assembled problem.
pub fn solve_problem(
    problem: &CsProblem,
    settings: &CsSettings,
    reference: Option<&[f64]>,
) -> Result<CsReconstruction> {
    let g = problem.grid();
    let dct = Dct2::new(g.width, g.height);
    let (total, folds) = match &settings.lambda {
        LambdaChoice::Fixed(_) => (problem.normal_system(), Vec::new()),
        LambdaChoice::CrossValidate { folds, seed, .. } => {
            let f = problem.fold_systems(*folds, *seed)?;
            let mut t = NormalSystem::zeros(problem.cols());
            for s in &f {
                t.add(s);
            }
            (t, f)
        }
    };
    let sys = DctSystem::new(&total, &dct)?;
    let lmax = sys.lambda_max();
    let (lambda, cv) = match &settings.lambda {
        LambdaChoice::Fixed(l) => (*l, None),
        // y is orthogonal to every column: zero is the only sensible fit.
        LambdaChoice::CrossValidate { .. } if !(lmax > 0.0) => (0.0, None),
        LambdaChoice::CrossValidate { points, ratio, .. } => {
            let grid = lambda_grid(lmax, *points, *ratio);
            let res = cv::cross_validate_systems(&folds, &dct, &grid, &settings.lasso)?;
            (res.lambda, Some(res))
        }
    };
    let fit = lasso::solve(&sys, lambda, &settings.lasso, None)?;
    let data = dct.inverse(&fit.coefficients);
    let flat = data.iter().all(|&v| v == data[0]);
    let pearson = reference
        .filter(|_| !flat)
        .map(|r| pearson(&data, r))
        .transpose()?;
    Ok(CsReconstruction {
        image: Image::new(g.width, g.height, data)?,
        lambda,
        lambda_max: lmax,
        rows: problem.rows(),
        converged: fit.converged,
        sweeps: fit.sweeps,
        cv,
        pearson,
    })
}
