//! LASSO in the DCT basis by cyclic coordinate descent on the normal
//! equations.
//!
//! With `Z = Phi Psi` (`Psi` the inverse 2D DCT) and its columns scaled to
//! unit norm, the solver minimises
//!
//! ```text
//! ||y - Z c||^2 / (2m) + lambda ||c||_1
//! ```
//!
//! over the scaled coefficients, then undoes the scaling.

use alloc::vec::Vec;

#[allow(unused_imports)] // needed without std
use num_traits::Float;

use super::dct::Dct2;
use super::problem::{CsProblem, NormalSystem};
use crate::error::{Error, Result};

/// Stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    /// Largest coefficient change (unscaled) below which a full sweep ends
    /// the iteration.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_sweeps: 500,
        }
    }
}

/// Normal equations in the scaled DCT basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DctSystem {
    dim: usize,
    q: Vec<f64>,
    b: Vec<f64>,
    yy: f64,
    rows: usize,
    norms: Vec<f64>,
}

impl DctSystem {
    pub fn new(sys: &NormalSystem, dct: &Dct2) -> Result<Self> {
        let p = sys.dim;
        if dct.len() != p {
            return Err(Error::DimensionMismatch(alloc::format!(
                "transform of size {} for {p} unknowns",
                dct.len()
            )));
        }
        if sys.rows == 0 {
            return Err(Error::Empty("normal system without rows"));
        }
        let mut q = dct.congruence(&sys.gram);
        let mut b = dct.forward(&sys.rhs);
        let scale = (0..p).map(|k| q[k * p + k]).fold(0.0f64, f64::max);
        let norms: Vec<f64> = (0..p)
            .map(|k| {
                let d = q[k * p + k];
                if d > 1e-14 * scale && d > 0.0 {
                    d.sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        for r in 0..p {
            for c in 0..p {
                let n = norms[r] * norms[c];
                q[r * p + c] = if n > 0.0 { q[r * p + c] / n } else { 0.0 };
            }
            b[r] = if norms[r] > 0.0 { b[r] / norms[r] } else { 0.0 };
        }
        Ok(Self {
            dim: p,
            q,
            b,
            yy: sys.yy,
            rows: sys.rows,
            norms,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Smallest `lambda` at which the solution is identically zero.
    pub fn lambda_max(&self) -> f64 {
        self.b.iter().fold(0.0f64, |m, v| m.max(v.abs())) / self.rows as f64
    }

    fn objective(&self, c: &[f64], g: &[f64], lambda: f64) -> f64 {
        let lin: f64 = self.b.iter().zip(c).map(|(b, v)| b * v).sum();
        let quad: f64 = g.iter().zip(c).map(|(g, v)| g * v).sum();
        let l1: f64 = c.iter().map(|v| v.abs()).sum();
        (self.yy - 2.0 * lin + quad) / (2.0 * self.rows as f64) + lambda * l1
    }

    /// Unscaled coefficients from scaled ones.
    fn unscale(&self, c: &[f64]) -> Vec<f64> {
        c.iter()
            .zip(&self.norms)
            .map(|(v, n)| if *n > 0.0 { v / n } else { 0.0 })
            .collect()
    }

    fn scale(&self, c: &[f64]) -> Vec<f64> {
        c.iter().zip(&self.norms).map(|(v, n)| v * n).collect()
    }
}

/// Closed-form minimiser of `(x - z)^2 / 2 + t |x|`.
#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Result of one LASSO solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub lambda: f64,
    /// DCT coefficients of the image (unscaled).
    pub coefficients: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Objective after every sweep.
    pub objective: Vec<f64>,
}

/// Coordinate descent on a prepared system, optionally warm-started from
/// unscaled coefficients.
pub fn solve(
    sys: &DctSystem,
    lambda: f64,
    opts: &LassoOptions,
    warm: Option<&[f64]>,
) -> Result<LassoFit> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: alloc::format!("must be finite and nonnegative, got {lambda}"),
        });
    }
    let p = sys.dim;
    let m = sys.rows as f64;
    let thresh = m * lambda;
    let mut c = match warm {
        Some(w) if w.len() == p => sys.scale(w),
        _ => alloc::vec![0.0; p],
    };
    // g = Q c
    let mut g = alloc::vec![0.0; p];
    for (j, &cj) in c.iter().enumerate() {
        if cj != 0.0 {
            for (gi, qi) in g.iter_mut().zip(&sys.q[j * p..(j + 1) * p]) {
                *gi += qi * cj;
            }
        }
    }
    let mut objective = Vec::new();
    let mut sweeps = 0;
    let mut converged = false;

    let update = |j: usize, c: &mut [f64], g: &mut [f64]| -> f64 {
        let d = sys.q[j * p + j];
        if d <= 0.0 {
            return 0.0;
        }
        let r = sys.b[j] - g[j] + d * c[j];
        let new = soft_threshold(r, thresh) / d;
        let delta = new - c[j];
        if delta != 0.0 {
            c[j] = new;
            for (gi, qi) in g.iter_mut().zip(&sys.q[j * p..(j + 1) * p]) {
                *gi += qi * delta;
            }
        }
        (delta / sys.norms[j]).abs()
    };

    while sweeps < opts.max_sweeps {
        let mut change = 0.0f64;
        for j in 0..p {
            change = change.max(update(j, &mut c, &mut g));
        }
        sweeps += 1;
        objective.push(sys.objective(&c, &g, lambda));
        if change < opts.tol {
            converged = true;
            break;
        }
        // Iterate on the active set until it settles, then re-check all.
        let active: Vec<usize> = (0..p).filter(|&j| c[j] != 0.0).collect();
        while sweeps < opts.max_sweeps {
            let mut change = 0.0f64;
            for &j in &active {
                change = change.max(update(j, &mut c, &mut g));
            }
            sweeps += 1;
            objective.push(sys.objective(&c, &g, lambda));
            if change < opts.tol {
                break;
            }
        }
    }
    Ok(LassoFit {
        lambda,
        coefficients: sys.unscale(&c),
        sweeps,
        converged,
        objective,
    })
}

/// LASSO solution of a problem with its image.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub fit: LassoFit,
    /// Object estimate on the problem grid.
    pub image: Vec<f64>,
}

/// Solves `problem` at `lambda`. Non-convergence within the sweep budget is
/// reported through `fit.converged`, not as an error.
pub fn lasso_cd(problem: &CsProblem, lambda: f64, opts: &LassoOptions) -> Result<LassoSolution> {
    let grid = problem.grid();
    let dct = Dct2::new(grid.width, grid.height);
    let sys = DctSystem::new(&problem.normal_system(), &dct)?;
    let fit = solve(&sys, lambda, opts, None)?;
    let image = dct.inverse(&fit.coefficients);
    Ok(LassoSolution { fit, image })
}

/// `lambda_max` of a problem.
pub fn lambda_max(problem: &CsProblem) -> Result<f64> {
    let grid = problem.grid();
    let dct = Dct2::new(grid.width, grid.height);
    Ok(DctSystem::new(&problem.normal_system(), &dct)?.lambda_max())
}
