use alloc::vec::Vec;

#[allow(unused_imports)] // needed without std
use num_traits::Float;

use super::linearize::RayMeasurement;
use super::rays::Ray;
use super::trace::trace_lengths;
use super::voxel::VoxelGrid;
use crate::error::{Error, Result};

/// Sparse ray-by-voxel matrix of intersection lengths (mm), CSR.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix {
    grid: VoxelGrid,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SystemMatrix {
    /// Traces every ray through `grid` (values of `grid` are ignored).
    pub fn build(rays: &[Ray], grid: &VoxelGrid) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(rays.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for ray in rays {
            for (v, l) in trace_lengths(ray, grid)? {
                cols.push(v);
                vals.push(l);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self::from_parts(grid, row_ptr, cols, vals))
    }

    /// Builds from explicit rows of `(voxel, length)`.
    pub fn from_rows(grid: &VoxelGrid, rows: &[Vec<(u32, f64)>]) -> Result<Self> {
        let mut row_ptr = alloc::vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for r in rows {
            for &(v, l) in r {
                if v as usize >= grid.voxels() || !(l > 0.0) || !l.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "system row",
                        reason: alloc::format!("bad entry ({v}, {l})"),
                    });
                }
                cols.push(v);
                vals.push(l);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self::from_parts(grid, row_ptr, cols, vals))
    }

    fn from_parts(grid: &VoxelGrid, row_ptr: Vec<usize>, cols: Vec<u32>, vals: Vec<f64>) -> Self {
        Self {
            grid: grid
                .with_values(alloc::vec![0.0; grid.voxels()])
                .expect("same size"),
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nonzeros(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    /// `A x` for every row.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows())
            .map(|r| {
                let (c, v) = self.row(r);
                c.iter().zip(v).map(|(&c, &v)| v * x[c as usize]).sum()
            })
            .collect()
    }

    fn check(&self, meas: &RayMeasurement) -> Result<()> {
        if meas.values.len() != self.rows() || meas.valid.len() != self.rows() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} measurements for {} rays",
                meas.values.len(),
                self.rows()
            )));
        }
        if self.nonzeros() == 0 {
            return Err(Error::Empty("system matrix has no ray-voxel intersections"));
        }
        if meas.valid_count() == 0 {
            return Err(Error::AllMasked);
        }
        if meas
            .values
            .iter()
            .zip(&meas.valid)
            .any(|(p, &ok)| ok && !(p.is_finite() && *p >= 0.0))
        {
            return Err(Error::InvalidParameter {
                name: "projections",
                reason: "valid projections must be finite and nonnegative".into(),
            });
        }
        Ok(())
    }
}

/// Output of [`mlem_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlemResult {
    pub volume: VoxelGrid,
    /// Model log-likelihood before the first and after every iteration.
    pub log_likelihood: Vec<f64>,
    /// Voxels crossed by no valid ray; they keep their initial value.
    pub unobserved: Vec<bool>,
}

fn log_likelihood(p: &[f64], valid: &[bool], ax: &[f64]) -> f64 {
    let mut l = 0.0;
    for ((&pi, &ok), &ai) in p.iter().zip(valid).zip(ax) {
        if !ok {
            continue;
        }
        if pi > 0.0 {
            l += pi * ai.ln();
        }
        l -= ai;
    }
    l
}

/// Maximum-likelihood EM for `p ~ Poisson(A mu)`:
/// `mu <- mu / (A^T 1) * A^T (p / A mu)`, from a uniform start.
pub fn mlem_solve(sys: &SystemMatrix, meas: &RayMeasurement, iters: usize) -> Result<MlemResult> {
    sys.check(meas)?;
    if iters == 0 {
        return Err(Error::InvalidParameter {
            name: "iters",
            reason: "need at least one iteration".into(),
        });
    }
    let nv = sys.grid.voxels();
    let mut sens = alloc::vec![0.0; nv];
    let (mut p_sum, mut a_sum) = (0.0, 0.0);
    for r in 0..sys.rows() {
        if !meas.valid[r] {
            continue;
        }
        let (c, v) = sys.row(r);
        for (&c, &v) in c.iter().zip(v) {
            sens[c as usize] += v;
            a_sum += v;
        }
        p_sum += meas.values[r];
    }
    let unobserved: Vec<bool> = sens.iter().map(|&s| s == 0.0).collect();
    let start = if p_sum > 0.0 && a_sum > 0.0 {
        p_sum / a_sum
    } else {
        1.0
    };
    let mut mu = alloc::vec![start; nv];

    let mut ax = sys.forward(&mu);
    let mut history = alloc::vec![log_likelihood(&meas.values, &meas.valid, &ax)];
    let mut back = alloc::vec![0.0; nv];
    for _ in 0..iters {
        back.iter_mut().for_each(|b| *b = 0.0);
        for r in 0..sys.rows() {
            if !meas.valid[r] || !(ax[r] > 0.0) {
                continue;
            }
            let ratio = meas.values[r] / ax[r];
            if ratio == 0.0 {
                continue;
            }
            let (c, v) = sys.row(r);
            for (&c, &v) in c.iter().zip(v) {
                back[c as usize] += v * ratio;
            }
        }
        for j in 0..nv {
            if sens[j] > 0.0 {
                mu[j] *= back[j] / sens[j];
            }
        }
        ax = sys.forward(&mu);
        history.push(log_likelihood(&meas.values, &meas.valid, &ax));
    }
    Ok(MlemResult {
        volume: sys.grid.with_values(mu)?,
        log_likelihood: history,
        unobserved,
    })
}

/// Output of [`art_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct ArtResult {
    pub volume: VoxelGrid,
    /// `||A mu - p||` over valid rays, before the first and after every epoch.
    pub residual: Vec<f64>,
}

fn residual_norm(sys: &SystemMatrix, meas: &RayMeasurement, mu: &[f64]) -> f64 {
    let ax = sys.forward(mu);
    ax.iter()
        .zip(&meas.values)
        .zip(&meas.valid)
        .filter(|(_, &ok)| ok)
        .map(|((a, p), _)| (a - p) * (a - p))
        .sum::<f64>()
        .sqrt()
}

/// Kaczmarz row-action iteration with relaxation in `(0, 2)` and projection
/// onto nonnegative values after each row, from a zero volume.
pub fn art_solve(
    sys: &SystemMatrix,
    meas: &RayMeasurement,
    epochs: usize,
    relaxation: f64,
) -> Result<ArtResult> {
    if !(relaxation > 0.0 && relaxation < 2.0) {
        return Err(Error::InvalidParameter {
            name: "relaxation",
            reason: alloc::format!("must lie in (0, 2), got {relaxation}"),
        });
    }
    sys.check(meas)?;
    let nv = sys.grid.voxels();
    let mut mu = alloc::vec![0.0; nv];
    let norms: Vec<f64> = (0..sys.rows())
        .map(|r| sys.row(r).1.iter().map(|v| v * v).sum())
        .collect();
    let mut residual = alloc::vec![residual_norm(sys, meas, &mu)];
    for _ in 0..epochs {
        for r in 0..sys.rows() {
            if !meas.valid[r] || norms[r] == 0.0 {
                continue;
            }
            let (c, v) = sys.row(r);
            let dot: f64 = c.iter().zip(v).map(|(&c, &v)| v * mu[c as usize]).sum();
            let k = relaxation * (meas.values[r] - dot) / norms[r];
            for (&c, &v) in c.iter().zip(v) {
                let m = &mut mu[c as usize];
                *m = (*m + k * v).max(0.0);
            }
        }
        residual.push(residual_norm(sys, meas, &mu));
    }
    Ok(ArtResult {
        volume: sys.grid.with_values(mu)?,
        residual,
    })
}
