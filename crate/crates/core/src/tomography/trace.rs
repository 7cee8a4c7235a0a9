use alloc::vec::Vec;

#[allow(unused_imports)] // needed without std
use num_traits::Float;

use super::rays::Ray;
use super::voxel::VoxelGrid;
use crate::error::{Error, Result};

/// Low and high corners of the grid in millimetres.
pub fn grid_bounds(grid: &VoxelGrid) -> ([f64; 3], [f64; 3]) {
    let lo = [grid.origin[0] * 1e-3, grid.origin[1] * 1e-3, grid.origin[2]];
    let hi = [
        lo[0] + grid.dims.0 as f64 * grid.pitch_xy * 1e-3,
        lo[1] + grid.dims.1 as f64 * grid.pitch_xy * 1e-3,
        lo[2] + grid.dims.2 as f64 * grid.pitch_z,
    ];
    (lo, hi)
}

/// Exact intersection lengths (mm) of `ray` with every voxel it crosses,
/// in traversal order. Empty when the ray misses the grid.
pub fn trace_lengths(ray: &Ray, grid: &VoxelGrid) -> Result<Vec<(u32, f64)>> {
    let d = ray.dir;
    let speed = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if !(speed > 0.0) || !speed.is_finite() {
        return Err(Error::DegenerateRay);
    }
    let (lo, hi) = grid_bounds(grid);
    let n = [grid.dims.0, grid.dims.1, grid.dims.2];
    let pitch = [grid.pitch_xy * 1e-3, grid.pitch_xy * 1e-3, grid.pitch_z];
    let o = ray.origin;

    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for a in 0..3 {
        if d[a] == 0.0 {
            if o[a] < lo[a] || o[a] > hi[a] {
                return Ok(Vec::new());
            }
        } else {
            let ta = (lo[a] - o[a]) / d[a];
            let tb = (hi[a] - o[a]) / d[a];
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
    }
    if !(t1 > t0) {
        return Ok(Vec::new());
    }

    let mut idx = [0i64; 3];
    let mut step = [0i64; 3];
    let mut t_next = [f64::INFINITY; 3];
    for a in 0..3 {
        let pos = o[a] + d[a] * t0;
        let f = ((pos - lo[a]) / pitch[a]).floor() as i64;
        idx[a] = f.clamp(0, n[a] as i64 - 1);
        if d[a] > 0.0 {
            step[a] = 1;
        } else if d[a] < 0.0 {
            step[a] = -1;
        }
    }
    let boundary = |a: usize, i: i64, s: i64| -> f64 {
        let k = if s > 0 { i + 1 } else { i };
        (lo[a] + k as f64 * pitch[a] - o[a]) / d[a]
    };
    for a in 0..3 {
        if step[a] != 0 {
            t_next[a] = boundary(a, idx[a], step[a]);
        }
    }

    let mut out = Vec::new();
    let mut t = t0;
    loop {
        let a = if t_next[0] <= t_next[1] && t_next[0] <= t_next[2] {
            0
        } else if t_next[1] <= t_next[2] {
            1
        } else {
            2
        };
        let tn = t_next[a].min(t1);
        if tn > t {
            let v = grid.index(idx[0] as usize, idx[1] as usize, idx[2] as usize);
            out.push((v as u32, (tn - t) * speed));
            t = tn;
        }
        if t_next[a] >= t1 {
            break;
        }
        idx[a] += step[a];
        if idx[a] < 0 || idx[a] >= n[a] as i64 {
            break;
        }
        t_next[a] = boundary(a, idx[a], step[a]);
    }
    Ok(out)
}
