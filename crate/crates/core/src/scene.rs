//! Planar transmission masks placed at given depths in front of the
//! focusing element.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{axis_center, axis_index, Point2};

/// Sampling grid of a mask. Nodes follow the centred-grid convention of
/// [`crate::geometry`] around `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskGrid {
    pub width: usize,
    pub height: usize,
    /// Node pitch in micrometres.
    pub pitch: f64,
    pub center: Point2,
}

impl MaskGrid {
    pub fn node(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            self.center.x + axis_center(i, self.width, self.pitch),
            self.center.y + axis_center(j, self.height, self.pitch),
        )
    }

    /// Half extents of the area covered by the grid cells.
    pub fn half_extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.pitch * 0.5,
            self.height as f64 * self.pitch * 0.5,
        )
    }

    pub fn contains(&self, p: Point2) -> bool {
        let (hx, hy) = self.half_extent();
        (p.x - self.center.x).abs() <= hx && (p.y - self.center.y).abs() <= hy
    }
}

/// A thin transmission mask `A(rho)` at distance `depth` (mm) from the
/// focusing element.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    depth: f64,
    grid: MaskGrid,
    values: Vec<f64>,
    opaque_surround: bool,
}

impl Mask {
    pub fn new(
        depth: f64,
        grid: MaskGrid,
        values: Vec<f64>,
        opaque_surround: bool,
    ) -> Result<Self> {
        if !(depth > 0.0) || !depth.is_finite() {
            return Err(Error::InvalidParameter {
                name: "depth",
                reason: alloc::format!("mask depth must be positive, got {depth}"),
            });
        }
        if grid.width == 0 || grid.height == 0 || !(grid.pitch > 0.0) {
            return Err(Error::InvalidParameter {
                name: "mask grid",
                reason: "dimensions and pitch must be positive".into(),
            });
        }
        if values.len() != grid.width * grid.height {
            return Err(Error::DimensionMismatch(alloc::format!(
                "mask has {} samples for a {}x{} grid",
                values.len(),
                grid.width,
                grid.height
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter {
                name: "transmission",
                reason: alloc::format!("sample {v} outside [0, 1]"),
            });
        }
        Ok(Self {
            depth,
            grid,
            values,
            opaque_surround,
        })
    }

    /// Samples `f` at every grid node.
    pub fn from_fn(
        depth: f64,
        grid: MaskGrid,
        opaque_surround: bool,
        f: impl Fn(Point2) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.width * grid.height);
        for j in 0..grid.height {
            for i in 0..grid.width {
                values.push(f(grid.node(i, j)));
            }
        }
        Self::new(depth, grid, values, opaque_surround)
    }

    /// Vertical slits (extended along y) of width `slit_width` centred at
    /// `centers` (x coordinates, um). Inside a slit the transmission is
    /// `inside`, elsewhere `outside`. Node values are cell-area averages so
    /// slit edges are resolved below the grid pitch.
    pub fn slits(
        depth: f64,
        grid: MaskGrid,
        slit_width: f64,
        centers: &[f64],
        inside: f64,
        outside: f64,
        opaque_surround: bool,
    ) -> Result<Self> {
        let half = 0.5 * grid.pitch;
        Self::from_fn(depth, grid, opaque_surround, |p| {
            let (lo, hi) = (p.x - half, p.x + half);
            let covered: f64 = centers
                .iter()
                .map(|c| {
                    let a = lo.max(c - 0.5 * slit_width);
                    let b = hi.min(c + 0.5 * slit_width);
                    (b - a).max(0.0)
                })
                .sum();
            let frac = (covered / grid.pitch).min(1.0);
            (frac * inside + (1.0 - frac) * outside).clamp(0.0, 1.0)
        })
    }

    /// Two transparent slits of width `d/2` whose centres are `d` apart.
    pub fn double_slit(depth: f64, grid: MaskGrid, center_distance: f64) -> Result<Self> {
        let h = 0.5 * center_distance;
        Self::slits(depth, grid, h, &[-h, h], 1.0, 0.0, true)
    }

    /// Three transparent slits of width `d/2` at `-d, 0, d`.
    pub fn triple_slit(depth: f64, grid: MaskGrid, center_distance: f64) -> Result<Self> {
        let d = center_distance;
        Self::slits(depth, grid, 0.5 * d, &[-d, 0.0, d], 1.0, 0.0, true)
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn grid(&self) -> &MaskGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn opaque_surround(&self) -> bool {
        self.opaque_surround
    }

    /// Bilinear interpolation of the node values. Points outside the cell
    /// area of the grid return 0; inside the outermost half cell the edge
    /// nodes are held constant.
    pub fn sample(&self, p: Point2) -> f64 {
        let g = &self.grid;
        let fx = axis_index(p.x - g.center.x, g.width, g.pitch);
        let fy = axis_index(p.y - g.center.y, g.height, g.pitch);
        let (w, h) = (g.width as f64, g.height as f64);
        if !(fx >= -0.5 && fx <= w - 0.5 && fy >= -0.5 && fy <= h - 0.5) {
            return 0.0;
        }
        bilinear_clamped(&self.values, g.width, g.height, fx, fy)
    }

    /// Same mask with different node values (used for blurred copies).
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            values,
            ..self.clone()
        }
    }
}

/// Bilinear interpolation with indices clamped into the grid.
pub(crate) fn bilinear_clamped(v: &[f64], w: usize, h: usize, fx: f64, fy: f64) -> f64 {
    let fx = fx.clamp(0.0, (w - 1) as f64);
    let fy = fy.clamp(0.0, (h - 1) as f64);
    let x0 = fx as usize;
    let y0 = fy as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let tx = fx - x0 as f64;
    let ty = fy - y0 as f64;
    let top = v[y0 * w + x0] * (1.0 - tx) + v[y0 * w + x1] * tx;
    let bot = v[y1 * w + x0] * (1.0 - tx) + v[y1 * w + x1] * tx;
    top * (1.0 - ty) + bot * ty
}

/// A stack of planar masks. Transmissions of masks at different depths
/// multiply along each ray.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectScene {
    masks: Vec<Mask>,
}

impl ObjectScene {
    pub fn new(masks: Vec<Mask>) -> Result<Self> {
        if masks.is_empty() {
            return Err(Error::Empty("scene needs at least one mask"));
        }
        Ok(Self { masks })
    }

    pub fn single(mask: Mask) -> Self {
        Self {
            masks: alloc::vec![mask],
        }
    }

    pub fn masks(&self) -> &[Mask] {
        &self.masks
    }

    pub fn mask_at(&self, depth: f64) -> Result<&Mask> {
        self.masks
            .iter()
            .find(|m| (m.depth - depth).abs() <= 1e-9 * depth.abs().max(1.0))
            .ok_or(Error::UnknownDepth(depth))
    }
}

/// Transmission of the mask at `depth` at `point`.
pub fn scene_value(scene: &ObjectScene, depth: f64, point: Point2) -> Result<f64> {
    Ok(scene.mask_at(depth)?.sample(point))
}
