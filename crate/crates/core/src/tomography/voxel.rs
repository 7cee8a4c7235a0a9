use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Regular voxel grid. Lateral coordinates are in micrometres, the axial
/// coordinate (distance from the focusing element) in millimetres.
/// `origin` is the low corner of voxel `(0, 0, 0)`; values are stored with
/// x fastest and z slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub dims: (usize, usize, usize),
    pub pitch_xy: f64,
    pub pitch_z: f64,
    pub origin: [f64; 3],
    pub values: Vec<f64>,
}

impl VoxelGrid {
    pub fn new(
        dims: (usize, usize, usize),
        pitch_xy: f64,
        pitch_z: f64,
        origin: [f64; 3],
    ) -> Result<Self> {
        if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
            return Err(Error::InvalidParameter {
                name: "voxel dims",
                reason: "must be at least 1x1x1".into(),
            });
        }
        if !(pitch_xy > 0.0 && pitch_z > 0.0) || !pitch_xy.is_finite() || !pitch_z.is_finite() {
            return Err(Error::InvalidParameter {
                name: "voxel pitch",
                reason: "must be positive".into(),
            });
        }
        if origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "voxel origin",
                reason: "must be finite".into(),
            });
        }
        Ok(Self {
            dims,
            pitch_xy,
            pitch_z,
            origin,
            values: alloc::vec![0.0; dims.0 * dims.1 * dims.2],
        })
    }

    /// Grid centred on the optical axis laterally, spanning `[z0, z1]` mm.
    pub fn centred(dims: (usize, usize, usize), pitch_xy: f64, z0: f64, z1: f64) -> Result<Self> {
        let pz = (z1 - z0) / dims.2.max(1) as f64;
        Self::new(
            dims,
            pitch_xy,
            pz,
            [
                -0.5 * dims.0 as f64 * pitch_xy,
                -0.5 * dims.1 as f64 * pitch_xy,
                z0,
            ],
        )
    }

    pub fn voxels(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims.1 + j) * self.dims.0 + i
    }

    /// Axial range `[lo, hi)` (mm) of slab `k`.
    pub fn slab(&self, k: usize) -> (f64, f64) {
        let lo = self.origin[2] + k as f64 * self.pitch_z;
        (lo, lo + self.pitch_z)
    }

    /// Slab containing depth `z`, if any.
    pub fn slab_of(&self, z: f64) -> Option<usize> {
        let f = (z - self.origin[2]) / self.pitch_z;
        (f >= 0.0 && f < self.dims.2 as f64).then_some(f as usize)
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.voxels() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} values for {} voxels",
                values.len(),
                self.voxels()
            )));
        }
        Ok(Self {
            values,
            ..self.clone()
        })
    }

    /// Sum of the values in each z slab.
    pub fn slab_sums(&self) -> Vec<f64> {
        let per = self.dims.0 * self.dims.1;
        self.values
            .chunks_exact(per)
            .map(|s| s.iter().sum())
            .collect()
    }
}
