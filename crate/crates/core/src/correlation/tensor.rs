use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Scale convention of a [`CorrelationTensor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Covariance in (photon) intensity units.
    Raw,
    /// Divided by the largest entry.
    UnitPeak,
}

impl Normalization {
    pub fn code(self) -> u8 {
        match self {
            Normalization::Raw => 0,
            Normalization::UnitPeak => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Normalization::Raw),
            1 => Some(Normalization::UnitPeak),
            _ => None,
        }
    }
}

/// The 4-index correlation function, stored `rho_b`-major: the entry for
/// sensor-A pixel `ia` and sensor-B pixel `ib` lives at `ib * pixels_a + ia`,
/// so each sensor-B pixel owns a contiguous sensor-A image.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTensor {
    dims_a: (usize, usize),
    dims_b: (usize, usize),
    frames: u64,
    normalization: Normalization,
    data: Vec<f64>,
}

impl CorrelationTensor {
    pub fn new(
        dims_a: (usize, usize),
        dims_b: (usize, usize),
        frames: u64,
        normalization: Normalization,
        data: Vec<f64>,
    ) -> Result<Self> {
        let n = dims_a.0 * dims_a.1 * dims_b.0 * dims_b.1;
        if data.len() != n {
            return Err(Error::DimensionMismatch(alloc::format!(
                "tensor has {} entries, dims imply {n}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: "non-finite entry".into(),
            });
        }
        Ok(Self {
            dims_a,
            dims_b,
            frames,
            normalization,
            data,
        })
    }

    pub fn dims_a(&self) -> (usize, usize) {
        self.dims_a
    }

    pub fn dims_b(&self) -> (usize, usize) {
        self.dims_b
    }

    pub fn pixels_a(&self) -> usize {
        self.dims_a.0 * self.dims_a.1
    }

    pub fn pixels_b(&self) -> usize {
        self.dims_b.0 * self.dims_b.1
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, ia: usize, ib: usize) -> f64 {
        self.data[ib * self.pixels_a() + ia]
    }

    /// The sensor-A image correlated with sensor-B pixel `ib`.
    pub fn slice_b(&self, ib: usize) -> &[f64] {
        let na = self.pixels_a();
        &self.data[ib * na..(ib + 1) * na]
    }

    pub fn peak(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Copy scaled so that the largest entry is 1. A tensor with no
    /// positive entry is returned unscaled.
    pub fn to_unit_peak(&self) -> Self {
        let peak = self.peak();
        let data = if peak > 0.0 {
            self.data.iter().map(|v| v / peak).collect()
        } else {
            self.data.clone()
        };
        Self {
            data,
            normalization: Normalization::UnitPeak,
            ..self.clone()
        }
    }

    /// Linear combination `alpha * self + beta * other` (same dims).
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        if self.dims_a != other.dims_a || self.dims_b != other.dims_b {
            return Err(Error::DimensionMismatch("tensor dims differ".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Self {
            data,
            normalization: Normalization::Raw,
            ..self.clone()
        })
    }
}
