use alloc::vec::Vec;

#[allow(unused_imports)] // needed without std
use num_traits::Float;

use crate::correlation::CorrelationTensor;
use crate::error::{Error, Result};

/// Conventions of [`linearize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizeOptions {
    /// Reference entries below `floor * peak(reference)` are masked.
    pub floor: f64,
    /// Upper clamp of the projections.
    pub p_max: f64,
}

impl Default for LinearizeOptions {
    fn default() -> Self {
        Self {
            floor: 1e-3,
            p_max: 10.0,
        }
    }
}

/// Line-integral estimates, one per ray, with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RayMeasurement {
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
    pub options: LinearizeOptions,
}

impl RayMeasurement {
    /// Measurement with every ray valid.
    pub fn all_valid(values: Vec<f64>) -> Self {
        let valid = alloc::vec![true; values.len()];
        Self {
            values,
            valid,
            options: LinearizeOptions::default(),
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// `p = -ln(Gamma / Gamma_ref)` clamped to `[0, p_max]`. Entries where the
/// reference is below the floor are masked; nonpositive `Gamma` over a
/// valid reference gives `p_max`.
pub fn linearize(
    gamma: &CorrelationTensor,
    reference: &CorrelationTensor,
    opts: &LinearizeOptions,
) -> Result<RayMeasurement> {
    if gamma.dims_a() != reference.dims_a() || gamma.dims_b() != reference.dims_b() {
        return Err(Error::DimensionMismatch(
            "correlation and reference tensors differ in dims".into(),
        ));
    }
    if !(opts.p_max > 0.0) || !(opts.floor >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "linearize",
            reason: "p_max must be positive and floor nonnegative".into(),
        });
    }
    let peak = reference.peak();
    let eps = opts.floor * peak;
    let mut values = Vec::with_capacity(gamma.data().len());
    let mut valid = Vec::with_capacity(gamma.data().len());
    for (&g, &r) in gamma.data().iter().zip(reference.data()) {
        if !(r > eps) || !(r > 0.0) {
            values.push(0.0);
            valid.push(false);
            continue;
        }
        let p = if g > 0.0 { -(g / r).ln() } else { opts.p_max };
        values.push(p.clamp(0.0, opts.p_max));
        valid.push(true);
    }
    if !valid.iter().any(|&v| v) {
        return Err(Error::AllMasked);
    }
    Ok(RayMeasurement {
        values,
        valid,
        options: *opts,
    })
}
