//! Gated single-photon binary detection.
//!
//! Each pixel reports 1 if at least one photon or dark count arrives during
//! the gate. With mean count `lambda` the firing probability is
//! `1 - exp(-lambda)`.

use alloc::vec::Vec;

#[allow(unused_imports)] // needed without std
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::frame::{pack_bits, Frame, Payload, SensorTag};
use crate::rng::{keyed_rng, Domain};

/// Sensor parameters. Times are in nanoseconds, the dark count rate in
/// counts per second per pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    pub pdp: f64,
    pub gate_ns: f64,
    pub exposure_ns: f64,
    pub dark_count_rate: f64,
    pub seed: u64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            pdp: 0.5,
            gate_ns: 10.8,
            exposure_ns: 1e9 / 97_700.0,
            dark_count_rate: 100.0,
            seed: 0,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.into(),
            })
        };
        if !(0.0..=1.0).contains(&self.pdp) {
            return bad("pdp", "must lie in [0, 1]");
        }
        if !(self.gate_ns > 0.0) || !self.gate_ns.is_finite() {
            return bad("gate_ns", "must be positive");
        }
        if !(self.exposure_ns >= self.gate_ns) || !self.exposure_ns.is_finite() {
            return bad("exposure_ns", "must be finite and at least gate_ns");
        }
        if !(self.dark_count_rate >= 0.0) || !self.dark_count_rate.is_finite() {
            return bad("dark_count_rate", "must be nonnegative");
        }
        Ok(())
    }

    /// Mean detected counts in one gate for `photons` incident per exposure.
    #[inline]
    pub fn mean_counts(&self, photons: f64) -> f64 {
        self.pdp * photons * (self.gate_ns / self.exposure_ns)
            + self.dark_count_rate * self.gate_ns * 1e-9
    }

    /// Probability that a pixel fires.
    #[inline]
    pub fn fire_probability(&self, photons: f64) -> f64 {
        -(-self.mean_counts(photons)).exp_m1()
    }
}

/// Converts an analog frame of mean incident photons per exposure into a
/// binary frame. Deterministic given `(params.seed, frame_index)` and the
/// frame's sensor.
pub fn detect_binary(frame: &Frame, params: &DetectorParams, frame_index: u64) -> Result<Frame> {
    params.validate()?;
    let Payload::Analog(values) = frame.payload() else {
        return Err(Error::PayloadMismatch);
    };
    if let Some((index, v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
    {
        return Err(Error::InvalidIntensity {
            index,
            value: *v as f64,
        });
    }
    let domain = match frame.sensor() {
        SensorTag::B => Domain::DetectorB,
        _ => Domain::DetectorA,
    };
    let mut rng = keyed_rng(params.seed, domain, frame_index);
    let bits: Vec<u8> = values
        .iter()
        .map(|&v| {
            let p = params.fire_probability(v as f64);
            let u: f64 = rng.random();
            (u < p) as u8
        })
        .collect();
    Frame::binary(
        frame.width(),
        frame.height(),
        frame.index(),
        frame.sensor(),
        pack_bits(frame.width(), frame.height(), &bits),
    )
}

/// Noiseless pass-through.
pub fn detect_ideal(frame: &Frame) -> Frame {
    frame.clone()
}
