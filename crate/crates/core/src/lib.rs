//! Simulation and reconstruction core for correlation plenoptic imaging (CPI).
//!
//! The crate covers the full numerical pipeline: pseudothermal speckle
//! generation, the geometric two-sensor forward model, binary single-photon
//! detection, streaming estimation of the intensity correlation function,
//! refocusing, compressive-sensing reconstruction and absorption tomography.
//!
//! Everything here is `no_std` with `alloc`; file formats, configuration
//! parsing, parallel drivers and the command line live in the `cpi` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod compressive;
pub mod correlation;
pub mod detector;
pub mod error;
pub mod forward;
pub mod frame;
pub mod geometry;
pub mod image;
pub mod metrics;
pub mod refocus;
pub mod rng;
pub mod scene;
pub mod speckle;
pub mod tomography;

mod float;

pub use correlation::{CorrelationAccumulator, CorrelationTensor, Normalization};
pub use detector::{detect_binary, detect_ideal, DetectorParams};
pub use error::{Error, Result};
pub use forward::{expected_gamma, propagate_frame, PropagationPlan};
pub use frame::{Frame, FramePairStream, Payload, PayloadKind, SensorTag, StreamMeta};
pub use geometry::{validate_config, ObjectGrid, OpticalConfig, Point2, SensorSpec};
pub use image::Image;
pub use refocus::{direct_image, refocus, refocus_stack, RefocusedImage};
pub use scene::{scene_value, Mask, MaskGrid, ObjectScene};
pub use speckle::{generate_speckle, speckle_covariance_kernel, SpeckleField, SpeckleGrid};
