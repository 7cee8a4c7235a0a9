//! Absorption tomography from the correlation function.
//!
//! Every `(rho_a, rho_b)` pair is a ray from the focusing-element point
//! `rho_b / M_L` through the conjugate point `rho_a / M` of the focused
//! plane. After linearisation against a reference tensor each ray carries
//! an estimate of the absorption line integral along it, which is inverted
//! on a voxel grid by MLEM or by an algebraic (Kaczmarz) iteration.

mod linearize;
mod rays;
mod solve;
mod trace;
mod voxel;

pub use linearize::{linearize, LinearizeOptions, RayMeasurement};
pub use rays::{build_rays, Ray};
pub use solve::{art_solve, mlem_solve, ArtResult, MlemResult, SystemMatrix};
pub use trace::{grid_bounds, trace_lengths};
pub use voxel::VoxelGrid;
