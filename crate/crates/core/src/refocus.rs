//! Refocusing of the correlation function onto arbitrary object planes.
//!
//! For an output point `rho` on the plane at depth `s` and every sensor-B
//! pixel, the sensor-A position that sees `rho` through the conjugate
//! focusing-element point is
//!
//! ```text
//! rho_a = M (s_o / s) [rho - (1 - s/s_o) rho_b / M_L]
//! ```
//!
//! The refocused value is the mean of `Gamma(rho_a, rho_b)` over the
//! sensor-B pixels whose `rho_a` falls on sensor A.

use alloc::vec::Vec;

#[allow(unused_imports)] // needed without std
use num_traits::Float;

use crate::correlation::CorrelationTensor;
use crate::error::{Error, Result};
use crate::frame::FramePairStream;
use crate::geometry::{ObjectGrid, OpticalConfig, Point2};
use crate::image::Image;
use crate::scene::bilinear_clamped;

/// Lookup rule for `Gamma` between sensor-A pixel centres.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    Bilinear,
    Nearest,
}

/// A refocused plane.
#[derive(Debug, Clone, PartialEq)]
pub struct RefocusedImage {
    pub image: Image,
    pub depth: f64,
    pub grid: ObjectGrid,
    /// Number of sensor-B pixels contributing to each output pixel.
    pub counts: Vec<u32>,
}

impl RefocusedImage {
    pub fn pitch(&self) -> f64 {
        self.grid.pitch
    }

    /// Output pixels with at least one contribution.
    pub fn valid(&self) -> Vec<bool> {
        self.counts.iter().map(|&c| c > 0).collect()
    }

    pub fn coverage(&self) -> f64 {
        self.counts.iter().filter(|&&c| c > 0).count() as f64 / self.counts.len() as f64
    }
}

/// Refocuses `gamma` onto the plane at `s_target` (mm), sampled on the
/// sensor-A grid conjugate to that plane.
pub fn refocus(
    gamma: &CorrelationTensor,
    cfg: &OpticalConfig,
    s_target: f64,
) -> Result<RefocusedImage> {
    check_depth(s_target)?;
    let grid = cfg.object_grid(s_target);
    refocus_onto(gamma, cfg, s_target, &grid, Interpolation::Bilinear)
}

/// Refocuses onto an explicit object-plane grid.
pub fn refocus_onto(
    gamma: &CorrelationTensor,
    cfg: &OpticalConfig,
    s_target: f64,
    grid: &ObjectGrid,
    interp: Interpolation,
) -> Result<RefocusedImage> {
    check_depth(s_target)?;
    let cfg = cfg.for_tensor(gamma.dims_a(), gamma.dims_b())?;
    let sa = &cfg.sensor_a;
    let sb = &cfg.sensor_b;
    let (wa, ha) = (sa.width, sa.height);

    let mut sum = alloc::vec![0.0f64; grid.cells()];
    let mut counts = alloc::vec![0u32; grid.cells()];
    // Sensor-A index coordinates are separable in x and y.
    let mut fx = alloc::vec![0.0f64; grid.width];
    let mut fy = alloc::vec![0.0f64; grid.height];
    for ib in 0..sb.pixels() {
        let sigma = cfg.lens_point(sb.center_of(ib));
        for (i, f) in fx.iter_mut().enumerate() {
            let p = Point2::new(grid.node(i, 0).x, 0.0);
            *f = sa
                .index_of(cfg.sensor_a_point(s_target, p, Point2::new(sigma.x, 0.0)))
                .0;
        }
        for (j, f) in fy.iter_mut().enumerate() {
            let p = Point2::new(0.0, grid.node(0, j).y);
            *f = sa
                .index_of(cfg.sensor_a_point(s_target, p, Point2::new(0.0, sigma.y)))
                .1;
        }
        let slice = gamma.slice_b(ib);
        for (j, &y) in fy.iter().enumerate() {
            if !(y >= -0.5 && y <= ha as f64 - 0.5) {
                continue;
            }
            for (i, &x) in fx.iter().enumerate() {
                if !(x >= -0.5 && x <= wa as f64 - 0.5) {
                    continue;
                }
                let v = match interp {
                    Interpolation::Bilinear => bilinear_clamped(slice, wa, ha, x, y),
                    Interpolation::Nearest => {
                        let xi = (x.round() as usize).min(wa - 1);
                        let yi = (y.round() as usize).min(ha - 1);
                        slice[yi * wa + xi]
                    }
                };
                let k = j * grid.width + i;
                sum[k] += v;
                counts[k] += 1;
            }
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::Geometry(alloc::format!(
            "no sensor-B pixel maps onto sensor A for depth {s_target} mm"
        )));
    }
    let data = sum
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    Ok(RefocusedImage {
        image: Image::new(grid.width, grid.height, data)?,
        depth: s_target,
        grid: *grid,
        counts,
    })
}

/// Refocuses every depth of `depths`, each on its own conjugate grid.
pub fn refocus_stack(
    gamma: &CorrelationTensor,
    cfg: &OpticalConfig,
    depths: &[f64],
) -> Result<Vec<RefocusedImage>> {
    depths.iter().map(|&s| refocus(gamma, cfg, s)).collect()
}

/// Refocuses every depth of `depths` onto one shared grid, so slices are
/// directly comparable pixel by pixel.
pub fn refocus_stack_onto(
    gamma: &CorrelationTensor,
    cfg: &OpticalConfig,
    depths: &[f64],
    grid: &ObjectGrid,
) -> Result<Vec<RefocusedImage>> {
    depths
        .iter()
        .map(|&s| refocus_onto(gamma, cfg, s, grid, Interpolation::Bilinear))
        .collect()
}

/// Per-pixel mean of the sensor-A frames: the conventional image.
pub fn direct_image(stream: &FramePairStream) -> Result<Image> {
    let Some((first, _)) = stream.pairs().first() else {
        return Err(Error::Empty("direct image of an empty stream"));
    };
    let (w, h) = (first.width(), first.height());
    let mut sum = alloc::vec![0.0f64; w * h];
    let mut buf = alloc::vec![0.0f64; w * h];
    for (a, _) in stream.pairs() {
        a.write_f64(&mut buf);
        for (s, v) in sum.iter_mut().zip(&buf) {
            *s += v;
        }
    }
    let n = stream.len() as f64;
    Image::new(w, h, sum.into_iter().map(|s| s / n).collect())
}

fn check_depth(s: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidParameter {
            name: "depth",
            reason: alloc::format!("refocus depth must be positive, got {s}"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::Normalization;
    use crate::frame::{Frame, SensorTag, StreamMeta};
    use crate::geometry::SensorSpec;
    use alloc::vec;

    fn cfg() -> OpticalConfig {
        OpticalConfig {
            focused_distance: 100.0,
            magnification: -2.0,
            lens_magnification: 0.5,
            n_paths: 1,
            sensor_a: SensorSpec::new(6, 4, 10.0),
            sensor_b: SensorSpec::new(4, 4, 20.0),
        }
    }

    fn tensor(f: impl Fn(usize, usize) -> f64) -> CorrelationTensor {
        let data = (0..16)
            .flat_map(|ib| (0..24).map(move |ia| (ia, ib)))
            .map(|(ia, ib)| f(ia, ib))
            .collect();
        CorrelationTensor::new((6, 4), (4, 4), 10, Normalization::Raw, data).unwrap()
    }

    #[test]
    fn focused_plane_averages_over_rho_b_without_shear() {
        let t = tensor(|ia, ib| (ia * 7 + ib) as f64);
        let img = refocus(&t, &cfg(), 100.0).unwrap();
        // M = -2 flips both axes: output pixel (i, j) reads sensor pixel (5 - i, 3 - j).
        for j in 0..4 {
            for i in 0..6 {
                let ia = (3 - j) * 6 + (5 - i);
                let expect = (0..16).map(|ib| (ia * 7 + ib) as f64).sum::<f64>() / 16.0;
                assert!((img.image.get(i, j) - expect).abs() < 1e-12);
                assert_eq!(img.counts[j * 6 + i], 16);
            }
        }
        assert!((img.pitch() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn binned_tensor_dims_are_inferred() {
        let data = vec![1.0; 24 * 4];
        let t = CorrelationTensor::new((6, 4), (2, 2), 10, Normalization::Raw, data).unwrap();
        let img = refocus(&t, &cfg(), 100.0).unwrap();
        assert!(img.image.data.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let bad =
            CorrelationTensor::new((6, 4), (3, 1), 10, Normalization::Raw, vec![0.0; 72]).unwrap();
        assert!(refocus(&bad, &cfg(), 100.0).is_err());
    }

    #[test]
    fn off_sensor_mapping_is_an_error() {
        let t = tensor(|_, _| 1.0);
        let grid = ObjectGrid {
            width: 3,
            height: 3,
            pitch: 1.0,
            center: Point2::new(1e6, 0.0),
        };
        assert!(matches!(
            refocus_onto(&t, &cfg(), 100.0, &grid, Interpolation::Nearest),
            Err(Error::Geometry(_))
        ));
        assert!(refocus(&t, &cfg(), 0.0).is_err());
    }

    #[test]
    fn empty_stack_is_empty() {
        let t = tensor(|_, _| 1.0);
        assert!(refocus_stack(&t, &cfg(), &[]).unwrap().is_empty());
    }

    #[test]
    fn direct_image_is_frame_mean() {
        let mk = |k: u64, v: f32| {
            (
                Frame::analog(2, 1, k, SensorTag::A, vec![v, 2.0 * v]).unwrap(),
                Frame::analog(1, 1, k, SensorTag::B, vec![1.0]).unwrap(),
            )
        };
        let s = FramePairStream::new(StreamMeta::default(), vec![mk(0, 0.0), mk(1, 2.0)]).unwrap();
        assert_eq!(direct_image(&s).unwrap().data, vec![1.0, 2.0]);
        assert!(direct_image(&FramePairStream::default()).is_err());
    }
}
