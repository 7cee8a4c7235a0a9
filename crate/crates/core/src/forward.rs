//! Geometric-optics forward model of the two-sensor setup.
//!
//! Sensor B records the speckle on the focusing element, magnified by
//! `M_L`. Each sensor-A pixel `rho_a` integrates the speckle over the
//! focusing element, weighted by the transmission of every mask at the
//! point where the ray from `sigma` towards the conjugate point of `rho_a`
//! crosses it:
//!
//! ```text
//! I_a(rho_a) = w * sum_sigma I(sigma) * prod_d A_d((s_d/s_o) rho_a/M + (1 - s_d/s_o) sigma)^n
//! ```
//!
//! with the uniform quadrature weight `w = 1 / cells`.

use alloc::vec::Vec;

#[allow(unused_imports)] // needed without std
use num_traits::Float;

use crate::correlation::{CorrelationTensor, Normalization};
use crate::error::{Error, Result};
use crate::frame::{Frame, SensorTag};
use crate::geometry::{OpticalConfig, Point2};
use crate::image::gaussian_blur;
use crate::scene::ObjectScene;
use crate::speckle::{periodic_taps, SpeckleField, SpeckleGrid};

/// Separable mapping tables of one mask depth: the object point of
/// `(rho_a, sigma)` is `base[rho_a] + offset[sigma]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthTable {
    pub depth: f64,
    pub base: Vec<Point2>,
    pub offset: Vec<Point2>,
}

/// Precomputed propagation of one scene through one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationPlan {
    cfg: OpticalConfig,
    grid: SpeckleGrid,
    scene: ObjectScene,
    tables: Vec<DepthTable>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    weights: Vec<f32>,
    b_taps: Vec<[(u32, f32); 4]>,
    quadrature: f64,
}

impl PropagationPlan {
    pub fn new(cfg: &OpticalConfig, scene: &ObjectScene, grid: SpeckleGrid) -> Result<Self> {
        cfg.validate()?;
        let (hx, hy) = grid.half_extent();
        let sb = &cfg.sensor_b;
        let mut b_taps = Vec::with_capacity(sb.pixels());
        for k in 0..sb.pixels() {
            let sigma = cfg.lens_point(sb.center_of(k));
            if sigma.x.abs() > hx || sigma.y.abs() > hy {
                return Err(Error::Geometry(alloc::format!(
                    "sensor-B pixel {k} views ({:.1}, {:.1}) um, outside the {:.1} x {:.1} um speckle aperture",
                    sigma.x,
                    sigma.y,
                    2.0 * hx,
                    2.0 * hy
                )));
            }
            let (fx, fy) = grid.index_of(sigma);
            let taps = periodic_taps(grid.width, grid.height, fx, fy);
            b_taps.push(taps.map(|(i, w)| (i as u32, w as f32)));
        }

        let na = cfg.sensor_a.pixels();
        let ns = grid.cells();
        let mut tables = Vec::with_capacity(scene.masks().len());
        for mask in scene.masks() {
            let depth = mask.depth();
            let r = depth / cfg.focused_distance;
            let base: Vec<Point2> = (0..na)
                .map(|k| cfg.sensor_a.center_of(k).scale(r / cfg.magnification))
                .collect();
            let offset: Vec<Point2> = (0..ns).map(|k| grid.center_of(k).scale(1.0 - r)).collect();
            if !mask.opaque_surround() {
                let (lo_b, hi_b) = bounds(&base);
                let (lo_o, hi_o) = bounds(&offset);
                let corners = [lo_b.add(lo_o), hi_b.add(hi_o)];
                if corners.iter().any(|c| !mask.grid().contains(*c)) {
                    return Err(Error::Geometry(alloc::format!(
                        "mapped footprint at depth {depth} mm exceeds the mask grid and the surround is not opaque"
                    )));
                }
            }
            tables.push(DepthTable {
                depth,
                base,
                offset,
            });
        }

        let exponent = cfg.n_paths as i32;
        let mut row_ptr = Vec::with_capacity(na + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        row_ptr.push(0);
        for ia in 0..na {
            for is in 0..ns {
                let mut w = 1.0f64;
                for (t, mask) in tables.iter().zip(scene.masks()) {
                    w *= mask.sample(t.base[ia].add(t.offset[is])).powi(exponent);
                    if w == 0.0 {
                        break;
                    }
                }
                if w > 0.0 {
                    cols.push(is as u32);
                    weights.push(w as f32);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            cfg: *cfg,
            grid,
            scene: scene.clone(),
            tables,
            row_ptr,
            cols,
            weights,
            b_taps,
            quadrature: 1.0 / ns as f64,
        })
    }

    pub fn config(&self) -> &OpticalConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &SpeckleGrid {
        &self.grid
    }

    pub fn scene(&self) -> &ObjectScene {
        &self.scene
    }

    pub fn tables(&self) -> &[DepthTable] {
        &self.tables
    }

    /// Object point of `(rho_a, sigma)` at mask `depth_index`.
    pub fn mapped_point(&self, depth_index: usize, ia: usize, is: usize) -> Point2 {
        let t = &self.tables[depth_index];
        t.base[ia].add(t.offset[is])
    }

    /// Number of stored nonzero transmission weights.
    pub fn nonzeros(&self) -> usize {
        self.weights.len()
    }

    /// Uniform weight of each focusing-element cell.
    pub fn quadrature_weight(&self) -> f64 {
        self.quadrature
    }

    /// Propagates one speckle realisation to the `(A, B)` frame pair.
    pub fn propagate(&self, speckle: &SpeckleField) -> Result<(Frame, Frame)> {
        if speckle.grid() != &self.grid {
            return Err(Error::DimensionMismatch(
                "speckle grid differs from the propagation plan".into(),
            ));
        }
        let intensity = speckle.intensity();
        let a = self.sensor_a_values(intensity);
        let b: Vec<f32> = self
            .b_taps
            .iter()
            .map(|taps| {
                taps.iter()
                    .map(|&(i, w)| intensity[i as usize] * w as f64)
                    .sum::<f64>()
                    .max(0.0) as f32
            })
            .collect();
        let k = speckle.frame_index();
        let sa = &self.cfg.sensor_a;
        let sb = &self.cfg.sensor_b;
        Ok((
            Frame::analog(sa.width, sa.height, k, SensorTag::A, a)?,
            Frame::analog(sb.width, sb.height, k, SensorTag::B, b)?,
        ))
    }

    fn sensor_a_values(&self, intensity: &[f64]) -> Vec<f32> {
        self.row_ptr
            .windows(2)
            .map(|r| {
                let mut acc = 0.0f64;
                for (&c, &w) in self.cols[r[0]..r[1]].iter().zip(&self.weights[r[0]..r[1]]) {
                    acc += w as f64 * intensity[c as usize];
                }
                (acc * self.quadrature) as f32
            })
            .collect()
    }

    /// Noise-free mean sensor-A image under uniform illumination of the
    /// given intensity: the conventional (direct) image.
    pub fn expected_direct_image(&self, mean_intensity: f64) -> Vec<f64> {
        self.row_ptr
            .windows(2)
            .map(|r| {
                let s: f64 = self.weights[r[0]..r[1]].iter().map(|&w| w as f64).sum();
                s * self.quadrature * mean_intensity
            })
            .collect()
    }
}

fn bounds(pts: &[Point2]) -> (Point2, Point2) {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

/// Propagates `speckle` after checking that `plan` was built for `scene`
/// and `cfg`.
pub fn propagate_frame(
    speckle: &SpeckleField,
    scene: &ObjectScene,
    cfg: &OpticalConfig,
    plan: &PropagationPlan,
) -> Result<(Frame, Frame)> {
    if plan.config() != cfg {
        return Err(Error::Geometry(
            "propagation plan was built for another configuration".into(),
        ));
    }
    if plan.scene() != scene {
        return Err(Error::Geometry(
            "propagation plan was built for another scene".into(),
        ));
    }
    plan.propagate(speckle)
}

/// Geometric-limit correlation function of a single-mask scene, normalised
/// to unit peak.
///
/// The covariance kernel of the speckle maps onto the object plane scaled
/// by `|1 - s/s_o|`, so `Gamma` is the mask (raised to `n`) blurred by a
/// Gaussian of standard deviation `|1 - s/s_o| sigma_c`, evaluated at
/// `(s/s_o) rho_a/M + (1 - s/s_o) rho_b/M_L`.
pub fn expected_gamma(
    scene: &ObjectScene,
    cfg: &OpticalConfig,
    sigma_c: f64,
) -> Result<CorrelationTensor> {
    cfg.validate()?;
    if scene.masks().len() != 1 {
        return Err(Error::MultiDepth(scene.masks().len()));
    }
    if !(sigma_c > 0.0) {
        return Err(Error::InvalidParameter {
            name: "sigma_c",
            reason: alloc::format!("must be positive, got {sigma_c}"),
        });
    }
    let mask = &scene.masks()[0];
    let g = mask.grid();
    let r = mask.depth() / cfg.focused_distance;
    let powered: Vec<f64> = mask
        .values()
        .iter()
        .map(|v| v.powi(cfg.n_paths as i32))
        .collect();
    let blur_std = (1.0 - r).abs() * sigma_c / g.pitch;
    let blurred = mask.with_values(gaussian_blur(&powered, g.width, g.height, blur_std));

    let sa = &cfg.sensor_a;
    let sb = &cfg.sensor_b;
    let na = sa.pixels();
    let mut data = Vec::with_capacity(na * sb.pixels());
    for ib in 0..sb.pixels() {
        let sigma = cfg.lens_point(sb.center_of(ib));
        for ia in 0..na {
            let p = cfg.object_point(mask.depth(), sa.center_of(ia), sigma);
            data.push(blurred.sample(p));
        }
    }
    let t = CorrelationTensor::new(
        (sa.width, sa.height),
        (sb.width, sb.height),
        0,
        Normalization::Raw,
        data,
    )?;
    Ok(t.to_unit_peak())
}
