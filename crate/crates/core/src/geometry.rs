//! Optical configuration and sensor/object-plane coordinate conventions.
//!
//! Lateral coordinates are in micrometres, axial distances in millimetres.
//! Pixel `(i, j)` of a `w x h` grid with pitch `p` sits at
//! `((i + 0.5) p - w p / 2, (j + 0.5) p - h p / 2)`, i.e. grids are centred
//! on the optical axis. `i` runs along x (columns), `j` along y (rows).

use crate::error::{Error, Result};

/// A lateral position in micrometres.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

/// Continuous index of `pos` on a centred axis of `n` cells with `pitch`.
#[inline]
pub fn axis_index(pos: f64, n: usize, pitch: f64) -> f64 {
    pos / pitch + n as f64 * 0.5 - 0.5
}

/// Centre coordinate of cell `i` on a centred axis of `n` cells.
#[inline]
pub fn axis_center(i: usize, n: usize, pitch: f64) -> f64 {
    (i as f64 + 0.5) * pitch - n as f64 * pitch * 0.5
}

/// Pixel layout of one sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSpec {
    pub width: usize,
    pub height: usize,
    /// Pixel pitch in micrometres.
    pub pitch: f64,
}

impl SensorSpec {
    pub const fn new(width: usize, height: usize, pitch: f64) -> Self {
        Self {
            width,
            height,
            pitch,
        }
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn center(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            axis_center(i, self.width, self.pitch),
            axis_center(j, self.height, self.pitch),
        )
    }

    /// Centre of the pixel with linear (row-major) index `k`.
    pub fn center_of(&self, k: usize) -> Point2 {
        self.center(k % self.width, k / self.width)
    }

    /// Continuous pixel coordinates of a physical position.
    pub fn index_of(&self, p: Point2) -> (f64, f64) {
        (
            axis_index(p.x, self.width, self.pitch),
            axis_index(p.y, self.height, self.pitch),
        )
    }

    /// Sensor after `k x k` sum-pooling into macro-pixels.
    pub fn binned(&self, k: usize) -> Result<Self> {
        if k == 0 || self.width % k != 0 || self.height % k != 0 {
            return Err(Error::InvalidParameter {
                name: "binning",
                reason: alloc::format!(
                    "factor {k} does not divide the {}x{} sensor",
                    self.width,
                    self.height
                ),
            });
        }
        Ok(Self::new(
            self.width / k,
            self.height / k,
            self.pitch * k as f64,
        ))
    }
}

/// Geometry of the two-sensor CPI setup.
///
/// Sensor A images the plane at distance `focused_distance` from the
/// focusing element with lateral magnification `magnification`; sensor B
/// images the focusing element itself with magnification
/// `lens_magnification`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalConfig {
    /// Distance (mm) from the focusing element to the plane conjugate to sensor A.
    pub focused_distance: f64,
    /// Signed lateral magnification of the focused plane onto sensor A.
    pub magnification: f64,
    /// Signed lateral magnification of the focusing element onto sensor B.
    pub lens_magnification: f64,
    /// Exponent of the transmission profile: 1 when the object sits in one
    /// arm, 2 when it sits in both.
    pub n_paths: u8,
    pub sensor_a: SensorSpec,
    pub sensor_b: SensorSpec,
}

impl OpticalConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason| Err(Error::InvalidConfig { field, reason });
        if !(self.focused_distance > 0.0) || !self.focused_distance.is_finite() {
            return bad("s_o", "must be positive");
        }
        if self.magnification == 0.0 || !self.magnification.is_finite() {
            return bad("M", "must be finite and nonzero");
        }
        if self.lens_magnification == 0.0 || !self.lens_magnification.is_finite() {
            return bad("M_L", "must be finite and nonzero");
        }
        if !matches!(self.n_paths, 1 | 2) {
            return bad("n_paths", "must be 1 or 2");
        }
        if self.sensor_a.width == 0 || self.sensor_a.height == 0 {
            return bad("dims_a", "must be at least 1x1");
        }
        if self.sensor_b.width == 0 || self.sensor_b.height == 0 {
            return bad("dims_b", "must be at least 1x1");
        }
        if !(self.sensor_a.pitch > 0.0) || !self.sensor_a.pitch.is_finite() {
            return bad("pitch_a", "must be positive");
        }
        if !(self.sensor_b.pitch > 0.0) || !self.sensor_b.pitch.is_finite() {
            return bad("pitch_b", "must be positive");
        }
        Ok(())
    }

    /// Object-plane point seen by sensor-A position `rho_a` through the
    /// focusing-element point `sigma` for an object at `depth`.
    #[inline]
    pub fn object_point(&self, depth: f64, rho_a: Point2, sigma: Point2) -> Point2 {
        let r = depth / self.focused_distance;
        rho_a
            .scale(r / self.magnification)
            .add(sigma.scale(1.0 - r))
    }

    /// Focusing-element point conjugate to sensor-B position `rho_b`.
    #[inline]
    pub fn lens_point(&self, rho_b: Point2) -> Point2 {
        rho_b.scale(1.0 / self.lens_magnification)
    }

    /// Sensor-A position whose ray through `sigma` hits `object` at `depth`.
    #[inline]
    pub fn sensor_a_point(&self, depth: f64, object: Point2, sigma: Point2) -> Point2 {
        let r = depth / self.focused_distance;
        object
            .sub(sigma.scale(1.0 - r))
            .scale(self.magnification / r)
    }

    /// Grid on the object plane at `depth` conjugate to the sensor-A pixels.
    pub fn object_grid(&self, depth: f64) -> ObjectGrid {
        ObjectGrid {
            width: self.sensor_a.width,
            height: self.sensor_a.height,
            pitch: depth / self.focused_distance * self.sensor_a.pitch / self.magnification.abs(),
            center: Point2::default(),
        }
    }

    /// The configuration with sensor B replaced by its macro-pixel layout.
    pub fn with_binning(&self, k: usize) -> Result<Self> {
        let mut out = *self;
        out.sensor_b = self.sensor_b.binned(k)?;
        Ok(out)
    }

    /// The configuration matching a tensor of the given dims, inferring any
    /// sensor-B binning.
    pub fn for_tensor(&self, dims_a: (usize, usize), dims_b: (usize, usize)) -> Result<Self> {
        self.validate()?;
        if dims_a != (self.sensor_a.width, self.sensor_a.height) {
            return Err(Error::DimensionMismatch(alloc::format!(
                "tensor sensor-A dims {}x{} differ from the configured {}x{}",
                dims_a.0,
                dims_a.1,
                self.sensor_a.width,
                self.sensor_a.height
            )));
        }
        let sb = &self.sensor_b;
        if dims_b.0 == 0 || dims_b.1 == 0 || sb.width % dims_b.0 != 0 || sb.height % dims_b.1 != 0 {
            return Err(Error::DimensionMismatch(alloc::format!(
                "tensor sensor-B dims {}x{} are not a binning of {}x{}",
                dims_b.0,
                dims_b.1,
                sb.width,
                sb.height
            )));
        }
        let k = sb.width / dims_b.0;
        if sb.height / dims_b.1 != k {
            return Err(Error::DimensionMismatch(
                "sensor-B binning must be the same along both axes".into(),
            ));
        }
        self.with_binning(k)
    }
}

pub fn validate_config(cfg: &OpticalConfig) -> Result<()> {
    cfg.validate()
}

/// Regular grid on an object plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectGrid {
    pub width: usize,
    pub height: usize,
    /// Cell pitch in micrometres.
    pub pitch: f64,
    pub center: Point2,
}

impl ObjectGrid {
    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    pub fn node(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            self.center.x + axis_center(i, self.width, self.pitch),
            self.center.y + axis_center(j, self.height, self.pitch),
        )
    }

    pub fn index_of(&self, p: Point2) -> (f64, f64) {
        (
            axis_index(p.x - self.center.x, self.width, self.pitch),
            axis_index(p.y - self.center.y, self.height, self.pitch),
        )
    }

    /// Grid with `k x k` blocks merged.
    pub fn coarsened(&self, k: usize) -> Result<Self> {
        if k == 0 || self.width % k != 0 || self.height % k != 0 {
            return Err(Error::InvalidParameter {
                name: "downsample",
                reason: alloc::format!("factor {k} does not divide {}x{}", self.width, self.height),
            });
        }
        Ok(Self {
            width: self.width / k,
            height: self.height / k,
            pitch: self.pitch * k as f64,
            center: self.center,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn cfg() -> OpticalConfig {
        OpticalConfig {
            focused_distance: 100.0,
            magnification: -2.0,
            lens_magnification: 1.0,
            n_paths: 1,
            sensor_a: SensorSpec::new(8, 8, 10.0),
            sensor_b: SensorSpec::new(4, 4, 20.0),
        }
    }

    #[test]
    fn valid_config_passes() {
        assert_eq!(validate_config(&cfg()), Ok(()));
    }

    #[test]
    fn zero_distance_is_rejected() {
        let mut c = cfg();
        c.focused_distance = 0.0;
        let err = validate_config(&c).unwrap_err();
        assert_eq!(alloc::format!("{err}"), "s_o must be positive");
    }

    #[test]
    fn three_paths_rejected() {
        let mut c = cfg();
        c.n_paths = 3;
        let err = validate_config(&c).unwrap_err();
        assert_eq!(alloc::format!("{err}"), "n_paths must be 1 or 2");
    }

    #[test]
    fn zero_dims_and_pitch_rejected() {
        let mut c = cfg();
        c.sensor_b.height = 0;
        assert!(matches!(
            validate_config(&c),
            Err(Error::InvalidConfig {
                field: "dims_b",
                ..
            })
        ));
        let mut c = cfg();
        c.sensor_a.pitch = -1.0;
        assert!(matches!(
            validate_config(&c),
            Err(Error::InvalidConfig {
                field: "pitch_a",
                ..
            })
        ));
        let mut c = cfg();
        c.lens_magnification = 0.0;
        assert!(matches!(
            validate_config(&c),
            Err(Error::InvalidConfig { field: "M_L", .. })
        ));
    }

    #[test]
    fn pixel_centers_are_symmetric() {
        let s = SensorSpec::new(4, 3, 2.0);
        assert_eq!(s.center(0, 0), Point2::new(-3.0, -2.0));
        assert_eq!(s.center(3, 2), Point2::new(3.0, 2.0));
        let (fx, fy) = s.index_of(s.center(2, 1));
        assert!((fx - 2.0).abs() < 1e-12 && (fy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sensor_a_point_inverts_object_point() {
        let c = cfg();
        let rho = Point2::new(13.0, -7.0);
        let sigma = Point2::new(40.0, 25.0);
        let obj = c.object_point(130.0, rho, sigma);
        let back = c.sensor_a_point(130.0, obj, sigma);
        assert!((back.x - rho.x).abs() < 1e-9 && (back.y - rho.y).abs() < 1e-9);
    }
}
