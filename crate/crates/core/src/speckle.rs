//! Pseudothermal speckle on the focusing-element plane.
//!
//! A frame's field is circular complex Gaussian white noise low-passed by a
//! periodic Gaussian kernel `h(r) = exp(-r^2 / (2 sigma_c^2))`, so that
//! `|h|^2` has a 1/e half-width of `sigma_c`. The normalised intensity
//! covariance of such a field is `exp(-|d|^2 / (2 sigma_c^2))`, which drops
//! to 1/e at `|d| = sigma_c * sqrt(2)`.

use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // needed without std
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{axis_center, axis_index, Point2};
use crate::rng::{keyed_rng, Domain};

/// Sampling grid of the focusing-element plane. Its extent is the aperture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeckleGrid {
    pub width: usize,
    pub height: usize,
    /// Cell pitch in micrometres.
    pub pitch: f64,
}

impl SpeckleGrid {
    pub const fn new(width: usize, height: usize, pitch: f64) -> Self {
        Self {
            width,
            height,
            pitch,
        }
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    pub fn center(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            axis_center(i, self.width, self.pitch),
            axis_center(j, self.height, self.pitch),
        )
    }

    pub fn center_of(&self, k: usize) -> Point2 {
        self.center(k % self.width, k / self.width)
    }

    pub fn index_of(&self, p: Point2) -> (f64, f64) {
        (
            axis_index(p.x, self.width, self.pitch),
            axis_index(p.y, self.height, self.pitch),
        )
    }

    pub fn half_extent(&self) -> (f64, f64) {
        (
            0.5 * self.width as f64 * self.pitch,
            0.5 * self.height as f64 * self.pitch,
        )
    }
}

/// One speckle realisation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeckleField {
    grid: SpeckleGrid,
    sigma_c: f64,
    mean_intensity: f64,
    frame_index: u64,
    amplitude: Vec<Complex64>,
    intensity: Vec<f64>,
}

impl SpeckleField {
    /// Builds a field from explicit intensities (amplitudes are taken real).
    /// Used for deterministic illumination such as a uniform field.
    pub fn from_intensity(
        grid: SpeckleGrid,
        frame_index: u64,
        intensity: Vec<f64>,
    ) -> Result<Self> {
        if intensity.len() != grid.cells() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} intensities for {} cells",
                intensity.len(),
                grid.cells()
            )));
        }
        if let Some((index, v)) = intensity
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidIntensity { index, value: *v });
        }
        let mean = intensity.iter().sum::<f64>() / grid.cells() as f64;
        Ok(Self {
            grid,
            sigma_c: grid.pitch,
            mean_intensity: mean,
            frame_index,
            amplitude: intensity
                .iter()
                .map(|v| Complex64::new(v.sqrt(), 0.0))
                .collect(),
            intensity,
        })
    }

    pub fn grid(&self) -> &SpeckleGrid {
        &self.grid
    }

    pub fn sigma_c(&self) -> f64 {
        self.sigma_c
    }

    pub fn mean_intensity(&self) -> f64 {
        self.mean_intensity
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    pub fn amplitude(&self) -> &[Complex64] {
        &self.amplitude
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    /// Intensity at `p` by periodic bilinear interpolation between cell
    /// centres.
    pub fn sample(&self, p: Point2) -> f64 {
        let (fx, fy) = self.grid.index_of(p);
        periodic_bilinear(&self.intensity, self.grid.width, self.grid.height, fx, fy)
    }
}

/// Taps and weights of a periodic bilinear lookup.
pub(crate) fn periodic_taps(w: usize, h: usize, fx: f64, fy: f64) -> [(usize, f64); 4] {
    let x0f = fx.floor();
    let y0f = fy.floor();
    let tx = fx - x0f;
    let ty = fy - y0f;
    let wrap = |v: f64, n: usize| (v as i64).rem_euclid(n as i64) as usize;
    let x0 = wrap(x0f, w);
    let x1 = wrap(x0f + 1.0, w);
    let y0 = wrap(y0f, h);
    let y1 = wrap(y0f + 1.0, h);
    [
        (y0 * w + x0, (1.0 - tx) * (1.0 - ty)),
        (y0 * w + x1, tx * (1.0 - ty)),
        (y1 * w + x0, (1.0 - tx) * ty),
        (y1 * w + x1, tx * ty),
    ]
}

fn periodic_bilinear(v: &[f64], w: usize, h: usize, fx: f64, fy: f64) -> f64 {
    periodic_taps(w, h, fx, fy)
        .iter()
        .map(|&(k, wt)| v[k] * wt)
        .sum()
}

/// Sampled Gaussian amplitude kernel, truncated at five standard deviations.
fn amplitude_kernel(sigma_cells: f64) -> Vec<f64> {
    let radius = (5.0 * sigma_cells).ceil() as i64;
    (-radius..=radius)
        .map(|k| {
            let x = k as f64;
            (-x * x / (2.0 * sigma_cells * sigma_cells)).exp()
        })
        .collect()
}

/// Sum of squared taps of `kernel` applied circularly on `n` samples (taps
/// landing on the same sample add up first).
fn tap_energy(kernel: &[f64], n: usize) -> f64 {
    let r = (kernel.len() / 2) as i64;
    let mut folded = alloc::vec![0.0; n];
    for (t, &k) in kernel.iter().enumerate() {
        folded[(t as i64 - r).rem_euclid(n as i64) as usize] += k;
    }
    folded.iter().map(|v| v * v).sum()
}

/// Circular 1D convolution of every line of `data` (stride `step` between
/// consecutive samples, `n` samples per line, `lines` lines `line_stride` apart).
fn convolve_lines(
    data: &mut [Complex64],
    scratch: &mut Vec<Complex64>,
    kernel: &[f64],
    n: usize,
    step: usize,
    lines: usize,
    line_stride: usize,
) {
    let r = (kernel.len() / 2) as i64;
    scratch.resize(n, Complex64::new(0.0, 0.0));
    for line in 0..lines {
        let base = line * line_stride;
        for (i, out) in scratch.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, &kv) in kernel.iter().enumerate() {
                let src = (i as i64 + t as i64 - r).rem_euclid(n as i64) as usize;
                acc += data[base + src * step] * kv;
            }
            *out = acc;
        }
        for (i, v) in scratch.iter().enumerate() {
            data[base + i * step] = *v;
        }
    }
}

/// Generates the speckle realisation of frame `frame_index`.
///
/// The result depends only on `(seed, frame_index)` and the parameters, so
/// frames may be produced in any order.
pub fn generate_speckle(
    seed: u64,
    frame_index: u64,
    grid: SpeckleGrid,
    sigma_c: f64,
    mean_intensity: f64,
) -> Result<SpeckleField> {
    if grid.width == 0 || grid.height == 0 || !(grid.pitch > 0.0) {
        return Err(Error::InvalidParameter {
            name: "speckle grid",
            reason: "dimensions and pitch must be positive".into(),
        });
    }
    if !(sigma_c >= grid.pitch) {
        return Err(Error::Undersampled {
            sigma_c,
            pitch: grid.pitch,
        });
    }
    if !(mean_intensity > 0.0) || !mean_intensity.is_finite() {
        return Err(Error::InvalidParameter {
            name: "mean_intensity",
            reason: alloc::format!("must be positive, got {mean_intensity}"),
        });
    }
    let (w, h) = (grid.width, grid.height);
    let mut rng = keyed_rng(seed, Domain::Speckle, frame_index);
    let mut field: Vec<Complex64> = (0..w * h)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im)
        })
        .collect();

    let kernel = amplitude_kernel(sigma_c / grid.pitch);
    let mut scratch = Vec::new();
    convolve_lines(&mut field, &mut scratch, &kernel, w, 1, h, w);
    convolve_lines(&mut field, &mut scratch, &kernel, h, w, w, 1);

    let mut intensity: Vec<f64> = field.iter().map(|z| z.norm_sqr()).collect();
    // Ensemble mean of |z|^2, so the total power still fluctuates from frame
    // to frame as it does for a real chaotic source.
    let expected = 2.0 * tap_energy(&kernel, w) * tap_energy(&kernel, h);
    let gain = mean_intensity / expected;
    let amp_gain = gain.sqrt();
    for (z, i) in field.iter_mut().zip(intensity.iter_mut()) {
        *z *= amp_gain;
        *i *= gain;
    }
    Ok(SpeckleField {
        grid,
        sigma_c,
        mean_intensity,
        frame_index,
        amplitude: field,
        intensity,
    })
}

/// Normalised intensity covariance `Cov(I(r), I(r + d)) / <I>^2` of the
/// generated speckle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceKernel {
    sigma_c: f64,
}

impl CovarianceKernel {
    pub fn sigma_c(&self) -> f64 {
        self.sigma_c
    }

    pub fn eval(&self, dx: f64, dy: f64) -> f64 {
        (-(dx * dx + dy * dy) / (2.0 * self.sigma_c * self.sigma_c)).exp()
    }

    /// Standard deviation of the kernel viewed as a Gaussian profile.
    pub fn std_dev(&self) -> f64 {
        self.sigma_c
    }
}

/// Covariance kernel matching [`generate_speckle`] for coherence length
/// `sigma_c` (must be positive).
pub fn speckle_covariance_kernel(sigma_c: f64) -> CovarianceKernel {
    assert!(sigma_c > 0.0, "sigma_c must be positive");
    CovarianceKernel { sigma_c }
}
