//! Plain 2D real-valued maps.

use alloc::vec::Vec;

#[allow(unused_imports)] // needed without std
use num_traits::Float;

use crate::error::{Error, Result};

/// Row-major 2D map.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} values for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: alloc::vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.width + i]
    }

    /// Mean of every column: the x profile of a pattern extended along y.
    pub fn column_profile(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.width];
        for row in self.data.chunks_exact(self.width) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        for o in &mut out {
            *o /= self.height as f64;
        }
        out
    }

    /// Column profile restricted to pixels where `valid` is set.
    pub fn column_profile_masked(&self, valid: &[bool]) -> Vec<f64> {
        let mut sum = alloc::vec![0.0; self.width];
        let mut n = alloc::vec![0usize; self.width];
        for (k, v) in self.data.iter().enumerate() {
            if valid[k] {
                sum[k % self.width] += v;
                n[k % self.width] += 1;
            }
        }
        sum.iter()
            .zip(&n)
            .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
            .collect()
    }

    /// Block means over `k x k` tiles. Pixels with `valid[i] == false` are
    /// skipped; tiles without valid pixels become 0.
    pub fn downsample_mean(&self, k: usize, valid: Option<&[bool]>) -> Result<Image> {
        if k == 0 || self.width % k != 0 || self.height % k != 0 {
            return Err(Error::InvalidParameter {
                name: "downsample",
                reason: alloc::format!("factor {k} does not divide {}x{}", self.width, self.height),
            });
        }
        let (w, h) = (self.width / k, self.height / k);
        let mut sum = alloc::vec![0.0; w * h];
        let mut n = alloc::vec![0usize; w * h];
        for j in 0..self.height {
            for i in 0..self.width {
                let src = j * self.width + i;
                if valid.is_none_or(|v| v[src]) {
                    let dst = (j / k) * w + i / k;
                    sum[dst] += self.data[src];
                    n[dst] += 1;
                }
            }
        }
        let data = sum
            .iter()
            .zip(&n)
            .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
            .collect();
        Ok(Image {
            width: w,
            height: h,
            data,
        })
    }
}

/// Separable Gaussian blur with standard deviation `std_px` (in pixels),
/// treating everything outside the grid as zero.
pub fn gaussian_blur(data: &[f64], width: usize, height: usize, std_px: f64) -> Vec<f64> {
    if !(std_px > 1e-3) {
        return data.to_vec();
    }
    let radius = (5.0 * std_px).ceil() as i64;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * std_px * std_px)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|v| v / norm).collect();

    let mut tmp = alloc::vec![0.0; data.len()];
    for j in 0..height {
        for i in 0..width {
            let mut acc = 0.0;
            for (t, kv) in kernel.iter().enumerate() {
                let x = i as i64 + t as i64 - radius;
                if x >= 0 && (x as usize) < width {
                    acc += kv * data[j * width + x as usize];
                }
            }
            tmp[j * width + i] = acc;
        }
    }
    let mut out = alloc::vec![0.0; data.len()];
    for j in 0..height {
        for i in 0..width {
            let mut acc = 0.0;
            for (t, kv) in kernel.iter().enumerate() {
                let y = j as i64 + t as i64 - radius;
                if y >= 0 && (y as usize) < height {
                    acc += kv * tmp[y as usize * width + i];
                }
            }
            out[j * width + i] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downsample_averages_blocks() {
        let img = Image::new(4, 2, alloc::vec![1., 3., 5., 7., 1., 3., 5., 7.]).unwrap();
        let d = img.downsample_mean(2, None).unwrap();
        assert_eq!(d.data, alloc::vec![2.0, 6.0]);
        let valid = [true, false, true, true, true, false, true, true];
        let d = img.downsample_mean(2, Some(&valid)).unwrap();
        assert_eq!(d.data, alloc::vec![1.0, 6.0]);
    }

    #[test]
    fn blur_preserves_mass_away_from_edges() {
        let mut data = alloc::vec![0.0; 41 * 41];
        data[20 * 41 + 20] = 1.0;
        let out = gaussian_blur(&data, 41, 41, 2.0);
        let total: f64 = out.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(out[20 * 41 + 20] > out[20 * 41 + 22]);
    }
}
