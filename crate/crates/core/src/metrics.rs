//! Image quality statistics: slit visibility, sharpness, Pearson
//! correlation, and resolution scans over depth.

use alloc::vec::Vec;

#[allow(unused_imports)] // needed without std
use num_traits::Float;

use crate::error::{Error, Result};
use crate::forward::{expected_gamma, PropagationPlan};
use crate::geometry::{ObjectGrid, OpticalConfig, Point2};
use crate::image::Image;
use crate::refocus::{refocus_onto, Interpolation};
use crate::scene::{Mask, MaskGrid, ObjectScene};
use crate::speckle::SpeckleGrid;

/// How peaks are located in a visibility profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeakHint {
    /// The two most prominent local maxima.
    None,
    /// As `None`, but maxima closer than half the period (in samples) are
    /// suppressed in favour of the more prominent one.
    Period(f64),
    /// Peak positions known in (fractional) sample coordinates; the trough is
    /// the minimum between them.
    Positions(f64, f64),
}

/// `(I_max - I_min) / (I_max + I_min)` of a two-peak profile, clamped to
/// `[0, 1]`.
pub fn visibility(profile: &[f64], hint: PeakHint) -> Result<f64> {
    if profile.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "profile",
            reason: "non-finite sample".into(),
        });
    }
    let (i_max, i_min) = match hint {
        PeakHint::Positions(l, r) => {
            let (l, r) = if l <= r { (l, r) } else { (r, l) };
            let n = profile.len() as f64;
            if profile.len() < 2 || !(l >= 0.0 && r <= n - 1.0) || r - l < 1e-9 {
                return Err(Error::NoPeaks);
            }
            let at = |x: f64| lerp(profile, x);
            let mut lo = at(0.5 * (l + r));
            let first = l.floor() as usize + 1;
            for (k, v) in profile.iter().enumerate().skip(first) {
                if k as f64 >= r {
                    break;
                }
                lo = lo.min(*v);
            }
            (0.5 * (at(l) + at(r)), lo)
        }
        PeakHint::None => two_peaks(profile, 0.0)?,
        PeakHint::Period(p) => two_peaks(profile, 0.5 * p)?,
    };
    let den = i_max + i_min;
    if !(den > 0.0) {
        return Ok(0.0);
    }
    Ok(((i_max - i_min) / den).clamp(0.0, 1.0))
}

fn lerp(v: &[f64], x: f64) -> f64 {
    let x = x.clamp(0.0, (v.len() - 1) as f64);
    let i = (x.floor() as usize).min(v.len() - 1);
    let j = (i + 1).min(v.len() - 1);
    let t = x - i as f64;
    v[i] * (1.0 - t) + v[j] * t
}

/// A local maximum: a plateau `[start, end]` whose neighbours are lower.
#[derive(Debug, Clone, Copy)]
struct Peak {
    start: usize,
    end: usize,
    height: f64,
    prominence: f64,
}

impl Peak {
    fn center(&self) -> f64 {
        0.5 * (self.start + self.end) as f64
    }
}

fn find_peaks(v: &[f64]) -> Vec<Peak> {
    let n = v.len();
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && v[j + 1] == v[i] {
            j += 1;
        }
        let left_lower = i == 0 || v[i - 1] < v[i];
        let right_lower = j + 1 == n || v[j + 1] < v[i];
        if left_lower && right_lower && !(i == 0 && j + 1 == n) {
            peaks.push(Peak {
                start: i,
                end: j,
                height: v[i],
                prominence: prominence(v, i, j),
            });
        }
        i = j + 1;
    }
    peaks
}

/// Height above the higher of the two side minima, each side searched up
/// to the first strictly higher sample or the profile edge. A side with no
/// samples is ignored.
fn prominence(v: &[f64], start: usize, end: usize) -> f64 {
    let h = v[start];
    let side = |it: &mut dyn Iterator<Item = &f64>| -> Option<f64> {
        let mut lo: Option<f64> = None;
        for &x in it {
            if x > h {
                break;
            }
            lo = Some(lo.map_or(x, |m| m.min(x)));
        }
        lo
    };
    let left = side(&mut v[..start].iter().rev());
    let right = side(&mut v[end + 1..].iter());
    let base = match (left, right) {
        (Some(a), Some(b)) => a.max(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => h,
    };
    h - base
}

fn two_peaks(profile: &[f64], min_sep: f64) -> Result<(f64, f64)> {
    let scale = profile.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut peaks: Vec<Peak> = find_peaks(profile)
        .into_iter()
        .filter(|p| p.prominence > 1e-12 * scale)
        .collect();
    peaks.sort_by(|a, b| {
        b.prominence
            .total_cmp(&a.prominence)
            .then(a.start.cmp(&b.start))
    });
    let mut kept: Vec<Peak> = Vec::new();
    for p in peaks {
        if kept
            .iter()
            .all(|k| (k.center() - p.center()).abs() >= min_sep)
        {
            kept.push(p);
        }
        if kept.len() == 2 {
            break;
        }
    }
    if kept.len() < 2 {
        return Err(Error::NoPeaks);
    }
    let (a, b) = if kept[0].start < kept[1].start {
        (kept[0], kept[1])
    } else {
        (kept[1], kept[0])
    };
    let trough = profile[a.end..=b.start]
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v));
    Ok((0.5 * (a.height + b.height), trough))
}

/// Mean gradient magnitude (central differences, per micrometre) over the
/// interior pixels whose 4-neighbours are all valid.
pub fn sharpness(image: &Image, pitch: f64, valid: Option<&[bool]>) -> f64 {
    let (w, h) = (image.width, image.height);
    if w < 3 || h < 3 {
        return 0.0;
    }
    let ok = |k: usize| valid.is_none_or(|v| v[k]);
    let mut sum = 0.0;
    let mut n = 0usize;
    for j in 1..h - 1 {
        for i in 1..w - 1 {
            let k = j * w + i;
            if !(ok(k) && ok(k - 1) && ok(k + 1) && ok(k - w) && ok(k + w)) {
                continue;
            }
            let gx = (image.data[k + 1] - image.data[k - 1]) / (2.0 * pitch);
            let gy = (image.data[k + w] - image.data[k - w]) / (2.0 * pitch);
            sum += (gx * gx + gy * gy).sqrt();
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Pearson correlation coefficient of two equally sized samples.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "pearson of {} and {} samples",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Empty("pearson needs at least two samples"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if !(saa > 0.0 && sbb > 0.0) {
        return Err(Error::InvalidParameter {
            name: "pearson",
            reason: "constant input has no correlation".into(),
        });
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Settings of a resolution scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionScan {
    pub sigma_c: f64,
    /// Visibility above which two slits count as resolved.
    pub threshold: f64,
    /// Bracket of centre-to-centre distances (um) searched by bisection.
    pub d_min: f64,
    pub d_max: f64,
    pub iterations: u32,
    /// Focusing-element grid used for the conventional image.
    pub aperture: SpeckleGrid,
}

/// Smallest resolvable slit distance at one depth. `None` when even
/// `d_max` is not resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionPoint {
    pub depth: f64,
    pub cpi: Option<f64>,
    pub direct: Option<f64>,
}

/// For every depth, bisects the double-slit distance `d` (slit width
/// `d / 2`) at which the refocused analytic correlation image and the
/// conventional image reach `threshold` visibility.
pub fn resolution_scan(
    cfg: &OpticalConfig,
    depths: &[f64],
    scan: &ResolutionScan,
) -> Result<Vec<ResolutionPoint>> {
    cfg.validate()?;
    if !(scan.d_min > 0.0 && scan.d_max > scan.d_min) {
        return Err(Error::InvalidParameter {
            name: "d range",
            reason: "need 0 < d_min < d_max".into(),
        });
    }
    let mut out = Vec::with_capacity(depths.len());
    for &s in depths {
        if !(s > 0.0) {
            return Err(Error::InvalidParameter {
                name: "depth",
                reason: alloc::format!("must be positive, got {s}"),
            });
        }
        let cpi = bisect(scan, |d| cpi_visibility(cfg, s, d, scan))?;
        let direct = bisect(scan, |d| direct_visibility(cfg, s, d, scan))?;
        out.push(ResolutionPoint {
            depth: s,
            cpi,
            direct,
        });
    }
    Ok(out)
}

fn bisect(scan: &ResolutionScan, vis: impl Fn(f64) -> Result<f64>) -> Result<Option<f64>> {
    let resolved = |d: f64| -> Result<bool> {
        match vis(d) {
            Ok(v) => Ok(v > scan.threshold),
            Err(Error::NoPeaks) => Ok(false),
            Err(e) => Err(e),
        }
    };
    if !resolved(scan.d_max)? {
        return Ok(None);
    }
    if resolved(scan.d_min)? {
        return Ok(Some(scan.d_min));
    }
    let (mut lo, mut hi) = (scan.d_min, scan.d_max);
    for _ in 0..scan.iterations {
        let mid = 0.5 * (lo + hi);
        if resolved(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Double-slit scene at depth `s` on a mask grid fine enough for `d`.
fn scan_scene(s: f64, d: f64, extent: f64) -> Result<ObjectScene> {
    let pitch = (d / 16.0).min(extent / 64.0);
    let n = ((extent / pitch).ceil() as usize).clamp(16, 2048);
    let grid = MaskGrid {
        width: n,
        height: 4,
        pitch,
        center: Point2::default(),
    };
    Ok(ObjectScene::single(Mask::double_slit(s, grid, d)?))
}

/// Thin sensor-A strip along x through the optical axis.
fn strip(cfg: &OpticalConfig) -> OpticalConfig {
    let mut c = *cfg;
    c.sensor_a.height = 1;
    c.sensor_b.height = 1;
    c
}

fn cpi_visibility(cfg: &OpticalConfig, s: f64, d: f64, scan: &ResolutionScan) -> Result<f64> {
    let c = strip(cfg);
    let grid = c.object_grid(s);
    let extent = grid.width as f64 * grid.pitch + 4.0 * d;
    let scene = scan_scene(s, d, extent)?;
    let gamma = expected_gamma(&scene, &c, scan.sigma_c)?;
    let img = refocus_onto(&gamma, &c, s, &grid, Interpolation::Bilinear)?;
    let (l, _) = grid.index_of(Point2::new(-0.5 * d, 0.0));
    let (r, _) = grid.index_of(Point2::new(0.5 * d, 0.0));
    visibility(&img.image.data, PeakHint::Positions(l, r))
}

fn direct_visibility(cfg: &OpticalConfig, s: f64, d: f64, scan: &ResolutionScan) -> Result<f64> {
    let mut c = strip(cfg);
    c.sensor_b.width = 1;
    c.sensor_b.pitch = 1e-9;
    let aperture = SpeckleGrid::new(scan.aperture.width, 1, scan.aperture.pitch);
    let og: ObjectGrid = cfg.object_grid(s);
    let extent =
        og.width as f64 * og.pitch + 2.0 * aperture.width as f64 * aperture.pitch + 4.0 * d;
    let scene = scan_scene(s, d, extent)?;
    let plan = PropagationPlan::new(&c, &scene, aperture)?;
    let img = plan.expected_direct_image(1.0);
    // Slit centres seen through the centre of the aperture.
    let r = s / c.focused_distance;
    let to_index = |x: f64| {
        c.sensor_a
            .index_of(Point2::new(x * c.magnification / r, 0.0))
            .0
    };
    visibility(
        &img,
        PeakHint::Positions(to_index(-0.5 * d), to_index(0.5 * d)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::PI;

    #[test]
    fn flat_profile_has_no_peaks() {
        assert_eq!(visibility(&[1.0; 20], PeakHint::None), Err(Error::NoPeaks));
    }

    #[test]
    fn square_wave_is_fully_visible() {
        let p = [0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
        assert_eq!(visibility(&p, PeakHint::None).unwrap(), 1.0);
    }

    #[test]
    fn raised_cosine_is_fully_visible() {
        let p: Vec<f64> = (0..64)
            .map(|k| 1.0 + (2.0 * PI * k as f64 / 32.0).cos())
            .collect();
        assert!((visibility(&p, PeakHint::None).unwrap() - 1.0).abs() < 1e-12);
        assert!((visibility(&p, PeakHint::Period(32.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!((visibility(&p, PeakHint::Positions(0.0, 32.0)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_contrast() {
        let p = [1.0, 3.0, 2.0, 3.0, 1.0];
        assert!((visibility(&p, PeakHint::None).unwrap() - 0.2).abs() < 1e-12);
        assert!((visibility(&p, PeakHint::Positions(1.0, 3.0)).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn period_hint_suppresses_ripples() {
        let p = [0.0, 5.0, 4.9, 5.0, 0.0, 0.0, 4.0, 0.0];
        assert!((visibility(&p, PeakHint::None).unwrap() - (0.1 / 9.9)).abs() < 1e-12);
        assert!((visibility(&p, PeakHint::Period(5.0)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_basics() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let b: Vec<f64> = a.iter().map(|v| -3.0 * v + 1.0).collect();
        assert!((pearson(&a, &b).unwrap() + 1.0).abs() < 1e-15);
        assert!(pearson(&a, &[1.0; 4]).is_err());
        assert!(pearson(&a, &[1.0; 3]).is_err());
    }

    #[test]
    fn sharpness_of_ramp() {
        let img = Image::new(5, 5, (0..25).map(|k| (k % 5) as f64 * 2.0).collect()).unwrap();
        assert!((sharpness(&img, 2.0, None) - 1.0).abs() < 1e-12);
        let valid = vec![false; 25];
        assert_eq!(sharpness(&img, 2.0, Some(&valid)), 0.0);
    }
}
