//! Measurement rows of the compressive reconstruction.
//!
//! On the plane at depth `s` with `alpha = s/s_o` and `beta = 1 - alpha`,
//! sensor-A pixel `rho_a` of frame `k` integrates the object against the
//! speckle through
//!
//! ```text
//! I_a(rho_a) ~ w_row * sum_rho I_b(M_L (rho - alpha rho_a / M) / beta) * x(rho)
//! ```
//!
//! so each `(frame, rho_a)` pair gives one linear equation in the object
//! `x` on an [`ObjectGrid`], with coefficients read from the measured
//! sensor-B frame. Both sides are centred on their frame means. When
//! `beta = 0` direction carries no information and every frame collapses to
//! one bucket equation against the sensor-B frame placed on the object
//! grid.

use alloc::vec::Vec;

#[allow(unused_imports)] // needed without std
use num_traits::Float;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::frame::FramePairStream;
use crate::geometry::{ObjectGrid, OpticalConfig, Point2, SensorSpec};
use crate::rng::{keyed_rng, Domain};

/// Tolerance (in pixels) when deciding whether a point lies on sensor B.
const EDGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
enum Rows {
    Dense {
        y: Vec<f64>,
        phi: Vec<f64>,
    },
    Plenoptic {
        shift: f64,
        beta: f64,
        positions: Vec<Point2>,
        ya: Vec<f64>,
        ib: Vec<f64>,
    },
    Bucket {
        ya: Vec<f64>,
        ib: Vec<f64>,
    },
}

/// Whether rows resolve direction or are one bucket value per frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowMode {
    Dense,
    Plenoptic,
    Bucket,
}

/// A linear inverse problem `y = Phi x` on an object grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CsProblem {
    grid: ObjectGrid,
    sensor_b: SensorSpec,
    lens_magnification: f64,
    weight: f64,
    rows: Rows,
}

/// Sufficient statistics of a least-squares problem in the image basis:
/// `Phi^T Phi`, `Phi^T y`, `y^T y` and the row count.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalSystem {
    pub dim: usize,
    pub gram: Vec<f64>,
    pub rhs: Vec<f64>,
    pub yy: f64,
    pub rows: usize,
}

impl NormalSystem {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            gram: alloc::vec![0.0; dim * dim],
            rhs: alloc::vec![0.0; dim],
            yy: 0.0,
            rows: 0,
        }
    }

    /// Adds one sparse row (`idx` ascending) with measurement `y`. Only the
    /// upper triangle of the Gram matrix is touched; call
    /// [`NormalSystem::symmetrize`] when done.
    fn add_row(&mut self, y: f64, idx: &[u32], vals: &[f64]) {
        let p = self.dim;
        for (a, (&ia, &va)) in idx.iter().zip(vals).enumerate() {
            self.rhs[ia as usize] += va * y;
            let row = &mut self.gram[ia as usize * p..(ia as usize + 1) * p];
            for (&ib, &vb) in idx[a..].iter().zip(&vals[a..]) {
                row[ib as usize] += va * vb;
            }
        }
        self.yy += y * y;
        self.rows += 1;
    }

    fn symmetrize(&mut self) {
        let p = self.dim;
        for r in 0..p {
            for c in 0..r {
                self.gram[r * p + c] = self.gram[c * p + r];
            }
        }
    }

    pub fn add(&mut self, other: &Self) {
        for (a, b) in self.gram.iter_mut().zip(&other.gram) {
            *a += b;
        }
        for (a, b) in self.rhs.iter_mut().zip(&other.rhs) {
            *a += b;
        }
        self.yy += other.yy;
        self.rows += other.rows;
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            gram: self
                .gram
                .iter()
                .zip(&other.gram)
                .map(|(a, b)| a - b)
                .collect(),
            rhs: self
                .rhs
                .iter()
                .zip(&other.rhs)
                .map(|(a, b)| a - b)
                .collect(),
            yy: self.yy - other.yy,
            rows: self.rows - other.rows,
        }
    }

    /// `||y - Phi x||^2` for an image `x`.
    pub fn residual_sq(&self, x: &[f64]) -> f64 {
        let p = self.dim;
        let mut quad = 0.0;
        for r in 0..p {
            if x[r] == 0.0 {
                continue;
            }
            let row = &self.gram[r * p..(r + 1) * p];
            quad += x[r] * row.iter().zip(x).map(|(g, v)| g * v).sum::<f64>();
        }
        let lin: f64 = self.rhs.iter().zip(x).map(|(b, v)| b * v).sum();
        (self.yy - 2.0 * lin + quad).max(0.0)
    }
}

/// Row sampling options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsOptions {
    /// Use every `stride`-th sensor-A pixel along each axis.
    pub stride: usize,
}

impl Default for CsOptions {
    fn default() -> Self {
        Self { stride: 1 }
    }
}

fn centred(data: &mut [f64], frames: usize, width: usize) {
    let mut mean = alloc::vec![0.0; width];
    for f in data.chunks_exact(width) {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= frames as f64;
    }
    for f in data.chunks_exact_mut(width) {
        for (v, m) in f.iter_mut().zip(&mean) {
            *v -= m;
        }
    }
}

/// Assembles the rows for the plane at `s_target` (mm) on `grid` from the
/// frames of `stream`.
pub fn build_cs_problem(
    stream: &FramePairStream,
    cfg: &OpticalConfig,
    s_target: f64,
    grid: &ObjectGrid,
    opts: &CsOptions,
) -> Result<CsProblem> {
    cfg.validate()?;
    if stream.is_empty() {
        return Err(Error::Empty("compressive reconstruction needs frames"));
    }
    if !(s_target > 0.0) || !s_target.is_finite() {
        return Err(Error::InvalidParameter {
            name: "depth",
            reason: alloc::format!("must be positive, got {s_target}"),
        });
    }
    if opts.stride == 0 {
        return Err(Error::InvalidParameter {
            name: "stride",
            reason: "must be at least 1".into(),
        });
    }
    if grid.cells() == 0 || !(grid.pitch > 0.0) {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: "object grid must be non-empty with positive pitch".into(),
        });
    }
    let (a0, b0) = &stream.pairs()[0];
    let (sa, sb) = (&cfg.sensor_a, &cfg.sensor_b);
    if (a0.width(), a0.height()) != (sa.width, sa.height)
        || (b0.width(), b0.height()) != (sb.width, sb.height)
    {
        return Err(Error::DimensionMismatch(alloc::format!(
            "frames are {}x{} / {}x{}, configuration expects {}x{} / {}x{}",
            a0.width(),
            a0.height(),
            b0.width(),
            b0.height(),
            sa.width,
            sa.height,
            sb.width,
            sb.height
        )));
    }
    let frames = stream.len();
    let alpha = s_target / cfg.focused_distance;
    let beta = 1.0 - alpha;
    let footprint = (sb.width as f64 * sb.pitch / cfg.lens_magnification.abs())
        * (sb.height as f64 * sb.pitch / cfg.lens_magnification.abs());

    let mut ib = alloc::vec![0.0; frames * sb.pixels()];
    let mut buf_a = alloc::vec![0.0; sa.pixels()];
    for (k, (_, b)) in stream.pairs().iter().enumerate() {
        b.write_f64(&mut ib[k * sb.pixels()..(k + 1) * sb.pixels()]);
    }
    centred(&mut ib, frames, sb.pixels());

    let bucket = beta.abs() < 1e-12;
    let offset = opts.stride / 2;
    let sampled: Vec<usize> = (0..sa.pixels())
        .filter(|&k| {
            let (i, j) = (k % sa.width, k / sa.width);
            i % opts.stride == offset.min(sa.width - 1) % opts.stride
                && j % opts.stride == offset.min(sa.height - 1) % opts.stride
        })
        .collect();

    let per_frame = if bucket { 1 } else { sampled.len() };
    let mut ya = alloc::vec![0.0; frames * per_frame];
    for (k, (a, _)) in stream.pairs().iter().enumerate() {
        a.write_f64(&mut buf_a);
        let dst = &mut ya[k * per_frame..(k + 1) * per_frame];
        if bucket {
            dst[0] = sampled.iter().map(|&q| buf_a[q]).sum();
        } else {
            for (d, &q) in dst.iter_mut().zip(&sampled) {
                *d = buf_a[q];
            }
        }
    }
    centred(&mut ya, frames, per_frame);

    let cell = grid.pitch * grid.pitch;
    let (weight, rows) = if bucket {
        (cell / footprint, Rows::Bucket { ya, ib })
    } else {
        (
            cell / (beta * beta * footprint),
            Rows::Plenoptic {
                shift: alpha / cfg.magnification,
                beta,
                positions: sampled.iter().map(|&q| sa.center_of(q)).collect(),
                ya,
                ib,
            },
        )
    };
    Ok(CsProblem {
        grid: *grid,
        sensor_b: *sb,
        lens_magnification: cfg.lens_magnification,
        weight,
        rows,
    })
}

/// Bilinear taps along one sensor axis for a continuous index, or `None`
/// off the sensor.
#[inline]
fn axis_taps(f: f64, n: usize) -> Option<(usize, usize, f64)> {
    if !(f >= -0.5 - EDGE_SLACK && f <= n as f64 - 0.5 + EDGE_SLACK) {
        return None;
    }
    let f = f.clamp(0.0, (n - 1) as f64);
    let i0 = (f.floor() as usize).min(n - 1);
    let i1 = (i0 + 1).min(n - 1);
    Some((i0, i1, f - i0 as f64))
}

impl CsProblem {
    /// A problem with explicit dense rows (`phi` row-major, one row of
    /// `grid.cells()` entries per measurement).
    pub fn from_rows(grid: ObjectGrid, y: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        let p = grid.cells();
        if p == 0 || phi.len() != y.len() * p {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} matrix entries for {} rows of {p} columns",
                phi.len(),
                y.len()
            )));
        }
        if y.is_empty() {
            return Err(Error::Empty("problem without rows"));
        }
        if y.iter().chain(&phi).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "rows",
                reason: "non-finite entry".into(),
            });
        }
        Ok(Self {
            grid,
            sensor_b: SensorSpec::new(1, 1, 1.0),
            lens_magnification: 1.0,
            weight: 1.0,
            rows: Rows::Dense { y, phi },
        })
    }

    pub fn grid(&self) -> &ObjectGrid {
        &self.grid
    }

    pub fn mode(&self) -> RowMode {
        match self.rows {
            Rows::Dense { .. } => RowMode::Dense,
            Rows::Plenoptic { .. } => RowMode::Plenoptic,
            Rows::Bucket { .. } => RowMode::Bucket,
        }
    }

    pub fn rows(&self) -> usize {
        match &self.rows {
            Rows::Dense { y, .. } => y.len(),
            Rows::Plenoptic { ya, .. } | Rows::Bucket { ya, .. } => ya.len(),
        }
    }

    pub fn cols(&self) -> usize {
        self.grid.cells()
    }

    /// The centred measurement vector.
    pub fn measurements(&self) -> &[f64] {
        match &self.rows {
            Rows::Dense { y, .. } => y,
            Rows::Plenoptic { ya, .. } | Rows::Bucket { ya, .. } => ya,
        }
    }

    /// Calls `f(row, y, idx, vals)` for every row in order; `idx` lists the
    /// nonzero columns in ascending order.
    pub fn for_each_row(&self, mut f: impl FnMut(usize, f64, &[u32], &[f64])) {
        let p = self.grid.cells();
        let (gw, gh) = (self.grid.width, self.grid.height);
        let mut idx: Vec<u32> = Vec::with_capacity(p);
        let mut vals: Vec<f64> = Vec::with_capacity(p);
        let sb = &self.sensor_b;
        let nb = sb.pixels();
        let mut tx: Vec<Option<(usize, usize, f64)>> = alloc::vec![None; gw];
        let mut ty: Vec<Option<(usize, usize, f64)>> = alloc::vec![None; gh];
        let mut emit = |row: usize,
                        y: f64,
                        frame: &[f64],
                        tx: &[Option<(usize, usize, f64)>],
                        ty: &[Option<(usize, usize, f64)>],
                        f: &mut dyn FnMut(usize, f64, &[u32], &[f64])| {
            idx.clear();
            vals.clear();
            for (j, t) in ty.iter().enumerate() {
                let Some((y0, y1, wy)) = *t else { continue };
                for (i, s) in tx.iter().enumerate() {
                    let Some((x0, x1, wx)) = *s else { continue };
                    let w = sb.width;
                    let top = frame[y0 * w + x0] * (1.0 - wx) + frame[y0 * w + x1] * wx;
                    let bot = frame[y1 * w + x0] * (1.0 - wx) + frame[y1 * w + x1] * wx;
                    idx.push((j * gw + i) as u32);
                    vals.push(self.weight * (top * (1.0 - wy) + bot * wy));
                }
            }
            f(row, y, &idx, &vals);
        };
        match &self.rows {
            Rows::Dense { y, phi } => {
                for (r, &yr) in y.iter().enumerate() {
                    idx.clear();
                    vals.clear();
                    for (c, &v) in phi[r * p..(r + 1) * p].iter().enumerate() {
                        if v != 0.0 {
                            idx.push(c as u32);
                            vals.push(v);
                        }
                    }
                    f(r, yr, &idx, &vals);
                }
            }
            Rows::Bucket { ya, ib } => {
                let ml = self.lens_magnification;
                for (i, t) in tx.iter_mut().enumerate() {
                    let x = self.grid.node(i, 0).x * ml;
                    *t = axis_taps(sb.index_of(Point2::new(x, 0.0)).0, sb.width);
                }
                for (j, t) in ty.iter_mut().enumerate() {
                    let y = self.grid.node(0, j).y * ml;
                    *t = axis_taps(sb.index_of(Point2::new(0.0, y)).1, sb.height);
                }
                for (k, &y) in ya.iter().enumerate() {
                    emit(k, y, &ib[k * nb..(k + 1) * nb], &tx, &ty, &mut f);
                }
            }
            Rows::Plenoptic {
                shift,
                beta,
                positions,
                ya,
                ib,
            } => {
                let ml = self.lens_magnification;
                let per = positions.len();
                for (q, rho) in positions.iter().enumerate() {
                    for (i, t) in tx.iter_mut().enumerate() {
                        let sigma = (self.grid.node(i, 0).x - shift * rho.x) / beta;
                        *t = axis_taps(sb.index_of(Point2::new(ml * sigma, 0.0)).0, sb.width);
                    }
                    for (j, t) in ty.iter_mut().enumerate() {
                        let sigma = (self.grid.node(0, j).y - shift * rho.y) / beta;
                        *t = axis_taps(sb.index_of(Point2::new(0.0, ml * sigma)).1, sb.height);
                    }
                    if tx.iter().all(Option::is_none) || ty.iter().all(Option::is_none) {
                        // The row is identically zero; still visit it so row
                        // numbering stays frame-major.
                        for k in 0..ya.len() / per {
                            f(k * per + q, ya[k * per + q], &[], &[]);
                        }
                        continue;
                    }
                    for k in 0..ya.len() / per {
                        let r = k * per + q;
                        emit(r, ya[r], &ib[k * nb..(k + 1) * nb], &tx, &ty, &mut f);
                    }
                }
            }
        }
    }

    /// Dense `(y, Phi)`; intended for small problems and tests.
    pub fn materialize(&self) -> (Vec<f64>, Vec<f64>) {
        let p = self.cols();
        let mut y = alloc::vec![0.0; self.rows()];
        let mut phi = alloc::vec![0.0; self.rows() * p];
        self.for_each_row(|r, yr, idx, vals| {
            y[r] = yr;
            for (&c, &v) in idx.iter().zip(vals) {
                phi[r * p + c as usize] = v;
            }
        });
        (y, phi)
    }

    /// Normal equations over all rows.
    pub fn normal_system(&self) -> NormalSystem {
        let mut sys = NormalSystem::zeros(self.cols());
        self.for_each_row(|_, y, idx, vals| sys.add_row(y, idx, vals));
        sys.symmetrize();
        sys
    }

    /// Seeded, balanced assignment of rows to `k` folds.
    pub fn fold_assignment(&self, k: usize, seed: u64) -> Result<Vec<u32>> {
        let n = self.rows();
        if k < 2 {
            return Err(Error::InvalidParameter {
                name: "folds",
                reason: alloc::format!("need at least 2 folds, got {k}"),
            });
        }
        if k > n {
            return Err(Error::InvalidParameter {
                name: "folds",
                reason: alloc::format!("{k} folds for {n} rows"),
            });
        }
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.shuffle(&mut keyed_rng(seed, Domain::Folds, 0));
        let mut fold = alloc::vec![0u32; n];
        for (pos, &row) in order.iter().enumerate() {
            fold[row as usize] = (pos % k) as u32;
        }
        Ok(fold)
    }

    /// Normal equations of each fold, in one pass over the rows.
    pub fn fold_systems(&self, k: usize, seed: u64) -> Result<Vec<NormalSystem>> {
        let fold = self.fold_assignment(k, seed)?;
        let mut out: Vec<NormalSystem> = (0..k).map(|_| NormalSystem::zeros(self.cols())).collect();
        self.for_each_row(|r, y, idx, vals| out[fold[r] as usize].add_row(y, idx, vals));
        for s in &mut out {
            s.symmetrize();
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: usize, h: usize) -> ObjectGrid {
        ObjectGrid {
            width: w,
            height: h,
            pitch: 1.0,
            center: Point2::default(),
        }
    }

    #[test]
    fn dense_rows_round_trip() {
        let phi = alloc::vec![1.0, 0.0, 2.0, 0.5, 0.0, 3.0];
        let p = CsProblem::from_rows(grid(3, 1), alloc::vec![1.0, 2.0], phi.clone()).unwrap();
        assert_eq!(p.materialize(), (alloc::vec![1.0, 2.0], phi));
        let sys = p.normal_system();
        assert_eq!(sys.gram[0], 1.25);
        assert_eq!(sys.gram[2], 3.5);
        assert_eq!(sys.gram[6], 3.5);
        assert_eq!(sys.rhs, alloc::vec![2.0, 0.0, 8.0]);
        assert_eq!(sys.yy, 5.0);
        assert!((sys.residual_sq(&[1.0, 0.0, 0.0]) - (0.0 + 2.25)).abs() < 1e-12);
    }

    #[test]
    fn folds_are_balanced_and_seeded() {
        let p =
            CsProblem::from_rows(grid(1, 1), alloc::vec![0.0; 10], alloc::vec![1.0; 10]).unwrap();
        let a = p.fold_assignment(3, 7).unwrap();
        assert_eq!(a, p.fold_assignment(3, 7).unwrap());
        let counts: Vec<usize> = (0..3)
            .map(|f| a.iter().filter(|&&x| x == f).count())
            .collect();
        assert_eq!(counts, alloc::vec![4, 3, 3]);
        assert!(p.fold_assignment(11, 7).is_err());
        assert!(p.fold_assignment(1, 7).is_err());
        assert!(p.fold_assignment(10, 7).is_ok());
        let folds = p.fold_systems(3, 7).unwrap();
        assert_eq!(folds.iter().map(|s| s.rows).sum::<usize>(), 10);
    }
}
