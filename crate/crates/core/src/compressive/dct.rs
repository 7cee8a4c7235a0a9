//! Orthonormal 2D type-II discrete cosine transform.

use alloc::vec::Vec;

#[allow(unused_imports)] // needed without std
use num_traits::Float;

/// Separable orthonormal DCT-II on a `width x height` row-major grid.
/// `forward` maps an image to coefficients, `inverse` is its transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct Dct2 {
    width: usize,
    height: usize,
    mx: Vec<f64>,
    my: Vec<f64>,
}

/// Orthonormal DCT-II matrix, row `k` holding basis function `k`.
pub fn dct_matrix(n: usize) -> Vec<f64> {
    let mut m = alloc::vec![0.0; n * n];
    let nf = n as f64;
    for k in 0..n {
        let a = if k == 0 {
            (1.0 / nf).sqrt()
        } else {
            (2.0 / nf).sqrt()
        };
        for i in 0..n {
            m[k * n + i] = a * (core::f64::consts::PI * (i as f64 + 0.5) * k as f64 / nf).cos();
        }
    }
    m
}

impl Dct2 {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            mx: dct_matrix(width),
            my: dct_matrix(height),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x, false)
    }

    pub fn inverse(&self, c: &[f64]) -> Vec<f64> {
        self.apply(c, true)
    }

    fn apply(&self, x: &[f64], transpose: bool) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        assert_eq!(x.len(), w * h);
        let at = |m: &[f64], n: usize, r: usize, c: usize| {
            if transpose {
                m[c * n + r]
            } else {
                m[r * n + c]
            }
        };
        let mut tmp = alloc::vec![0.0; w * h];
        for j in 0..h {
            let row = &x[j * w..(j + 1) * w];
            for k in 0..w {
                let mut acc = 0.0;
                for (i, v) in row.iter().enumerate() {
                    acc += at(&self.mx, w, k, i) * v;
                }
                tmp[j * w + k] = acc;
            }
        }
        let mut out = alloc::vec![0.0; w * h];
        for k in 0..h {
            for j in 0..h {
                let m = at(&self.my, h, k, j);
                if m == 0.0 {
                    continue;
                }
                let src = &tmp[j * w..(j + 1) * w];
                let dst = &mut out[k * w..(k + 1) * w];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += m * s;
                }
            }
        }
        out
    }

    /// `D G D^T` for a symmetric `len x len` matrix `g` given in the image
    /// basis.
    pub fn congruence(&self, g: &[f64]) -> Vec<f64> {
        let p = self.len();
        assert_eq!(g.len(), p * p);
        // Rows of G are columns too (symmetry): transform each row to get
        // (D G)^T = G D^T row by row, then transform the rows of that.
        let mut half = alloc::vec![0.0; p * p];
        for r in 0..p {
            let t = self.forward(&g[r * p..(r + 1) * p]);
            half[r * p..(r + 1) * p].copy_from_slice(&t);
        }
        // half = G D^T; its columns need D applied: transpose, transform rows.
        let mut tr = alloc::vec![0.0; p * p];
        for r in 0..p {
            for c in 0..p {
                tr[c * p + r] = half[r * p + c];
            }
        }
        let mut out = alloc::vec![0.0; p * p];
        for r in 0..p {
            let t = self.forward(&tr[r * p..(r + 1) * p]);
            out[r * p..(r + 1) * p].copy_from_slice(&t);
        }
        out
    }
}
