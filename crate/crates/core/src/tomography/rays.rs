use alloc::vec::Vec;

use crate::error::Result;
use crate::geometry::OpticalConfig;

/// A half-line `origin + t * dir`, `t >= 0`, in millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: [f64; 3],
    pub dir: [f64; 3],
}

impl Ray {
    pub fn at(&self, t: f64) -> [f64; 3] {
        [
            self.origin[0] + t * self.dir[0],
            self.origin[1] + t * self.dir[1],
            self.origin[2] + t * self.dir[2],
        ]
    }
}

/// One ray per `(rho_a, rho_b)` pair of a tensor with the given dims, in
/// tensor order (`rho_b`-major). Each ray starts at the focusing-element
/// point `rho_b / M_L` (z = 0) and passes through the conjugate point
/// `rho_a / M` of the focused plane.
pub fn build_rays(
    cfg: &OpticalConfig,
    dims_a: (usize, usize),
    dims_b: (usize, usize),
) -> Result<Vec<Ray>> {
    let cfg = cfg.for_tensor(dims_a, dims_b)?;
    let (sa, sb) = (&cfg.sensor_a, &cfg.sensor_b);
    let conj: Vec<[f64; 2]> = (0..sa.pixels())
        .map(|k| {
            let p = sa.center_of(k).scale(1e-3 / cfg.magnification);
            [p.x, p.y]
        })
        .collect();
    let mut rays = Vec::with_capacity(sa.pixels() * sb.pixels());
    for ib in 0..sb.pixels() {
        let s = cfg.lens_point(sb.center_of(ib)).scale(1e-3);
        for c in &conj {
            rays.push(Ray {
                origin: [s.x, s.y, 0.0],
                dir: [c[0] - s.x, c[1] - s.y, cfg.focused_distance],
            });
        }
    }
    Ok(rays)
}
