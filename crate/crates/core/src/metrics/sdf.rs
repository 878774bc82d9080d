use crate::error::{Error, Result};
use crate::scene::{OrientedBox, Vec3};

/// Signed distance: negative inside.
pub trait Sdf {
    fn distance(&self, p: Vec3) -> f64;
}

/// Exact signed distance of a solid oriented box.
impl Sdf for OrientedBox {
    fn distance(&self, p: Vec3) -> f64 {
        let l = self.to_local(p);
        let h = self.half();
        let q = Vec3::new(l.x.abs() - h.x, l.y.abs() - h.y, l.z.abs() - h.z);
        let outside = Vec3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
        outside + q.x.max(q.y).max(q.z).min(0.0)
    }
}

/// Signed distances sampled on a regular grid, trilinearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelSdf {
    pub min: Vec3,
    pub max: Vec3,
    pub n: usize,
    values: Vec<f64>,
}

pub const DEFAULT_VOXELS: usize = 64;

impl VoxelSdf {
    pub fn from_fn(min: Vec3, max: Vec3, n: usize, f: impl Fn(Vec3) -> f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::arg("voxel grid needs at least 2 samples per axis"));
        }
        if !(max.x > min.x && max.y > min.y && max.z > min.z) {
            return Err(Error::arg("voxel grid bounds are degenerate"));
        }
        let mut values = Vec::with_capacity(n * n * n);
        let step = (max - min).map(|e| e / (n - 1) as f64);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    values.push(f(Vec3::new(
                        min.x + i as f64 * step.x,
                        min.y + j as f64 * step.y,
                        min.z + k as f64 * step.z,
                    )));
                }
            }
        }
        Ok(VoxelSdf { min, max, n, values })
    }

    /// Grid over `b` padded by `pad` on every side.
    pub fn from_box(b: &OrientedBox, n: usize, pad: f64) -> Result<Self> {
        let r = b.half().norm() + pad;
        let c = b.center;
        VoxelSdf::from_fn(c - Vec3::new(r, r, r), c + Vec3::new(r, r, r), n, |p| b.distance(p))
    }

    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(k * self.n + j) * self.n + i]
    }
}

impl Sdf for VoxelSdf {
    /// Outside the grid, the clamped-point value plus the distance to the grid.
    fn distance(&self, p: Vec3) -> f64 {
        let clamp = Vec3::new(p.x.clamp(self.min.x, self.max.x), p.y.clamp(self.min.y, self.max.y), p.z.clamp(self.min.z, self.max.z));
        let extra = clamp.dist(p);
        let m = (self.n - 1) as f64;
        let g = |v: f64, lo: f64, hi: f64| {
            let t = (v - lo) / (hi - lo) * m;
            let i = (t.floor() as usize).min(self.n - 2);
            (i, t - i as f64)
        };
        let (i, fx) = g(clamp.x, self.min.x, self.max.x);
        let (j, fy) = g(clamp.y, self.min.y, self.max.y);
        let (k, fz) = g(clamp.z, self.min.z, self.max.z);
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let c00 = lerp(self.at(i, j, k), self.at(i + 1, j, k), fx);
        let c10 = lerp(self.at(i, j + 1, k), self.at(i + 1, j + 1, k), fx);
        let c01 = lerp(self.at(i, j, k + 1), self.at(i + 1, j, k + 1), fx);
        let c11 = lerp(self.at(i, j + 1, k + 1), self.at(i + 1, j + 1, k + 1), fx);
        lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz) + extra
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> OrientedBox {
        OrientedBox::axis_aligned(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0))
    }

    #[test]
    fn exact_box_values() {
        let b = unit();
        assert_eq!(b.distance(Vec3::ZERO), -0.5);
        assert!((b.distance(Vec3::new(1.5, 0.0, 0.0)) - 1.0).abs() < 1e-12);
        assert!((b.distance(Vec3::new(1.5, 1.5, 0.0)) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(VoxelSdf::from_fn(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0), 1, |_| 0.0).is_err());
        assert!(VoxelSdf::from_fn(Vec3::ZERO, Vec3::new(1.0, 0.0, 1.0), 8, |_| 0.0).is_err());
    }

    proptest! {
        #[test]
        fn voxel_close_to_exact(x in -0.9f64..0.9, y in -0.9f64..0.9, z in -0.9f64..0.9) {
            let b = unit();
            let v = VoxelSdf::from_box(&b, DEFAULT_VOXELS, 0.2).unwrap();
            let p = Vec3::new(x, y, z);
            // Trilinear error is bounded by the cell diagonal.
            let cell = (v.max.x - v.min.x) / (DEFAULT_VOXELS - 1) as f64;
            prop_assert!((v.distance(p) - b.distance(p)).abs() <= cell * 3f64.sqrt());
        }
    }
}
