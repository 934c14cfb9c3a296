//! Shared fixtures for unit tests.

use crate::cloud::PointCloud;
use crate::geometry::{rotation_about_axis, Point3, RigidTransform};
use nalgebra::Vector3;
use rand::Rng;

pub fn random_transform(rng: &mut impl Rng) -> RigidTransform {
    let axis = random_axis(rng);
    let angle = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    RigidTransform {
        rotation: rotation_about_axis(&axis, angle),
        translation: Vector3::new(
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
        ),
    }
}

pub fn random_axis(rng: &mut impl Rng) -> Vector3<f64> {
    let v = Vector3::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    );
    if v.norm() < 1e-9 {
        Vector3::x()
    } else {
        v
    }
}

pub fn random_point(rng: &mut impl Rng) -> Point3 {
    Point3::new(
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
    )
}

pub fn random_cloud(n: usize, rng: &mut impl Rng) -> PointCloud {
    PointCloud::new((0..n).map(|_| random_point(rng)).collect())
}

/// Points spread over a gently waved plane patch with roughly constant
/// spacing; useful where descriptor neighborhoods must be well-conditioned.
pub fn wavy_patch(nx: usize, ny: usize, spacing: f64) -> PointCloud {
    let mut pts = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let x = i as f64 * spacing;
            let y = j as f64 * spacing;
            let z = 0.35 * spacing * ((x * 0.9).sin() + (y * 1.3).cos());
            pts.push(Point3::new(x, y, z));
        }
    }
    PointCloud::new(pts)
}
