//! Rigid-motion algebra and the closed-form least-squares transform
//! estimator used by both ICP refinement and RANSAC hypothesis fitting.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// A point of a range scan, in the scan's native units.
pub type Point3 = nalgebra::Point3<f64>;

/// Tolerance on `‖RᵀR − I‖_F` and `|det R − 1|` for a valid rotation.
pub const ROTATION_TOL: f64 = 1e-9;

/// Orthonormality drift above which a composed rotation is re-projected
/// onto SO(3).
const REPROJECT_THRESHOLD: f64 = 1e-7;

/// Singular-value ratio below which the source configuration is treated
/// as rank-deficient.
const DEGENERACY_RATIO: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("rotation matrix is not special orthogonal (orthonormality error {ortho:.3e}, det {det})")]
    InvalidRotation { ortho: f64, det: f64 },
    #[error("degenerate correspondence configuration: {0}")]
    DegenerateConfiguration(&'static str),
}

/// A rigid motion `p ↦ R·p + t` with `R ∈ SO(3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a transform, rejecting rotation matrices outside SO(3).
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let t = Self { rotation, translation };
        if t.is_valid() {
            Ok(t)
        } else {
            Err(GeometryError::InvalidRotation {
                ortho: t.orthonormality_error(),
                det: rotation.determinant(),
            })
        }
    }

    /// `‖RᵀR − I‖_F`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).norm()
    }

    pub fn is_valid(&self) -> bool {
        self.orthonormality_error() <= ROTATION_TOL
            && (self.rotation.determinant() - 1.0).abs() <= ROTATION_TOL
            && self.translation.iter().all(|c| c.is_finite())
    }

    /// `R·p + t`.
    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// Composition `self ∘ first`: applying the result equals applying
    /// `first`, then `self`. Re-projects onto SO(3) when accumulated
    /// floating-point drift exceeds the internal threshold.
    pub fn compose(&self, first: &RigidTransform) -> RigidTransform {
        let mut rotation = self.rotation * first.rotation;
        if frobenius_drift(&rotation) > REPROJECT_THRESHOLD {
            rotation = project_to_so3(&rotation);
        }
        RigidTransform {
            rotation,
            translation: self.rotation * first.translation + self.translation,
        }
    }

    /// Inverse motion `(Rᵀ, −Rᵀt)`.
    pub fn invert(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `‖R_self − R_other‖_F`, the rotation error metric used in evaluation.
    pub fn rotation_distance(&self, other: &RigidTransform) -> f64 {
        (self.rotation - other.rotation).norm()
    }

    /// `‖t_self − t_other‖₂`.
    pub fn translation_distance(&self, other: &RigidTransform) -> f64 {
        (self.translation - other.translation).norm()
    }
}

fn frobenius_drift(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).norm()
}

/// Nearest special-orthogonal matrix in Frobenius norm.
fn project_to_so3(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let u = svd.u.expect("3x3 SVD produces U");
    let v_t = svd.v_t.expect("3x3 SVD produces Vᵀ");
    let sign = (u * v_t).determinant().signum();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign)) * v_t
}

/// One point correspondence `(p_i, q_c(i))` with its Euclidean distance
/// under the transform that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub data_index: usize,
    pub model_index: usize,
    pub distance: f64,
}

/// Closed-form least-squares rigid transform for paired points: returns the
/// `(R, t)` minimizing `Σ‖R·p_i + t − q_i‖²` via centroid removal, SVD of
/// the cross-covariance, and determinant sign correction.
///
/// Fails with [`GeometryError::DegenerateConfiguration`] for fewer than 3
/// pairs or when the centered source points are rank-deficient (all within
/// a line, by singular-value ratio).
pub fn estimate_rigid_transform(pairs: &[(Point3, Point3)]) -> Result<RigidTransform, GeometryError> {
    if pairs.len() < 3 {
        return Err(GeometryError::DegenerateConfiguration("fewer than 3 pairs"));
    }
    let n = pairs.len() as f64;
    let src_centroid: Vector3<f64> = pairs.iter().map(|(p, _)| p.coords).sum::<Vector3<f64>>() / n;
    let dst_centroid: Vector3<f64> = pairs.iter().map(|(_, q)| q.coords).sum::<Vector3<f64>>() / n;

    let mut cross = Matrix3::zeros();
    let mut src_scatter = Matrix3::zeros();
    for (p, q) in pairs {
        let pc = p.coords - src_centroid;
        let qc = q.coords - dst_centroid;
        cross += pc * qc.transpose();
        src_scatter += pc * pc.transpose();
    }

    // Rank test on the centered source: eigenvalues of the scatter are the
    // squared singular values of the centered point matrix.
    let mut eig: Vec<f64> = src_scatter
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if eig[0] <= 0.0 || eig[1] < DEGENERACY_RATIO * eig[0] {
        return Err(GeometryError::DegenerateConfiguration(
            "centered source points are collinear or coincident",
        ));
    }

    let svd = cross.svd(true, true);
    let u = svd.u.expect("3x3 SVD produces U");
    let v_t = svd.v_t.expect("3x3 SVD produces Vᵀ");
    let v = v_t.transpose();
    let sign = (v * u.transpose()).determinant().signum();
    let rotation = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign)) * u.transpose();
    let translation = dst_centroid - rotation * src_centroid;

    Ok(RigidTransform { rotation, translation })
}

/// Rotation of `angle` radians about a unit `axis` (used by fixtures and
/// the synthetic generator).
pub fn rotation_about_axis(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let a = axis.normalize();
    let (s, c) = angle.sin_cos();
    let k = Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0);
    Matrix3::identity() + k * s + k * k * (1.0 - c)
}
