//! Multi-scale covariance descriptors.
//!
//! Each point gets a rotation-invariant vector `D` built from the
//! trace-normalized eigenvalues of its neighborhood covariance at `L`
//! support radii, plus a unit normal `N` taken from the most stable
//! (largest usable) scale. Points whose every scale is too sparse carry a
//! null descriptor and are excluded from seed matching.

use crate::cloud::PointCloud;
use crate::geometry::Point3;
use crate::spatial::SpatialIndex;
use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use thiserror::Error;

/// Minimum neighborhood size for a usable covariance.
pub const MIN_NEIGHBORS: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum DescriptorError {
    #[error("support radii are invalid: {0}")]
    InvalidScales(&'static str),
    #[error("neighborhood holds {got} points, need at least {}", MIN_NEIGHBORS)]
    SparseNeighborhood { got: usize },
    #[error("every support radius yields a sparse neighborhood")]
    DegeneratePoint,
    #[error("descriptor is null")]
    NullDescriptor,
    #[error("descriptor vectors differ in length ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
}

/// Strictly increasing support radii, at least two scales.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSet {
    radii: Vec<f64>,
}

impl ScaleSet {
    pub fn new(radii: Vec<f64>) -> Result<Self, DescriptorError> {
        if radii.len() < 2 {
            return Err(DescriptorError::InvalidScales("need at least 2 scales"));
        }
        if radii.iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return Err(DescriptorError::InvalidScales("radii must be positive and finite"));
        }
        if radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DescriptorError::InvalidScales("radii must be strictly increasing"));
        }
        Ok(Self { radii })
    }

    /// Radii as `multipliers × resolution` — the unit-free default.
    pub fn from_resolution(resolution: f64, multipliers: &[f64]) -> Result<Self, DescriptorError> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(DescriptorError::InvalidScales("resolution must be positive"));
        }
        Self::new(multipliers.iter().map(|m| m * resolution).collect())
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn count(&self) -> usize {
        self.radii.len()
    }

    pub fn largest(&self) -> f64 {
        *self.radii.last().expect("at least two radii")
    }
}

/// Per-point descriptor: unit normal plus `3L` trace-normalized
/// eigenvalues, descending within each scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiScaleDescriptor {
    pub normal: Vector3<f64>,
    pub eigen: Vec<f64>,
    /// Scales with fewer than [`MIN_NEIGHBORS`] points; their eigen block
    /// is the uninformative uniform vector.
    pub sparse_scales: Vec<bool>,
}

impl MultiScaleDescriptor {
    pub fn scale_count(&self) -> usize {
        self.sparse_scales.len()
    }
}

/// Neighborhood covariance `C = (1/k) Σ (p_j − μ)(p_j − μ)ᵀ` over the
/// points within `r` of `point_idx` (the point itself included).
pub fn covariance_at_scale(
    index: &SpatialIndex,
    cloud: &PointCloud,
    point_idx: usize,
    r: f64,
) -> Result<Matrix3<f64>, DescriptorError> {
    let neighbors = index.radius_search(&cloud[point_idx], r);
    covariance_of(cloud, &neighbors)
}

fn covariance_of(cloud: &PointCloud, neighbors: &[usize]) -> Result<Matrix3<f64>, DescriptorError> {
    let k = neighbors.len();
    if k < MIN_NEIGHBORS {
        return Err(DescriptorError::SparseNeighborhood { got: k });
    }
    let mean: Vector3<f64> =
        neighbors.iter().map(|&j| cloud[j].coords).sum::<Vector3<f64>>() / k as f64;
    let mut c = Matrix3::zeros();
    for &j in neighbors {
        let d = cloud[j].coords - mean;
        c += d * d.transpose();
    }
    Ok(c / k as f64)
}

/// Descriptor of one point. The normal sign is oriented away from the
/// cloud centroid; callers compare normals up to sign regardless.
pub fn compute_descriptor(
    index: &SpatialIndex,
    cloud: &PointCloud,
    point_idx: usize,
    scales: &ScaleSet,
) -> Result<MultiScaleDescriptor, DescriptorError> {
    let centroid = cloud.centroid().ok_or(DescriptorError::DegeneratePoint)?;
    compute_descriptor_at(index, cloud, point_idx, scales, &centroid)
}

fn compute_descriptor_at(
    index: &SpatialIndex,
    cloud: &PointCloud,
    point_idx: usize,
    scales: &ScaleSet,
    cloud_centroid: &Point3,
) -> Result<MultiScaleDescriptor, DescriptorError> {
    let l = scales.count();
    let mut eigen = Vec::with_capacity(3 * l);
    let mut sparse_scales = vec![false; l];
    let mut normal_source: Option<(usize, Matrix3<f64>)> = None;

    for (s, &r) in scales.radii().iter().enumerate() {
        match covariance_at_scale(index, cloud, point_idx, r) {
            Ok(c) => {
                let mut vals: Vec<f64> = c.symmetric_eigen().eigenvalues.iter().map(|v| v.max(0.0)).collect();
                vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
                let trace: f64 = vals.iter().sum();
                if trace <= f64::MIN_POSITIVE {
                    // All neighbors coincide; carries no shape information.
                    sparse_scales[s] = true;
                    eigen.extend_from_slice(&[1.0 / 3.0; 3]);
                } else {
                    eigen.extend(vals.iter().map(|v| v / trace));
                    normal_source = Some((s, c));
                }
            }
            Err(DescriptorError::SparseNeighborhood { .. }) => {
                sparse_scales[s] = true;
                eigen.extend_from_slice(&[1.0 / 3.0; 3]);
            }
            Err(e) => return Err(e),
        }
    }

    // Normal from the largest informative scale.
    let (_, c) = normal_source.ok_or(DescriptorError::DegeneratePoint)?;
    let se = c.symmetric_eigen();
    let smallest = se.eigenvalues.imin();
    let mut normal = se.eigenvectors.column(smallest).normalize();
    let outward = cloud[point_idx] - cloud_centroid;
    let d = normal.dot(&outward);
    if d < 0.0 || (d == 0.0 && normal[normal.iamax()] < 0.0) {
        normal = -normal;
    }

    Ok(MultiScaleDescriptor { normal, eigen, sparse_scales })
}

/// One descriptor per point, order-aligned with the cloud; per-point
/// failures become `None`.
pub fn compute_all(cloud: &PointCloud, scales: &ScaleSet) -> Vec<Option<MultiScaleDescriptor>> {
    match SpatialIndex::build(cloud) {
        Ok(index) => compute_all_indexed(&index, cloud, scales),
        Err(_) => Vec::new(),
    }
}

/// [`compute_all`] against a prebuilt index over the same cloud.
pub fn compute_all_indexed(
    index: &SpatialIndex,
    cloud: &PointCloud,
    scales: &ScaleSet,
) -> Vec<Option<MultiScaleDescriptor>> {
    let centroid = match cloud.centroid() {
        Some(c) => c,
        None => return Vec::new(),
    };
    (0..cloud.len())
        .into_par_iter()
        .map(|i| compute_descriptor_at(index, cloud, i, scales, &centroid).ok())
        .collect()
}

/// Euclidean distance between two eigenvalue vectors.
pub fn descriptor_distance(
    a: Option<&MultiScaleDescriptor>,
    b: Option<&MultiScaleDescriptor>,
) -> Result<f64, DescriptorError> {
    let (a, b) = match (a, b) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(DescriptorError::NullDescriptor),
    };
    if a.eigen.len() != b.eigen.len() {
        return Err(DescriptorError::LengthMismatch { a: a.eigen.len(), b: b.eigen.len() });
    }
    Ok(eigen_distance(&a.eigen, &b.eigen))
}

pub(crate) fn eigen_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
