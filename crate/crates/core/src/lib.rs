pub mod cloud;
pub mod descriptors;
pub mod geometry;
pub mod spatial;

#[cfg(test)]
pub(crate) mod testutil;

pub use cloud::PointCloud;
pub use geometry::{Correspondence, Point3, RigidTransform};
