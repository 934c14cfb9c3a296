//! Exact nearest-neighbor and radius queries over a fixed point cloud,
//! plus point-resolution estimation and stride downsampling.
//!
//! The tree is exact by construction: pruning uses strict inequality, so a
//! tie on the far side of a splitting plane is still visited and the
//! smallest-index tie rule holds. Results always agree with a linear scan.

use crate::cloud::{Aabb, PointCloud};
use crate::geometry::Point3;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpatialError {
    #[error("cannot index an empty cloud")]
    EmptyCloud,
    #[error("operation requires at least {required} points, got {got}")]
    TooFewPoints { required: usize, got: usize },
}

const NO_CHILD: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    point: u32,
    axis: u8,
    left: u32,
    right: u32,
}

/// Immutable k-d tree over a fixed point list. Queries return indices into
/// the original cloud ordering.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    nodes: Vec<Node>,
    root: u32,
    points: Vec<Point3>,
    bbox: Aabb,
}

impl SpatialIndex {
    /// Builds an index over exactly the given points.
    pub fn build(cloud: &PointCloud) -> Result<Self, SpatialError> {
        if cloud.is_empty() {
            return Err(SpatialError::EmptyCloud);
        }
        let points = cloud.points.clone();
        let bbox = cloud.bbox().expect("non-empty cloud has bounds");
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = build_recursive(&points, &mut order, &mut nodes);
        Ok(Self { nodes, root, points, bbox })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bbox(&self) -> Aabb {
        self.bbox
    }

    pub fn point(&self, index: usize) -> &Point3 {
        &self.points[index]
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    /// Index and Euclidean distance of the closest indexed point; ties are
    /// broken by the smallest index.
    pub fn nearest(&self, query: &Point3) -> (usize, f64) {
        let mut visited = 0usize;
        self.nearest_counted(query, &mut visited)
    }

    /// `nearest` with a visited-node counter for complexity instrumentation.
    pub fn nearest_counted(&self, query: &Point3, visited: &mut usize) -> (usize, f64) {
        let mut best = Best { dist_sq: f64::INFINITY, index: u32::MAX };
        self.nearest_rec(self.root, query, None, &mut best, visited);
        (best.index as usize, best.dist_sq.sqrt())
    }

    /// Closest indexed point whose index differs from `exclude`.
    /// Returns `None` when the index holds no other point.
    pub fn nearest_excluding(&self, query: &Point3, exclude: usize) -> Option<(usize, f64)> {
        if self.points.len() < 2 {
            return None;
        }
        let mut visited = 0usize;
        let mut best = Best { dist_sq: f64::INFINITY, index: u32::MAX };
        self.nearest_rec(self.root, query, Some(exclude as u32), &mut best, &mut visited);
        Some((best.index as usize, best.dist_sq.sqrt()))
    }

    fn nearest_rec(&self, node: u32, query: &Point3, exclude: Option<u32>, best: &mut Best, visited: &mut usize) {
        if node == NO_CHILD {
            return;
        }
        *visited += 1;
        let n = &self.nodes[node as usize];
        if exclude != Some(n.point) {
            let d = (self.points[n.point as usize] - query).norm_squared();
            if d < best.dist_sq || (d == best.dist_sq && n.point < best.index) {
                *best = Best { dist_sq: d, index: n.point };
            }
        }
        let axis = n.axis as usize;
        let delta = query[axis] - self.points[n.point as usize][axis];
        let (near, far) = if delta < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
        self.nearest_rec(near, query, exclude, best, visited);
        // Strict inequality: an exact tie across the plane may hide a
        // smaller index, so it must be visited.
        if delta * delta <= best.dist_sq {
            self.nearest_rec(far, query, exclude, best, visited);
        }
    }

    /// Exactly the indices with Euclidean distance ≤ `r`, in ascending
    /// index order.
    pub fn radius_search(&self, query: &Point3, r: f64) -> Vec<usize> {
        let mut visited = 0usize;
        self.radius_search_counted(query, r, &mut visited)
    }

    /// `radius_search` with a visited-node counter.
    pub fn radius_search_counted(&self, query: &Point3, r: f64, visited: &mut usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.radius_rec(self.root, query, r * r, &mut out, visited);
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, node: u32, query: &Point3, r_sq: f64, out: &mut Vec<usize>, visited: &mut usize) {
        if node == NO_CHILD {
            return;
        }
        *visited += 1;
        let n = &self.nodes[node as usize];
        let d = (self.points[n.point as usize] - query).norm_squared();
        if d <= r_sq {
            out.push(n.point as usize);
        }
        let axis = n.axis as usize;
        let delta = query[axis] - self.points[n.point as usize][axis];
        let (near, far) = if delta < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
        self.radius_rec(near, query, r_sq, out, visited);
        if delta * delta <= r_sq {
            self.radius_rec(far, query, r_sq, out, visited);
        }
    }
}

struct Best {
    dist_sq: f64,
    index: u32,
}

fn build_recursive(points: &[Point3], order: &mut [u32], nodes: &mut Vec<Node>) -> u32 {
    if order.is_empty() {
        return NO_CHILD;
    }
    // Split along the axis of largest extent for balanced trees on
    // anisotropic scans.
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        let p = &points[i as usize];
        for k in 0..3 {
            min[k] = min[k].min(p[k]);
            max[k] = max[k].max(p[k]);
        }
    }
    let mut axis = 0usize;
    for k in 1..3 {
        if max[k] - min[k] > max[axis] - min[axis] {
            axis = k;
        }
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        let ca = points[a as usize][axis];
        let cb = points[b as usize][axis];
        ca.partial_cmp(&cb).expect("finite coordinates").then(a.cmp(&b))
    });
    let point = order[mid];
    let node_id = nodes.len() as u32;
    nodes.push(Node { point, axis: axis as u8, left: NO_CHILD, right: NO_CHILD });
    let (left_slice, rest) = order.split_at_mut(mid);
    let right_slice = &mut rest[1..];
    let left = build_recursive(points, left_slice, nodes);
    let right = build_recursive(points, right_slice, nodes);
    nodes[node_id as usize].left = left;
    nodes[node_id as usize].right = right;
    node_id
}

/// Point resolution of a cloud: the median over all points of the distance
/// to each point's nearest other point.
pub fn estimate_resolution(cloud: &PointCloud) -> Result<f64, SpatialError> {
    if cloud.len() < 2 {
        return Err(SpatialError::TooFewPoints { required: 2, got: cloud.len() });
    }
    let index = SpatialIndex::build(cloud)?;
    let mut dists = nn_distances(&index, cloud);
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = dists.len();
    Ok(if n % 2 == 1 {
        dists[n / 2]
    } else {
        0.5 * (dists[n / 2 - 1] + dists[n / 2])
    })
}

/// Mean nearest-other-point distance; feeds the default descriptor radii.
pub fn mean_nn_distance(cloud: &PointCloud) -> Result<f64, SpatialError> {
    if cloud.len() < 2 {
        return Err(SpatialError::TooFewPoints { required: 2, got: cloud.len() });
    }
    let index = SpatialIndex::build(cloud)?;
    let dists = nn_distances(&index, cloud);
    Ok(dists.iter().sum::<f64>() / dists.len() as f64)
}

fn nn_distances(index: &SpatialIndex, cloud: &PointCloud) -> Vec<f64> {
    cloud
        .iter()
        .enumerate()
        .map(|(i, p)| index.nearest_excluding(p, i).expect("≥ 2 points").1)
        .collect()
}

/// Keeps every `frequency`-th point of the input ordering, starting at
/// index 0. Output size is `⌈N / frequency⌉`.
pub fn downsample(cloud: &PointCloud, frequency: usize) -> PointCloud {
    assert!(frequency >= 1, "sampling frequency must be ≥ 1");
    PointCloud::new(cloud.points.iter().copied().step_by(frequency).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_cloud;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn linear_nearest(cloud: &PointCloud, q: &Point3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in cloud.iter().enumerate() {
            let d = (p - q).norm_squared();
            if d < best.1 {
                best = (i, d);
            }
        }
        (best.0, best.1.sqrt())
    }

    fn linear_radius(cloud: &PointCloud, q: &Point3, r: f64) -> Vec<usize> {
        cloud
            .iter()
            .enumerate()
            .filter(|(_, p)| (*p - q).norm() <= r)
            .map(|(i, _)| i)
            .collect()
    }

    #[test]
    fn empty_cloud_is_rejected() {
        assert_eq!(
            SpatialIndex::build(&PointCloud::default()).unwrap_err(),
            SpatialError::EmptyCloud
        );
    }

    #[test]
    fn single_point_index() {
        let cloud = PointCloud::new(vec![Point3::new(1.0, 2.0, 3.0)]);
        let index = SpatialIndex::build(&cloud).unwrap();
        let (i, d) = index.nearest(&Point3::new(1.0, 2.0, 7.0));
        assert_eq!(i, 0);
        assert!((d - 4.0).abs() < 1e-15);
        assert!(index.nearest_excluding(&cloud[0], 0).is_none());
    }

    #[test]
    fn duplicates_give_zero_distance() {
        let p = Point3::new(0.5, -0.5, 0.25);
        let cloud = PointCloud::new(vec![p, Point3::new(1.0, 1.0, 1.0), p]);
        let index = SpatialIndex::build(&cloud).unwrap();
        let (i, d) = index.nearest(&p);
        assert_eq!(i, 0); // tie between 0 and 2 resolved to the smaller index
        assert_eq!(d, 0.0);
    }

    #[test]
    fn equidistant_tie_returns_lower_index() {
        let cloud = PointCloud::new(vec![
            Point3::new(-3.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(-1.0, 0.0, 0.0),
        ]);
        let index = SpatialIndex::build(&cloud).unwrap();
        // Query at the origin: indices 1 and 2 are both at distance 1.
        let (i, d) = index.nearest(&Point3::new(0.0, 0.0, 0.0));
        assert_eq!(i, 1);
        assert!((d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nearest_agrees_with_linear_scan() {
        let mut rng = StdRng::seed_from_u64(41);
        let cloud = random_cloud(1000, &mut rng);
        let index = SpatialIndex::build(&cloud).unwrap();
        for _ in 0..500 {
            let q = Point3::new(
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
            );
            let (i, d) = index.nearest(&q);
            let (oi, od) = linear_nearest(&cloud, &q);
            assert_eq!(i, oi);
            assert_eq!(d, od);
        }
    }

    #[test]
    fn radius_search_agrees_with_linear_scan() {
        let mut rng = StdRng::seed_from_u64(43);
        let cloud = random_cloud(400, &mut rng);
        let index = SpatialIndex::build(&cloud).unwrap();
        for _ in 0..200 {
            let q = Point3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let r = rng.gen_range(0.01..1.5);
            assert_eq!(index.radius_search(&q, r), linear_radius(&cloud, &q, r));
        }
    }

    #[test]
    fn radius_search_boundary_cases() {
        let cloud = PointCloud::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 2.0, 0.0),
        ]);
        let index = SpatialIndex::build(&cloud).unwrap();
        // Radius below the minimum spacing, centered on a point.
        assert_eq!(index.radius_search(&cloud[0], 0.5), vec![0]);
        // Radius covering the whole cloud.
        assert_eq!(index.radius_search(&cloud[0], 10.0), vec![0, 1, 2]);
        // Inclusive boundary.
        assert_eq!(index.radius_search(&cloud[0], 1.0), vec![0, 1]);
    }

    #[test]
    fn resolution_of_grid_equals_spacing() {
        let h = 0.25;
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    pts.push(Point3::new(i as f64 * h, j as f64 * h, k as f64 * h));
                }
            }
        }
        let cloud = PointCloud::new(pts);
        assert!((estimate_resolution(&cloud).unwrap() - h).abs() < 1e-12);
    }

    #[test]
    fn resolution_of_two_points_is_their_distance() {
        let cloud = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, 3.0, 4.0)]);
        assert!((estimate_resolution(&cloud).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(
            estimate_resolution(&PointCloud::new(vec![Point3::origin()])),
            Err(SpatialError::TooFewPoints { required: 2, got: 1 })
        );
    }

    #[test]
    fn resolution_matches_brute_force_median() {
        let mut rng = StdRng::seed_from_u64(47);
        let cloud = random_cloud(201, &mut rng);
        let mut dists: Vec<f64> = (0..cloud.len())
            .map(|i| {
                (0..cloud.len())
                    .filter(|&j| j != i)
                    .map(|j| (cloud[i] - cloud[j]).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let oracle = dists[dists.len() / 2];
        assert!((estimate_resolution(&cloud).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn resolution_is_rigid_invariant() {
        let mut rng = StdRng::seed_from_u64(53);
        let cloud = random_cloud(150, &mut rng);
        let t = crate::testutil::random_transform(&mut rng);
        let moved = cloud.transformed(&t);
        let a = estimate_resolution(&cloud).unwrap();
        let b = estimate_resolution(&moved).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn downsample_strides_by_index() {
        let cloud = PointCloud::new((0..1000).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect());
        assert_eq!(downsample(&cloud, 1), cloud);
        let d = downsample(&cloud, 100);
        assert_eq!(d.len(), 10);
        for (k, p) in d.iter().enumerate() {
            assert_eq!(p.x, (k * 100) as f64);
        }
        // ⌈N / f⌉ size on a Bunny-scale count.
        let big = PointCloud::new((0..35947).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect());
        assert_eq!(downsample(&big, 10).len(), 3595);
    }
}
