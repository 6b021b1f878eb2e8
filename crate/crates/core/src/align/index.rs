//! Exact k-nearest-neighbor queries over the valid pixels of a prior.
//!
//! A static 2-D k-d tree stored implicitly in a permuted point array: the
//! node for the range `[lo, hi)` is the element at `(lo + hi) / 2`, and its
//! split axis lives in a parallel array. Pixel coordinates are integers, so
//! squared distances are exact and ties are resolved without tolerance by
//! falling back to the row-major linear index.

use crate::depth::DepthMap;
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Point {
    x: i64,
    y: i64,
    /// Row-major linear index `y * width + x`; doubles as the tie-break key.
    index: usize,
}

impl Point {
    #[inline]
    fn coord(&self, axis: u8) -> i64 {
        if axis == 0 {
            self.x
        } else {
            self.y
        }
    }
}

/// One query result: the neighbor's pixel and its Euclidean distance in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub x: usize,
    pub y: usize,
    /// Row-major linear index of the neighbor.
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist_sq: i64,
    point: Point,
}

impl Candidate {
    #[inline]
    fn key(&self) -> (i64, usize) {
        (self.dist_sq, self.point.index)
    }
}

/// Immutable exact nearest-neighbor index over a prior's valid coordinates.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point>,
    axes: Vec<u8>,
}

/// Builds the index over every valid pixel of `prior`.
pub fn build_index(prior: &DepthMap) -> Result<SpatialIndex> {
    let width = prior.width();
    let points: Vec<Point> = prior
        .mask()
        .indices()
        .map(|i| Point {
            x: (i % width) as i64,
            y: (i / width) as i64,
            index: i,
        })
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyPrior);
    }
    Ok(SpatialIndex::from_points(points))
}

impl SpatialIndex {
    fn from_points(mut points: Vec<Point>) -> Self {
        let mut axes = vec![0u8; points.len()];
        build(&mut points, &mut axes);
        Self { points, axes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `min(k, N)` nearest valid pixels to `query`, ascending by distance
    /// with ties broken by row-major order.
    pub fn knn(&self, query: (usize, usize), k: usize) -> Vec<Neighbor> {
        let mut out = Vec::with_capacity(k.min(self.len()));
        let mut scratch = Vec::with_capacity(k.min(self.len()) + 1);
        self.knn_into(query, k, &mut scratch, &mut out);
        out
    }

    /// Allocation-free variant of [`knn`](Self::knn) for hot loops.
    pub fn knn_with<'b>(&self, query: (usize, usize), k: usize, buf: &'b mut KnnBuffer) -> &'b [Neighbor] {
        let KnnBuffer { scratch, out } = buf;
        self.knn_into(query, k, scratch, out);
        out
    }

    fn knn_into(&self, query: (usize, usize), k: usize, scratch: &mut Vec<Candidate>, out: &mut Vec<Neighbor>) {
        scratch.clear();
        out.clear();
        let k = k.min(self.points.len());
        if k == 0 {
            return;
        }
        let q = (query.0 as i64, query.1 as i64);
        self.search(0, self.points.len(), q, k, scratch);
        out.extend(scratch.iter().map(|c| Neighbor {
            x: c.point.x as usize,
            y: c.point.y as usize,
            index: c.point.index,
            distance: (c.dist_sq as f64).sqrt(),
        }));
    }

    fn search(&self, lo: usize, hi: usize, q: (i64, i64), k: usize, best: &mut Vec<Candidate>) {
        if hi - lo <= LEAF_SIZE {
            for p in &self.points[lo..hi] {
                offer(best, k, q, *p);
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = self.points[mid];
        let axis = self.axes[mid];
        offer(best, k, q, p);
        let qc = if axis == 0 { q.0 } else { q.1 };
        let diff = qc - p.coord(axis);
        let (near, far) = if diff < 0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, q, k, best);
        // Equal distance must still be explored: a farther-indexed subtree can
        // hold a point tied on distance but earlier in row-major order.
        if best.len() < k || diff * diff <= best[best.len() - 1].dist_sq {
            self.search(far.0, far.1, q, k, best);
        }
    }
}

/// Reusable buffers for [`SpatialIndex::knn_with`].
#[derive(Debug, Default)]
pub struct KnnBuffer {
    scratch: Vec<Candidate>,
    out: Vec<Neighbor>,
}

#[inline]
fn offer(best: &mut Vec<Candidate>, k: usize, q: (i64, i64), p: Point) {
    let dx = p.x - q.0;
    let dy = p.y - q.1;
    let cand = Candidate {
        dist_sq: dx * dx + dy * dy,
        point: p,
    };
    if best.len() == k && cand.key() >= best[k - 1].key() {
        return;
    }
    let pos = best.partition_point(|c| c.key() < cand.key());
    if best.len() == k {
        best.pop();
    }
    best.insert(pos, cand);
}

fn build(points: &mut [Point], axes: &mut [u8]) {
    if points.len() <= LEAF_SIZE {
        return;
    }
    let axis = widest_axis(points);
    let mid = points.len() / 2;
    points.select_nth_unstable_by_key(mid, |p| (p.coord(axis), p.index));
    axes[mid] = axis;
    let (left, rest) = points.split_at_mut(mid);
    let (left_axes, rest_axes) = axes.split_at_mut(mid);
    build(left, left_axes);
    build(&mut rest[1..], &mut rest_axes[1..]);
}

fn widest_axis(points: &[Point]) -> u8 {
    let (mut x0, mut x1, mut y0, mut y1) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
    for p in points {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    if x1 - x0 >= y1 - y0 {
        0
    } else {
        1
    }
}
