//! Exact 3D nearest-neighbor search.
//!
//! A static kd-tree over point positions. Queries are exact; ties in
//! distance are broken toward the lower point index so results are
//! deterministic and match a brute-force scan.

use crate::scan_io::PointCloud;

#[derive(Debug, Clone, Copy)]
struct Node {
    point: u32,
    axis: u8,
    left: i32,
    right: i32,
}

pub struct KdTree {
    pts: Vec<[f64; 3]>,
    nodes: Vec<Node>,
    root: i32,
}

impl KdTree {
    pub fn build(cloud: &PointCloud) -> KdTree {
        let pts: Vec<[f64; 3]> = cloud.points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let mut idx: Vec<u32> = (0..pts.len() as u32).collect();
        let mut nodes = Vec::with_capacity(pts.len());
        let root = build_rec(&pts, &mut idx, &mut nodes);
        KdTree { pts, nodes, root }
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    /// Indices of the `k` nearest points to `query`, ascending by
    /// `(distance, index)`. Returns fewer than `k` only when the tree is
    /// smaller than `k`.
    pub fn knn(&self, query: [f64; 3], k: usize) -> Vec<usize> {
        if k == 0 || self.pts.is_empty() {
            return Vec::new();
        }
        let mut heap = BoundedHeap::new(k.min(self.pts.len()));
        self.search(self.root, query, &mut heap);
        heap.into_sorted()
    }

    /// Nearest point within `max_dist`, as `(index, distance)`.
    pub fn nearest_within(&self, query: [f64; 3], max_dist: f64) -> Option<(usize, f64)> {
        let mut heap = BoundedHeap::new(1);
        self.search(self.root, query, &mut heap);
        let best = heap.into_sorted().into_iter().next()?;
        let d = dist2(self.pts[best], query).sqrt();
        (d <= max_dist).then_some((best, d))
    }

    fn search(&self, node: i32, query: [f64; 3], heap: &mut BoundedHeap) {
        if node < 0 {
            return;
        }
        let n = self.nodes[node as usize];
        let p = self.pts[n.point as usize];
        heap.offer(dist2(p, query), n.point as usize);
        let axis = n.axis as usize;
        let delta = query[axis] - p[axis];
        let (near, far) = if delta < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.search(near, query, heap);
        if !heap.full() || delta * delta <= heap.worst() {
            self.search(far, query, heap);
        }
    }
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

fn build_rec(pts: &[[f64; 3]], idx: &mut [u32], nodes: &mut Vec<Node>) -> i32 {
    if idx.is_empty() {
        return -1;
    }
    // Split along the widest axis of the current subset.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in idx.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(pts[i as usize][a]);
            hi[a] = hi[a].max(pts[i as usize][a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap();
    let mid = idx.len() / 2;
    idx.select_nth_unstable_by(mid, |&a, &b| {
        pts[a as usize][axis]
            .total_cmp(&pts[b as usize][axis])
            .then(a.cmp(&b))
    });
    let point = idx[mid];
    let slot = nodes.len();
    nodes.push(Node {
        point,
        axis: axis as u8,
        left: -1,
        right: -1,
    });
    let (left_idx, rest) = idx.split_at_mut(mid);
    let right_idx = &mut rest[1..];
    let left = build_rec(pts, left_idx, nodes);
    let right = build_rec(pts, right_idx, nodes);
    nodes[slot].left = left;
    nodes[slot].right = right;
    slot as i32
}

/// Fixed-capacity max-heap over `(distance^2, index)`; keeps the k best.
struct BoundedHeap {
    cap: usize,
    entries: Vec<(f64, usize)>,
}

impl BoundedHeap {
    fn new(cap: usize) -> Self {
        BoundedHeap {
            cap,
            entries: Vec::with_capacity(cap),
        }
    }

    fn full(&self) -> bool {
        self.entries.len() == self.cap
    }

    fn worst(&self) -> f64 {
        self.entries.first().map_or(f64::INFINITY, |e| e.0)
    }

    fn offer(&mut self, d2: f64, idx: usize) {
        if self.full() {
            let top = self.entries[0];
            if (d2, idx) >= (top.0, top.1) {
                return;
            }
            self.pop();
        }
        self.push(d2, idx);
    }

    fn push(&mut self, d2: f64, idx: usize) {
        self.entries.push((d2, idx));
        let mut i = self.entries.len() - 1;
        while i > 0 {
            let parent = (i - 1) / 2;
            if self.entries[parent] < self.entries[i] {
                self.entries.swap(parent, i);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn pop(&mut self) {
        let last = self.entries.len() - 1;
        self.entries.swap(0, last);
        self.entries.pop();
        let mut i = 0;
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut largest = i;
            if l < self.entries.len() && self.entries[l] > self.entries[largest] {
                largest = l;
            }
            if r < self.entries.len() && self.entries[r] > self.entries[largest] {
                largest = r;
            }
            if largest == i {
                break;
            }
            self.entries.swap(i, largest);
            i = largest;
        }
    }

    fn into_sorted(mut self) -> Vec<usize> {
        self.entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        self.entries.into_iter().map(|(_, i)| i).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan_io::Point3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_knn(pts: &[[f64; 3]], q: [f64; 3], k: usize) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = pts
            .iter()
            .enumerate()
            .map(|(i, p)| (dist2(*p, q), i))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|(_, i)| i).collect()
    }

    #[test]
    fn matches_brute_force_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let points: Vec<Point3> = (0..200)
            .map(|_| {
                Point3::new(
                    rng.random_range(-50.0..50.0),
                    rng.random_range(-50.0..50.0),
                    rng.random_range(-5.0..5.0),
                )
            })
            .collect();
        let cloud = PointCloud::new(points);
        let tree = KdTree::build(&cloud);
        let pts: Vec<[f64; 3]> = cloud.points.iter().map(|p| [p.x, p.y, p.z]).collect();
        for (i, q) in pts.iter().enumerate() {
            let got = tree.knn(*q, 30);
            let want = brute_knn(&pts, *q, 30);
            assert_eq!(got, want, "query {i}");
        }
    }

    #[test]
    fn nearest_within_respects_radius() {
        let cloud = PointCloud::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(3.0, 0.0, 0.0),
        ]);
        let tree = KdTree::build(&cloud);
        let (idx, d) = tree.nearest_within([2.9, 0.0, 0.0], 0.5).unwrap();
        assert_eq!(idx, 1);
        assert!((d - 0.1).abs() < 1e-12);
        assert_eq!(tree.nearest_within([1.5, 0.0, 0.0], 1.0), None);
    }
}
