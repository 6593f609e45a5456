//! Minimal static 3D kd-tree for nearest-neighbour queries over the sampled
//! model points. Built once at tracker init, immutable afterwards.

use nalgebra::Vector3;

pub struct KdTree3 {
    // Implicit balanced tree over `order`: node n's children are 2n+1, 2n+2.
    order: Vec<u32>,
    split_axis: Vec<u8>,
    points: Vec<Vector3<f64>>,
}

impl KdTree3 {
    pub fn build(points: &[Vector3<f64>]) -> KdTree3 {
        let mut indices: Vec<u32> = (0..points.len() as u32).collect();
        let mut order = vec![u32::MAX; points.len()];
        let mut split_axis = vec![0u8; points.len()];
        if !points.is_empty() {
            build_node(points, &mut indices, 0, &mut order, &mut split_axis);
        }
        KdTree3 {
            order,
            split_axis,
            points: points.to_vec(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and squared distance of the nearest point to `query`.
    pub fn nearest(&self, query: &Vector3<f64>) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, query, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, query: &Vector3<f64>, best: &mut (usize, f64)) {
        if node >= self.order.len() || self.order[node] == u32::MAX {
            return;
        }
        let index = self.order[node] as usize;
        let point = &self.points[index];
        let d2 = (point - query).norm_squared();
        if d2 < best.1 {
            *best = (index, d2);
        }
        let axis = self.split_axis[node] as usize;
        let diff = query[axis] - point[axis];
        let (near, far) = if diff < 0.0 {
            (2 * node + 1, 2 * node + 2)
        } else {
            (2 * node + 2, 2 * node + 1)
        };
        self.search(near, query, best);
        if diff * diff < best.1 {
            self.search(far, query, best);
        }
    }
}

fn build_node(
    points: &[Vector3<f64>],
    indices: &mut [u32],
    node: usize,
    order: &mut Vec<u32>,
    split_axis: &mut Vec<u8>,
) {
    if indices.is_empty() {
        return;
    }
    // Split along the widest axis of this subset.
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for &i in indices.iter() {
        let p = &points[i as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let extent = hi - lo;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };

    let mid = indices.len() / 2;
    indices.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .partial_cmp(&points[b as usize][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    if node >= order.len() {
        order.resize(node + 1, u32::MAX);
        split_axis.resize(node + 1, 0);
    }
    order[node] = indices[mid];
    split_axis[node] = axis as u8;
    let (left, rest) = indices.split_at_mut(mid);
    build_node(points, left, 2 * node + 1, order, split_axis);
    build_node(points, &mut rest[1..], 2 * node + 2, order, split_axis);
}
