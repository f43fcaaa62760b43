use crate::mesh::Mesh;
use crate::Vec3;

const LEAF_SIZE: usize = 4;

/// Closest point on triangle `abc` to `p` and its barycentric coordinates.
///
/// Voronoi-region walk; vertex and edge regions return exact coordinates.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }
    let sum = va + vb + vc;
    if !(sum > 0.0) || !sum.is_finite() {
        return closest_on_edges(p, a, b, c);
    }
    let v = vb / sum;
    let w = vc / sum;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

/// Degenerate triangles: best of the three segments.
fn closest_on_edges(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, [f64; 3]) {
    let seg = |x: &Vec3, y: &Vec3| {
        let d = y - x;
        let l2 = d.norm_squared();
        let s = if l2 > 0.0 { ((p - x).dot(&d) / l2).clamp(0.0, 1.0) } else { 0.0 };
        (x + d * s, s)
    };
    let (q0, s0) = seg(a, b);
    let (q1, s1) = seg(b, c);
    let (q2, s2) = seg(c, a);
    let cands = [
        (q0, [1.0 - s0, s0, 0.0]),
        (q1, [0.0, 1.0 - s1, s1]),
        (q2, [s2, 0.0, 1.0 - s2]),
    ];
    let mut best = cands[0];
    for cand in &cands[1..] {
        if (cand.0 - p).norm_squared() < (best.0 - p).norm_squared() {
            best = *cand;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub triangle: usize,
    pub point: Vec3,
    pub barycentric: [f64; 3],
    pub dist2: f64,
}

impl Hit {
    fn better_than(&self, o: &Hit) -> bool {
        self.dist2 < o.dist2 || (self.dist2 == o.dist2 && self.triangle < o.triangle)
    }
}

#[derive(Debug, Clone)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    /// Leaf: range into `order`. Internal: `start` is the right child, left is the next node.
    start: usize,
    count: usize,
}

/// Axis-aligned bounding-volume hierarchy over a mesh's triangles.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
    corners: Vec<[Vec3; 3]>,
}

fn box_dist2(p: &Vec3, lo: &Vec3, hi: &Vec3) -> f64 {
    let mut d = 0.0;
    for k in 0..3 {
        let e = (lo[k] - p[k]).max(0.0).max(p[k] - hi[k]);
        d += e * e;
    }
    d
}

impl Bvh {
    pub fn new(m: &Mesh) -> Self {
        let corners: Vec<[Vec3; 3]> = (0..m.triangle_count()).map(|t| m.triangle_points(t)).collect();
        let centroids: Vec<Vec3> = corners.iter().map(|c| (c[0] + c[1] + c[2]) / 3.0).collect();
        let mut bvh = Self { nodes: Vec::with_capacity(2 * corners.len() / LEAF_SIZE + 1), order: (0..corners.len()).collect(), corners };
        if !bvh.order.is_empty() {
            bvh.build(0, bvh.order.len(), &centroids);
        }
        bvh
    }

    fn bounds(&self, start: usize, end: usize) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &t in &self.order[start..end] {
            for p in &self.corners[t] {
                lo = lo.inf(p);
                hi = hi.sup(p);
            }
        }
        (lo, hi)
    }

    fn build(&mut self, start: usize, end: usize, centroids: &[Vec3]) -> usize {
        let (lo, hi) = self.bounds(start, end);
        let id = self.nodes.len();
        self.nodes.push(Node { lo, hi, start, count: end - start });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let mut clo = Vec3::repeat(f64::INFINITY);
        let mut chi = Vec3::repeat(f64::NEG_INFINITY);
        for &t in &self.order[start..end] {
            clo = clo.inf(&centroids[t]);
            chi = chi.sup(&centroids[t]);
        }
        let axis = (chi - clo).imax();
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
        });
        self.build(start, mid, centroids);
        let right = self.build(mid, end, centroids);
        self.nodes[id].start = right;
        self.nodes[id].count = 0;
        id
    }

    pub fn triangle_count(&self) -> usize {
        self.corners.len()
    }

    /// Closest accepted triangle strictly within `max_dist2`, ties broken by lower id.
    pub fn closest_filtered(&self, p: &Vec3, max_dist2: f64, accept: impl Fn(usize) -> bool) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<Hit> = None;
        let mut bound = max_dist2;
        let mut stack: Vec<(usize, f64)> = Vec::with_capacity(64);
        stack.push((0, box_dist2(p, &self.nodes[0].lo, &self.nodes[0].hi)));
        while let Some((id, d)) = stack.pop() {
            if d > bound {
                continue;
            }
            let node = &self.nodes[id];
            if node.count > 0 {
                for &t in &self.order[node.start..node.start + node.count] {
                    if !accept(t) {
                        continue;
                    }
                    let [a, b, c] = &self.corners[t];
                    let (q, bary) = closest_point_on_triangle(p, a, b, c);
                    let hit = Hit { triangle: t, point: q, barycentric: bary, dist2: (q - p).norm_squared() };
                    if hit.dist2 <= bound && best.as_ref().is_none_or(|h| hit.better_than(h)) {
                        bound = hit.dist2;
                        best = Some(hit);
                    }
                }
            } else {
                let (l, r) = (id + 1, node.start);
                let dl = box_dist2(p, &self.nodes[l].lo, &self.nodes[l].hi);
                let dr = box_dist2(p, &self.nodes[r].lo, &self.nodes[r].hi);
                // Nearer child on top.
                if dl <= dr {
                    stack.push((r, dr));
                    stack.push((l, dl));
                } else {
                    stack.push((l, dl));
                    stack.push((r, dr));
                }
            }
        }
        best
    }

    pub fn closest(&self, p: &Vec3) -> Option<Hit> {
        self.closest_filtered(p, f64::INFINITY, |_| true)
    }
}
