//! Bounding volume hierarchy over facet triangles.

use super::{Facet, Vec3};

#[derive(Debug, Clone, Copy)]
struct Triangle {
    v0: Vec3,
    e1: Vec3,
    e2: Vec3,
    facet: u32,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    min: Vec3,
    max: Vec3,
    /// First triangle for leaves, left child for interior nodes (right child
    /// is `index + 1`).
    index: u32,
    /// Triangle count for leaves, zero for interior nodes.
    count: u32,
}

/// Nearest intersection returned by [`Bvh::intersect`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub facet: usize,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    tris: Vec<Triangle>,
}

const LEAF_SIZE: usize = 4;
const BARY_EPS: f64 = 1e-12;

impl Bvh {
    pub fn build(facets: &[Facet]) -> Bvh {
        let mut tris: Vec<Triangle> = Vec::new();
        for (i, f) in facets.iter().enumerate() {
            for [a, b, c] in f.triangles() {
                tris.push(Triangle {
                    v0: a,
                    e1: b - a,
                    e2: c - a,
                    facet: i as u32,
                });
            }
        }
        let mut bvh = Bvh {
            nodes: Vec::with_capacity(2 * tris.len().max(1)),
            tris,
        };
        bvh.nodes.push(Node {
            min: Vec3::ZERO,
            max: Vec3::ZERO,
            index: 0,
            count: 0,
        });
        let n = bvh.tris.len();
        bvh.subdivide(0, 0, n);
        bvh
    }

    fn bounds(&self, lo: usize, hi: usize) -> (Vec3, Vec3) {
        let mut min = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut max = -min;
        for t in &self.tris[lo..hi] {
            for p in [t.v0, t.v0 + t.e1, t.v0 + t.e2] {
                min = min.min(p);
                max = max.max(p);
            }
        }
        (min, max)
    }

    fn subdivide(&mut self, node: usize, lo: usize, hi: usize) {
        let (min, max) = self.bounds(lo, hi);
        self.nodes[node].min = min;
        self.nodes[node].max = max;
        if hi - lo <= LEAF_SIZE {
            self.nodes[node].index = lo as u32;
            self.nodes[node].count = (hi - lo) as u32;
            return;
        }
        let centroid = |t: &Triangle| t.v0 + (t.e1 + t.e2) / 3.0;
        let mut cmin = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut cmax = -cmin;
        for t in &self.tris[lo..hi] {
            cmin = cmin.min(centroid(t));
            cmax = cmax.max(centroid(t));
        }
        let ext = cmax - cmin;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = (lo + hi) / 2;
        self.tris[lo..hi].select_nth_unstable_by(mid - lo, |a, b| {
            centroid(a)[axis]
                .total_cmp(&centroid(b)[axis])
                .then(a.facet.cmp(&b.facet))
        });
        let left = self.nodes.len();
        let blank = self.nodes[node];
        self.nodes.push(blank);
        self.nodes.push(blank);
        self.nodes[node].index = left as u32;
        self.nodes[node].count = 0;
        self.subdivide(left, lo, mid);
        self.subdivide(left + 1, mid, hi);
    }

    /// Nearest hit along `origin + t * dir` with `t_min < t < t_max`,
    /// ignoring triangles of facet `skip`.
    pub fn intersect(
        &self,
        origin: Vec3,
        dir: Vec3,
        t_min: f64,
        t_max: f64,
        skip: Option<usize>,
    ) -> Option<Hit> {
        if self.tris.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let skip = skip.map(|s| s as u32).unwrap_or(u32::MAX);
        let mut best: Option<Hit> = None;
        let mut t_best = t_max;
        let mut stack = [0u32; 64];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if !slab(node.min, node.max, origin, inv, t_best) {
                continue;
            }
            if node.count > 0 {
                let lo = node.index as usize;
                for tri in &self.tris[lo..lo + node.count as usize] {
                    if tri.facet == skip {
                        continue;
                    }
                    if let Some(t) = moller_trumbore(tri, origin, dir) {
                        if t > t_min && t < t_best {
                            t_best = t;
                            best = Some(Hit {
                                t,
                                facet: tri.facet as usize,
                            });
                        }
                    }
                }
            } else {
                stack[sp] = node.index;
                stack[sp + 1] = node.index + 1;
                sp += 2;
            }
        }
        best
    }

    /// Calls `visit` with the facet index of every triangle whose node box
    /// overlaps the query box. A facet may be reported more than once.
    pub fn query_box(&self, min: Vec3, max: Vec3, mut visit: impl FnMut(usize, [Vec3; 3])) {
        if self.tris.is_empty() {
            return;
        }
        let mut stack = vec![0u32];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i as usize];
            let overlaps = node.min.x <= max.x
                && node.max.x >= min.x
                && node.min.y <= max.y
                && node.max.y >= min.y
                && node.min.z <= max.z
                && node.max.z >= min.z;
            if !overlaps {
                continue;
            }
            if node.count > 0 {
                let lo = node.index as usize;
                for t in &self.tris[lo..lo + node.count as usize] {
                    visit(t.facet as usize, [t.v0, t.v0 + t.e1, t.v0 + t.e2]);
                }
            } else {
                stack.push(node.index);
                stack.push(node.index + 1);
            }
        }
    }

    pub fn bounds_of_scene(&self) -> (Vec3, Vec3) {
        (self.nodes[0].min, self.nodes[0].max)
    }
}

#[inline]
fn slab(min: Vec3, max: Vec3, o: Vec3, inv: Vec3, t_max: f64) -> bool {
    let mut t0 = 0.0f64;
    let mut t1 = t_max;
    for a in 0..3 {
        let ta = (min[a] - o[a]) * inv[a];
        let tb = (max[a] - o[a]) * inv[a];
        let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
        // NaN (0 * inf for rays lying in a slab plane) keeps the box alive.
        if lo > t0 {
            t0 = lo;
        }
        if hi < t1 {
            t1 = hi;
        }
    }
    t0 <= t1 * (1.0 + 4.0 * f64::EPSILON)
}

#[inline]
fn moller_trumbore(tri: &Triangle, o: Vec3, d: Vec3) -> Option<f64> {
    let p = d.cross(tri.e2);
    let det = tri.e1.dot(p);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - tri.v0;
    let u = s.dot(p) * inv;
    if !(-BARY_EPS..=1.0 + BARY_EPS).contains(&u) {
        return None;
    }
    let q = s.cross(tri.e1);
    let v = d.dot(q) * inv;
    if v < -BARY_EPS || u + v > 1.0 + BARY_EPS {
        return None;
    }
    Some(tri.e2.dot(q) * inv)
}

/// True when segment `p -> q` crosses the open interior of triangle `tri`
/// at an interior point of the segment.
pub(crate) fn segment_pierces(p: Vec3, q: Vec3, tri: [Vec3; 3]) -> bool {
    const EPS: f64 = 1e-9;
    let d = q - p;
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let n = e1.cross(e2);
    let denom = n.dot(d);
    if denom.abs() <= 1e-12 * n.norm() * d.norm() {
        return false;
    }
    let t = n.dot(tri[0] - p) / denom;
    if t <= EPS || t >= 1.0 - EPS {
        return false;
    }
    let x = p + d * t;
    let nn = n.dot(n);
    let w = x - tri[0];
    let u = w.cross(e2).dot(n) / nn;
    let v = e1.cross(w).dot(n) / nn;
    u > EPS && v > EPS && u + v < 1.0 - EPS
}
