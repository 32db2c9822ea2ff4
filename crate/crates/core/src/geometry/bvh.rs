use super::mesh::{intersect_triangle, make_hit, Hit, PreparedRay, TriangleMesh};
use crate::error::{Error, Result};
use crate::math::Vec3;

const BINS: usize = 16;
const MAX_LEAF: usize = 2;
const MAX_DEPTH: usize = 64;
const TRAVERSAL_COST: f64 = 1.0;
const INTERSECT_COST: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb { min: Vec3::splat(f64::INFINITY), max: Vec3::splat(f64::NEG_INFINITY) };

    #[inline]
    pub fn grow(&mut self, p: Vec3) {
        self.min = self.min.min_elem(p);
        self.max = self.max.max_elem(p);
    }

    #[inline]
    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb { min: self.min.min_elem(o.min), max: self.max.max_elem(o.max) }
    }

    pub fn surface_area(&self) -> f64 {
        let d = self.max - self.min;
        if d.x < 0.0 {
            return 0.0;
        }
        2.0 * (d.x * d.y + d.y * d.z + d.z * d.x)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x && p.y >= self.min.y && p.z >= self.min.z && p.x <= self.max.x && p.y <= self.max.y && p.z <= self.max.z
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.min.x <= o.max.x
            && o.min.x <= self.max.x
            && self.min.y <= o.max.y
            && o.min.y <= self.max.y
            && self.min.z <= o.max.z
            && o.min.z <= self.max.z
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).length()
    }

    /// Slab test; entry distance if the box is hit within `(t_min, t_max)`.
    ///
    /// The NaN produced by `0 * inf` for axis-parallel rays grazing a slab
    /// is dropped, so such slabs never cut the interval.
    #[inline(always)]
    fn hit(&self, ray: &PreparedRay, t_min: f64, t_max: f64) -> Option<f64> {
        let (o, inv) = (ray.origin, ray.inv_dir);
        let pick = |neg: bool, lo: f64, hi: f64| if neg { (hi, lo) } else { (lo, hi) };
        let (nx, fx) = pick(ray.negative[0], self.min.x, self.max.x);
        let (ny, fy) = pick(ray.negative[1], self.min.y, self.max.y);
        let (nz, fz) = pick(ray.negative[2], self.min.z, self.max.z);
        // NaN (0 * inf) in `x` keeps the accumulator.
        let mx = |acc: f64, x: f64| if x > acc { x } else { acc };
        let mn = |acc: f64, x: f64| if x < acc { x } else { acc };
        let t0 = mx(mx(mx(t_min, (nx - o.x) * inv.x), (ny - o.y) * inv.y), (nz - o.z) * inv.z);
        // Robust far-plane scaling (Ize 2013).
        let far = mn(mn(mn(f64::INFINITY, (fx - o.x) * inv.x), (fy - o.y) * inv.y), (fz - o.z) * inv.z) * FAR_SCALE;
        let t1 = mn(t_max, far);
        (t0 <= t1).then_some(t0)
    }
}

const FAR_SCALE: f64 = 1.0 + 2.0 * gamma(3);

const fn gamma(n: i32) -> f64 {
    let e = f64::EPSILON * 0.5 * n as f64;
    e / (1.0 - e)
}

/// Flattened BVH node: interior when `count == 0`, children at
/// `index` and `index + 1`; leaf otherwise over `order[index..index+count]`.
#[derive(Clone, Copy, Debug)]
pub struct BvhNode {
    pub bounds: Aabb,
    pub index: u32,
    pub count: u32,
}

impl BvhNode {
    pub fn is_leaf(&self) -> bool {
        self.count > 0
    }
}

#[derive(Clone, Debug)]
pub struct Bvh {
    pub nodes: Vec<BvhNode>,
    /// Triangle indices in leaf order.
    pub order: Vec<u32>,
    /// Vertices of `order[k]` at position `k`, for cache-friendly leaves.
    verts: Vec<[Vec3; 3]>,
    depth: usize,
}

struct BuildPrim {
    bounds: Aabb,
    centroid: Vec3,
}

impl Bvh {
    /// Binned-SAH build over all triangles of `mesh`.
    pub fn build(mesh: &TriangleMesh) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::Data("cannot build a BVH over an empty mesh".into()));
        }
        let prims: Vec<BuildPrim> = (0..mesh.triangle_count())
            .map(|t| {
                let mut b = Aabb::EMPTY;
                for p in mesh.vertices(t) {
                    b.grow(p);
                }
                BuildPrim { bounds: b, centroid: (b.min + b.max) * 0.5 }
            })
            .collect();
        let mut order: Vec<u32> = (0..prims.len() as u32).collect();
        let mut bvh = Bvh { nodes: Vec::with_capacity(2 * prims.len()), order: Vec::new(), verts: Vec::new(), depth: 0 };
        bvh.nodes.push(BvhNode { bounds: Aabb::EMPTY, index: 0, count: 0 });
        bvh.build_node(0, &prims, &mut order, 0, prims.len(), 1);
        bvh.verts = order.iter().map(|&t| mesh.vertices(t as usize)).collect();
        bvh.order = order;
        Ok(bvh)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    fn build_node(&mut self, node: usize, prims: &[BuildPrim], order: &mut [u32], start: usize, end: usize, depth: usize) {
        self.depth = self.depth.max(depth);
        let mut bounds = Aabb::EMPTY;
        let mut cbounds = Aabb::EMPTY;
        for &i in &order[start..end] {
            bounds = bounds.union(&prims[i as usize].bounds);
            cbounds.grow(prims[i as usize].centroid);
        }
        self.nodes[node].bounds = bounds;
        let count = end - start;
        let make_leaf = |nodes: &mut Vec<BvhNode>| {
            nodes[node].index = start as u32;
            nodes[node].count = count as u32;
        };
        if count <= MAX_LEAF || depth >= MAX_DEPTH {
            make_leaf(&mut self.nodes);
            return;
        }

        let mid = match self.find_split(prims, &order[start..end], &bounds, &cbounds) {
            Some((axis, pos)) => {
                let slice = &mut order[start..end];
                let mut left = 0;
                for k in 0..slice.len() {
                    if prims[slice[k] as usize].centroid[axis] < pos {
                        slice.swap(k, left);
                        left += 1;
                    }
                }
                start + left
            }
            None => {
                if count <= 2 * MAX_LEAF && depth + 8 < MAX_DEPTH {
                    make_leaf(&mut self.nodes);
                    return;
                }
                // Coincident centroids or no profitable split: median on the widest axis.
                let ext = cbounds.max - cbounds.min;
                let axis = if ext.x >= ext.y && ext.x >= ext.z { 0 } else if ext.y >= ext.z { 1 } else { 2 };
                order[start..end].sort_by(|a, b| {
                    prims[*a as usize].centroid[axis].total_cmp(&prims[*b as usize].centroid[axis])
                });
                start + count / 2
            }
        };
        let mid = if mid == start || mid == end { start + count / 2 } else { mid };

        let left = self.nodes.len();
        self.nodes.push(BvhNode { bounds: Aabb::EMPTY, index: 0, count: 0 });
        self.nodes.push(BvhNode { bounds: Aabb::EMPTY, index: 0, count: 0 });
        self.nodes[node].index = left as u32;
        self.nodes[node].count = 0;
        self.build_node(left, prims, order, start, mid, depth + 1);
        self.build_node(left + 1, prims, order, mid, end, depth + 1);
    }

    /// Best binned SAH split as `(axis, centroid threshold)`, if cheaper than a leaf.
    fn find_split(&self, prims: &[BuildPrim], idx: &[u32], bounds: &Aabb, cbounds: &Aabb) -> Option<(usize, f64)> {
        let parent_area = bounds.surface_area();
        let leaf_cost = INTERSECT_COST * idx.len() as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        for axis in 0..3 {
            let lo = cbounds.min[axis];
            let hi = cbounds.max[axis];
            if hi - lo <= 0.0 {
                continue;
            }
            let scale = BINS as f64 / (hi - lo);
            let mut bin_bounds = [Aabb::EMPTY; BINS];
            let mut bin_count = [0usize; BINS];
            for &i in idx {
                let p = &prims[i as usize];
                let b = (((p.centroid[axis] - lo) * scale) as usize).min(BINS - 1);
                bin_count[b] += 1;
                bin_bounds[b] = bin_bounds[b].union(&p.bounds);
            }
            let mut right_area = [0.0; BINS];
            let mut right_count = [0usize; BINS];
            let mut acc = Aabb::EMPTY;
            let mut n = 0;
            for b in (1..BINS).rev() {
                acc = acc.union(&bin_bounds[b]);
                n += bin_count[b];
                right_area[b] = acc.surface_area();
                right_count[b] = n;
            }
            let mut acc = Aabb::EMPTY;
            let mut n = 0;
            for b in 0..BINS - 1 {
                acc = acc.union(&bin_bounds[b]);
                n += bin_count[b];
                let (nl, nr) = (n, right_count[b + 1]);
                if nl == 0 || nr == 0 {
                    continue;
                }
                let cost = TRAVERSAL_COST
                    + INTERSECT_COST * (acc.surface_area() * nl as f64 + right_area[b + 1] * nr as f64) / parent_area.max(1e-300);
                if best.is_none_or(|(c, _, _)| cost < c) {
                    best = Some((cost, axis, lo + (b + 1) as f64 / scale));
                }
            }
        }
        best.filter(|(c, _, _)| *c < leaf_cost || idx.len() > 4 * MAX_LEAF).map(|(_, a, p)| (a, p))
    }

    /// Nearest hit with `t` in `(t_min, t_max)`.
    pub fn trace(&self, mesh: &TriangleMesh, origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> Option<Hit> {
        let ray = PreparedRay::new(origin, dir);
        let mut best: Option<(f64, usize, f64, f64)> = None;
        let mut closest = t_max;
        let mut stack = [0u32; MAX_DEPTH + 2];
        let mut sp = 0;
        if self.nodes[0].bounds.hit(&ray, t_min, closest).is_none() {
            return None;
        }
        stack[sp] = 0;
        sp += 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if node.is_leaf() {
                let s = node.index as usize;
                for (k, [a, b, c]) in self.verts[s..s + node.count as usize].iter().enumerate() {
                    if let Some((t, b1, b2)) = intersect_triangle(&ray, *a, *b, *c, t_min, closest) {
                        closest = t;
                        best = Some((t, s + k, b1, b2));
                    }
                }
                continue;
            }
            let (l, r) = (node.index as usize, node.index as usize + 1);
            let hl = self.nodes[l].bounds.hit(&ray, t_min, closest);
            let hr = self.nodes[r].bounds.hit(&ray, t_min, closest);
            match (hl, hr) {
                (Some(tl), Some(tr)) => {
                    // Push the farther child first so the nearer one is visited next.
                    let (first, second) = if tl <= tr { (l, r) } else { (r, l) };
                    stack[sp] = second as u32;
                    stack[sp + 1] = first as u32;
                    sp += 2;
                }
                (Some(_), None) => {
                    stack[sp] = l as u32;
                    sp += 1;
                }
                (None, Some(_)) => {
                    stack[sp] = r as u32;
                    sp += 1;
                }
                (None, None) => {}
            }
        }
        best.map(|(t, k, b1, b2)| make_hit(mesh, &ray, self.order[k] as usize, t, b1, b2))
    }

    /// Whether anything is hit with `t` in `(t_min, t_max)`; exits early.
    pub fn occluded(&self, _mesh: &TriangleMesh, origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> bool {
        let ray = PreparedRay::new(origin, dir);
        let mut stack = [0u32; MAX_DEPTH + 2];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if node.bounds.hit(&ray, t_min, t_max).is_none() {
                continue;
            }
            if node.is_leaf() {
                let s = node.index as usize;
                for [a, b, c] in &self.verts[s..s + node.count as usize] {
                    if intersect_triangle(&ray, *a, *b, *c, t_min, t_max).is_some() {
                        return true;
                    }
                }
            } else {
                stack[sp] = node.index;
                stack[sp + 1] = node.index + 1;
                sp += 2;
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::vec3;

    #[test]
    fn single_triangle_is_one_leaf() {
        let mut m = TriangleMesh::quad(Vec3::ZERO, Vec3::X, Vec3::Y, 1);
        m.indices.truncate(1);
        m.material_ids.truncate(1);
        let bvh = Bvh::build(&m).unwrap();
        assert_eq!(bvh.nodes.len(), 1);
        assert!(bvh.nodes[0].is_leaf());
    }

    #[test]
    fn empty_mesh_is_an_error() {
        assert!(Bvh::build(&TriangleMesh::default()).is_err());
    }

    #[test]
    fn disjoint_clusters_split_at_root() {
        let mut m = TriangleMesh::sphere(vec3(-10.0, 0.0, 0.0), 1.0, 12, 6);
        m.append(&TriangleMesh::sphere(vec3(10.0, 0.0, 0.0), 1.0, 12, 6));
        let bvh = Bvh::build(&m).unwrap();
        let root = bvh.nodes[0];
        assert!(!root.is_leaf());
        let (a, b) = (bvh.nodes[root.index as usize].bounds, bvh.nodes[root.index as usize + 1].bounds);
        assert!(!a.overlaps(&b));
    }

    #[test]
    fn leaves_contain_their_triangles() {
        let m = TriangleMesh::sphere(Vec3::ZERO, 1.0, 40, 20);
        let bvh = Bvh::build(&m).unwrap();
        assert!(bvh.depth() <= 64);
        let mut seen = vec![false; m.triangle_count()];
        for n in bvh.nodes.iter().filter(|n| n.is_leaf()) {
            for &t in &bvh.order[n.index as usize..(n.index + n.count) as usize] {
                seen[t as usize] = true;
                for p in m.vertices(t as usize) {
                    assert!(n.bounds.contains(p));
                }
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn sphere_center_rays_hit_at_radius() {
        let m = TriangleMesh::sphere(Vec3::ZERO, 1.0, 256, 128);
        let bvh = Bvh::build(&m).unwrap();
        let mut rng = crate::sampling::Rng::new(4);
        for _ in 0..1000 {
            let d = crate::sampling::uniform_sphere_from(rng.next_2d());
            let hit = bvh.trace(&m, Vec3::ZERO, d, 1e-4, f64::INFINITY).expect("closed sphere");
            assert!((hit.t - 1.0).abs() < 1e-3, "{}", hit.t);
            assert!((hit.position - d * hit.t).length() < 1e-9);
        }
    }

    #[test]
    fn rays_away_from_geometry_miss() {
        let m = TriangleMesh::sphere(Vec3::ZERO, 1.0, 16, 8);
        let bvh = Bvh::build(&m).unwrap();
        assert!(bvh.trace(&m, vec3(0.0, 0.0, 5.0), Vec3::Z, 1e-4, f64::INFINITY).is_none());
        assert!(!bvh.occluded(&m, vec3(0.0, 0.0, 5.0), Vec3::Z, 1e-4, f64::INFINITY));
    }

    #[test]
    fn negative_zero_direction_hits_flat_quad() {
        let m = TriangleMesh::quad(vec3(-1.0, -1.0, 0.0), vec3(2.0, 0.0, 0.0), vec3(0.0, 2.0, 0.0), 1);
        let bvh = Bvh::build(&m).unwrap();
        let h = bvh.trace(&m, vec3(0.1, 0.2, 1.0), vec3(-0.0, -0.0, -1.0), 1e-4, f64::INFINITY).unwrap();
        assert!((h.t - 1.0).abs() < 1e-12);
        assert!(bvh.occluded(&m, vec3(0.1, 0.2, 1.0), vec3(-0.0, -0.0, -1.0), 1e-4, f64::INFINITY));
    }

    #[test]
    fn inside_box_is_always_occluded() {
        let m = TriangleMesh::cuboid(Vec3::splat(-1.0), Vec3::ONE);
        let bvh = Bvh::build(&m).unwrap();
        let mut rng = crate::sampling::Rng::new(8);
        for _ in 0..1000 {
            let d = crate::sampling::uniform_sphere_from(rng.next_2d());
            assert!(bvh.occluded(&m, vec3(0.1, -0.2, 0.3), d, 1e-4, f64::INFINITY));
        }
    }
}
