use crate::error::{Error, Result};
use crate::math::{vec3, Frame, Vec3, PI};

/// Indexed triangle mesh with per-vertex normals and UVs.
#[derive(Clone, Debug, Default)]
pub struct TriangleMesh {
    pub positions: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub uvs: Vec<[f64; 2]>,
    pub indices: Vec<[u32; 3]>,
    pub material_ids: Vec<u32>,
}

/// Minimum triangle area accepted by [`TriangleMesh::validate`].
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

impl TriangleMesh {
    pub fn triangle_count(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    #[inline]
    pub fn vertices(&self, tri: usize) -> [Vec3; 3] {
        let [a, b, c] = self.indices[tri];
        [self.positions[a as usize], self.positions[b as usize], self.positions[c as usize]]
    }

    pub fn area(&self, tri: usize) -> f64 {
        let [a, b, c] = self.vertices(tri);
        0.5 * (b - a).cross(c - a).length()
    }

    pub fn validate(&self) -> Result<()> {
        let nv = self.positions.len();
        if self.normals.len() != nv || self.uvs.len() != nv {
            return Err(Error::Data("mesh attribute arrays differ in length".into()));
        }
        if self.material_ids.len() != self.indices.len() {
            return Err(Error::Data("mesh needs one material id per triangle".into()));
        }
        for (t, tri) in self.indices.iter().enumerate() {
            if tri.iter().any(|&i| i as usize >= nv) {
                return Err(Error::Data(format!("triangle {t} references a missing vertex")));
            }
            if self.area(t) <= MIN_TRIANGLE_AREA {
                return Err(Error::Data(format!("triangle {t} is degenerate")));
            }
        }
        for (i, n) in self.normals.iter().enumerate() {
            if (n.length() - 1.0).abs() > 1e-6 {
                return Err(Error::Data(format!("normal {i} is not unit length")));
            }
        }
        if self.positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::Data("mesh has non-finite positions".into()));
        }
        Ok(())
    }

    /// Drops zero-area triangles (e.g. at sphere poles).
    pub fn remove_degenerate(&mut self) {
        let keep: Vec<bool> = (0..self.indices.len()).map(|t| self.area(t) > MIN_TRIANGLE_AREA).collect();
        let mut k = keep.iter();
        self.indices.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        self.material_ids.retain(|_| *k.next().unwrap());
    }

    /// Area-weighted vertex normals from the triangle winding.
    pub fn compute_normals(&mut self) {
        let mut acc = vec![Vec3::ZERO; self.positions.len()];
        for tri in &self.indices {
            let [a, b, c] = tri.map(|i| self.positions[i as usize]);
            // Unnormalized cross product is twice the area times the normal.
            let n = (b - a).cross(c - a);
            for &i in tri {
                acc[i as usize] += n;
            }
        }
        self.normals = acc
            .into_iter()
            .map(|n| if n.length() > 0.0 { n.normalize() } else { Vec3::Z })
            .collect();
    }

    pub fn append(&mut self, other: &TriangleMesh) {
        let base = self.positions.len() as u32;
        self.positions.extend_from_slice(&other.positions);
        self.normals.extend_from_slice(&other.normals);
        self.uvs.extend_from_slice(&other.uvs);
        self.indices.extend(other.indices.iter().map(|t| t.map(|i| i + base)));
        self.material_ids.extend_from_slice(&other.material_ids);
    }

    pub fn set_material(&mut self, id: u32) {
        self.material_ids.iter_mut().for_each(|m| *m = id);
    }

    pub fn transform(&mut self, scale: f64, translate: Vec3) {
        for p in &mut self.positions {
            *p = *p * scale + translate;
        }
        if scale < 0.0 {
            for n in &mut self.normals {
                *n = -*n;
            }
        }
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::splat(f64::INFINITY);
        let mut hi = Vec3::splat(f64::NEG_INFINITY);
        for p in &self.positions {
            lo = lo.min_elem(*p);
            hi = hi.max_elem(*p);
        }
        (lo, hi)
    }

    /// Tangent `dp/du` of a triangle, or `None` for degenerate UVs.
    pub fn dpdu(&self, tri: usize) -> Option<Vec3> {
        let [a, b, c] = self.indices[tri].map(|i| i as usize);
        let (p0, p1, p2) = (self.positions[a], self.positions[b], self.positions[c]);
        let (t0, t1, t2) = (self.uvs[a], self.uvs[b], self.uvs[c]);
        let (du1, dv1) = (t1[0] - t0[0], t1[1] - t0[1]);
        let (du2, dv2) = (t2[0] - t0[0], t2[1] - t0[1]);
        let det = du1 * dv2 - du2 * dv1;
        if det.abs() < 1e-14 {
            return None;
        }
        let t = ((p1 - p0) * dv2 - (p2 - p0) * dv1) * (1.0 / det);
        (t.length() > 0.0).then_some(t)
    }

    /// UV sphere; `u` follows azimuth, `v` the polar angle from `+z`.
    pub fn sphere(center: Vec3, radius: f64, segments: usize, rings: usize) -> Self {
        let mut m = TriangleMesh::default();
        for j in 0..=rings {
            let v = j as f64 / rings as f64;
            let theta = v * PI;
            for i in 0..=segments {
                let u = i as f64 / segments as f64;
                let phi = u * 2.0 * PI;
                let n = vec3(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
                m.positions.push(center + n * radius);
                m.normals.push(n);
                m.uvs.push([u, v]);
            }
        }
        let row = segments as u32 + 1;
        for j in 0..rings as u32 {
            for i in 0..segments as u32 {
                let a = j * row + i;
                let b = a + 1;
                let c = a + row;
                let d = c + 1;
                // Outward-facing winding.
                m.indices.push([a, c, b]);
                m.indices.push([b, c, d]);
            }
        }
        m.material_ids = vec![0; m.indices.len()];
        m.remove_degenerate();
        m
    }

    /// Parallelogram `origin + s*edge_u + t*edge_v`, `(s,t)` in `[0,1]^2`,
    /// tessellated into `n x n` cells; normal along `edge_u x edge_v`.
    pub fn quad(origin: Vec3, edge_u: Vec3, edge_v: Vec3, n: usize) -> Self {
        let n = n.max(1);
        let normal = edge_u.cross(edge_v).normalize();
        let mut m = TriangleMesh::default();
        for j in 0..=n {
            for i in 0..=n {
                let (s, t) = (i as f64 / n as f64, j as f64 / n as f64);
                m.positions.push(origin + edge_u * s + edge_v * t);
                m.normals.push(normal);
                m.uvs.push([s, t]);
            }
        }
        let row = n as u32 + 1;
        for j in 0..n as u32 {
            for i in 0..n as u32 {
                let a = j * row + i;
                m.indices.push([a, a + 1, a + row + 1]);
                m.indices.push([a, a + row + 1, a + row]);
            }
        }
        m.material_ids = vec![0; m.indices.len()];
        m
    }

    /// Closed axis-aligned box with outward normals.
    pub fn cuboid(lo: Vec3, hi: Vec3) -> Self {
        let d = hi - lo;
        let faces = [
            (lo, vec3(0.0, d.y, 0.0), vec3(d.x, 0.0, 0.0)),                     // -z
            (vec3(lo.x, lo.y, hi.z), vec3(d.x, 0.0, 0.0), vec3(0.0, d.y, 0.0)), // +z
            (lo, vec3(d.x, 0.0, 0.0), vec3(0.0, 0.0, d.z)),                     // -y
            (vec3(lo.x, hi.y, lo.z), vec3(0.0, 0.0, d.z), vec3(d.x, 0.0, 0.0)), // +y
            (lo, vec3(0.0, 0.0, d.z), vec3(0.0, d.y, 0.0)),                     // -x
            (vec3(hi.x, lo.y, lo.z), vec3(0.0, d.y, 0.0), vec3(0.0, 0.0, d.z)), // +x
        ];
        let mut m = TriangleMesh::default();
        for (o, a, b) in faces {
            m.append(&TriangleMesh::quad(o, a, b, 1));
        }
        m
    }
}

/// Nearest ray-surface intersection.
#[derive(Clone, Copy, Debug)]
pub struct Hit {
    pub t: f64,
    pub position: Vec3,
    /// Unit geometric normal following the triangle winding.
    pub geometric_normal: Vec3,
    /// Interpolated unit shading normal.
    pub shading_normal: Vec3,
    pub uv: [f64; 2],
    pub material_id: u32,
    pub triangle: u32,
    /// Weights of vertices 1 and 2; vertex 0 gets `1 - b1 - b2`.
    pub barycentrics: [f64; 2],
}

impl Hit {
    /// Shading frame with the tangent aligned to `dp/du` when available.
    pub fn tangent_frame(&self, mesh: &TriangleMesh, shading_normal: Vec3) -> Frame {
        let n = shading_normal;
        if let Some(dpdu) = mesh.dpdu(self.triangle as usize) {
            let s = dpdu - n * n.dot(dpdu);
            if s.length() > 1e-9 {
                let s = s.normalize();
                return Frame { s, t: n.cross(s), n };
            }
        }
        Frame::from_normal(n)
    }
}

/// Watertight ray/triangle test (Woop, Benthin, Wald 2013) in double precision.
///
/// Returns `(t, b1, b2)` for `t` in `(t_min, t_max)`.
#[inline]
pub fn intersect_triangle(
    ray: &PreparedRay,
    p0: Vec3,
    p1: Vec3,
    p2: Vec3,
    t_min: f64,
    t_max: f64,
) -> Option<(f64, f64, f64)> {
    let k = ray.axes;
    let a = p0 - ray.origin;
    let b = p1 - ray.origin;
    let c = p2 - ray.origin;
    let (az, bz, cz) = (a[k[2]], b[k[2]], c[k[2]]);
    let ax = a[k[0]] - ray.shear[0] * az;
    let ay = a[k[1]] - ray.shear[1] * az;
    let bx = b[k[0]] - ray.shear[0] * bz;
    let by = b[k[1]] - ray.shear[1] * bz;
    let cx = c[k[0]] - ray.shear[0] * cz;
    let cy = c[k[1]] - ray.shear[1] * cz;

    let u = cx * by - cy * bx;
    let v = ax * cy - ay * cx;
    let w = bx * ay - by * ax;
    if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
        return None;
    }
    let det = u + v + w;
    if det == 0.0 {
        return None;
    }
    let t_scaled = ray.shear[2] * (u * az + v * bz + w * cz);
    let t = t_scaled / det;
    if !(t > t_min && t < t_max) {
        return None;
    }
    let inv = 1.0 / det;
    Some((t, v * inv, w * inv))
}

/// Ray with the per-ray constants of the watertight test precomputed.
#[derive(Clone, Copy, Debug)]
pub struct PreparedRay {
    pub origin: Vec3,
    pub dir: Vec3,
    pub inv_dir: Vec3,
    pub negative: [bool; 3],
    axes: [usize; 3],
    shear: [f64; 3],
}

impl PreparedRay {
    pub fn new(origin: Vec3, dir: Vec3) -> Self {
        let abs = [dir.x.abs(), dir.y.abs(), dir.z.abs()];
        let kz = if abs[0] > abs[1] {
            if abs[0] > abs[2] { 0 } else { 2 }
        } else if abs[1] > abs[2] {
            1
        } else {
            2
        };
        let mut kx = (kz + 1) % 3;
        let mut ky = (kx + 1) % 3;
        if dir[kz] < 0.0 {
            std::mem::swap(&mut kx, &mut ky);
        }
        let dz = dir[kz];
        let inv_dir = vec3(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        Self {
            origin,
            dir,
            inv_dir,
            // From the reciprocal so that -0.0 counts as negative.
            negative: [inv_dir.x < 0.0, inv_dir.y < 0.0, inv_dir.z < 0.0],
            axes: [kx, ky, kz],
            shear: [dir[kx] / dz, dir[ky] / dz, 1.0 / dz],
        }
    }
}

/// Fills a [`Hit`] from triangle index and barycentrics.
pub fn make_hit(mesh: &TriangleMesh, ray: &PreparedRay, tri: usize, t: f64, b1: f64, b2: f64) -> Hit {
    let [i0, i1, i2] = mesh.indices[tri].map(|i| i as usize);
    let b0 = 1.0 - b1 - b2;
    let (p0, p1, p2) = (mesh.positions[i0], mesh.positions[i1], mesh.positions[i2]);
    let ng = (p1 - p0).cross(p2 - p0).normalize();
    let ns = mesh.normals[i0] * b0 + mesh.normals[i1] * b1 + mesh.normals[i2] * b2;
    let ns = if ns.length() > 1e-12 { ns.normalize() } else { ng };
    let (t0, t1, t2) = (mesh.uvs[i0], mesh.uvs[i1], mesh.uvs[i2]);
    Hit {
        t,
        position: ray.origin + ray.dir * t,
        geometric_normal: ng,
        shading_normal: ns,
        uv: [b0 * t0[0] + b1 * t1[0] + b2 * t2[0], b0 * t0[1] + b1 * t1[1] + b2 * t2[1]],
        material_id: mesh.material_ids[tri],
        triangle: tri as u32,
        barycentrics: [b1, b2],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitives_validate() {
        TriangleMesh::sphere(Vec3::ZERO, 1.0, 16, 8).validate().unwrap();
        TriangleMesh::quad(Vec3::ZERO, Vec3::X, Vec3::Y, 3).validate().unwrap();
        TriangleMesh::cuboid(Vec3::ZERO, Vec3::ONE).validate().unwrap();
    }

    #[test]
    fn cuboid_normals_point_outward() {
        let m = TriangleMesh::cuboid(Vec3::splat(-1.0), Vec3::ONE);
        for t in 0..m.triangle_count() {
            let [a, b, c] = m.vertices(t);
            let n = (b - a).cross(c - a);
            let centroid = (a + b + c) / 3.0;
            assert!(n.dot(centroid) > 0.0);
        }
    }

    #[test]
    fn validation_catches_bad_indices() {
        let mut m = TriangleMesh::quad(Vec3::ZERO, Vec3::X, Vec3::Y, 1);
        m.indices[0][1] = 99;
        assert!(m.validate().is_err());
        let mut d = TriangleMesh::quad(Vec3::ZERO, Vec3::X, Vec3::Y, 1);
        d.positions[1] = d.positions[0];
        assert!(d.validate().is_err());
    }

    #[test]
    fn shared_edge_is_watertight() {
        // Rays aimed exactly at the diagonal of a two-triangle quad never slip through.
        let m = TriangleMesh::quad(vec3(-1.0, -1.0, 0.0), vec3(2.0, 0.0, 0.0), vec3(0.0, 2.0, 0.0), 1);
        for k in 0..1000 {
            let s = -1.0 + 2.0 * (k as f64 + 0.5) / 1000.0;
            let ray = PreparedRay::new(vec3(0.3, -0.7, 1.0), (vec3(s, s, 0.0) - vec3(0.3, -0.7, 1.0)).normalize());
            let hits = (0..2)
                .filter(|&t| {
                    let [a, b, c] = m.vertices(t);
                    intersect_triangle(&ray, a, b, c, 0.0, f64::INFINITY).is_some()
                })
                .count();
            assert!(hits >= 1);
        }
    }

    #[test]
    fn area_weighted_normals() {
        let mut m = TriangleMesh::quad(Vec3::ZERO, Vec3::X, Vec3::Y, 2);
        m.normals.clear();
        m.compute_normals();
        for n in &m.normals {
            assert!((*n - Vec3::Z).length() < 1e-12);
        }
    }
}
