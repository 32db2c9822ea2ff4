mod bvh;
mod mesh;
mod obj;

pub use bvh::{Aabb, Bvh, BvhNode};
pub use mesh::{intersect_triangle, Hit, PreparedRay, TriangleMesh, MIN_TRIANGLE_AREA};
pub use obj::load_obj;

use crate::error::Result;
use crate::math::Vec3;

/// Smallest ray parameter accepted for any intersection.
pub const T_MIN: f64 = 1e-4;
/// Ray-origin offset as a fraction of the scene bounding-box diagonal.
pub const OFFSET_SCALE: f64 = 1e-4;

/// Mesh plus acceleration structure.
#[derive(Clone, Debug)]
pub struct Geometry {
    pub mesh: TriangleMesh,
    /// `None` for an empty scene.
    pub bvh: Option<Bvh>,
    epsilon: f64,
}

impl Geometry {
    pub fn new(mesh: TriangleMesh) -> Result<Self> {
        mesh.validate()?;
        if mesh.is_empty() {
            return Ok(Self::empty());
        }
        let bvh = Bvh::build(&mesh)?;
        let epsilon = OFFSET_SCALE * bvh.bounds().diagonal().max(1e-6);
        Ok(Self { mesh, bvh: Some(bvh), epsilon })
    }

    pub fn empty() -> Self {
        Self { mesh: TriangleMesh::default(), bvh: None, epsilon: OFFSET_SCALE }
    }

    /// Distance by which secondary-ray origins are pushed off surfaces.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn trace(&self, origin: Vec3, dir: Vec3) -> Option<Hit> {
        self.bvh.as_ref()?.trace(&self.mesh, origin, dir, T_MIN, f64::INFINITY)
    }

    pub fn occluded(&self, origin: Vec3, dir: Vec3) -> bool {
        self.bvh.as_ref().is_some_and(|b| b.occluded(&self.mesh, origin, dir, T_MIN, f64::INFINITY))
    }

    /// Origin for a ray leaving `hit` in direction `dir`, offset along the
    /// geometric normal toward the side `dir` points to.
    pub fn bounds(&self) -> Option<Aabb> {
        self.bvh.as_ref().map(|b| b.bounds())
    }

    pub fn spawn_origin(&self, hit: &Hit, dir: Vec3) -> Vec3 {
        let ng = hit.geometric_normal;
        let side = if ng.dot(dir) >= 0.0 { 1.0 } else { -1.0 };
        hit.position + ng * (side * self.epsilon)
    }
}
