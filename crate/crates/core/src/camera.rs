use crate::error::{Error, Result};
use crate::math::{vec3, Vec3};

/// Pinhole camera in the NeRF convention: a camera-to-world matrix whose
/// local frame has `+x` right, `+y` up and looks down `-z`.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub to_world: [[f64; 4]; 4],
    /// Horizontal field of view in radians.
    pub fov_x: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, fov_x: f64, width: usize, height: usize) -> Result<Self> {
        let fwd = target - eye;
        if fwd.length() < 1e-12 {
            return Err(Error::Data("camera eye and target coincide".into()));
        }
        let fwd = fwd.normalize();
        let right = fwd.cross(up);
        if right.length() < 1e-9 {
            return Err(Error::Data("camera up vector is parallel to the view direction".into()));
        }
        let right = right.normalize();
        let true_up = right.cross(fwd);
        let back = -fwd;
        let mut m = [[0.0; 4]; 4];
        for i in 0..3 {
            m[i] = [right[i], true_up[i], back[i], eye[i]];
        }
        m[3] = [0.0, 0.0, 0.0, 1.0];
        Self::from_matrix(m, fov_x, width, height)
    }

    /// Validates that `m` is a rigid transform (orthonormal rotation, det +1).
    pub fn from_matrix(m: [[f64; 4]; 4], fov_x: f64, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Data("camera resolution must be positive".into()));
        }
        if !(fov_x > 0.0 && fov_x < std::f64::consts::PI) {
            return Err(Error::Data(format!("camera field of view {fov_x} rad out of range")));
        }
        let c = |j: usize| vec3(m[0][j], m[1][j], m[2][j]);
        let (x, y, z) = (c(0), c(1), c(2));
        let tol = 1e-4;
        let ortho = [x.dot(x) - 1.0, y.dot(y) - 1.0, z.dot(z) - 1.0, x.dot(y), y.dot(z), z.dot(x)];
        if m.iter().flatten().any(|v| !v.is_finite()) || ortho.iter().any(|e| e.abs() > tol) || x.cross(y).dot(z) < 0.0 {
            return Err(Error::Data("camera transform is not a rigid transform".into()));
        }
        if m[3][0].abs() > tol || m[3][1].abs() > tol || m[3][2].abs() > tol || (m[3][3] - 1.0).abs() > tol {
            return Err(Error::Data("camera transform has a projective row".into()));
        }
        Ok(Self { to_world: m, fov_x, width, height })
    }

    pub fn position(&self) -> Vec3 {
        vec3(self.to_world[0][3], self.to_world[1][3], self.to_world[2][3])
    }

    pub fn focal(&self) -> f64 {
        0.5 * self.width as f64 / (0.5 * self.fov_x).tan()
    }

    /// Ray through continuous raster position `(px, py)`, origin top-left.
    pub fn ray(&self, px: f64, py: f64) -> (Vec3, Vec3) {
        let f = self.focal();
        let d = vec3((px - 0.5 * self.width as f64) / f, -(py - 0.5 * self.height as f64) / f, -1.0);
        let m = &self.to_world;
        let w = vec3(
            m[0][0] * d.x + m[0][1] * d.y + m[0][2] * d.z,
            m[1][0] * d.x + m[1][1] * d.y + m[1][2] * d.z,
            m[2][0] * d.x + m[2][1] * d.y + m[2][2] * d.z,
        );
        (self.position(), w.normalize())
    }

    pub fn with_resolution(&self, width: usize, height: usize) -> Self {
        Self { width, height, ..self.clone() }
    }
}
