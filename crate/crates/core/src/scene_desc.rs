//! Scene description files (TOML).
//!
//! ```toml
//! scale = 1.0
//!
//! [environment]
//! radiance = [1.0, 1.0, 1.0]     # or: file = "sky.hdr"
//!
//! [[material]]
//! name = "white"
//! base_color = [0.8, 0.8, 0.8]   # or: base_color_texture = "kd.png"
//! roughness = 0.5
//!
//! [[mesh]]
//! sphere = { center = [0, 0, 0], radius = 1.0 }
//! material = "white"
//!
//! [[camera]]
//! eye = [0, -4, 1]
//! target = [0, 0, 0]
//! fov_x = 40.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::assets::{io, EnvironmentMap, MaterialParams, ParamSet, Texture2D};
use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::geometry::{load_obj, Geometry, TriangleMesh};
use crate::math::Vec3;

/// Where in the file a diagnostic points; both 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("{file}:{at}: syntax error: {message}")]
    Syntax { file: String, at: Location, message: String },
    #[error("{file}:{at}: missing field `{field}`")]
    MissingField { file: String, at: Location, field: String },
    #[error("{file}:{at}: unknown key `{key}`")]
    UnknownKey { file: String, at: Location, key: String },
    #[error("{file}:{at}: bad reference `{name}`: {reason}")]
    BadReference { file: String, at: Location, name: String, reason: String },
    #[error("{file}:{at}: {message}")]
    Invalid { file: String, at: Location, message: String },
}

fn default_one() -> f64 {
    1.0
}
fn default_up() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}
fn default_roughness() -> f64 {
    0.5
}
fn default_tex_res() -> usize {
    16
}
fn default_cache_res() -> usize {
    64
}
fn default_env_width() -> usize {
    256
}
fn default_env_height() -> usize {
    128
}
fn default_segments() -> usize {
    64
}
fn default_rings() -> usize {
    32
}
fn default_res() -> usize {
    128
}
fn is_one(v: &f64) -> bool {
    *v == 1.0
}
fn is_zero3(v: &[f64; 3]) -> bool {
    *v == [0.0; 3]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDescription {
    /// Uniform scale applied to all meshes and camera positions.
    #[serde(default = "default_one", skip_serializing_if = "is_one")]
    pub scale: f64,
    pub environment: EnvironmentDesc,
    #[serde(rename = "material", default)]
    pub materials: Vec<MaterialDesc>,
    #[serde(rename = "mesh")]
    pub meshes: Vec<MeshDesc>,
    #[serde(rename = "camera")]
    pub cameras: Vec<CameraDesc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentDesc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radiance: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<Spanned<String>>,
    #[serde(default = "default_one", skip_serializing_if = "is_one")]
    pub intensity: f64,
    /// Resolution used for constant environments.
    #[serde(default = "default_env_width")]
    pub width: usize,
    #[serde(default = "default_env_height")]
    pub height: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialDesc {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_color: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_color_texture: Option<Spanned<String>>,
    #[serde(default = "default_roughness")]
    pub roughness: f64,
    #[serde(default)]
    pub metalness: f64,
    /// Occlusion/roughness/metalness texture; overrides the constants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orm_texture: Option<Spanned<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal_texture: Option<Spanned<String>>,
    /// Specular lobe multiplier; 0 makes the material purely diffuse.
    #[serde(default = "default_one", skip_serializing_if = "is_one")]
    pub specular: f64,
    /// Resolution of textures created from constants.
    #[serde(default = "default_tex_res")]
    pub texture_resolution: usize,
    #[serde(default = "default_cache_res")]
    pub cache_resolution: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshDesc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obj: Option<Spanned<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sphere: Option<SphereDesc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad: Option<QuadDesc>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "box")]
    pub cuboid: Option<BoxDesc>,
    pub material: Spanned<String>,
    #[serde(default = "default_one", skip_serializing_if = "is_one")]
    pub scale: f64,
    #[serde(default, skip_serializing_if = "is_zero3")]
    pub translate: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereDesc {
    pub center: [f64; 3],
    pub radius: f64,
    #[serde(default = "default_segments")]
    pub segments: usize,
    #[serde(default = "default_rings")]
    pub rings: usize,
}

/// Parallelogram `origin + s*u + t*v` with UVs `(s, t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadDesc {
    pub origin: [f64; 3],
    pub u: [f64; 3],
    pub v: [f64; 3],
    #[serde(default = "default_subdiv")]
    pub subdivisions: usize,
}

fn default_subdiv() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDesc {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraDesc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub eye: [f64; 3],
    pub target: [f64; 3],
    #[serde(default = "default_up")]
    pub up: [f64; 3],
    /// Horizontal field of view in degrees.
    pub fov_x: f64,
    #[serde(default = "default_res")]
    pub width: usize,
    #[serde(default = "default_res")]
    pub height: usize,
}

/// Scene ready for rendering.
#[derive(Clone, Debug)]
pub struct Scene {
    pub geometry: Geometry,
    pub params: ParamSet,
    pub cameras: Vec<Camera>,
    pub material_names: Vec<String>,
}

fn location(text: &str, offset: usize) -> Location {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    Location { line, column }
}

fn backticked(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let end = start + msg[start..].find('`')?;
    Some(msg[start..end].to_string())
}

impl SceneDescription {
    /// Parses and validates description text; `file` is used in diagnostics
    /// and `base` resolves relative paths (existence is checked when given).
    pub fn parse_str(text: &str, file: &str, base: Option<&Path>) -> Result<Self, SceneError> {
        let desc: SceneDescription = toml::from_str(text).map_err(|e| {
            let at = location(text, e.span().map_or(0, |s| s.start));
            let msg = e.message().to_string();
            let file = file.to_string();
            if msg.starts_with("missing field") {
                SceneError::MissingField { file, at, field: backticked(&msg).unwrap_or(msg) }
            } else if msg.starts_with("unknown field") {
                SceneError::UnknownKey { file, at, key: backticked(&msg).unwrap_or(msg) }
            } else {
                SceneError::Syntax { file, at, message: msg }
            }
        })?;
        desc.validate(text, file, base)?;
        Ok(desc)
    }

    pub fn parse(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok(Self::parse_str(&text, &path.display().to_string(), Some(base))?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene description serializes")
    }

    fn validate(&self, text: &str, file: &str, base: Option<&Path>) -> Result<(), SceneError> {
        let top = Location { line: 1, column: 1 };
        let invalid = |at, message: String| SceneError::Invalid { file: file.into(), at, message };
        let check_file = |s: &Spanned<String>| -> Result<(), SceneError> {
            if let Some(base) = base {
                if !base.join(s.get_ref()).is_file() {
                    return Err(SceneError::BadReference {
                        file: file.into(),
                        at: location(text, s.span().start),
                        name: s.get_ref().clone(),
                        reason: "file not found".into(),
                    });
                }
            }
            Ok(())
        };

        if self.meshes.is_empty() {
            return Err(invalid(top, "at least one mesh is required".into()));
        }
        if self.cameras.is_empty() {
            return Err(invalid(top, "at least one camera is required".into()));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(invalid(top, "scale must be positive".into()));
        }
        let env = &self.environment;
        match (&env.radiance, &env.file) {
            (Some(_), Some(f)) => {
                return Err(invalid(location(text, f.span().start), "environment has both `radiance` and `file`".into()))
            }
            (None, None) => {
                return Err(SceneError::MissingField { file: file.into(), at: top, field: "environment.radiance".into() })
            }
            (Some(r), None) if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) => {
                return Err(invalid(top, "environment radiance must be finite and non-negative".into()))
            }
            (_, Some(f)) => check_file(f)?,
            _ => {}
        }
        if env.width == 0 || env.height == 0 {
            return Err(invalid(top, "environment resolution must be positive".into()));
        }

        let mut names = std::collections::HashSet::new();
        for m in &self.materials {
            if !names.insert(m.name.as_str()) {
                return Err(invalid(top, format!("material `{}` defined twice", m.name)));
            }
            if m.base_color.is_some() && m.base_color_texture.is_some() {
                return Err(invalid(top, format!("material `{}` has both a base color and a texture", m.name)));
            }
            for tex in [&m.base_color_texture, &m.orm_texture, &m.normal_texture].into_iter().flatten() {
                check_file(tex)?;
            }
            let in_unit = |v: f64| (0.0..=1.0).contains(&v);
            if !in_unit(m.roughness) || !in_unit(m.metalness) || !(m.specular >= 0.0) {
                return Err(invalid(top, format!("material `{}` has out-of-range parameters", m.name)));
            }
            if m.texture_resolution == 0 || m.cache_resolution == 0 {
                return Err(invalid(top, format!("material `{}` needs positive resolutions", m.name)));
            }
        }
        for mesh in &self.meshes {
            let at = location(text, mesh.material.span().start);
            let shapes = mesh.obj.is_some() as u8 + mesh.sphere.is_some() as u8 + mesh.quad.is_some() as u8 + mesh.cuboid.is_some() as u8;
            if shapes != 1 {
                return Err(invalid(at, "mesh needs exactly one of `obj`, `sphere`, `quad`, `box`".into()));
            }
            if let Some(obj) = &mesh.obj {
                check_file(obj)?;
            }
            if !names.contains(mesh.material.get_ref().as_str()) {
                return Err(SceneError::BadReference {
                    file: file.into(),
                    at,
                    name: mesh.material.get_ref().clone(),
                    reason: "no material with this name".into(),
                });
            }
        }
        Ok(())
    }

    /// Loads meshes and textures; `base` resolves relative paths.
    pub fn build(&self, base: &Path) -> Result<Scene> {
        let mut mesh = TriangleMesh::default();
        let material_names: Vec<String> = self.materials.iter().map(|m| m.name.clone()).collect();
        for m in &self.meshes {
            let id = material_names.iter().position(|n| n == m.material.get_ref()).expect("validated") as u32;
            let mut part = if let Some(obj) = &m.obj {
                load_obj(&base.join(obj.get_ref()), id)?
            } else if let Some(s) = &m.sphere {
                TriangleMesh::sphere(Vec3::from_array(s.center), s.radius, s.segments.max(3), s.rings.max(2))
            } else if let Some(q) = &m.quad {
                TriangleMesh::quad(Vec3::from_array(q.origin), Vec3::from_array(q.u), Vec3::from_array(q.v), q.subdivisions)
            } else if let Some(b) = &m.cuboid {
                TriangleMesh::cuboid(Vec3::from_array(b.min), Vec3::from_array(b.max))
            } else {
                unreachable!("validated")
            };
            part.set_material(id);
            part.transform(m.scale * self.scale, Vec3::from_array(m.translate) * self.scale);
            mesh.append(&part);
        }
        let geometry = Geometry::new(mesh)?;

        let mut materials = Vec::with_capacity(self.materials.len());
        for m in &self.materials {
            let kd = Vec3::from_array(m.base_color.unwrap_or([0.8; 3]));
            let mut p = MaterialParams::constant(kd, m.roughness, m.metalness, m.texture_resolution, m.cache_resolution);
            if let Some(t) = &m.base_color_texture {
                p.kd = to_channels(io::load_texture(&base.join(t.get_ref()))?, 4, 1.0);
            }
            if let Some(t) = &m.orm_texture {
                p.orm = to_channels(io::load_texture(&base.join(t.get_ref()))?, 3, 0.0);
            }
            if let Some(t) = &m.normal_texture {
                p.normal = to_channels(io::load_texture(&base.join(t.get_ref()))?, 3, 1.0);
            }
            p.specular_weight = m.specular;
            materials.push(p);
        }

        let env = &self.environment;
        let mut env_map = match (&env.radiance, &env.file) {
            (Some(r), _) => EnvironmentMap::constant(env.width, env.height, Vec3::from_array(*r)),
            (None, Some(f)) => io::load_environment(&base.join(f.get_ref()))?,
            (None, None) => unreachable!("validated"),
        };
        if env.intensity != 1.0 {
            env_map.radiance.data.iter_mut().for_each(|v| *v *= env.intensity as f32);
            env_map.build_cdf();
        }

        let cameras = self
            .cameras
            .iter()
            .map(|c| {
                Camera::look_at(
                    Vec3::from_array(c.eye) * self.scale,
                    Vec3::from_array(c.target) * self.scale,
                    Vec3::from_array(c.up),
                    c.fov_x.to_radians(),
                    c.width,
                    c.height,
                )
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Scene { geometry, params: ParamSet { materials, env: env_map }, cameras, material_names })
    }
}

/// Pads or truncates texture channels, filling missing ones with `fill`.
fn to_channels(tex: Texture2D, channels: usize, fill: f32) -> Texture2D {
    if tex.channels == channels {
        return tex;
    }
    let mut data = Vec::with_capacity(tex.texel_count() * channels);
    for i in 0..tex.texel_count() {
        let t = tex.texel(i);
        for c in 0..channels {
            // Single-channel images broadcast to the color channels.
            data.push(if c < t.len() { t[c] } else if t.len() == 1 && c < 3 { t[0] } else { fill });
        }
    }
    Texture2D::new(tex.width, tex.height, channels, data).expect("sizes agree").with_wrap(tex.wrap_u)
}

impl Scene {
    pub fn load(path: &Path) -> Result<Self> {
        let desc = SceneDescription::parse(path)?;
        desc.build(path.parent().unwrap_or(Path::new(".")))
    }
}

/// Resolves `p` against the directory of `scene_file`.
pub fn resolve(scene_file: &Path, p: &str) -> PathBuf {
    scene_file.parent().unwrap_or(Path::new(".")).join(p)
}
