//! Textures, the environment map, the diffuse cache, and their file formats.

mod envmap;
pub mod io;
mod params;
mod texture;

pub use envmap::{EnvironmentMap, PDF_FLOOR};
pub use params::{apply_normal_map, DiffuseCache, GradBuffer, MaterialGrads, MaterialParams, ParamLeaf, ParamSet};
pub use texture::{Filter, Footprint, Texture2D, Wrap};
