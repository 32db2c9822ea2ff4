//! Monte Carlo rendering with multi-bounce MIS direct lighting, a learned
//! diffuse cache with specular-lobe secondary tracing, and adjoint
//! gradients for inverse material and lighting recovery.

pub mod assets;
pub mod brdf;
pub mod camera;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod integrator;
pub mod math;
pub mod optimizer;
pub mod parallel;
pub mod sampling;
pub mod scene_desc;

pub use error::{Error, Result};
