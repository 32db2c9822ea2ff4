mod config;
mod image;
mod render;
mod tape;

pub use config::RenderConfig;
pub use image::{
    display_value, flatten, mean_rgb, psnr, psnr_display, unflatten, RadianceImage, RenderStats, Tonemap, PSNR_IDENTICAL,
};
pub use render::{estimate_radiance, mean_env_luminance, render, render_detached, render_with_tape};
pub use tape::{Tape, LOCAL_VARS};
