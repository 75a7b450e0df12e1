//! Images, zonation files and run reports.

mod pnm;
mod render;
mod report;
mod zonefile;

pub use pnm::{read_ppm, write_ppm};
pub use render::{render_param, render_pseudo_sign, render_zonation, zone_color};
pub use report::{json_report, text_report};
pub use zonefile::{read_zonation, write_zonation, ZoneFile};

use crate::error::{invalid, Result};
use crate::zonation::{FineParam, Mesh};

/// 8-bit raster with 1 (gray) or 3 (RGB) channels, rows top to bottom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("image dimensions must be positive"));
        }
        if channels != 1 && channels != 3 {
            return Err(invalid(format!("{channels} channels; expected 1 or 3")));
        }
        if samples.len() != width * height * channels {
            return Err(invalid(format!("{} samples for a {width}x{height}x{channels} image", samples.len())));
        }
        Ok(Self { width, height, channels, samples })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[u8] {
        let at = (row * self.width + col) * self.channels;
        &self.samples[at..at + self.channels]
    }

    /// Grid mesh with one unit cell per pixel.
    pub fn mesh(&self) -> Mesh {
        Mesh::grid(self.width, self.height).expect("dimensions checked at construction")
    }

    /// One cell per pixel in row-major order, one component per channel.
    pub fn to_fine_param(&self) -> FineParam {
        let values = self.samples.iter().map(|&s| f64::from(s)).collect();
        FineParam::new(self.channels, values).expect("sample count checked at construction")
    }

    /// Rounds each value to the nearest sample and clamps to `[0, 255]`.
    pub fn from_fine_param(width: usize, height: usize, p: &FineParam) -> Result<Self> {
        if p.n_cells() != width * height {
            return Err(invalid("parameter size does not match the image"));
        }
        let samples = p.as_slice().iter().map(|&v| to_sample(v)).collect();
        Self::new(width, height, p.n_p(), samples)
    }
}

fn to_sample(v: f64) -> u8 {
    if v.is_nan() {
        0
    } else {
        v.round().clamp(0.0, 255.0) as u8
    }
}
