use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BINS_PER_CHANNEL: usize = 4;

/// An RGB raster in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
}

impl Raster {
    pub fn new(width: u32, height: u32, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if pixels.len() as u64 != u64::from(width) * u64::from(height) {
            return Err(Error::invalid(format!(
                "raster {width}x{height} needs {} pixels, got {}",
                u64::from(width) * u64::from(height),
                pixels.len()
            )));
        }
        Ok(Raster { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        Raster {
            width,
            height,
            pixels: vec![rgb; width as usize * height as usize],
        }
    }

    pub fn open(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(Self::from(img.to_rgb8()))
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

impl From<image::RgbImage> for Raster {
    fn from(img: image::RgbImage) -> Self {
        let (width, height) = img.dimensions();
        let pixels = img.pixels().map(|p| p.0).collect();
        Raster { width, height, pixels }
    }
}

/// L1-normalised joint RGB histogram with `bins_per_channel³` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorHistogram {
    bins_per_channel: usize,
    bins: Vec<f64>,
}

impl ColorHistogram {
    pub fn from_bins(bins_per_channel: usize, bins: Vec<f64>) -> Result<Self> {
        if bins_per_channel == 0 || bins.len() != bins_per_channel.pow(3) {
            return Err(Error::invalid(format!(
                "histogram with {} bins does not match {bins_per_channel} bins per channel",
                bins.len()
            )));
        }
        if bins.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::invalid("histogram entries must be finite and non-negative"));
        }
        Ok(ColorHistogram { bins_per_channel, bins })
    }

    pub fn bins_per_channel(&self) -> usize {
        self.bins_per_channel
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn into_bins(self) -> Vec<f64> {
        self.bins
    }

    /// Flat index of the `(r, g, b)` bin.
    pub fn index(&self, r: usize, g: usize, b: usize) -> usize {
        (r * self.bins_per_channel + g) * self.bins_per_channel + b
    }

    pub fn get(&self, r: usize, g: usize, b: usize) -> f64 {
        self.bins[self.index(r, g, b)]
    }
}

#[inline]
fn bucket(channel: u8, bins: usize) -> usize {
    usize::from(channel) * bins / 256
}

pub fn extract_color_histogram(raster: &Raster, bins_per_channel: usize) -> Result<ColorHistogram> {
    if raster.is_empty() {
        return Err(Error::invalid("cannot build a histogram of an empty raster"));
    }
    if bins_per_channel == 0 {
        return Err(Error::invalid("bins_per_channel must be at least 1"));
    }
    let b = bins_per_channel;
    let mut counts = vec![0u64; b * b * b];
    for &[r, g, bl] in raster.pixels() {
        counts[(bucket(r, b) * b + bucket(g, b)) * b + bucket(bl, b)] += 1;
    }
    let total = raster.pixels().len() as f64;
    let bins = counts.into_iter().map(|c| c as f64 / total).collect();
    Ok(ColorHistogram { bins_per_channel: b, bins })
}
