//! Input surface: grayscale stimuli quantized to eleven intensity levels.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::pgm::Graymap;

pub const LEVELS: u8 = 10;

/// Quantizes an intensity in `[0, 1]` to a level in `0..=10`.
///
/// Rounds half up, so 0.45 becomes level 5 while 0.44 stays at 4.
pub fn quantize(intensity: f64) -> u8 {
    let clamped = intensity.clamp(0.0, 1.0);
    let level = (clamped * LEVELS as f64 + 0.5).floor() as u8;
    level.min(LEVELS)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Retina {
    levels: Grid<u8>,
}

impl Retina {
    pub fn from_levels(levels: Grid<u8>) -> Result<Self> {
        if let Some(&bad) = levels.iter().find(|&&v| v > LEVELS) {
            return Err(Error::OutOfRange(format!(
                "retina level {bad} exceeds {LEVELS}"
            )));
        }
        Ok(Retina { levels })
    }

    pub fn from_graymap(map: &Graymap) -> Self {
        let maxval = map.maxval as f64;
        let levels = map.pixels.map(|&p| quantize(p as f64 / maxval));
        Retina { levels }
    }

    /// Re-quantizes continuous intensities in `[0, 1]`.
    pub fn from_intensities(values: &Grid<f64>) -> Self {
        Retina {
            levels: values.map(|&v| quantize(v)),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.levels.dims()
    }

    pub fn level(&self, row: usize, col: usize) -> u8 {
        self.levels[(row, col)]
    }

    /// Continuous intensity at a cell: level divided by 10.
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.levels[(row, col)] as f64 / LEVELS as f64
    }

    pub fn levels(&self) -> &Grid<u8> {
        &self.levels
    }

    /// Nearest-neighbor resample to the target size.
    pub fn resize_nearest(&self, height: usize, width: usize) -> Result<Retina> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension("resize target has a zero side".into()));
        }
        let (h, w) = self.dims();
        let mut data = Vec::with_capacity(height * width);
        for row in 0..height {
            let src_row = ((row as f64 + 0.5) * h as f64 / height as f64).floor() as usize;
            let src_row = src_row.min(h - 1);
            for col in 0..width {
                let src_col = ((col as f64 + 0.5) * w as f64 / width as f64).floor() as usize;
                let src_col = src_col.min(w - 1);
                data.push(self.levels[(src_row, src_col)]);
            }
        }
        Ok(Retina {
            levels: Grid::from_vec(height, width, data),
        })
    }

    /// Requires the stimulus to cover at least one filter placement.
    pub fn check_min_size(&self, kernel_size: usize) -> Result<()> {
        let (h, w) = self.dims();
        if h < kernel_size || w < kernel_size {
            return Err(Error::Dimension(format!(
                "stimulus {h}x{w} smaller than the {kernel_size}x{kernel_size} filter"
            )));
        }
        Ok(())
    }

    /// Exports the quantized surface; reading it back reproduces the levels exactly.
    pub fn to_graymap(&self) -> Graymap {
        Graymap {
            pixels: self.levels.map(|&v| v as u16),
            maxval: LEVELS as u16,
        }
    }
}
