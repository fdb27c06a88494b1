use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{resize_region, GrayImage, Rect};

/// Layout of the orientation-histogram descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub n_bins: usize,
    pub grid: usize,
    /// Windows are resampled to `resize x resize` before extraction.
    pub resize: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            n_bins: 9,
            grid: 4,
            resize: 64,
        }
    }
}

impl FeatureConfig {
    pub fn len(&self) -> usize {
        self.grid * self.grid * self.n_bins
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bins < 2 || self.grid == 0 || self.resize < self.grid {
            return Err(Error::InvalidParameter(format!(
                "invalid feature configuration {self:?}"
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for FeatureConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "n_bins={} grid={} resize={}",
            self.n_bins, self.grid, self.resize
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Unsigned gradient-orientation histogram over a `grid x grid` partition.
///
/// Gradients are central differences with clamped borders. Each pixel votes
/// its gradient magnitude into the bin of its orientation folded into
/// `[0, pi)`; every cell histogram is then L2-normalised (all-zero cells stay
/// zero) and the cells are concatenated row-major.
pub fn extract_features(window: &GrayImage, n_bins: usize, grid: usize) -> Result<FeatureVector> {
    if n_bins < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 orientation bins, got {n_bins}"
        )));
    }
    let (w, h) = (window.width(), window.height());
    if grid == 0 || w < grid || h < grid {
        return Err(Error::WindowTooSmall {
            height: h,
            width: w,
            grid,
        });
    }

    let mut hist = vec![0.0; grid * grid * n_bins];
    let bin_width = PI / n_bins as f64;
    for r in 0..h {
        let up = window.row(r.saturating_sub(1));
        let down = window.row((r + 1).min(h - 1));
        let row = window.row(r);
        let cell_r = r * grid / h;
        for c in 0..w {
            let gx = row[(c + 1).min(w - 1)] - row[c.saturating_sub(1)];
            let gy = down[c] - up[c];
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let mut theta = gy.atan2(gx);
            if theta < 0.0 {
                theta += PI;
            }
            if theta >= PI {
                theta -= PI;
            }
            let bin = ((theta / bin_width) as usize).min(n_bins - 1);
            let cell = cell_r * grid + c * grid / w;
            hist[cell * n_bins + bin] += mag;
        }
    }

    for cell in hist.chunks_mut(n_bins) {
        let norm = cell.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            cell.iter_mut().for_each(|v| *v /= norm);
        }
    }
    Ok(FeatureVector(hist))
}

/// Features of the `rect` region of `img` after resampling it to the
/// configured size.
pub fn window_features(img: &GrayImage, rect: Rect, cfg: &FeatureConfig) -> Result<FeatureVector> {
    let resized = resize_region(img, rect, cfg.resize, cfg.resize)?;
    extract_features(&resized, cfg.n_bins, cfg.grid)
}
