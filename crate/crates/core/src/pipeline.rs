//! Coarse-to-fine localisation of one image.

use crate::classify::WindowClassifier;
use crate::error::Result;
use crate::heatmap::{calc_heatmap, normalize, Heatmap, SweepConfig};
use crate::imaging::GrayImage;
use crate::peaks::{find_peaks, PeakSet};

#[derive(Debug, Clone)]
pub struct Localisation {
    /// Accumulated scores before normalisation.
    pub heatmap: Heatmap,
    /// `heatmap` mapped onto [0, 255].
    pub normalized: Heatmap,
    pub peaks: PeakSet,
}

/// Heatmap, normalisation, then peak finding.
pub fn localise(
    img: &GrayImage,
    cfg: &SweepConfig,
    classifier: &dyn WindowClassifier,
) -> Result<Localisation> {
    let heatmap = calc_heatmap(img, cfg, classifier)?;
    let normalized = normalize(&heatmap);
    let peaks = find_peaks(&normalized, cfg)?;
    Ok(Localisation {
        heatmap,
        normalized,
        peaks,
    })
}

/// Re-runs only the fine stage, for parameter sweeps that share a heatmap.
pub fn refine(heatmap: &Heatmap, cfg: &SweepConfig) -> Result<PeakSet> {
    find_peaks(&normalize(heatmap), cfg)
}
