//! Shared inputs for the pipeline benchmarks.

use visionguide_core::classify::OracleGroundTruth;
use visionguide_core::dataset::{generate_scene, SyntheticScene};
use visionguide_core::heatmap::{calc_heatmap, normalize, Heatmap};
use visionguide_core::imaging::{to_grayscale, GrayImage};
use visionguide_core::SweepConfig;

/// A square synthetic scene with three markers scaled to its side.
pub fn scene(side: usize, seed: u64) -> SyntheticScene {
    let r = side as f64 / 20.0;
    generate_scene(side, side, 3, (r, 2.0 * r), seed).expect("scene fits")
}

pub fn gray_scene(side: usize, seed: u64) -> GrayImage {
    to_grayscale(&scene(side, seed).image)
}

/// Sweep geometry scaled so a `side`-pixel image sees the same window
/// fraction as the 800-pixel default does on a 3024-pixel photo.
pub fn scaled_config(side: usize) -> SweepConfig {
    let win = (side * 800 / 3024).max(8);
    SweepConfig::square(win, (win / 20).max(1), 10.0, 10.0)
}

/// Normalised oracle heatmap of a scene, the input of the fine stage.
pub fn oracle_heatmap(side: usize, seed: u64) -> Heatmap {
    let s = scene(side, seed);
    let oracle = OracleGroundTruth::new(s.annotations, 0.25).expect("valid oracle");
    let gray = to_grayscale(&s.image);
    normalize(&calc_heatmap(&gray, &scaled_config(side), &oracle).expect("window fits"))
}
