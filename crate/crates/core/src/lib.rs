//! Coarse-to-fine localisation of Artcode markers.
//!
//! A window slides over the image and a [`classify::WindowClassifier`]
//! labels each position. Positive scores accumulate into a presence
//! [`heatmap::Heatmap`] (coarse stage). The normalised heatmap is then
//! smoothed, H-maxima suppresses insignificant bumps, and the centroids of
//! the remaining regional maxima become the marker locations (fine stage).
//!
//! - [`imaging`]: rasters, grayscale, bilateral and Gaussian filters.
//! - [`classify`]: the classifier contract, orientation-histogram features,
//!   the tree ensemble, and a ground-truth oracle.
//! - [`heatmap`]: window enumeration and score accumulation.
//! - [`peaks`]: morphological reconstruction, regional maxima, centroids.
//! - [`eval`]: normalised-distance matching and F-beta reports.
//! - [`dataset`]: annotated image folders and synthetic scenes.

pub mod classify;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod heatmap;
pub mod imaging;
pub mod peaks;
pub mod pipeline;

pub use classify::{Classification, ForestClassifier, OracleGroundTruth, WindowClassifier};
pub use error::{Error, Result};
pub use eval::{CircleAnnotation, MatchReport, MetricCurve};
pub use heatmap::{Heatmap, SweepConfig};
pub use imaging::{GrayImage, Rect, RgbImage};
pub use peaks::PeakSet;
pub use pipeline::{localise, Localisation};
