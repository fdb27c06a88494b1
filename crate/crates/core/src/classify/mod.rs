//! Window-level Artcode / non-Artcode classification.
//!
//! The heatmap sweep only needs something that answers "does this window
//! contain an Artcode, and how sure are you?". [`WindowClassifier`] is that
//! contract. Two implementations ship here: [`ForestClassifier`] (orientation
//! histogram features fed to a bagged tree ensemble) and
//! [`OracleGroundTruth`], which answers from annotated circles and lets the
//! localisation stages be tested without a trained model.

mod features;
mod forest;
mod oracle;

pub use features::{extract_features, window_features, FeatureConfig, FeatureVector};
pub use forest::{train, ModelFile, Node, Tree, TreeEnsembleModel, MODEL_FORMAT, MODEL_VERSION};
pub use oracle::{OracleGroundTruth, ORACLE_SUBGRID};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::imaging::{GrayImage, Rect};

/// Score at or above which a window counts as an Artcode.
pub const DECISION_THRESHOLD: f64 = 0.5;

/// Outcome of classifying one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub is_artcode: bool,
    /// Likelihood of an Artcode in the window, in `[0, 1]`.
    pub score: f64,
}

impl Classification {
    pub fn from_score(score: f64) -> Self {
        Self {
            is_artcode: score >= DECISION_THRESHOLD,
            score,
        }
    }

    pub fn negative() -> Self {
        Self {
            is_artcode: false,
            score: 0.0,
        }
    }
}

/// Anything that can label a window of an image.
pub trait WindowClassifier: Send + Sync {
    fn classify_window(&self, image: &GrayImage, window: Rect) -> Result<Classification>;

    /// Whether the classifier reads pixels at all. When it does not, the
    /// sweep skips the bilateral prefilter.
    fn needs_pixels(&self) -> bool {
        true
    }
}

/// Adapts a closure over the window rectangle into a classifier.
pub struct FnClassifier<F>(pub F);

impl<F> WindowClassifier for FnClassifier<F>
where
    F: Fn(Rect) -> Classification + Send + Sync,
{
    fn classify_window(&self, _image: &GrayImage, window: Rect) -> Result<Classification> {
        Ok((self.0)(window))
    }

    fn needs_pixels(&self) -> bool {
        false
    }
}

/// Reference classifier: resize the window, extract orientation histograms,
/// run the tree ensemble.
#[derive(Debug, Clone)]
pub struct ForestClassifier {
    pub model: TreeEnsembleModel,
    pub features: FeatureConfig,
}

impl ForestClassifier {
    pub fn new(model: TreeEnsembleModel, features: FeatureConfig) -> Result<Self> {
        if model.n_features != features.len() {
            return Err(crate::Error::FeatureLengthMismatch {
                expected: model.n_features,
                got: features.len(),
            });
        }
        Ok(Self { model, features })
    }
}

impl WindowClassifier for ForestClassifier {
    fn classify_window(&self, image: &GrayImage, window: Rect) -> Result<Classification> {
        let f = window_features(image, window, &self.features)?;
        self.model.classify(&f)
    }
}

impl WindowClassifier for OracleGroundTruth {
    fn classify_window(&self, _image: &GrayImage, window: Rect) -> Result<Classification> {
        Ok(self.classify(window))
    }

    fn needs_pixels(&self) -> bool {
        false
    }
}
