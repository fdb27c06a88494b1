use super::Classification;
use crate::error::{Error, Result};
use crate::eval::CircleAnnotation;
use crate::imaging::Rect;

/// Sub-grid resolution used to estimate circle/rectangle overlap.
pub const ORACLE_SUBGRID: usize = 64;

/// Test oracle that labels a window from annotated circles.
///
/// A window is an Artcode (score 1) when it covers at least
/// `overlap_fraction` of some circle. Areas are estimated by sampling the
/// midpoints of a 64x64 grid over each circle's bounding box; the circle's
/// own area uses the same samples so full containment compares equal.
#[derive(Debug, Clone)]
pub struct OracleGroundTruth {
    annotations: Vec<CircleAnnotation>,
    overlap_fraction: f64,
    /// Per annotation, the in-circle midpoints as (x, y).
    samples: Vec<Vec<(f64, f64)>>,
}

impl OracleGroundTruth {
    pub fn new(annotations: Vec<CircleAnnotation>, overlap_fraction: f64) -> Result<Self> {
        if !(overlap_fraction > 0.0 && overlap_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "overlap fraction must be in (0, 1], got {overlap_fraction}"
            )));
        }
        if let Some(a) = annotations
            .iter()
            .find(|a| !(a.radius > 0.0 && a.radius.is_finite()))
        {
            return Err(Error::InvalidParameter(format!(
                "annotation radius must be positive, got {}",
                a.radius
            )));
        }
        let samples = annotations.iter().map(circle_samples).collect();
        Ok(Self {
            annotations,
            overlap_fraction,
            samples,
        })
    }

    pub fn annotations(&self) -> &[CircleAnnotation] {
        &self.annotations
    }

    pub fn overlap_fraction(&self) -> f64 {
        self.overlap_fraction
    }

    /// Estimated area of `window` inside annotation `k`, and the estimated
    /// area of the whole circle.
    pub fn overlap_area(&self, k: usize, window: Rect) -> (f64, f64) {
        let a = &self.annotations[k];
        let cell = 2.0 * a.radius / ORACLE_SUBGRID as f64;
        let (top, left) = (window.top as f64, window.left as f64);
        let (bottom, right) = (window.bottom() as f64, window.right() as f64);
        let pts = &self.samples[k];
        let inside = pts
            .iter()
            .filter(|&&(x, y)| x >= left && x < right && y >= top && y < bottom)
            .count();
        (inside as f64 * cell * cell, pts.len() as f64 * cell * cell)
    }

    pub fn classify(&self, window: Rect) -> Classification {
        for k in 0..self.annotations.len() {
            let a = &self.annotations[k];
            // Cheap reject: window misses the bounding box entirely.
            if (window.right() as f64) <= a.x - a.radius
                || (window.left as f64) >= a.x + a.radius
                || (window.bottom() as f64) <= a.y - a.radius
                || (window.top as f64) >= a.y + a.radius
            {
                continue;
            }
            let (inter, area) = self.overlap_area(k, window);
            if inter >= self.overlap_fraction * area {
                return Classification {
                    is_artcode: true,
                    score: 1.0,
                };
            }
        }
        Classification::negative()
    }
}

fn circle_samples(a: &CircleAnnotation) -> Vec<(f64, f64)> {
    let n = ORACLE_SUBGRID;
    let cell = 2.0 * a.radius / n as f64;
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        let y = a.y - a.radius + (i as f64 + 0.5) * cell;
        for j in 0..n {
            let x = a.x - a.radius + (j as f64 + 0.5) * cell;
            let (dx, dy) = (x - a.x, y - a.y);
            if dx * dx + dy * dy <= a.radius * a.radius {
                pts.push((x, y));
            }
        }
    }
    pts
}
