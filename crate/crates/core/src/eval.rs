//! Normalised-distance matching and precision / recall / F-beta reports.
//!
//! Every prediction is assigned to the annotation with the smallest
//! *normalised* distance (euclidean distance over the annotation radius),
//! independently of any threshold. A report then thresholds those distances.

use serde::{Deserialize, Serialize};

/// Ground-truth Artcode: centre `(x, y)` in pixels (x = column) and radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleAnnotation {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

impl CircleAnnotation {
    pub fn normalized_distance(&self, px: f64, py: f64) -> f64 {
        (px - self.x).hypot(py - self.y) / self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchAssignment {
    /// Predicted location `(x, y)`.
    pub prediction: (f64, f64),
    pub annotation: Option<usize>,
    /// Infinite when there is no annotation to assign to.
    pub normalized_distance: f64,
}

/// How several predictions landing on one annotation are scored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DuplicatePolicy {
    /// Each prediction within the threshold is a true positive.
    #[default]
    CountAll,
    /// Only the closest prediction per annotation is a true positive; the
    /// rest are false positives.
    FirstOnly,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl std::ops::Add for MatchCounts {
    type Output = MatchCounts;

    fn add(self, o: MatchCounts) -> MatchCounts {
        MatchCounts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub f2: f64,
}

impl MatchReport {
    pub fn from_counts(threshold: f64, c: MatchCounts) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        Self {
            threshold,
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            precision,
            recall,
            f1: f_beta(precision, recall, 1.0),
            f2: f_beta(precision, recall, 2.0),
        }
    }

    pub fn counts(&self) -> MatchCounts {
        MatchCounts {
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
        }
    }
}

/// `(1 + b^2) P R / (b^2 P + R)`, zero when both are zero.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let den = b2 * precision + recall;
    if den == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / den
    }
}

pub fn assign(predictions: &[(f64, f64)], annotations: &[CircleAnnotation]) -> Vec<MatchAssignment> {
    predictions
        .iter()
        .map(|&(px, py)| {
            let mut best: Option<(usize, f64)> = None;
            for (k, a) in annotations.iter().enumerate() {
                let d = a.normalized_distance(px, py);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((k, d));
                }
            }
            MatchAssignment {
                prediction: (px, py),
                annotation: best.map(|(k, _)| k),
                normalized_distance: best.map_or(f64::INFINITY, |(_, d)| d),
            }
        })
        .collect()
}

pub fn count(
    assignments: &[MatchAssignment],
    n_annotations: usize,
    threshold: f64,
    policy: DuplicatePolicy,
) -> MatchCounts {
    // Per annotation, the index of its best in-threshold prediction.
    let mut best: Vec<Option<usize>> = vec![None; n_annotations];
    for (i, a) in assignments.iter().enumerate() {
        if let Some(k) = a.annotation {
            if a.normalized_distance <= threshold
                && best[k].is_none_or(|j| a.normalized_distance < assignments[j].normalized_distance)
            {
                best[k] = Some(i);
            }
        }
    }
    let matched = best.iter().filter(|b| b.is_some()).count();
    let tp = match policy {
        DuplicatePolicy::CountAll => assignments
            .iter()
            .filter(|a| a.annotation.is_some() && a.normalized_distance <= threshold)
            .count(),
        DuplicatePolicy::FirstOnly => matched,
    };
    MatchCounts {
        tp,
        fp: assignments.len() - tp,
        fn_: n_annotations - matched,
    }
}

pub fn report(
    assignments: &[MatchAssignment],
    annotations: &[CircleAnnotation],
    threshold: f64,
) -> MatchReport {
    report_with(assignments, annotations, threshold, DuplicatePolicy::CountAll)
}

pub fn report_with(
    assignments: &[MatchAssignment],
    annotations: &[CircleAnnotation],
    threshold: f64,
    policy: DuplicatePolicy,
) -> MatchReport {
    MatchReport::from_counts(threshold, count(assignments, annotations.len(), threshold, policy))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCurve {
    pub thresholds: Vec<f64>,
    pub reports: Vec<MatchReport>,
}

impl MetricCurve {
    /// Sums counts threshold-by-threshold (micro averaging). All curves must
    /// share the same threshold grid.
    pub fn aggregate<'a>(curves: impl IntoIterator<Item = &'a MetricCurve>, thresholds: &[f64]) -> MetricCurve {
        let mut totals = vec![MatchCounts::default(); thresholds.len()];
        for c in curves {
            assert_eq!(c.thresholds, thresholds, "curves use different threshold grids");
            for (t, r) in totals.iter_mut().zip(&c.reports) {
                *t = *t + r.counts();
            }
        }
        MetricCurve {
            thresholds: thresholds.to_vec(),
            reports: thresholds
                .iter()
                .zip(totals)
                .map(|(&t, c)| MatchReport::from_counts(t, c))
                .collect(),
        }
    }

    pub fn at(&self, threshold: f64) -> Option<&MatchReport> {
        self.reports.iter().find(|r| r.threshold == threshold)
    }
}

pub fn validate_thresholds(thresholds: &[f64]) -> crate::Result<()> {
    if thresholds.is_empty() {
        return Err(crate::Error::InvalidParameter("threshold grid is empty".into()));
    }
    if thresholds.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(crate::Error::InvalidParameter(
            "thresholds must be positive and finite".into(),
        ));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(crate::Error::InvalidParameter(
            "thresholds must be strictly ascending".into(),
        ));
    }
    Ok(())
}

pub fn curve(
    predictions: &[(f64, f64)],
    annotations: &[CircleAnnotation],
    thresholds: &[f64],
    policy: DuplicatePolicy,
) -> crate::Result<MetricCurve> {
    validate_thresholds(thresholds)?;
    let assignments = assign(predictions, annotations);
    Ok(MetricCurve {
        thresholds: thresholds.to_vec(),
        reports: thresholds
            .iter()
            .map(|&t| report_with(&assignments, annotations, t, policy))
            .collect(),
    })
}

/// 0.1, 0.2, ..., 2.0.
pub fn default_thresholds() -> Vec<f64> {
    (1..=20).map(|k| k as f64 / 10.0).collect()
}
