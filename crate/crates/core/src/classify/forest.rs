use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Classification, FeatureConfig, FeatureVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// Fraction of class-1 training samples that reached this leaf.
    Leaf { vote: f64 },
    /// `x[feature] <= threshold` goes to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary decision tree stored as a flat node array; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn vote(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { vote } => return vote,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsembleModel {
    pub n_features: usize,
    pub n_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
    pub trees: Vec<Tree>,
}

impl TreeEnsembleModel {
    /// Mean leaf vote across trees; Artcode iff the mean is at least 0.5.
    pub fn classify(&self, f: &FeatureVector) -> Result<Classification> {
        if f.len() != self.n_features {
            return Err(Error::FeatureLengthMismatch {
                expected: self.n_features,
                got: f.len(),
            });
        }
        if self.trees.is_empty() {
            return Err(Error::ModelFormat("model has no trees".into()));
        }
        let total: f64 = self.trees.iter().map(|t| t.vote(f.values())).sum();
        let score = (total / self.trees.len() as f64).clamp(0.0, 1.0);
        Ok(Classification::from_score(score))
    }

    /// Structural checks run after deserialising.
    pub fn validate(&self) -> Result<()> {
        if self.trees.len() != self.n_trees || self.trees.is_empty() {
            return Err(Error::ModelFormat(format!(
                "declared {} trees, found {}",
                self.n_trees,
                self.trees.len()
            )));
        }
        for (t, tree) in self.trees.iter().enumerate() {
            if tree.nodes.is_empty() {
                return Err(Error::ModelFormat(format!("tree {t} is empty")));
            }
            for node in &tree.nodes {
                match *node {
                    Node::Leaf { vote } if !(0.0..=1.0).contains(&vote) => {
                        return Err(Error::ModelFormat(format!("tree {t}: leaf vote {vote}")));
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        let n = tree.nodes.len();
                        if feature >= self.n_features || left >= n || right >= n || !threshold.is_finite() {
                            return Err(Error::ModelFormat(format!("tree {t}: bad split node")));
                        }
                    }
                    _ => {}
                }
            }
            if tree.depth() > self.max_depth {
                return Err(Error::ModelFormat(format!(
                    "tree {t} deeper than max_depth {}",
                    self.max_depth
                )));
            }
        }
        Ok(())
    }
}

pub const MODEL_FORMAT: &str = "visionguide-forest";
pub const MODEL_VERSION: u32 = 1;

/// On-disk model: a JSON document carrying the format tag, version, the
/// feature layout the model was trained on, and the trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub features: FeatureConfig,
    pub model: TreeEnsembleModel,
}

impl ModelFile {
    pub fn new(features: FeatureConfig, model: TreeEnsembleModel) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            features,
            model,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!("unknown format tag {:?}", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported model version {}",
                file.version
            )));
        }
        if file.features.len() != file.model.n_features {
            return Err(Error::ModelFormat(format!(
                "feature layout ({}) implies {} features, model has {}",
                file.features,
                file.features.len(),
                file.model.n_features
            )));
        }
        file.model.validate()?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Loads a model and refuses it unless it was trained on `expected`.
    pub fn load_expecting(path: &Path, expected: &FeatureConfig) -> Result<Self> {
        let file = Self::load(path)?;
        if file.features != *expected {
            return Err(Error::ModelConfigMismatch {
                expected: expected.to_string(),
                found: file.features.to_string(),
            });
        }
        Ok(file)
    }
}

/// Trains a bagged ensemble of Gini trees.
///
/// Tree `t` draws its bootstrap sample and per-node feature subsets from a
/// ChaCha8 stream seeded with `seed` on stream `t`, so the result depends
/// only on `(samples, n_trees, max_depth, seed)`.
pub fn train(
    samples: &[(FeatureVector, bool)],
    n_trees: usize,
    max_depth: usize,
    seed: u64,
) -> Result<TreeEnsembleModel> {
    if n_trees == 0 || max_depth == 0 {
        return Err(Error::InvalidParameter(
            "n_trees and max_depth must be positive".into(),
        ));
    }
    let positives = samples.iter().filter(|(_, y)| *y).count();
    if samples.len() < 2 || positives == 0 || positives == samples.len() {
        return Err(Error::DegenerateTrainingSet);
    }
    let n_features = samples[0].0.len();
    if n_features == 0 {
        return Err(Error::InvalidParameter("empty feature vectors".into()));
    }
    if let Some((f, _)) = samples.iter().find(|(f, _)| f.len() != n_features) {
        return Err(Error::FeatureLengthMismatch {
            expected: n_features,
            got: f.len(),
        });
    }
    if samples.iter().any(|(f, _)| f.values().iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidParameter("non-finite feature value".into()));
    }

    let trees = (0..n_trees)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let bag: Vec<usize> = (0..samples.len())
                .map(|_| rng.random_range(0..samples.len()))
                .collect();
            let mut builder = TreeBuilder {
                samples,
                n_features,
                mtry: ((n_features as f64).sqrt().floor() as usize).max(1),
                max_depth,
                rng,
                nodes: Vec::new(),
            };
            builder.grow(bag, 0);
            Tree {
                nodes: builder.nodes,
            }
        })
        .collect();

    Ok(TreeEnsembleModel {
        n_features,
        n_trees,
        max_depth,
        seed,
        trees,
    })
}

struct TreeBuilder<'a> {
    samples: &'a [(FeatureVector, bool)],
    n_features: usize,
    mtry: usize,
    max_depth: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

impl TreeBuilder<'_> {
    /// Grows the subtree for `idx` and returns its node index.
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let pos = idx.iter().filter(|&&i| self.samples[i].1).count();
        let vote = pos as f64 / idx.len() as f64;
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { vote });
        if depth >= self.max_depth || pos == 0 || pos == idx.len() {
            return at;
        }
        let Some(best) = self.best_split(&idx) else {
            return at;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.samples[i].0.values()[best.feature] <= best.threshold);
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        self.nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        at
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<BestSplit> {
        // Partial Fisher-Yates for `mtry` distinct features.
        let mut features: Vec<usize> = (0..self.n_features).collect();
        for k in 0..self.mtry {
            let j = self.rng.random_range(k..self.n_features);
            features.swap(k, j);
        }
        let n = idx.len();
        let total_pos = idx.iter().filter(|&&i| self.samples[i].1).count();
        let mut best: Option<BestSplit> = None;
        let mut column: Vec<(f64, bool)> = Vec::with_capacity(n);
        for &feature in &features[..self.mtry] {
            column.clear();
            column.extend(
                idx.iter()
                    .map(|&i| (self.samples[i].0.values()[feature], self.samples[i].1)),
            );
            column.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0;
            for k in 0..n - 1 {
                if column[k].1 {
                    left_pos += 1;
                }
                let (lo, hi) = (column[k].0, column[k + 1].0);
                if lo == hi {
                    continue;
                }
                let n_left = k + 1;
                let impurity = (n_left as f64 * gini(left_pos, n_left)
                    + (n - n_left) as f64 * gini(total_pos - left_pos, n - n_left))
                    / n as f64;
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }
}
