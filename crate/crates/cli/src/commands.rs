use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use visionguide_core::classify::{window_features, FeatureVector, ModelFile, WindowClassifier};
use visionguide_core::dataset::{self, is_image_path, read_annotations, sidecar_path};
use visionguide_core::eval::{self, CircleAnnotation, MatchReport, MetricCurve};
use visionguide_core::heatmap::{calc_heatmap, fuse};
use visionguide_core::imaging::to_grayscale;
use visionguide_core::pipeline::{localise as run_pipeline, refine};
use visionguide_core::{ForestClassifier, GrayImage, OracleGroundTruth, RgbImage, SweepConfig};

use crate::config::{ClassifierSource, RunConfig};
use crate::{worker_pool, ConfigError, PartialFailure};

/// The classifier a run uses, loaded once.
enum Loaded {
    Oracle { overlap: f64 },
    Forest(ForestClassifier),
}

impl Loaded {
    fn new(cfg: &RunConfig) -> Result<Self> {
        Ok(match &cfg.classifier {
            ClassifierSource::Oracle => Loaded::Oracle {
                overlap: cfg.overlap_fraction,
            },
            ClassifierSource::Model(path) => {
                let file = ModelFile::load_expecting(path, &cfg.features)
                    .with_context(|| format!("loading model {}", path.display()))?;
                Loaded::Forest(ForestClassifier::new(file.model, file.features)?)
            }
        })
    }

    /// Runs `f` with the classifier for one image. The oracle reads the
    /// image's sidecar unless the annotations are already at hand.
    fn with<R>(
        &self,
        image: &Path,
        known: Option<&[CircleAnnotation]>,
        f: impl FnOnce(&dyn WindowClassifier) -> visionguide_core::Result<R>,
    ) -> Result<R> {
        match self {
            Loaded::Oracle { overlap } => {
                let anns = match known {
                    Some(a) => a.to_vec(),
                    None => read_annotations(&sidecar_path(image))?,
                };
                Ok(f(&OracleGroundTruth::new(anns, *overlap)?)?)
            }
            Loaded::Forest(forest) => Ok(f(forest)?),
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

fn load_image(path: &Path) -> Result<(RgbImage, GrayImage)> {
    let rgb = RgbImage::load(path)?;
    let gray = to_grayscale(&rgb);
    Ok((rgb, gray))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalisedImage {
    pub image: PathBuf,
    pub peaks: usize,
    pub heatmap_png: PathBuf,
    pub fused_png: PathBuf,
    pub peaks_json: PathBuf,
    pub heatmap_raw: Option<PathBuf>,
}

#[derive(Debug, Default)]
pub struct LocaliseSummary {
    pub done: Vec<LocalisedImage>,
    /// Inputs that failed, with the reason; the rest were still written.
    pub failed: Vec<(PathBuf, anyhow::Error)>,
}

impl LocaliseSummary {
    pub fn into_result(self) -> Result<Vec<LocalisedImage>> {
        if self.failed.is_empty() {
            Ok(self.done)
        } else {
            Err(PartialFailure {
                failed: self.failed.len(),
                total: self.failed.len() + self.done.len(),
            }
            .into())
        }
    }
}

/// Writes `<stem>.heatmap.png`, `<stem>.fused.png` and `<stem>.peaks.json`
/// per image into the output directory, plus `<stem>.heatmap.raw` (exact
/// accumulated values) when `raw` is set.
pub fn localise(cfg: &RunConfig, images: &[PathBuf], raw: bool) -> Result<LocaliseSummary> {
    cfg.validate()?;
    let clf = Loaded::new(cfg)?;
    ensure_dir(&cfg.out)?;
    let pool = worker_pool(cfg.workers)?;
    let results: Vec<Result<LocalisedImage>> = pool.install(|| {
        images
            .par_iter()
            .map(|p| localise_one(cfg, &clf, p, raw).with_context(|| p.display().to_string()))
            .collect()
    });
    let mut summary = LocaliseSummary::default();
    for (path, r) in images.iter().zip(results) {
        match r {
            Ok(done) => summary.done.push(done),
            Err(e) => summary.failed.push((path.clone(), e)),
        }
    }
    Ok(summary)
}

fn localise_one(cfg: &RunConfig, clf: &Loaded, path: &Path, raw: bool) -> Result<LocalisedImage> {
    let (rgb, gray) = load_image(path)?;
    let loc = clf.with(path, None, |c| run_pipeline(&gray, &cfg.sweep, c))?;
    let base = cfg.out.join(stem(path));
    let named = |suffix: &str| PathBuf::from(format!("{}.{suffix}", base.display()));

    let heatmap_png = named("heatmap.png");
    loc.heatmap.save_gray(&heatmap_png)?;
    let fused_png = named("fused.png");
    fuse(&rgb, &loc.heatmap, cfg.fuse_alpha)?.save(&fused_png)?;
    let peaks_json = named("peaks.json");
    std::fs::write(&peaks_json, loc.peaks.to_json())
        .with_context(|| format!("writing {}", peaks_json.display()))?;
    let heatmap_raw = if raw {
        let p = named("heatmap.raw");
        loc.heatmap.save_raw(&p)?;
        Some(p)
    } else {
        None
    };
    Ok(LocalisedImage {
        image: path.to_path_buf(),
        peaks: loc.peaks.len(),
        heatmap_png,
        fused_png,
        peaks_json,
        heatmap_raw,
    })
}

#[derive(Serialize)]
struct CurveRow<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    image: Option<&'a str>,
    threshold: f64,
    tp: usize,
    fp: usize,
    #[serde(rename = "fn")]
    fn_: usize,
    precision: f64,
    recall: f64,
    f1: f64,
    f2: f64,
}

impl<'a> CurveRow<'a> {
    fn new(image: Option<&'a str>, r: &MatchReport) -> Self {
        Self {
            image,
            threshold: r.threshold,
            tp: r.tp,
            fp: r.fp,
            fn_: r.fn_,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            f2: r.f2,
        }
    }
}

fn write_curve(path: &Path, curve: &MetricCurve) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in &curve.reports {
        w.serialize(CurveRow::new(None, r))?;
    }
    w.flush()?;
    Ok(())
}

/// Headline numbers: micro-averaged reports at thresholds 1 and 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Headline {
    pub at_one: MatchReport,
    pub at_two: MatchReport,
}

impl Headline {
    const GRID: [f64; 2] = [1.0, 2.0];

    fn from_curve(c: &MetricCurve) -> Self {
        Self {
            at_one: c.reports[0],
            at_two: c.reports[1],
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub per_image: Vec<(PathBuf, MetricCurve)>,
    pub aggregate: MetricCurve,
    pub headline: Headline,
    pub per_image_csv: PathBuf,
    pub aggregate_csv: PathBuf,
}

/// Localises every image under `root`, matches peaks against the sidecar
/// annotations, and writes `per_image.csv` and `aggregate.csv`.
pub fn evaluate(cfg: &RunConfig, root: &Path) -> Result<EvalSummary> {
    cfg.validate()?;
    let clf = Loaded::new(cfg)?;
    let data = dataset::load_dataset(root).with_context(|| format!("loading dataset {}", root.display()))?;
    ensure_dir(&cfg.out)?;
    let pool = worker_pool(cfg.workers)?;
    let curves: Vec<(MetricCurve, MetricCurve)> = pool.install(|| {
        data.par_iter()
            .map(|item| {
                let (_, gray) = load_image(&item.image_path)?;
                let loc = clf.with(&item.image_path, Some(&item.annotations), |c| {
                    run_pipeline(&gray, &cfg.sweep, c)
                })?;
                let preds = loc.peaks.locations();
                let full = eval::curve(&preds, &item.annotations, &cfg.thresholds, cfg.duplicates)?;
                let head = eval::curve(&preds, &item.annotations, &Headline::GRID, cfg.duplicates)?;
                Ok((full, head))
            })
            .collect::<Result<_>>()
    })?;

    let aggregate = MetricCurve::aggregate(curves.iter().map(|c| &c.0), &cfg.thresholds);
    let headline = Headline::from_curve(&MetricCurve::aggregate(curves.iter().map(|c| &c.1), &Headline::GRID));

    let per_image_csv = cfg.out.join("per_image.csv");
    let mut w = csv::Writer::from_path(&per_image_csv)
        .with_context(|| format!("writing {}", per_image_csv.display()))?;
    for (item, (curve, _)) in data.iter().zip(&curves) {
        let name = item.image_path.to_string_lossy();
        for r in &curve.reports {
            w.serialize(CurveRow::new(Some(&name), r))?;
        }
    }
    w.flush()?;
    let aggregate_csv = cfg.out.join("aggregate.csv");
    write_curve(&aggregate_csv, &aggregate)?;

    Ok(EvalSummary {
        per_image: data.into_iter().map(|d| d.image_path).zip(curves.into_iter().map(|c| c.0)).collect(),
        aggregate,
        headline,
        per_image_csv,
        aggregate_csv,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub sigma: f64,
    pub hmt: f64,
    pub win: usize,
    pub step: usize,
}

impl SweepPoint {
    pub fn file_name(&self) -> String {
        format!("sigma{}_hmt{}_win{}_step{}.csv", self.sigma, self.hmt, self.win, self.step)
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub point: SweepPoint,
    pub curve: MetricCurve,
    pub headline: Headline,
    pub csv: PathBuf,
}

#[derive(Serialize)]
struct IndexRow<'a> {
    sigma: f64,
    hmt: f64,
    win: usize,
    step: usize,
    file: &'a str,
    f1_at_1: f64,
    f2_at_1: f64,
    f1_at_2: f64,
    f2_at_2: f64,
}

/// Evaluates every (sigma, hmt, win, step) combination of the configured
/// grid. Each image's heatmap is computed once per (win, step) and reused
/// for all (sigma, hmt) pairs, since those only affect the fine stage.
/// Writes one CSV per combination plus `index.csv`.
pub fn sweep(cfg: &RunConfig, root: &Path) -> Result<Vec<SweepResult>> {
    cfg.validate()?;
    let clf = Loaded::new(cfg)?;
    let data = dataset::load_dataset(root).with_context(|| format!("loading dataset {}", root.display()))?;
    ensure_dir(&cfg.out)?;
    let g = &cfg.grid;
    let mut points = Vec::new();
    for &win in &g.win {
        for &step in &g.step {
            for &sigma in &g.sigma {
                for &hmt in &g.hmt {
                    points.push(SweepPoint { sigma, hmt, win, step });
                }
            }
        }
    }
    let configs: Vec<SweepConfig> = points
        .iter()
        .map(|p| SweepConfig {
            bilateral: cfg.sweep.bilateral,
            ..SweepConfig::square(p.win, p.step, p.sigma, p.hmt)
        })
        .collect();
    for c in &configs {
        c.validate().map_err(|e| ConfigError(e.to_string()))?;
    }

    let pool = worker_pool(cfg.workers)?;
    // Per image, one (full, headline) curve pair per point.
    let per_image: Vec<Vec<(MetricCurve, MetricCurve)>> = pool.install(|| {
        data.par_iter()
            .map(|item| {
                let (_, gray) = load_image(&item.image_path)?;
                let mut out = Vec::with_capacity(points.len());
                let mut i = 0;
                while i < points.len() {
                    let (win, step) = (points[i].win, points[i].step);
                    let heat = clf.with(&item.image_path, Some(&item.annotations), |c| {
                        calc_heatmap(&gray, &configs[i], c)
                    })?;
                    while i < points.len() && (points[i].win, points[i].step) == (win, step) {
                        let preds = refine(&heat, &configs[i])?.locations();
                        out.push((
                            eval::curve(&preds, &item.annotations, &cfg.thresholds, cfg.duplicates)?,
                            eval::curve(&preds, &item.annotations, &Headline::GRID, cfg.duplicates)?,
                        ));
                        i += 1;
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()
    })
    .with_context(|| format!("sweeping {}", root.display()))?;

    let mut results = Vec::with_capacity(points.len());
    for (k, point) in points.iter().enumerate() {
        let curve = MetricCurve::aggregate(per_image.iter().map(|v| &v[k].0), &cfg.thresholds);
        let headline = Headline::from_curve(&MetricCurve::aggregate(
            per_image.iter().map(|v| &v[k].1),
            &Headline::GRID,
        ));
        let csv = cfg.out.join(point.file_name());
        write_curve(&csv, &curve)?;
        results.push(SweepResult {
            point: *point,
            curve,
            headline,
            csv,
        });
    }

    let index = cfg.out.join("index.csv");
    let mut w = csv::Writer::from_path(&index).with_context(|| format!("writing {}", index.display()))?;
    for r in &results {
        let file = r.point.file_name();
        w.serialize(IndexRow {
            sigma: r.point.sigma,
            hmt: r.point.hmt,
            win: r.point.win,
            step: r.point.step,
            file: &file,
            f1_at_1: r.headline.at_one.f1,
            f2_at_1: r.headline.at_one.f2,
            f1_at_2: r.headline.at_two.f1,
            f2_at_2: r.headline.at_two.f2,
        })?;
    }
    w.flush()?;
    Ok(results)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub n_trees: usize,
    pub max_depth: usize,
    pub model: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub samples: usize,
    pub positives: usize,
    /// Fraction of training samples the model labels correctly.
    pub accuracy: f64,
    pub model: PathBuf,
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| ConfigError(format!("cannot read sample directory {}: {e}", dir.display())))?;
    let mut paths = Vec::new();
    for e in entries {
        let p = e?.path();
        if p.is_file() && is_image_path(&p) {
            paths.push(p);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Trains on whole images from `<samples>/artcode` (positives) and
/// `<samples>/non_artcode` (negatives) and writes the model file.
pub fn train(cfg: &RunConfig, samples: &Path, opts: &TrainOptions) -> Result<TrainSummary> {
    cfg.features.validate().map_err(|e| ConfigError(e.to_string()))?;
    let pos = list_images(&samples.join("artcode"))?;
    let neg = list_images(&samples.join("non_artcode"))?;
    let labelled: Vec<(PathBuf, bool)> = pos
        .into_iter()
        .map(|p| (p, true))
        .chain(neg.into_iter().map(|p| (p, false)))
        .collect();

    let pool = worker_pool(cfg.workers)?;
    let set: Vec<(FeatureVector, bool)> = pool.install(|| {
        labelled
            .par_iter()
            .map(|(p, y)| {
                let (_, gray) = load_image(p)?;
                let f = window_features(&gray, gray.bounds(), &cfg.features)
                    .with_context(|| p.display().to_string())?;
                Ok((f, *y))
            })
            .collect::<Result<_>>()
    })?;

    let model = visionguide_core::classify::train(&set, opts.n_trees, opts.max_depth, cfg.seed)?;
    let correct = set
        .iter()
        .map(|(f, y)| model.classify(f).map(|c| c.is_artcode == *y))
        .collect::<visionguide_core::Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&ok| ok)
        .count();
    if let Some(parent) = opts.model.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    ModelFile::new(cfg.features, model).save(&opts.model)?;
    Ok(TrainSummary {
        samples: set.len(),
        positives: set.iter().filter(|(_, y)| *y).count(),
        accuracy: correct as f64 / set.len() as f64,
        model: opts.model.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub min_markers: usize,
    pub max_markers: usize,
    pub min_radius: f64,
    pub max_radius: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            count: 20,
            width: 2000,
            height: 2000,
            min_markers: 2,
            max_markers: 4,
            min_radius: 100.0,
            max_radius: 400.0,
        }
    }
}

impl SynthOptions {
    /// Scene `seed` gets `min + seed mod (max - min + 1)` markers.
    pub fn markers_for(&self, seed: u64) -> usize {
        let span = (self.max_markers - self.min_markers + 1) as u64;
        self.min_markers + (seed % span) as usize
    }
}

/// Writes scenes `scene_<seed>.png` + `.json` for seeds
/// `cfg.seed .. cfg.seed + count`.
pub fn synth(cfg: &RunConfig, opts: &SynthOptions) -> Result<Vec<PathBuf>> {
    if opts.min_markers > opts.max_markers {
        return Err(ConfigError("min markers exceeds max markers".into()).into());
    }
    if cfg.workers == 0 {
        return Err(ConfigError("workers must be at least 1".into()).into());
    }
    ensure_dir(&cfg.out)?;
    let pool = worker_pool(cfg.workers)?;
    let seeds: Vec<u64> = (cfg.seed..cfg.seed + opts.count as u64).collect();
    pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let scene = dataset::generate_scene(
                    opts.width,
                    opts.height,
                    opts.markers_for(seed),
                    (opts.min_radius, opts.max_radius),
                    seed,
                )
                .with_context(|| format!("scene {seed}"))?;
                Ok(scene.export(&cfg.out, &format!("scene_{seed:03}"))?)
            })
            .collect()
    })
}
