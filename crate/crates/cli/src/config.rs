//! Run configuration: defaults, an optional TOML file, then flag overrides.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use visionguide_core::classify::FeatureConfig;
use visionguide_core::eval::{default_thresholds, validate_thresholds, DuplicatePolicy};
use visionguide_core::imaging::BilateralParams;
use visionguide_core::SweepConfig;

use crate::ConfigError;

/// Where window decisions come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierSource {
    /// Ground truth read from each image's sidecar annotations.
    Oracle,
    /// A trained model file.
    Model(PathBuf),
}

impl ClassifierSource {
    pub fn parse(s: &str) -> Self {
        if s.eq_ignore_ascii_case("oracle") {
            ClassifierSource::Oracle
        } else {
            ClassifierSource::Model(PathBuf::from(s))
        }
    }
}

/// Everything a command needs, fully resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sweep: SweepConfig,
    pub classifier: ClassifierSource,
    pub features: FeatureConfig,
    /// Oracle positives need this fraction of a disk inside the window.
    pub overlap_fraction: f64,
    pub thresholds: Vec<f64>,
    pub duplicates: DuplicatePolicy,
    pub out: PathBuf,
    pub workers: usize,
    pub seed: u64,
    /// Heatmap opacity in the fused overlay.
    pub fuse_alpha: f64,
    pub grid: SweepGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sweep: SweepConfig::default(),
            classifier: ClassifierSource::Oracle,
            features: FeatureConfig::default(),
            overlap_fraction: 0.25,
            thresholds: default_thresholds(),
            duplicates: DuplicatePolicy::CountAll,
            out: PathBuf::from("out"),
            workers: 1,
            seed: 0,
            fuse_alpha: 0.5,
            grid: SweepGrid::default(),
        }
    }
}

/// Candidate values for the parameter sweep.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub sigma: Vec<f64>,
    pub hmt: Vec<f64>,
    pub win: Vec<usize>,
    pub step: Vec<usize>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            sigma: vec![5.0, 10.0, 15.0, 20.0],
            hmt: vec![5.0, 10.0, 15.0, 20.0],
            win: vec![200, 400, 600, 800],
            step: vec![20, 40, 60, 80],
        }
    }
}

/// The TOML file. Every key is optional; unknown keys are an error.
///
/// ```toml
/// win = 800          # or win_h / win_w
/// step = 40          # or istep / jstep
/// sigma = 10.0
/// hmt = 10.0
/// classifier = "oracle"   # or a model path, relative to this file
/// overlap_fraction = 0.25
/// thresholds = [0.5, 1.0, 2.0]
/// duplicates = "count_all"  # or "first_only"
/// out = "results"
/// workers = 4
/// seed = 7
/// fuse_alpha = 0.5
///
/// [bilateral]
/// spatial_sigma = 3.0
/// range_sigma = 50.0
/// neighborhood_radius = 5
///
/// [features]
/// n_bins = 9
/// grid = 4
/// resize = 64
///
/// [grid]
/// sigma = [5.0, 10.0]
/// hmt = [5.0, 10.0]
/// win = [400, 800]
/// step = [40, 80]
/// ```
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub win: Option<usize>,
    pub win_h: Option<usize>,
    pub win_w: Option<usize>,
    pub step: Option<usize>,
    pub istep: Option<usize>,
    pub jstep: Option<usize>,
    pub sigma: Option<f64>,
    pub hmt: Option<f64>,
    pub classifier: Option<String>,
    pub overlap_fraction: Option<f64>,
    pub thresholds: Option<Vec<f64>>,
    pub duplicates: Option<DuplicatePolicy>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub fuse_alpha: Option<f64>,
    pub bilateral: Option<BilateralParams>,
    pub features: Option<FeatureConfig>,
    pub grid: Option<SweepGrid>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| ConfigError(format!("invalid config {}: {e}", path.display())))?;
        // Relative paths in the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(c) = &cfg.classifier {
            if let ClassifierSource::Model(p) = ClassifierSource::parse(c) {
                cfg.classifier = Some(base.join(p).to_string_lossy().into_owned());
            }
        }
        if let Some(o) = &cfg.out {
            cfg.out = Some(base.join(o));
        }
        Ok(cfg)
    }
}

/// Flag values; `None` means "not given".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub win: Option<usize>,
    pub step: Option<usize>,
    pub sigma: Option<f64>,
    pub hmt: Option<f64>,
    pub classifier: Option<String>,
    pub thresholds: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

impl RunConfig {
    /// Applies defaults, then the file named by `--config`, then the flags.
    pub fn resolve(flags: &Overrides) -> Result<Self, ConfigError> {
        let file = match &flags.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let mut cfg = RunConfig::default();
        cfg.apply_file(file);
        cfg.apply_flags(flags);
        Ok(cfg)
    }

    fn apply_file(&mut self, f: FileConfig) {
        let s = &mut self.sweep;
        if let Some(b) = f.bilateral {
            s.bilateral = b;
        }
        if let Some(w) = f.win {
            (s.win_h, s.win_w) = (w, w);
        }
        s.win_h = f.win_h.unwrap_or(s.win_h);
        s.win_w = f.win_w.unwrap_or(s.win_w);
        if let Some(st) = f.step {
            (s.istep, s.jstep) = (st, st);
        }
        s.istep = f.istep.unwrap_or(s.istep);
        s.jstep = f.jstep.unwrap_or(s.jstep);
        s.gaussian_sigma = f.sigma.unwrap_or(s.gaussian_sigma);
        s.hmt_threshold = f.hmt.unwrap_or(s.hmt_threshold);
        if let Some(c) = f.classifier {
            self.classifier = ClassifierSource::parse(&c);
        }
        self.overlap_fraction = f.overlap_fraction.unwrap_or(self.overlap_fraction);
        self.thresholds = f.thresholds.unwrap_or(std::mem::take(&mut self.thresholds));
        self.duplicates = f.duplicates.unwrap_or(self.duplicates);
        self.out = f.out.unwrap_or(std::mem::take(&mut self.out));
        self.workers = f.workers.unwrap_or(self.workers);
        self.seed = f.seed.unwrap_or(self.seed);
        self.fuse_alpha = f.fuse_alpha.unwrap_or(self.fuse_alpha);
        self.features = f.features.unwrap_or(self.features);
        self.grid = f.grid.unwrap_or(std::mem::take(&mut self.grid));
    }

    fn apply_flags(&mut self, o: &Overrides) {
        let s = &mut self.sweep;
        if let Some(w) = o.win {
            (s.win_h, s.win_w) = (w, w);
        }
        if let Some(st) = o.step {
            (s.istep, s.jstep) = (st, st);
        }
        s.gaussian_sigma = o.sigma.unwrap_or(s.gaussian_sigma);
        s.hmt_threshold = o.hmt.unwrap_or(s.hmt_threshold);
        if let Some(c) = &o.classifier {
            self.classifier = ClassifierSource::parse(c);
        }
        if let Some(t) = &o.thresholds {
            self.thresholds = t.clone();
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        self.workers = o.workers.unwrap_or(self.workers);
        self.seed = o.seed.unwrap_or(self.seed);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError(m));
        self.sweep.validate().or_else(|e| bad(e.to_string()))?;
        self.features.validate().or_else(|e| bad(e.to_string()))?;
        validate_thresholds(&self.thresholds).or_else(|e| bad(e.to_string()))?;
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if !(self.overlap_fraction > 0.0 && self.overlap_fraction <= 1.0) {
            return bad(format!("overlap_fraction must be in (0, 1], got {}", self.overlap_fraction));
        }
        if !(0.0..=1.0).contains(&self.fuse_alpha) {
            return bad(format!("fuse_alpha must be in [0, 1], got {}", self.fuse_alpha));
        }
        if let ClassifierSource::Model(p) = &self.classifier {
            if !p.is_file() {
                return bad(format!("model file {} does not exist", p.display()));
            }
        }
        let g = &self.grid;
        if g.sigma.is_empty() || g.hmt.is_empty() || g.win.is_empty() || g.step.is_empty() {
            return bad("every sweep grid axis needs at least one value".into());
        }
        Ok(())
    }
}

/// Parses `0.5,1,2` or a range `lo:step:hi` (inclusive, e.g. `0.1:0.1:2`).
pub fn parse_thresholds(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if s.contains(':') {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<Result<_, _>>()?;
        let [lo, step, hi] = parts[..] else {
            return Err("range must be lo:step:hi".into());
        };
        if !(step > 0.0 && lo <= hi) {
            return Err("range needs step > 0 and lo <= hi".into());
        }
        // Count steps first so accumulated rounding can't add or drop one,
        // and snap to 12 decimals so `0.1:0.1:2` hits 1.0 exactly.
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        return Ok((0..=n)
            .map(|k| ((lo + k as f64 * step) * 1e12).round() / 1e12)
            .collect());
    }
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_flags_over_file_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "win = 400\nstep = 20\nsigma = 5.0\nworkers = 3\n").unwrap();
        let flags = Overrides {
            config: Some(path),
            step: Some(60),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&flags).unwrap();
        assert_eq!((cfg.sweep.win_h, cfg.sweep.win_w), (400, 400));
        assert_eq!((cfg.sweep.istep, cfg.sweep.jstep), (60, 60));
        assert_eq!(cfg.sweep.gaussian_sigma, 5.0);
        assert_eq!(cfg.sweep.hmt_threshold, 10.0);
        assert_eq!(cfg.workers, 3);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "windo = 400\n").unwrap();
        let flags = Overrides {
            config: Some(path),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&flags).is_err());
    }

    #[test]
    fn model_path_is_relative_to_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "classifier = \"m.json\"\nout = \"res\"\n").unwrap();
        let cfg = RunConfig::resolve(&Overrides {
            config: Some(path),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(cfg.classifier, ClassifierSource::Model(dir.path().join("m.json")));
        assert_eq!(cfg.out, dir.path().join("res"));
        assert!(cfg.validate().is_err(), "model file does not exist");
    }

    #[test]
    fn empty_thresholds_fail_validation() {
        let cfg = RunConfig {
            thresholds: vec![],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn threshold_syntax() {
        assert_eq!(parse_thresholds("0.5, 1,2").unwrap(), vec![0.5, 1.0, 2.0]);
        assert_eq!(parse_thresholds("").unwrap(), Vec::<f64>::new());
        let r = parse_thresholds("0.1:0.1:2").unwrap();
        assert_eq!(r.len(), 20);
        assert_eq!((r[9], r[19]), (1.0, 2.0));
        assert!(parse_thresholds("1:0:2").is_err());
        assert!(parse_thresholds("a").is_err());
    }
}
