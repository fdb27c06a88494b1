use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::SynthOptions;
use crate::config::{parse_thresholds, Overrides};

#[derive(Debug, Parser)]
#[command(name = "visionguide", version, about = "Locate Artcode markers with a sliding-window heatmap")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command. Given flags override the config file,
/// which overrides the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML run configuration
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Square window side in pixels
    #[arg(long, global = true)]
    pub win: Option<usize>,
    /// Window step in pixels, both axes
    #[arg(long, global = true)]
    pub step: Option<usize>,
    /// Gaussian smoothing sigma for peak finding
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// H-maxima threshold on the 0..255 heatmap scale
    #[arg(long, global = true)]
    pub hmt: Option<f64>,
    /// `oracle` or a model file path
    #[arg(long, global = true, value_name = "PATH|oracle")]
    pub classifier: Option<String>,
    /// Normalised-distance thresholds: `0.5,1,2` or `lo:step:hi`
    #[arg(long, global = true, value_parser = parse_grid, allow_hyphen_values = true)]
    pub thresholds: Option<ThresholdGrid>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

/// Parsed `--thresholds` value; a newtype so clap treats it as one value.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGrid(pub Vec<f64>);

fn parse_grid(s: &str) -> Result<ThresholdGrid, String> {
    parse_thresholds(s).map(ThresholdGrid)
}

impl Common {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            config: self.config.clone(),
            win: self.win,
            step: self.step,
            sigma: self.sigma,
            hmt: self.hmt,
            classifier: self.classifier.clone(),
            thresholds: self.thresholds.as_ref().map(|t| t.0.clone()),
            out: self.out.clone(),
            workers: self.workers,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Heatmap, overlay and peaks for each image
    Localise {
        #[arg(required = true)]
        images: Vec<PathBuf>,
        /// Also write the exact accumulated heatmap as `<stem>.heatmap.raw`
        #[arg(long)]
        raw: bool,
    },
    /// Localise and score every annotated image in a directory
    Evaluate { dataset: PathBuf },
    /// Evaluate every combination of the configured parameter grid
    Sweep { dataset: PathBuf },
    /// Train a classifier from `artcode/` and `non_artcode/` sample folders
    Train {
        samples: PathBuf,
        /// Model file to write; defaults to `<out>/model.json`
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        trees: usize,
        #[arg(long, default_value_t = 12)]
        depth: usize,
    },
    /// Write synthetic annotated scenes
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(long, default_value_t = 2000)]
    pub width: usize,
    #[arg(long, default_value_t = 2000)]
    pub height: usize,
    #[arg(long, default_value_t = 2)]
    pub min_markers: usize,
    #[arg(long, default_value_t = 4)]
    pub max_markers: usize,
    #[arg(long, default_value_t = 100.0)]
    pub min_radius: f64,
    #[arg(long, default_value_t = 400.0)]
    pub max_radius: f64,
}

impl From<SynthArgs> for SynthOptions {
    fn from(a: SynthArgs) -> Self {
        Self {
            count: a.count,
            width: a.width,
            height: a.height,
            min_markers: a.min_markers,
            max_markers: a.max_markers,
            min_radius: a.min_radius,
            max_radius: a.max_radius,
        }
    }
}
