//! Coarse localisation: sweep a window over the image, classify every
//! position, and accumulate positive scores into a per-pixel heatmap.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::WindowClassifier;
use crate::error::{Error, Result};
use crate::imaging::{bilateral_filter, clamp_window, quantize, BilateralParams, GrayImage, Rect, RgbImage};

/// Window geometry, steps, and the fine-localisation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub win_h: usize,
    pub win_w: usize,
    /// Row step.
    pub istep: usize,
    /// Column step.
    pub jstep: usize,
    pub gaussian_sigma: f64,
    /// H-maxima height on the normalised [0, 255] scale.
    pub hmt_threshold: f64,
    pub bilateral: BilateralParams,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            win_h: 800,
            win_w: 800,
            istep: 40,
            jstep: 40,
            gaussian_sigma: 10.0,
            hmt_threshold: 10.0,
            bilateral: BilateralParams::default(),
        }
    }
}

impl SweepConfig {
    pub fn square(win: usize, step: usize, sigma: f64, hmt: f64) -> Self {
        Self {
            win_h: win,
            win_w: win,
            istep: step,
            jstep: step,
            gaussian_sigma: sigma,
            hmt_threshold: hmt,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.win_h == 0 || self.win_w == 0 || self.istep == 0 || self.jstep == 0 {
            return Err(Error::InvalidParameter(
                "window size and steps must be positive".into(),
            ));
        }
        if !(self.gaussian_sigma.is_finite() && self.gaussian_sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gaussian sigma must be positive, got {}",
                self.gaussian_sigma
            )));
        }
        if !(self.hmt_threshold.is_finite() && self.hmt_threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "H-maxima threshold must be positive, got {}",
                self.hmt_threshold
            )));
        }
        self.bilateral.validate()
    }
}

/// Start offsets along one axis: `0, step, 2*step, ...` up to `n - win`, plus
/// `n - win` itself when the last step would overshoot.
pub fn axis_positions(n: usize, win: usize, step: usize) -> Vec<usize> {
    assert!(win <= n && step > 0 && win > 0);
    let last = n - win;
    let mut out: Vec<usize> = (0..=last).step_by(step).collect();
    if *out.last().expect("at least position 0") != last {
        out.push(last);
    }
    out
}

/// Number of unclamped positions along one axis.
pub fn interior_count(n: usize, win: usize, step: usize) -> usize {
    (n - win) / step + 1
}

/// Row-major window rectangles for an `image_h x image_w` image.
pub fn window_positions(image_h: usize, image_w: usize, cfg: &SweepConfig) -> Result<Vec<Rect>> {
    cfg.validate()?;
    clamp_window(image_h, image_w, 0, 0, cfg.win_h, cfg.win_w)?;
    let rows = axis_positions(image_h, cfg.win_h, cfg.istep);
    let cols = axis_positions(image_w, cfg.win_w, cfg.jstep);
    Ok(rows
        .iter()
        .flat_map(|&top| cols.iter().map(move |&left| Rect::new(top, left, cfg.win_h, cfg.win_w)))
        .collect())
}

/// Accumulated classifier scores, same size as the source image.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Heatmap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height} heatmap",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "heatmap values must be finite and non-negative, got {v}"
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// View as an image; fails unless every value is within [0, 255].
    pub fn to_gray(&self) -> Result<GrayImage> {
        GrayImage::new(self.width, self.height, self.values.clone())
    }

    pub fn from_gray(img: &GrayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            values: img.pixels().to_vec(),
        }
    }

    /// Writes the normalised heatmap as an 8-bit grayscale image.
    pub fn save_gray(&self, path: &Path) -> Result<()> {
        normalize(self).to_gray()?.save(path)
    }

    /// Writes the normalised heatmap through [`colormap`].
    pub fn save_color(&self, path: &Path) -> Result<()> {
        let n = normalize(self);
        let table = colormap();
        let mut data = Vec::with_capacity(self.values.len() * 3);
        for &v in &n.values {
            data.extend_from_slice(&table[quantize(v) as usize]);
        }
        RgbImage::new(self.width, self.height, data)?.save(path)
    }

    /// Raw float encoding: `b"VGHM"`, width and height as little-endian
    /// `u32`, then `width * height` little-endian `f64` values, row-major.
    pub fn write_raw(&self, mut out: impl Write) -> std::io::Result<()> {
        out.write_all(RAW_MAGIC)?;
        out.write_all(&(self.width as u32).to_le_bytes())?;
        out.write_all(&(self.height as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for &v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)
    }

    pub fn read_raw(mut input: impl Read) -> Result<Self> {
        let bad = |m: &str| Error::InvalidParameter(format!("raw heatmap: {m}"));
        let mut header = [0u8; 12];
        input
            .read_exact(&mut header)
            .map_err(|_| bad("truncated header"))?;
        if &header[..4] != RAW_MAGIC {
            return Err(bad("bad magic"));
        }
        let width = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let mut body = Vec::new();
        input
            .read_to_end(&mut body)
            .map_err(|e| bad(&e.to_string()))?;
        if body.len() != width * height * 8 {
            return Err(bad("payload length does not match dimensions"));
        }
        let values = body
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Self::new(width, height, values)
    }

    pub fn save_raw(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_raw(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load_raw(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_raw(std::io::BufReader::new(file))
    }
}

pub const RAW_MAGIC: &[u8; 4] = b"VGHM";

/// Classifies one window per sweep position, in row-major order.
///
/// Positions are classified in parallel; each result is independent, so the
/// output does not depend on scheduling.
pub fn classify_windows(
    img: &GrayImage,
    cfg: &SweepConfig,
    classifier: &dyn WindowClassifier,
) -> Result<Vec<(Rect, f64)>> {
    let windows = window_positions(img.height(), img.width(), cfg)?;
    let filtered;
    let source = if classifier.needs_pixels() {
        filtered = bilateral_filter(img, &cfg.bilateral)?;
        &filtered
    } else {
        img
    };
    windows
        .into_par_iter()
        .map(|rect| {
            let c = classifier.classify_window(source, rect)?;
            Ok((rect, if c.is_artcode { c.score } else { 0.0 }))
        })
        .collect()
}

/// Builds the heatmap for a grayscale image.
///
/// The bilateral prefilter runs only if the classifier reads pixels. A
/// window's score is added to every cell it covers when it is classified
/// as an Artcode; negative windows contribute nothing.
pub fn calc_heatmap(
    img: &GrayImage,
    cfg: &SweepConfig,
    classifier: &dyn WindowClassifier,
) -> Result<Heatmap> {
    let scored = classify_windows(img, cfg, classifier)?;
    let rows = axis_positions(img.height(), cfg.win_h, cfg.istep);
    let cols = axis_positions(img.width(), cfg.win_w, cfg.jstep);
    let scores: Vec<f64> = scored.into_iter().map(|(_, s)| s).collect();
    Ok(accumulate(img.height(), img.width(), cfg, &rows, &cols, &scores))
}

/// Contiguous runs of pixels along one axis covered by the same window
/// range: `(pixel_start, pixel_end, first_window, end_window)`.
fn coverage_runs(n: usize, win: usize, starts: &[usize]) -> Vec<(usize, usize, usize, usize)> {
    let mut runs: Vec<(usize, usize, usize, usize)> = Vec::new();
    let (mut lo, mut hi) = (0, 0);
    for p in 0..n {
        while hi < starts.len() && starts[hi] <= p {
            hi += 1;
        }
        while lo < hi && starts[lo] + win <= p {
            lo += 1;
        }
        match runs.last_mut() {
            Some(last) if last.2 == lo && last.3 == hi => last.1 = p + 1,
            _ => runs.push((p, p + 1, lo, hi)),
        }
    }
    runs
}

/// Sums window scores per cell.
///
/// Cells covered by the same window rows and columns get identical sums, so
/// each distinct pair of coverage runs is summed once. The additions happen
/// in row-major window order, exactly as a naive per-window loop would do
/// them, so the result is bit-identical to that loop.
fn accumulate(
    height: usize,
    width: usize,
    cfg: &SweepConfig,
    rows: &[usize],
    cols: &[usize],
    scores: &[f64],
) -> Heatmap {
    let row_runs = coverage_runs(height, cfg.win_h, rows);
    let col_runs = coverage_runs(width, cfg.win_w, cols);
    let mut values = vec![0.0; width * height];
    for &(r0, r1, wi0, wi1) in &row_runs {
        let mut line = vec![0.0; width];
        for &(c0, c1, wj0, wj1) in &col_runs {
            let mut v = 0.0;
            for wi in wi0..wi1 {
                for &s in &scores[wi * cols.len() + wj0..wi * cols.len() + wj1] {
                    if s != 0.0 {
                        v += s;
                    }
                }
            }
            line[c0..c1].fill(v);
        }
        for r in r0..r1 {
            values[r * width..(r + 1) * width].copy_from_slice(&line);
        }
    }
    Heatmap {
        width,
        height,
        values,
    }
}

/// Affine map of `[min, max]` onto `[0, 255]`; constant input maps to zero.
pub fn normalize(h: &Heatmap) -> Heatmap {
    let (lo, hi) = (h.min(), h.max());
    let values = if hi > lo {
        let span = hi - lo;
        h.values
            .iter()
            .map(|&v| ((v - lo) / span * 255.0).clamp(0.0, 255.0))
            .collect()
    } else {
        vec![0.0; h.values.len()]
    };
    Heatmap {
        width: h.width,
        height: h.height,
        values,
    }
}

/// 256-entry "jet" table: entry `i` at `t = i / 255` has channels
/// `clamp(1.5 - |4t - c|, 0, 1) * 255` with `c = 3, 2, 1` for R, G, B,
/// rounded half up. Blue at 0, red at 255.
pub fn colormap() -> [[u8; 3]; 256] {
    let mut table = [[0u8; 3]; 256];
    for (i, entry) in table.iter_mut().enumerate() {
        let t = i as f64 / 255.0;
        let ch = |c: f64| quantize((1.5 - (4.0 * t - c).abs()).clamp(0.0, 1.0) * 255.0);
        *entry = [ch(3.0), ch(2.0), ch(1.0)];
    }
    table
}

/// Blends the colour-mapped normalised heatmap over `img`:
/// `out = (1 - alpha) * img + alpha * colormap(h)`, rounded half up.
pub fn fuse(img: &RgbImage, h: &Heatmap, alpha: f64) -> Result<RgbImage> {
    if img.width() != h.width() || img.height() != h.height() {
        return Err(Error::DimensionMismatch(format!(
            "image {}x{} vs heatmap {}x{}",
            img.width(),
            img.height(),
            h.width(),
            h.height()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be in [0, 1], got {alpha}"
        )));
    }
    let n = normalize(h);
    let table = colormap();
    let data = img
        .as_bytes()
        .chunks_exact(3)
        .zip(&n.values)
        .flat_map(|(px, &v)| {
            let cm = table[quantize(v) as usize];
            (0..3).map(move |k| quantize((1.0 - alpha) * f64::from(px[k]) + alpha * f64::from(cm[k])))
        })
        .collect();
    RgbImage::new(img.width(), img.height(), data)
}
