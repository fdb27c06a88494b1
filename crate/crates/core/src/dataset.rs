//! Annotated image collections and synthetic test scenes.
//!
//! On disk a dataset is a flat directory of `<name>.{jpg,jpeg,png}` images,
//! each with a `<name>.json` sidecar of the form
//!
//! ```json
//! { "artcodes": [ { "x": 1520.0, "y": 980.5, "radius": 210.0 } ] }
//! ```
//!
//! Coordinates are in native-resolution pixels, `x` being the column. The
//! reader also accepts `{ "cx", "cy", "r" }` entries.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::CircleAnnotation;
use crate::imaging::RgbImage;

pub const IMAGE_EXTENSIONS: [&str; 3] = ["jpg", "jpeg", "png"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedImage {
    pub image_path: PathBuf,
    pub width: usize,
    pub height: usize,
    pub annotations: Vec<CircleAnnotation>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawCircle {
    Canonical { x: f64, y: f64, radius: f64 },
    Short { cx: f64, cy: f64, r: f64 },
}

#[derive(Deserialize)]
struct RawFile {
    artcodes: Vec<RawCircle>,
}

#[derive(Serialize)]
struct OutFile<'a> {
    artcodes: &'a [CircleAnnotation],
}

pub fn parse_annotations(text: &str, path: &Path) -> Result<Vec<CircleAnnotation>> {
    let raw: RawFile = serde_json::from_str(text).map_err(|e| Error::MalformedJson {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(raw
        .artcodes
        .into_iter()
        .map(|c| match c {
            RawCircle::Canonical { x, y, radius } => CircleAnnotation { x, y, radius },
            RawCircle::Short { cx, cy, r } => CircleAnnotation {
                x: cx,
                y: cy,
                radius: r,
            },
        })
        .collect())
}

pub fn read_annotations(path: &Path) -> Result<Vec<CircleAnnotation>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingAnnotation(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    parse_annotations(&text, path)
}

pub fn annotations_json(annotations: &[CircleAnnotation]) -> String {
    serde_json::to_string_pretty(&OutFile {
        artcodes: annotations,
    })
    .expect("annotations serialise")
}

pub fn write_annotations(path: &Path, annotations: &[CircleAnnotation]) -> Result<()> {
    std::fs::write(path, annotations_json(annotations)).map_err(|e| Error::io(path, e))
}

pub fn sidecar_path(image_path: &Path) -> PathBuf {
    image_path.with_extension("json")
}

/// Checks every circle has a positive radius and a centre inside the image.
pub fn validate_annotations(
    annotations: &[CircleAnnotation],
    width: usize,
    height: usize,
    path: &Path,
) -> Result<()> {
    for (i, a) in annotations.iter().enumerate() {
        let problem = if !(a.radius.is_finite() && a.radius > 0.0) {
            Some(format!("annotation {i}: radius {} is not positive", a.radius))
        } else if !(a.x.is_finite() && a.y.is_finite())
            || a.x < 0.0
            || a.y < 0.0
            || a.x > width as f64
            || a.y > height as f64
        {
            Some(format!(
                "annotation {i}: centre ({}, {}) outside {width}x{height} image",
                a.x, a.y
            ))
        } else {
            None
        };
        if let Some(message) = problem {
            return Err(Error::InvariantViolation {
                path: path.to_path_buf(),
                message,
            });
        }
    }
    Ok(())
}

pub fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Loads one image's metadata and sidecar annotations.
pub fn load_annotated(image_path: &Path) -> Result<AnnotatedImage> {
    let (w, h) = image::image_dimensions(image_path).map_err(|source| Error::Codec {
        path: image_path.to_path_buf(),
        source,
    })?;
    let json = sidecar_path(image_path);
    let annotations = read_annotations(&json).map_err(|e| match e {
        Error::MissingAnnotation(_) => Error::MissingAnnotation(image_path.to_path_buf()),
        other => other,
    })?;
    validate_annotations(&annotations, w as usize, h as usize, &json)?;
    Ok(AnnotatedImage {
        image_path: image_path.to_path_buf(),
        width: w as usize,
        height: h as usize,
        annotations,
    })
}

/// Every image under `root` (non-recursive) with its annotations, sorted by
/// path.
pub fn load_dataset(root: &Path) -> Result<Vec<AnnotatedImage>> {
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.is_file() && is_image_path(&path) {
            paths.push(path);
        }
    }
    paths.sort();
    paths.par_iter().map(|p| load_annotated(p)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Radius histogram with bins `[k * w, (k + 1) * w)` from zero up to the
/// bin holding the largest radius.
pub fn size_histogram(dataset: &[AnnotatedImage], bin_width: f64) -> Result<Vec<HistogramBin>> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    let radii: Vec<f64> = dataset
        .iter()
        .flat_map(|d| d.annotations.iter().map(|a| a.radius))
        .collect();
    let Some(max_bin) = radii.iter().map(|r| (r / bin_width).floor() as usize).max() else {
        return Ok(Vec::new());
    };
    let mut counts = vec![0usize; max_bin + 1];
    for r in radii {
        counts[(r / bin_width).floor() as usize] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            lo: k as f64 * bin_width,
            hi: (k + 1) as f64 * bin_width,
            count,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub image: RgbImage,
    pub annotations: Vec<CircleAnnotation>,
    pub seed: u64,
}

impl SyntheticScene {
    /// Writes `<dir>/<name>.png` and `<dir>/<name>.json`, returning the
    /// image path.
    pub fn export(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        let image_path = dir.join(format!("{name}.png"));
        self.image.save(&image_path)?;
        write_annotations(&sidecar_path(&image_path), &self.annotations)?;
        Ok(image_path)
    }
}

pub const PLACEMENT_ATTEMPTS: usize = 10_000;

/// Minimum centre distance between two markers: the gap between the disks
/// must be at least the larger diameter.
pub fn min_center_distance(r1: f64, r2: f64) -> f64 {
    r1 + r2 + 2.0 * r1.max(r2)
}

/// Renders a seeded scene: value-noise background plus `n_markers`
/// ring-and-spoke disks.
///
/// Radii are drawn uniformly from `radius_range` and centres uniformly where
/// the disk fits on the canvas; a candidate is rejected if it is closer to
/// an existing disk than [`min_center_distance`]. Fails after
/// [`PLACEMENT_ATTEMPTS`] rejected candidates in total.
pub fn generate_scene(
    canvas_w: usize,
    canvas_h: usize,
    n_markers: usize,
    radius_range: (f64, f64),
    seed: u64,
) -> Result<SyntheticScene> {
    let (rmin, rmax) = radius_range;
    if canvas_w == 0 || canvas_h == 0 {
        return Err(Error::InvalidParameter("canvas must be non-empty".into()));
    }
    if n_markers > 0
        && !(rmin.is_finite() && rmin > 0.0 && rmax >= rmin && 2.0 * rmin <= canvas_w.min(canvas_h) as f64)
    {
        return Err(Error::InvalidParameter(format!(
            "radius range {radius_range:?} does not fit a {canvas_w}x{canvas_h} canvas"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut annotations: Vec<CircleAnnotation> = Vec::with_capacity(n_markers);
    let mut attempts = 0;
    while annotations.len() < n_markers {
        if attempts == PLACEMENT_ATTEMPTS {
            return Err(Error::PlacementInfeasible {
                requested: n_markers,
                attempts,
            });
        }
        attempts += 1;
        let max_r = rmax.min(canvas_w.min(canvas_h) as f64 / 2.0);
        let r = if max_r > rmin { rng.random_range(rmin..=max_r) } else { rmin };
        let x = rng.random_range(r..=canvas_w as f64 - r);
        let y = rng.random_range(r..=canvas_h as f64 - r);
        let clear = annotations
            .iter()
            .all(|a| (a.x - x).hypot(a.y - y) >= min_center_distance(a.radius, r));
        if clear {
            annotations.push(CircleAnnotation { x, y, radius: r });
        }
    }

    let mut image = render_background(canvas_w, canvas_h, &mut rng);
    for a in &annotations {
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        draw_marker(&mut image, a, phase);
    }
    Ok(SyntheticScene {
        image,
        annotations,
        seed,
    })
}

/// Two octaves of bilinear value noise with a slight colour tint.
fn render_background(w: usize, h: usize, rng: &mut ChaCha8Rng) -> RgbImage {
    struct Octave {
        cell: usize,
        amp: f64,
        cols: usize,
        lattice: Vec<f64>,
    }
    let octaves: Vec<Octave> = [(96usize, 70.0), (24, 18.0)]
        .into_iter()
        .map(|(cell, amp)| {
            let cols = w / cell + 2;
            let rows = h / cell + 2;
            let lattice = (0..cols * rows).map(|_| rng.random_range(-1.0..1.0)).collect();
            Octave {
                cell,
                amp,
                cols,
                lattice,
            }
        })
        .collect();
    let tint: [f64; 3] = [
        rng.random_range(0.9..1.1),
        rng.random_range(0.9..1.1),
        rng.random_range(0.9..1.1),
    ];
    let base = 130.0;
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);

    let mut data = vec![0u8; w * h * 3];
    data.par_chunks_mut(w * 3).enumerate().for_each(|(row, out)| {
        for col in 0..w {
            let mut v = base;
            for o in &octaves {
                let (gy, gx) = (row / o.cell, col / o.cell);
                let fy = smooth((row % o.cell) as f64 / o.cell as f64);
                let fx = smooth((col % o.cell) as f64 / o.cell as f64);
                let at = |y: usize, x: usize| o.lattice[y * o.cols + x];
                let top = at(gy, gx) + (at(gy, gx + 1) - at(gy, gx)) * fx;
                let bot = at(gy + 1, gx) + (at(gy + 1, gx + 1) - at(gy + 1, gx)) * fx;
                v += o.amp * (top + (bot - top) * fy);
            }
            for k in 0..3 {
                out[col * 3 + k] = crate::imaging::quantize(v * tint[k]);
            }
        }
    });
    RgbImage::new(w, h, data).expect("buffer sized to canvas")
}

/// Concentric rings XOR angular spokes inside the disk, with a dark rim.
fn draw_marker(img: &mut RgbImage, a: &CircleAnnotation, phase: f64) {
    const RINGS: f64 = 6.0;
    const SPOKES: f64 = 12.0;
    let r = a.radius;
    let y0 = (a.y - r).floor().max(0.0) as usize;
    let y1 = ((a.y + r).ceil() as usize).min(img.height() - 1);
    let x0 = (a.x - r).floor().max(0.0) as usize;
    let x1 = ((a.x + r).ceil() as usize).min(img.width() - 1);
    for row in y0..=y1 {
        for col in x0..=x1 {
            let (dx, dy) = (col as f64 + 0.5 - a.x, row as f64 + 0.5 - a.y);
            let d = dx.hypot(dy);
            if d > r {
                continue;
            }
            let rgb = if d > r * 0.94 {
                [15, 15, 15]
            } else {
                let ring = (d / r * RINGS) as usize;
                let angle = dy.atan2(dx) + phase;
                let spoke = (angle.rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU * SPOKES) as usize;
                if (ring + spoke) % 2 == 0 {
                    [25, 25, 30]
                } else {
                    [240, 235, 225]
                }
            };
            img.put(row, col, rgb);
        }
    }
}
