//! Fine localisation: Gaussian smoothing, H-maxima suppression, regional
//! maxima and their centroids.
//!
//! All neighbourhoods are 8-connected.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatmap::{Heatmap, SweepConfig};
use crate::imaging::gaussian_filter;

/// Real-valued grid without the non-negativity of [`Heatmap`]; the
/// H-maxima marker `h - threshold` goes below zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Surface {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height} surface",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("surface values must be finite".into()));
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

    /// 8-neighbours of `(row, col)` inside the grid.
    pub fn neighbors(&self, row: usize, col: usize) -> impl Iterator<Item = (usize, usize)> {
        let (h, w) = (self.height as isize, self.width as isize);
        let (r, c) = (row as isize, col as isize);
        NEIGHBORS_8.iter().filter_map(move |&(dr, dc)| {
            let (y, x) = (r + dr, c + dc);
            (y >= 0 && y < h && x >= 0 && x < w).then_some((y as usize, x as usize))
        })
    }
}

impl From<&Heatmap> for Surface {
    fn from(h: &Heatmap) -> Self {
        Self {
            width: h.width(),
            height: h.height(),
            values: h.values().to_vec(),
        }
    }
}

const NEIGHBORS_8: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Neighbours preceding a pixel in raster order.
const RASTER_BEFORE: [(isize, isize); 4] = [(-1, -1), (-1, 0), (-1, 1), (0, -1)];
/// Neighbours following a pixel in raster order.
const RASTER_AFTER: [(isize, isize); 4] = [(1, 1), (1, 0), (1, -1), (0, 1)];

/// Grayscale reconstruction by dilation of `marker` under `mask`.
///
/// Hybrid algorithm: one raster and one anti-raster pass, then FIFO
/// propagation from the pixels that can still grow. Only `min`/`max` touch
/// the values, so the result is exactly the geodesic fixpoint.
pub fn reconstruct_by_dilation(marker: &Surface, mask: &Surface) -> Result<Surface> {
    if marker.width != mask.width || marker.height != mask.height {
        return Err(Error::DimensionMismatch("marker and mask sizes differ".into()));
    }
    let (w, h) = (mask.width as isize, mask.height as isize);
    let m = &mask.values;
    let mut j: Vec<f64> = marker
        .values
        .iter()
        .zip(m)
        .map(|(&a, &b)| a.min(b))
        .collect();
    let idx = |r: isize, c: isize| (r * w + c) as usize;
    let inside = |r: isize, c: isize| r >= 0 && r < h && c >= 0 && c < w;

    for r in 0..h {
        for c in 0..w {
            let mut v = j[idx(r, c)];
            for &(dr, dc) in &RASTER_BEFORE {
                if inside(r + dr, c + dc) {
                    v = v.max(j[idx(r + dr, c + dc)]);
                }
            }
            j[idx(r, c)] = v.min(m[idx(r, c)]);
        }
    }

    let mut queue = VecDeque::new();
    for r in (0..h).rev() {
        for c in (0..w).rev() {
            let p = idx(r, c);
            let mut v = j[p];
            for &(dr, dc) in &RASTER_AFTER {
                if inside(r + dr, c + dc) {
                    v = v.max(j[idx(r + dr, c + dc)]);
                }
            }
            j[p] = v.min(m[p]);
            let jp = j[p];
            let grows = RASTER_AFTER.iter().any(|&(dr, dc)| {
                inside(r + dr, c + dc) && {
                    let q = idx(r + dr, c + dc);
                    j[q] < jp && j[q] < m[q]
                }
            });
            if grows {
                queue.push_back((r, c));
            }
        }
    }

    while let Some((r, c)) = queue.pop_front() {
        let jp = j[idx(r, c)];
        for &(dr, dc) in &NEIGHBORS_8 {
            let (y, x) = (r + dr, c + dc);
            if !inside(y, x) {
                continue;
            }
            let q = idx(y, x);
            if j[q] < jp && j[q] != m[q] {
                j[q] = jp.min(m[q]);
                queue.push_back((y, x));
            }
        }
    }

    Ok(Surface {
        width: mask.width,
        height: mask.height,
        values: j,
    })
}

/// H-maxima transform: reconstruction of `h - threshold` under `h`.
pub fn h_maxima(h: &Surface, threshold: f64) -> Result<Surface> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "H-maxima threshold must be positive, got {threshold}"
        )));
    }
    let marker = Surface {
        width: h.width,
        height: h.height,
        values: h.values.iter().map(|v| v - threshold).collect(),
    };
    reconstruct_by_dilation(&marker, h)
}

/// An 8-connected set of pixels, listed row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub label: usize,
    pub pixels: Vec<(usize, usize)>,
}

impl Region {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// `(min_row, min_col, max_row, max_col)`.
    pub fn bounding_box(&self) -> (usize, usize, usize, usize) {
        self.pixels.iter().fold(
            (usize::MAX, usize::MAX, 0, 0),
            |(r0, c0, r1, c1), &(r, c)| (r0.min(r), c0.min(c), r1.max(r), c1.max(c)),
        )
    }
}

/// Plateaus of constant value whose every outside 8-neighbour is strictly
/// lower. Labels follow the row-major order of each region's first pixel,
/// starting at 1.
pub fn regional_maxima(s: &Surface) -> Vec<Region> {
    let (w, h) = (s.width, s.height);
    let mut seen = vec![false; w * h];
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    let mut pixels = Vec::new();
    for start in 0..w * h {
        if seen[start] {
            continue;
        }
        let v = s.values[start];
        // A strictly higher neighbour rules the plateau out; leave it for
        // whichever of its pixels is reached next, nothing is emitted here.
        let (r0, c0) = (start / w, start % w);
        if s.neighbors(r0, c0).any(|(y, x)| s.values[y * w + x] > v) {
            continue;
        }
        pixels.clear();
        let mut is_max = true;
        seen[start] = true;
        stack.push((r0, c0));
        while let Some((r, c)) = stack.pop() {
            pixels.push((r, c));
            for (y, x) in s.neighbors(r, c) {
                let q = y * w + x;
                let u = s.values[q];
                if u == v {
                    if !seen[q] {
                        seen[q] = true;
                        stack.push((y, x));
                    }
                } else if u > v {
                    is_max = false;
                }
            }
        }
        if is_max {
            pixels.sort_unstable();
            regions.push(Region {
                label: regions.len() + 1,
                pixels: pixels.clone(),
            });
        }
    }
    regions
}

/// Mean `(row, col)` of each region.
pub fn centroids(regions: &[Region]) -> Vec<(f64, f64)> {
    regions
        .iter()
        .map(|reg| {
            let n = reg.pixels.len() as f64;
            let (sr, sc) = reg
                .pixels
                .iter()
                .fold((0.0, 0.0), |(a, b), &(r, c)| (a + r as f64, b + c as f64));
            (sr / n, sc / n)
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    /// `(row, col)` per peak.
    pub centroids: Vec<(f64, f64)>,
    pub regions: Vec<Region>,
}

/// Exported form of one peak: `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakRecord {
    pub x: f64,
    pub y: f64,
    pub region_size: usize,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    /// Peak locations as `(x, y)`, the order evaluation expects.
    pub fn locations(&self) -> Vec<(f64, f64)> {
        self.centroids.iter().map(|&(r, c)| (c, r)).collect()
    }

    pub fn records(&self) -> Vec<PeakRecord> {
        self.centroids
            .iter()
            .zip(&self.regions)
            .map(|(&(r, c), reg)| PeakRecord {
                x: c,
                y: r,
                region_size: reg.len(),
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.records()).expect("peaks serialise")
    }
}

/// Gaussian smoothing, H-maxima, regional maxima, centroids.
///
/// Expects a heatmap already normalised to [0, 255]. A plateau covering the
/// whole image (constant input) is not a peak.
pub fn find_peaks(h: &Heatmap, cfg: &SweepConfig) -> Result<PeakSet> {
    let gray = h.to_gray().map_err(|_| {
        Error::InvalidParameter("find_peaks expects a heatmap normalised to [0, 255]".into())
    })?;
    let smooth = gaussian_filter(&gray, cfg.gaussian_sigma)?;
    let smooth = Surface {
        width: smooth.width(),
        height: smooth.height(),
        values: smooth.pixels().to_vec(),
    };
    let suppressed = h_maxima(&smooth, cfg.hmt_threshold)?;
    let total = suppressed.width * suppressed.height;
    let mut regions: Vec<Region> = regional_maxima(&suppressed)
        .into_iter()
        .filter(|r| r.len() < total)
        .collect();
    for (i, r) in regions.iter_mut().enumerate() {
        r.label = i + 1;
    }
    Ok(PeakSet {
        centroids: centroids(&regions),
        regions,
    })
}
