//! Raster types and the preprocessing filters.
//!
//! Intensities are kept as `f64` in `[0, 255]` for the whole pipeline and
//! quantised to 8 bits (round half up) only when an image is written out.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub fn new(top: usize, left: usize, height: usize, width: usize) -> Self {
        Self {
            top,
            left,
            height,
            width,
        }
    }

    pub fn bottom(&self) -> usize {
        self.top + self.height
    }

    pub fn right(&self) -> usize {
        self.left + self.width
    }

    /// Whether `other` lies entirely inside `self`.
    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.top >= self.top
            && other.left >= self.left
            && other.bottom() <= self.bottom()
            && other.right() <= self.right()
    }
}

/// 8-bit RGB raster, row-major, three bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(Error::InvalidImage(format!(
                "expected {} bytes for {width}x{height} RGB, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = (row * self.width + col) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Codec {
            path: path.to_path_buf(),
            source,
        })?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        Self::new(w as usize, h as usize, rgb.into_raw())
    }

    /// Writes PNG or JPEG, chosen by the file extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_image(path, &self.data, self.width, self.height, image::ExtendedColorType::Rgb8)
    }
}

/// Single-channel real-valued raster with intensities in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} values for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(v) = data
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > 255.0)
        {
            return Err(Error::InvalidImage(format!(
                "intensity {v} outside [0, 255]"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(width, height, data)
    }

    // Filters produce convex combinations of valid inputs, so they can skip
    // the range scan.
    fn from_filtered(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(0, 0, self.height, self.width)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(to_grayscale(&RgbImage::load(path)?))
    }

    /// Writes an 8-bit grayscale PNG/JPEG, quantising by round half up.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.data.iter().map(|&v| quantize(v)).collect();
        write_image(path, &bytes, self.width, self.height, image::ExtendedColorType::L8)
    }
}

/// PNG goes through the fast deflate setting (still lossless); other
/// formats use the codec defaults.
fn write_image(path: &Path, bytes: &[u8], w: usize, h: usize, color: image::ExtendedColorType) -> Result<()> {
    use image::codecs::png::{CompressionType, FilterType, PngEncoder};
    use image::ImageEncoder;

    let codec = |source| Error::Codec {
        path: path.to_path_buf(),
        source,
    };
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if !is_png {
        return image::save_buffer(path, bytes, w as u32, h as u32, color).map_err(codec);
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    PngEncoder::new_with_quality(&mut out, CompressionType::Fast, FilterType::Adaptive)
        .write_image(bytes, w as u32, h as u32, color)
        .map_err(codec)?;
    std::io::Write::flush(&mut out).map_err(|e| Error::io(path, e))
}

/// Round half up to the nearest 8-bit level, saturating outside `[0, 255]`.
pub fn quantize(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub const LUMA_R: f64 = 0.299;
pub const LUMA_G: f64 = 0.587;
pub const LUMA_B: f64 = 0.114;

pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    let data = img
        .as_bytes()
        .chunks_exact(3)
        .map(|p| {
            let v = LUMA_R * f64::from(p[0]) + LUMA_G * f64::from(p[1]) + LUMA_B * f64::from(p[2]);
            // The coefficients sum to 1 only up to rounding.
            v.clamp(0.0, 255.0)
        })
        .collect();
    GrayImage::from_filtered(img.width(), img.height(), data)
}

/// Parameters of the edge-preserving prefilter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilateralParams {
    pub spatial_sigma: f64,
    pub range_sigma: f64,
    pub neighborhood_radius: usize,
}

impl Default for BilateralParams {
    fn default() -> Self {
        Self {
            spatial_sigma: 3.0,
            range_sigma: 50.0,
            neighborhood_radius: 5,
        }
    }
}

impl BilateralParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.spatial_sigma.is_finite()
            && self.spatial_sigma > 0.0
            && self.range_sigma > 0.0
            && !self.range_sigma.is_nan()
            && self.neighborhood_radius >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "bilateral parameters must be positive: {self:?}"
            )))
        }
    }
}

/// Rows per independently processed band of the bilateral filter.
const BILATERAL_BAND: usize = 64;

/// Bilateral filter over a `(2r+1)^2` neighbourhood with clamped borders.
///
/// Each output pixel is `sum(w * I) / sum(w)` with
/// `w = exp(-d^2 / 2 sigma_s^2) * exp(-dI^2 / 2 sigma_r^2)`.
///
/// The weight is symmetric in the two pixels, so inside a band of rows
/// each in-bounds pair is weighted once and credited to both ends. Pairs
/// leaving the band or the image are computed per pixel. Bands are fixed
/// by the image height alone, so the result does not depend on how many
/// threads run them.
pub fn bilateral_filter(img: &GrayImage, p: &BilateralParams) -> Result<GrayImage> {
    p.validate()?;
    let (w, h) = (img.width(), img.height());
    let r = p.neighborhood_radius as isize;
    let inv_s = 1.0 / (2.0 * p.spatial_sigma * p.spatial_sigma);
    let inv_r = 1.0 / (2.0 * p.range_sigma * p.range_sigma);
    let spatial = |dy: isize, dx: isize| -((dy * dy + dx * dx) as f64) * inv_s;
    // Half of the neighbourhood; the mirrored offsets are the other ends.
    let forward: Vec<(isize, isize)> = (0..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dy, dx)))
        .filter(|&(dy, dx)| dy > 0 || dx > 0)
        .collect();
    let px = img.pixels();
    let clamp = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(BILATERAL_BAND * w)
        .enumerate()
        .for_each(|(band, out_band)| {
            let y0 = band * BILATERAL_BAND;
            let y1 = y0 + out_band.len() / w;
            // Centre term: weight 1.
            let mut num = px[y0 * w..y1 * w].to_vec();
            let mut den = vec![1.0; num.len()];

            for &(dy, dx) in &forward {
                let s = spatial(dy, dx);
                let (x_lo, x_hi) = ((-dx).max(0) as usize, (w as isize - dx.max(0)).max(0) as usize);
                for y in y0..y1.saturating_sub(dy as usize) {
                    let qy = y + dy as usize;
                    for x in x_lo..x_hi {
                        let qx = (x as isize + dx) as usize;
                        let (a, b) = (px[y * w + x], px[qy * w + qx]);
                        let d = b - a;
                        let wgt = (s - d * d * inv_r).exp();
                        let (i, j) = ((y - y0) * w + x, (qy - y0) * w + qx);
                        num[i] += wgt * b;
                        den[i] += wgt;
                        num[j] += wgt * a;
                        den[j] += wgt;
                    }
                }
            }

            // Neighbours outside the band or the image.
            for y in y0..y1 {
                let row_inside = y as isize - r >= y0 as isize && y as isize + r < y1 as isize;
                for x in 0..w {
                    if row_inside && x as isize >= r && (x as isize + r) < w as isize {
                        continue;
                    }
                    let centre = px[y * w + x];
                    let i = (y - y0) * w + x;
                    for dy in -r..=r {
                        let qy = y as isize + dy;
                        for dx in -r..=r {
                            let qx = x as isize + dx;
                            let in_image = qy >= 0 && qy < h as isize && qx >= 0 && qx < w as isize;
                            if in_image && qy >= y0 as isize && qy < y1 as isize {
                                continue;
                            }
                            let v = px[clamp(qy, h) * w + clamp(qx, w)];
                            let d = v - centre;
                            let wgt = (spatial(dy, dx) - d * d * inv_r).exp();
                            num[i] += wgt * v;
                            den[i] += wgt;
                        }
                    }
                }
            }

            for ((o, n), d) in out_band.iter_mut().zip(&num).zip(&den) {
                *o = (n / d).clamp(0.0, 255.0);
            }
        });
    Ok(GrayImage::from_filtered(w, h, out))
}

/// Normalised sampled 2-D Gaussian with `size = 2 * ceil(2 * sigma) + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    sigma: f64,
    size: usize,
    /// Normalised 1-D profile; the 2-D weights are its outer product.
    profile: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        let size = Self::size_for(sigma);
        let radius = (size / 2) as isize;
        let raw: Vec<f64> = (-radius..=radius)
            .map(|x| (-((x * x) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        let profile = raw.into_iter().map(|v| v / total).collect();
        Ok(Self {
            sigma,
            size,
            profile,
        })
    }

    pub fn size_for(sigma: f64) -> usize {
        2 * (2.0 * sigma).ceil() as usize + 1
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn profile(&self) -> &[f64] {
        &self.profile
    }

    /// Weight at `(i, j)` of the `size x size` matrix.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.profile[i] * self.profile[j]
    }

    pub fn weights(&self) -> Vec<Vec<f64>> {
        (0..self.size)
            .map(|i| (0..self.size).map(|j| self.weight(i, j)).collect())
            .collect()
    }
}

/// Gaussian smoothing with the kernel renormalised over its in-bounds part.
///
/// Runs as two 1-D passes. Because the in-bounds support is always a
/// rectangle, renormalising each pass separately equals renormalising the
/// 2-D kernel (see [`gaussian_filter_direct`]).
pub fn gaussian_filter(img: &GrayImage, sigma: f64) -> Result<GrayImage> {
    let kernel = GaussianKernel::new(sigma)?;
    let (w, h) = (img.width(), img.height());
    let r = kernel.radius() as isize;
    let k = kernel.profile();

    // Columns whose whole kernel fits take the full normalised profile and
    // are swept one tap at a time across the row; the rest renormalise.
    let ru = r as usize;
    let interior = if w > 2 * ru { ru..w - ru } else { 0..0 };
    let full: f64 = k.iter().sum();
    let mut horiz = vec![0.0; w * h];
    horiz
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(row, out_row)| {
            let src = img.row(row);
            if !interior.is_empty() {
                let out = &mut out_row[interior.clone()];
                for (t, &wgt) in k.iter().enumerate() {
                    let shifted = &src[interior.start + t - ru..interior.end + t - ru];
                    for (o, &v) in out.iter_mut().zip(shifted) {
                        *o += wgt * v;
                    }
                }
                for o in out.iter_mut() {
                    *o /= full;
                }
            }
            for col in (0..w).filter(|c| !interior.contains(c)) {
                let lo = (col as isize - r).max(0) as usize;
                let hi = (col as isize + r).min(w as isize - 1) as usize;
                let mut num = 0.0;
                let mut den = 0.0;
                for x in lo..=hi {
                    let wgt = k[(x as isize - col as isize + r) as usize];
                    num += wgt * src[x];
                    den += wgt;
                }
                out_row[col] = num / den;
            }
        });

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(row, out_row)| {
        let lo = (row as isize - r).max(0) as usize;
        let hi = (row as isize + r).min(h as isize - 1) as usize;
        let den: f64 = (lo..=hi)
            .map(|y| k[(y as isize - row as isize + r) as usize])
            .sum();
        for y in lo..=hi {
            let wgt = k[(y as isize - row as isize + r) as usize] / den;
            let src = &horiz[y * w..(y + 1) * w];
            for (o, &v) in out_row.iter_mut().zip(src) {
                *o += wgt * v;
            }
        }
        for o in out_row.iter_mut() {
            *o = o.clamp(0.0, 255.0);
        }
    });
    Ok(GrayImage::from_filtered(w, h, out))
}

/// Direct 2-D convolution with in-bounds renormalisation. Quadratic in the
/// kernel size; kept as the reference for [`gaussian_filter`].
pub fn gaussian_filter_direct(img: &GrayImage, sigma: f64) -> Result<GrayImage> {
    let kernel = GaussianKernel::new(sigma)?;
    let (w, h) = (img.width(), img.height());
    let r = kernel.radius() as isize;
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(row, out_row)| {
        for (col, o) in out_row.iter_mut().enumerate() {
            let mut num = 0.0;
            let mut den = 0.0;
            for dy in -r..=r {
                let y = row as isize + dy;
                if y < 0 || y >= h as isize {
                    continue;
                }
                for dx in -r..=r {
                    let x = col as isize + dx;
                    if x < 0 || x >= w as isize {
                        continue;
                    }
                    let wgt = kernel.weight((dy + r) as usize, (dx + r) as usize);
                    num += wgt * img.get(y as usize, x as usize);
                    den += wgt;
                }
            }
            *o = (num / den).clamp(0.0, 255.0);
        }
    });
    Ok(GrayImage::from_filtered(w, h, out))
}

/// Resolves where a `height x width` window requested at `(top, left)`
/// actually lands: shifted up/left so it stays inside the image.
pub fn clamp_window(
    image_h: usize,
    image_w: usize,
    top: usize,
    left: usize,
    height: usize,
    width: usize,
) -> Result<Rect> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidParameter(format!(
            "window dimensions must be positive, got {height}x{width}"
        )));
    }
    if height > image_h || width > image_w {
        return Err(Error::WindowLargerThanImage {
            win_h: height,
            win_w: width,
            image_h,
            image_w,
        });
    }
    Ok(Rect::new(
        top.min(image_h - height),
        left.min(image_w - width),
        height,
        width,
    ))
}

pub fn crop(
    img: &GrayImage,
    top: usize,
    left: usize,
    height: usize,
    width: usize,
) -> Result<GrayImage> {
    let rect = clamp_window(img.height(), img.width(), top, left, height, width)?;
    Ok(crop_rect(img, rect))
}

fn crop_rect(img: &GrayImage, rect: Rect) -> GrayImage {
    let mut data = Vec::with_capacity(rect.height * rect.width);
    for r in rect.top..rect.bottom() {
        data.extend_from_slice(&img.row(r)[rect.left..rect.right()]);
    }
    GrayImage::from_filtered(rect.width, rect.height, data)
}

/// Bilinear resample of the `rect` region of `img` to `out_h x out_w`,
/// without materialising the crop.
///
/// Uses pixel-centre alignment: output pixel `i` samples source coordinate
/// `(i + 0.5) * scale - 0.5`, clamped to the region.
pub fn resize_region(
    img: &GrayImage,
    rect: Rect,
    out_h: usize,
    out_w: usize,
) -> Result<GrayImage> {
    if !img.bounds().contains_rect(&rect) || rect.height == 0 || rect.width == 0 {
        return Err(Error::InvalidParameter(format!(
            "region {rect:?} not inside {}x{} image",
            img.height(),
            img.width()
        )));
    }
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidParameter("resize target must be positive".into()));
    }
    let axis = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f64)> {
        let scale = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|i| {
                let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let ys = axis(out_h, rect.height);
    let xs = axis(out_w, rect.width);
    let mut data = Vec::with_capacity(out_h * out_w);
    for &(y0, y1, fy) in &ys {
        let r0 = &img.row(rect.top + y0)[rect.left..rect.right()];
        let r1 = &img.row(rect.top + y1)[rect.left..rect.right()];
        for &(x0, x1, fx) in &xs {
            let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
            let bot = r1[x0] + (r1[x1] - r1[x0]) * fx;
            data.push((top + (bot - top) * fy).clamp(0.0, 255.0));
        }
    }
    Ok(GrayImage::from_filtered(out_w, out_h, data))
}

pub fn resize_bilinear(img: &GrayImage, out_h: usize, out_w: usize) -> Result<GrayImage> {
    resize_region(img, img.bounds(), out_h, out_w)
}
