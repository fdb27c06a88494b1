//! Brute-force oracles, kept independent of the library's algorithms.
#![allow(dead_code)]

use std::collections::BTreeSet;

use visionguide_core::eval::CircleAnnotation;

/// Grid as (width, height, row-major values).
pub type Grid = (usize, usize, Vec<f64>);

const N8: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

fn neighbours(w: usize, h: usize, r: usize, c: usize) -> Vec<(usize, usize)> {
    N8.iter()
        .filter_map(|&(dr, dc)| {
            let (y, x) = (r as isize + dr, c as isize + dc);
            (y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w).then(|| (y as usize, x as usize))
        })
        .collect()
}

/// Geodesic reconstruction by repeated elementary dilation + pointwise min
/// with the mask until nothing changes.
pub fn iterative_reconstruction(marker: &[f64], mask: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut cur: Vec<f64> = marker.iter().zip(mask).map(|(a, b)| a.min(*b)).collect();
    loop {
        let mut next = cur.clone();
        for r in 0..h {
            for c in 0..w {
                let mut v = cur[r * w + c];
                for (y, x) in neighbours(w, h, r, c) {
                    v = v.max(cur[y * w + x]);
                }
                next[r * w + c] = v.min(mask[r * w + c]);
            }
        }
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

pub fn iterative_h_maxima(values: &[f64], w: usize, h: usize, t: f64) -> Vec<f64> {
    let marker: Vec<f64> = values.iter().map(|v| v - t).collect();
    iterative_reconstruction(&marker, values, w, h)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// All regional maxima as sorted pixel sets: union-find over equal-valued
/// 8-neighbours, then keep plateaus whose every outside neighbour is lower.
pub fn brute_regional_maxima(values: &[f64], w: usize, h: usize) -> BTreeSet<Vec<(usize, usize)>> {
    let mut parent: Vec<usize> = (0..w * h).collect();
    for r in 0..h {
        for c in 0..w {
            for (y, x) in neighbours(w, h, r, c) {
                if values[y * w + x] == values[r * w + c] {
                    let (a, b) = (find(&mut parent, r * w + c), find(&mut parent, y * w + x));
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<(usize, usize)>> = Default::default();
    for i in 0..w * h {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push((i / w, i % w));
    }
    groups
        .into_values()
        .filter(|pixels| {
            let v = values[pixels[0].0 * w + pixels[0].1];
            pixels.iter().all(|&(r, c)| {
                neighbours(w, h, r, c)
                    .into_iter()
                    .all(|(y, x)| values[y * w + x] < v || values[y * w + x] == v)
            })
        })
        .map(|mut p| {
            p.sort_unstable();
            p
        })
        .collect()
}

/// Every region passes: constant inside, every outside neighbour strictly
/// lower, and 8-connected.
pub fn is_strict_regional_max(values: &[f64], w: usize, h: usize, pixels: &[(usize, usize)]) -> bool {
    let set: BTreeSet<_> = pixels.iter().copied().collect();
    let v = values[pixels[0].0 * w + pixels[0].1];
    let constant = pixels.iter().all(|&(r, c)| values[r * w + c] == v);
    let boundary_lower = pixels.iter().all(|&(r, c)| {
        neighbours(w, h, r, c)
            .into_iter()
            .filter(|p| !set.contains(p))
            .all(|(y, x)| values[y * w + x] < v)
    });
    // Connectivity by BFS restricted to the set.
    let mut seen = BTreeSet::new();
    let mut stack = vec![pixels[0]];
    seen.insert(pixels[0]);
    while let Some((r, c)) = stack.pop() {
        for p in neighbours(w, h, r, c) {
            if set.contains(&p) && seen.insert(p) {
                stack.push(p);
            }
        }
    }
    constant && boundary_lower && seen.len() == set.len()
}

/// Window starts along one axis, written independently of the library.
pub fn brute_axis_starts(n: usize, win: usize, step: usize) -> Vec<usize> {
    let mut v = Vec::new();
    let mut p = 0;
    while p + win <= n {
        v.push(p);
        p += step;
    }
    if v.last() != Some(&(n - win)) {
        v.push(n - win);
    }
    v
}

/// Number of windows covering every pixel.
pub fn brute_cover_counts(h: usize, w: usize, win_h: usize, win_w: usize, istep: usize, jstep: usize) -> Vec<usize> {
    let rows = brute_axis_starts(h, win_h, istep);
    let cols = brute_axis_starts(w, win_w, jstep);
    let mut counts = vec![0; w * h];
    for r in 0..h {
        for c in 0..w {
            counts[r * w + c] = rows
                .iter()
                .filter(|&&t| t <= r && r < t + win_h)
                .count()
                * cols.iter().filter(|&&l| l <= c && c < l + win_w).count();
        }
    }
    counts
}

/// Exhaustive counts for the count-all duplicate policy.
pub fn brute_counts(
    preds: &[(f64, f64)],
    anns: &[CircleAnnotation],
    threshold: f64,
) -> (usize, usize, usize) {
    let mut tp = 0;
    let mut hit = vec![false; anns.len()];
    for &(px, py) in preds {
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for (k, a) in anns.iter().enumerate() {
            let d = ((px - a.x).powi(2) + (py - a.y).powi(2)).sqrt() / a.radius;
            if d < best_d {
                best_d = d;
                best = Some(k);
            }
        }
        if let Some(k) = best {
            if best_d <= threshold {
                tp += 1;
                hit[k] = true;
            }
        }
    }
    let fn_ = hit.iter().filter(|h| !**h).count();
    (tp, preds.len() - tp, fn_)
}

/// Separable-free Gaussian bump on a zero background.
pub fn bump(r: f64, c: f64, cr: f64, cc: f64, height: f64, sigma: f64) -> f64 {
    height * (-((r - cr).powi(2) + (c - cc).powi(2)) / (2.0 * sigma * sigma)).exp()
}

/// Small deterministic generator so oracle instances don't depend on the
/// library's RNG choices.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}
