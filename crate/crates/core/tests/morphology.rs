mod common;

use common::{brute_regional_maxima, bump, is_strict_regional_max, iterative_h_maxima, SplitMix};
use proptest::prelude::*;
use visionguide_core::heatmap::{Heatmap, SweepConfig};
use visionguide_core::peaks::{find_peaks, h_maxima, regional_maxima, Surface};

fn random_int_surface(rng: &mut SplitMix, w: usize, h: usize, levels: u64) -> Surface {
    Surface::from_fn(w, h, |_, _| rng.below(levels) as f64).unwrap()
}

#[test]
fn h_maxima_matches_iterative_fixpoint() {
    let mut rng = SplitMix(17);
    for case in 0..60 {
        let (w, h) = (1 + rng.below(24) as usize, 1 + rng.below(24) as usize);
        let s = random_int_surface(&mut rng, w, h, 40);
        for t in [1.0, 3.0, 7.5, 20.0] {
            let fast = h_maxima(&s, t).unwrap();
            let slow = iterative_h_maxima(s.values(), w, h, t);
            assert_eq!(fast.values(), &slow[..], "case {case}, t {t}");
        }
    }
}

#[test]
fn h_maxima_profile_against_oracle() {
    let s = Surface::new(5, 1, vec![0.0, 3.0, 0.0, 8.0, 0.0]).unwrap();
    let fast = h_maxima(&s, 5.0).unwrap();
    assert_eq!(fast.values(), &iterative_h_maxima(s.values(), 5, 1, 5.0)[..]);
    assert_eq!(fast.values(), &[0.0, 0.0, 0.0, 3.0, 0.0]);
}

#[test]
fn regional_maxima_match_exhaustive_scan() {
    let mut rng = SplitMix(99);
    for _ in 0..80 {
        let (w, h) = (1 + rng.below(16) as usize, 1 + rng.below(16) as usize);
        let s = random_int_surface(&mut rng, w, h, 6);
        let found = regional_maxima(&s);
        for r in &found {
            assert!(is_strict_regional_max(s.values(), w, h, &r.pixels));
        }
        let got: std::collections::BTreeSet<_> = found.into_iter().map(|r| r.pixels).collect();
        assert_eq!(got, brute_regional_maxima(s.values(), w, h));
    }
}

#[test]
fn labels_follow_row_major_discovery() {
    let s = Surface::new(5, 3, vec![
        0.0, 0.0, 0.0, 0.0, 4.0, //
        3.0, 0.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 5.0, 0.0, 0.0,
    ])
    .unwrap();
    let r = regional_maxima(&s);
    let firsts: Vec<_> = r.iter().map(|x| (x.label, x.pixels[0])).collect();
    assert_eq!(firsts, vec![(1, (0, 4)), (2, (1, 0)), (3, (2, 2))]);
}

fn two_bumps() -> Heatmap {
    Heatmap::from_fn(160, 100, |r, c| {
        let (r, c) = (r as f64, c as f64);
        bump(r, c, 50.0, 40.0, 200.0, 8.0) + bump(r, c, 50.0, 120.0, 180.0, 8.0)
    })
    .unwrap()
}

#[test]
fn two_bumps_give_two_peaks() {
    let p = find_peaks(&two_bumps(), &SweepConfig::square(10, 5, 2.0, 10.0)).unwrap();
    assert_eq!(p.len(), 2);
    let mut cents = p.centroids.clone();
    cents.sort_by(|a, b| a.1.total_cmp(&b.1));
    for (got, want) in cents.iter().zip([(50.0, 40.0), (50.0, 120.0)]) {
        assert!((got.0 - want.0).hypot(got.1 - want.1) <= 2.0, "{got:?} vs {want:?}");
    }
}

#[test]
fn high_threshold_keeps_only_taller_bump() {
    let p = find_peaks(&two_bumps(), &SweepConfig::square(10, 5, 0.5, 190.0)).unwrap();
    assert_eq!(p.len(), 1);
    let (r, c) = p.centroids[0];
    assert!((r - 50.0).hypot(c - 40.0) <= 2.0);
}

#[test]
fn constant_heatmap_has_no_peaks() {
    let h = Heatmap::new(12, 9, vec![80.0; 108]).unwrap();
    assert!(find_peaks(&h, &SweepConfig::square(4, 2, 1.0, 5.0)).unwrap().is_empty());
}

fn random_smooth_heatmap(seed: u64, w: usize, h: usize) -> Heatmap {
    let mut rng = SplitMix(seed);
    let n = 2 + rng.below(6);
    let bumps: Vec<_> = (0..n)
        .map(|_| {
            (
                rng.unit() * h as f64,
                rng.unit() * w as f64,
                30.0 + rng.unit() * 220.0,
                3.0 + rng.unit() * 6.0,
            )
        })
        .collect();
    let raw = Heatmap::from_fn(w, h, |r, c| {
        bumps
            .iter()
            .map(|&(cr, cc, a, s)| bump(r as f64, c as f64, cr, cc, a, s))
            .sum()
    })
    .unwrap();
    visionguide_core::heatmap::normalize(&raw)
}

#[test]
fn peak_count_non_increasing_in_threshold() {
    for seed in 0..20 {
        let hm = random_smooth_heatmap(seed, 64, 48);
        let counts: Vec<usize> = [5.0, 10.0, 15.0, 20.0]
            .iter()
            .map(|&t| find_peaks(&hm, &SweepConfig::square(8, 4, 2.0, t)).unwrap().len())
            .collect();
        assert!(counts.windows(2).all(|w| w[0] >= w[1]), "seed {seed}: {counts:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn h_maxima_bounds(seed in any::<u64>(), t in 0.5f64..30.0) {
        let mut rng = SplitMix(seed);
        let s = random_int_surface(&mut rng, 12, 10, 50);
        let out = h_maxima(&s, t).unwrap();
        for (o, i) in out.values().iter().zip(s.values()) {
            prop_assert!(*o <= *i);
            prop_assert!(*o >= *i - t);
        }
    }

    #[test]
    fn peaks_are_translation_equivariant(seed in 0u64..1000, dy in 0usize..6, dx in 0usize..6) {
        let mut rng = SplitMix(seed);
        let (cr, cc) = (30.0 + rng.unit() * 10.0, 30.0 + rng.unit() * 10.0);
        let make = |oy: f64, ox: f64| {
            Heatmap::from_fn(100, 90, |r, c| bump(r as f64, c as f64, cr + oy, cc + ox, 220.0, 4.0)).unwrap()
        };
        let cfg = SweepConfig::square(4, 2, 1.5, 10.0);
        let a = find_peaks(&make(0.0, 0.0), &cfg).unwrap();
        let b = find_peaks(&make(dy as f64, dx as f64), &cfg).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (p, q) in a.centroids.iter().zip(&b.centroids) {
            prop_assert!((q.0 - p.0 - dy as f64).abs() < 1e-9);
            prop_assert!((q.1 - p.1 - dx as f64).abs() < 1e-9);
        }
    }
}
