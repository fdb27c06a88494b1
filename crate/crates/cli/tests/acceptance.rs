//! Acceptance checks. Everything runs inside one test so the timed checks
//! don't compete with each other for cores; each check prints one line.
//!
//! `cargo test -p visionguide-cli --test acceptance -- --nocapture`

#[path = "../../core/tests/common/mod.rs"]
mod oracles;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use oracles::{brute_counts, brute_cover_counts, brute_regional_maxima, is_strict_regional_max, iterative_h_maxima, SplitMix};
use visionguide_cli::commands::{self, SynthOptions, TrainOptions};
use visionguide_cli::{ClassifierSource, RunConfig};
use visionguide_core::classify::{Classification, FnClassifier};
use visionguide_core::dataset::{generate_scene, load_dataset, size_histogram};
use visionguide_core::eval::{assign, f_beta, report, CircleAnnotation};
use visionguide_core::heatmap::{calc_heatmap, normalize, window_positions, Heatmap};
use visionguide_core::imaging::{gaussian_filter, GaussianKernel, GrayImage};
use visionguide_core::peaks::{find_peaks, h_maxima, regional_maxima, Surface};
use visionguide_core::SweepConfig;

struct Check {
    outcome: Result<String, String>,
    elapsed: Duration,
}

/// Runs one check, enforcing its time budget, and prints its line.
fn check(id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Result<String, String>) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let mut c = Check {
        outcome,
        elapsed: start.elapsed(),
    };
    if c.outcome.is_ok() && c.elapsed > budget {
        c.outcome = Err(format!("over time budget {budget:?}"));
    }
    let (tag, detail) = match &c.outcome {
        Ok(d) => ("PASS", d.as_str()),
        Err(d) => ("FAIL", d.as_str()),
    };
    let line = format!("\n[{tag}] {id:>2} {name}: {detail} ({:.2?})\n", c.elapsed);
    // Straight to the process stdout so the line shows without --nocapture.
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    c.outcome.is_ok()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn kernel_size() -> Result<String, String> {
    for sigma in [5.0, 10.0, 15.0, 20.0, 30.0] {
        let expect = 2 * (2.0f64 * sigma).ceil() as usize + 1;
        let got = GaussianKernel::new(sigma).map_err(|e| e.to_string())?.size();
        ensure(got == expect, || format!("sigma {sigma}: size {got}, expected {expect}"))?;
    }
    let ten = GaussianKernel::new(10.0).unwrap().size();
    ensure(ten == 41, || format!("sigma 10 gives {ten}"))?;
    Ok("sizes 21/41/61/81/121".into())
}

fn window_count() -> Result<String, String> {
    let mut rng = SplitMix(0x5eed);
    let mut done = 0;
    while done < 50 {
        let (n, m) = (50 + rng.below(400) as usize, 50 + rng.below(400) as usize);
        let (h, w) = (1 + rng.below(n as u64 - 1) as usize, 1 + rng.below(m as u64 - 1) as usize);
        let (istep, jstep) = (1 + rng.below(50) as usize, 1 + rng.below(50) as usize);
        // Only configurations where the last grid position is not clamped.
        if (n - h) % istep == 0 || (m - w) % jstep == 0 {
            continue;
        }
        let cfg = SweepConfig {
            win_h: h,
            win_w: w,
            istep,
            jstep,
            ..SweepConfig::default()
        };
        let interior = window_positions(n, m, &cfg)
            .map_err(|e| e.to_string())?
            .iter()
            .filter(|r| r.top % istep == 0 && r.left % jstep == 0)
            .count();
        let formula = (n - h).div_ceil(istep) * (m - w).div_ceil(jstep);
        ensure(interior == formula, || {
            format!("{n}x{m} win {h}x{w} steps {istep},{jstep}: {interior} vs {formula}")
        })?;
        done += 1;
    }
    Ok("50 configurations exact".into())
}

fn accumulation() -> Result<String, String> {
    let s = 0.6;
    let cfg = SweepConfig {
        win_h: 16,
        win_w: 16,
        istep: 8,
        jstep: 8,
        ..SweepConfig::default()
    };
    let img = GrayImage::filled(64, 64, 0.0).unwrap();
    let clf = FnClassifier(|_| Classification {
        is_artcode: true,
        score: s,
    });
    let hm = calc_heatmap(&img, &cfg, &clf).map_err(|e| e.to_string())?;
    let counts = brute_cover_counts(64, 64, 16, 16, 8, 8);
    let mut worst: f64 = 0.0;
    for (v, c) in hm.values().iter().zip(&counts) {
        worst = worst.max((v - s * *c as f64).abs());
    }
    ensure(worst <= 1e-9, || format!("max cell error {worst:e}"))?;
    // Windows covering one pixel: ceil(16/8) per axis.
    let n = 16usize.div_ceil(8) * 16usize.div_ceil(8);
    let max = hm.max();
    ensure((max - n as f64 * s).abs() <= 1e-9, || format!("max {max} vs N*s {}", n as f64 * s))?;
    Ok(format!("max cell {max} = {n} x {s}"))
}

fn hmaxima_oracle() -> Result<String, String> {
    let mut rng = SplitMix(4);
    for case in 0..200 {
        let vals: Vec<f64> = (0..32 * 32).map(|_| rng.below(64) as f64).collect();
        let s = Surface::new(32, 32, vals.clone()).unwrap();
        for t in [1.0, 5.0, 10.0, 20.0] {
            let fast = h_maxima(&s, t).map_err(|e| e.to_string())?;
            let slow = iterative_h_maxima(&vals, 32, 32, t);
            ensure(fast.values() == &slow[..], || format!("case {case}, h {t} differs"))?;
        }
    }
    Ok("200 grids x 4 thresholds identical".into())
}

fn regional_maxima_check() -> Result<String, String> {
    let mut rng = SplitMix(5);
    let mut regions = 0;
    for case in 0..200 {
        let (w, h) = (2 + rng.below(19) as usize, 2 + rng.below(19) as usize);
        let vals: Vec<f64> = (0..w * h).map(|_| rng.below(5) as f64).collect();
        let found = regional_maxima(&Surface::new(w, h, vals.clone()).unwrap());
        for r in &found {
            ensure(is_strict_regional_max(&vals, w, h, &r.pixels), || {
                format!("case {case}: region {} fails the boundary check", r.label)
            })?;
        }
        regions += found.len();
        let got: std::collections::BTreeSet<_> = found.into_iter().map(|r| r.pixels).collect();
        ensure(got == brute_regional_maxima(&vals, w, h), || format!("case {case}: region sets differ"))?;
    }
    Ok(format!("200 grids, {regions} regions, none missed"))
}

fn monotone_peaks() -> Result<String, String> {
    let mut rng = SplitMix(6);
    for case in 0..50 {
        let noise = GrayImage::from_fn(48, 48, |_, _| rng.unit() * 255.0).unwrap();
        let smooth = gaussian_filter(&noise, 2.0).unwrap();
        let hm = normalize(&Heatmap::from_gray(&smooth));
        let counts: Vec<usize> = [5.0, 10.0, 15.0, 20.0]
            .iter()
            .map(|&h| find_peaks(&hm, &SweepConfig::square(8, 4, 1.0, h)).unwrap().len())
            .collect();
        ensure(counts.windows(2).all(|w| w[0] >= w[1]), || format!("case {case}: {counts:?}"))?;
    }
    Ok("50 heatmaps non-increasing".into())
}

fn scene_config(out: &Path, workers: usize) -> RunConfig {
    RunConfig {
        classifier: ClassifierSource::Oracle,
        overlap_fraction: 0.25,
        thresholds: vec![1.0, 2.0],
        out: out.to_path_buf(),
        workers,
        ..RunConfig::default()
    }
}

fn write_scenes(dir: &Path) -> Result<(), String> {
    let cfg = RunConfig {
        out: dir.to_path_buf(),
        seed: 0,
        ..RunConfig::default()
    };
    commands::synth(&cfg, &SynthOptions::default()).map_err(|e| format!("{e:#}"))?;
    Ok(())
}

fn oracle_localisation(scenes: &Path, work: &Path) -> Result<String, String> {
    write_scenes(scenes)?;
    let s = commands::evaluate(&scene_config(&work.join("eval"), 1), scenes).map_err(|e| format!("{e:#}"))?;
    let (one, two) = (s.headline.at_one, s.headline.at_two);
    let detail = format!(
        "{} scenes; t=1 P {:.3} R {:.3} F1 {:.3}; t=2 F1 {:.3}",
        s.per_image.len(),
        one.precision,
        one.recall,
        one.f1,
        two.f1
    );
    ensure(s.per_image.len() == 20, || format!("{} scenes", s.per_image.len()))?;
    ensure(one.recall >= 0.95 && one.precision >= 0.90 && two.f1 >= one.f1, || detail.clone())?;
    Ok(detail)
}

fn metric_algebra() -> Result<String, String> {
    for p in [0.0, 0.1, 0.37, 0.5, 0.9, 1.0] {
        let (f1, f2) = (f_beta(p, p, 1.0), f_beta(p, p, 2.0));
        ensure((f1 - p).abs() <= 1e-12 && (f2 - p).abs() <= 1e-12, || format!("p={p}: {f1}, {f2}"))?;
    }
    let (f1, f2) = (f_beta(0.5, 1.0, 1.0), f_beta(0.5, 1.0, 2.0));
    ensure((f1 - 2.0 / 3.0).abs() <= 1e-12, || format!("F1 {f1}"))?;
    ensure((f2 - 5.0 / 6.0).abs() <= 1e-12, || format!("F2 {f2}"))?;
    let mut rng = SplitMix(8);
    for case in 0..500 {
        let anns: Vec<CircleAnnotation> = (0..1 + rng.below(5))
            .map(|_| CircleAnnotation {
                x: rng.unit() * 200.0,
                y: rng.unit() * 200.0,
                radius: 2.0 + rng.unit() * 40.0,
            })
            .collect();
        let preds: Vec<(f64, f64)> = (0..rng.below(8)).map(|_| (rng.unit() * 200.0, rng.unit() * 200.0)).collect();
        let a = assign(&preds, &anns);
        for t in [0.5, 1.0, 1.5, 2.0] {
            let r = report(&a, &anns, t);
            ensure((r.tp, r.fp, r.fn_) == brute_counts(&preds, &anns, t), || format!("case {case} t {t}"))?;
        }
    }
    Ok("identities hold; 500 recounts equal".into())
}

fn swad_root() -> Option<PathBuf> {
    let candidates = [
        std::env::var_os("SWAD_DIR").map(PathBuf::from),
        Some(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/swad")),
    ];
    candidates.into_iter().flatten().find(|p| p.is_dir())
}

fn swad_integrity(root: &Path) -> Result<String, String> {
    let data = load_dataset(root).map_err(|e| e.to_string())?;
    let n_ann: usize = data.iter().map(|d| d.annotations.len()).sum();
    let hist_total: usize = size_histogram(&data, 25.0).map_err(|e| e.to_string())?.iter().map(|b| b.count).sum();
    let detail = format!("{} images, {n_ann} annotations, histogram total {hist_total}", data.len());
    ensure(data.len() == 44 && n_ann == 117 && hist_total == 117, || detail.clone())?;
    Ok(detail)
}

fn parallel_consistency(scenes: &Path, work: &Path) -> Result<String, String> {
    let images: Vec<PathBuf> = load_dataset(scenes)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|d| d.image_path)
        .collect();
    ensure(!images.is_empty(), || "no scenes".into())?;
    let (d1, d8) = (work.join("w1"), work.join("w8"));
    for (dir, workers) in [(&d1, 1), (&d8, 8)] {
        commands::localise(&scene_config(dir, workers), &images, true)
            .and_then(|s| s.into_result())
            .map_err(|e| format!("{e:#}"))?;
    }
    let mut worst: f64 = 0.0;
    for img in &images {
        let stem = img.file_stem().unwrap().to_string_lossy();
        let h1 = Heatmap::load_raw(&d1.join(format!("{stem}.heatmap.raw"))).map_err(|e| e.to_string())?;
        let h8 = Heatmap::load_raw(&d8.join(format!("{stem}.heatmap.raw"))).map_err(|e| e.to_string())?;
        for (a, b) in h1.values().iter().zip(h8.values()) {
            worst = worst.max((a - b).abs());
        }
        let p1 = std::fs::read(d1.join(format!("{stem}.peaks.json"))).unwrap();
        let p8 = std::fs::read(d8.join(format!("{stem}.peaks.json"))).unwrap();
        ensure(p1 == p8, || format!("{stem}: peaks.json differs"))?;
    }
    ensure(worst <= 1e-9, || format!("max heatmap difference {worst:e}"))?;
    Ok(format!("{} scenes, max cell difference {worst:e}, peaks identical", images.len()))
}

/// Trains the reference classifier on scene-like samples: 800 x 800 scenes
/// holding one marker versus marker-free backgrounds.
fn reference_model(work: &Path) -> Result<PathBuf, String> {
    let samples = work.join("samples");
    for (sub, markers) in [("artcode", 1), ("non_artcode", 0)] {
        let dir = samples.join(sub);
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        for seed in 0..24u64 {
            generate_scene(800, 800, markers, (100.0, 350.0), 1000 + seed)
                .and_then(|s| s.export(&dir, &format!("{sub}_{seed:02}")))
                .map_err(|e| e.to_string())?;
        }
    }
    let model = work.join("reference.json");
    let cfg = RunConfig {
        seed: 1,
        ..RunConfig::default()
    };
    let opts = TrainOptions {
        n_trees: 50,
        max_depth: 12,
        model: model.clone(),
    };
    commands::train(&cfg, &samples, &opts).map_err(|e| format!("{e:#}"))?;
    Ok(model)
}

fn performance(work: &Path, model: &Path) -> Result<String, String> {
    let img = work.join("big.png");
    let start = Instant::now();
    let cfg = RunConfig {
        classifier: ClassifierSource::Model(model.to_path_buf()),
        out: work.join("perf"),
        workers: 8,
        ..RunConfig::default()
    };
    let summary = commands::localise(&cfg, &[img], false).map_err(|e| format!("{e:#}"))?;
    let took = start.elapsed();
    summary.into_result().map_err(|e| format!("{e:#}"))?;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let detail = format!("3024x3024 in {took:.2?} on {cores} core(s)");
    ensure(took <= Duration::from_secs(15), || detail.clone())?;
    Ok(detail)
}

#[test]
fn acceptance() {
    let work = tempfile::tempdir().unwrap();
    let scenes = work.path().join("scenes");
    let s = Duration::from_secs;
    let mut passed = vec![
        check(1, "gaussian kernel size", s(1), kernel_size),
        check(2, "window count formula", s(1), window_count),
        check(3, "heatmap accumulation", s(5), accumulation),
        check(4, "h-maxima vs iterative reconstruction", s(30), hmaxima_oracle),
        check(5, "regional maxima sound and complete", s(30), regional_maxima_check),
        check(6, "peak count monotone in h", s(30), monotone_peaks),
        check(7, "oracle end-to-end localisation", s(600), || oracle_localisation(&scenes, work.path())),
        check(8, "metric algebra", s(10), metric_algebra),
    ];
    passed.push(match swad_root() {
        Some(root) => check(9, "SWAD integrity", s(60), || swad_integrity(&root)),
        None => check(9, "SWAD integrity", s(60), || {
            Ok("NOT RUN: dataset not found (set SWAD_DIR or place it in data/swad)".into())
        }),
    });
    passed.push(check(10, "worker-count determinism", s(900), || {
        parallel_consistency(&scenes, work.path())
    }));
    let big = generate_scene(3024, 3024, 3, (100.0, 400.0), 77).unwrap();
    big.image.save(&work.path().join("big.png")).unwrap();
    let model = reference_model(work.path());
    passed.push(check(11, "3024x3024 localise budget", s(3600), || performance(work.path(), &model?)));
    let failed: Vec<usize> = passed.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed checks: {failed:?}");
}

#[test]
#[ignore = "needs the SWAD archive in SWAD_DIR or data/swad"]
fn swad_integrity_strict() {
    let root = swad_root().expect("SWAD dataset not found");
    swad_integrity(&root).unwrap();
}
