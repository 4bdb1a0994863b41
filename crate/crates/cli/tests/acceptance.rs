//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use leafscan::clustering::{kmeans_fit_traced, FeatureMatrix, KMeansConfig};
use leafscan::imaging::{count_white, otsu_threshold, BinaryMask, GrayImage};
use leafscan::planimetry::{analyze, boundary_cells, grid_area, planimetry_report, PipelineConfig};
use leafscan::synth::{disk_mask, generate_leaf, write_fixture, Backdrop, FixtureFormat, LeafSpec};
use leafscan::{kmeans_fit, lab_to_srgb, srgb_to_lab};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed < budget, || {
        format!("took {:.2}s, budget {:.0}s", elapsed.as_secs_f64(), budget.as_secs_f64())
    })
}

fn worked_example() -> Check {
    let start = Instant::now();
    let r = planimetry_report(195612, 41246, None).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(r.tp == 236858, || format!("tp = {}", r.tp))?;
    ensure((r.damage_percent - 17.4138).abs() <= 1e-4, || {
        format!("damage_percent = {}", r.damage_percent)
    })?;
    within_budget(elapsed, Duration::from_millis(100))?;
    Ok(format!("tp={} damage_percent={:.4}", r.tp, r.damage_percent))
}

/// Lowest SSE over every split of the points into two non-empty groups.
fn brute_force_sse(points: &[[f64; 2]]) -> f64 {
    let n = points.len();
    let mut best = f64::INFINITY;
    // fixing the last point in group 0 visits each unordered split once
    for bits in 1u32..(1 << (n - 1)) {
        let mut sums = [[0.0f64; 2]; 2];
        let mut sizes = [0usize; 2];
        for (i, p) in points.iter().enumerate() {
            let g = ((bits >> i) & 1) as usize;
            sums[g][0] += p[0];
            sums[g][1] += p[1];
            sizes[g] += 1;
        }
        let sse: f64 = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let g = ((bits >> i) & 1) as usize;
                let m = [sums[g][0] / sizes[g] as f64, sums[g][1] / sizes[g] as f64];
                (p[0] - m[0]).powi(2) + (p[1] - m[1]).powi(2)
            })
            .sum();
        best = best.min(sse);
    }
    best
}

fn kmeans_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8_2_2);
    let mut matched = 0;
    let mut worst_gap = 0.0f64;
    for instance in 0..100u64 {
        let points: Vec<[f64; 2]> = (0..8)
            .map(|_| [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)])
            .collect();
        let optimum = brute_force_sse(&points);
        let x = FeatureMatrix::from_rows(&points).map_err(|e| e.to_string())?;
        let cfg = KMeansConfig {
            k: 2,
            restarts: 20,
            seed: 1000 + instance,
            ..Default::default()
        };
        let model = kmeans_fit(&x, &cfg).map_err(|e| e.to_string())?;
        ensure(model.inertia >= optimum - 1e-9, || {
            format!("instance {instance}: inertia {} below optimum {optimum}", model.inertia)
        })?;
        let gap = (model.inertia - optimum) / optimum;
        worst_gap = worst_gap.max(gap);
        if gap.abs() <= 1e-6 {
            matched += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(matched >= 95, || format!("{matched}/100 instances matched the optimum"))?;
    within_budget(elapsed, Duration::from_secs(10))?;
    Ok(format!("{matched}/100 at optimum, worst relative gap {worst_gap:.2e}"))
}

fn lloyd_monotone() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut steps = 0usize;
    for instance in 0..50u64 {
        let data: Vec<f64> = (0..1000).map(|_| rng.random_range(-100.0..100.0)).collect();
        let x = FeatureMatrix::new(500, 2, data).map_err(|e| e.to_string())?;
        let cfg = KMeansConfig {
            k: 3,
            restarts: 3,
            seed: instance,
            ..Default::default()
        };
        let mut traces: Vec<Vec<f64>> = vec![Vec::new(); cfg.restarts];
        kmeans_fit_traced(&x, &cfg, |t| traces[t.restart].push(t.inertia)).map_err(|e| e.to_string())?;
        for (restart, trace) in traces.iter().enumerate() {
            for w in trace.windows(2) {
                ensure(w[1] <= w[0], || {
                    format!("instance {instance} restart {restart}: inertia rose {} -> {}", w[0], w[1])
                })?;
            }
            steps += trace.len();
        }
    }
    within_budget(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("{steps} iterations checked"))
}

fn color_round_trip() -> Check {
    let start = Instant::now();
    let levels: Vec<u8> = (0..17).map(|i| (i * 255 / 16) as u8).collect();
    let mut worst = 0u8;
    for &r in &levels {
        for &g in &levels {
            for &b in &levels {
                let back = lab_to_srgb(srgb_to_lab([r, g, b]));
                for (x, y) in [r, g, b].iter().zip(back) {
                    worst = worst.max(x.abs_diff(y));
                }
            }
        }
    }
    let white = srgb_to_lab([255, 255, 255]);
    let elapsed = start.elapsed();
    ensure(worst <= 1, || format!("channel error {worst}"))?;
    ensure((white.l - 100.0).abs() <= 1e-3 && white.a.abs() < 1e-3 && white.b.abs() < 1e-3, || {
        format!("white -> {white:?}")
    })?;
    within_budget(elapsed, Duration::from_secs(1))?;
    Ok(format!("max channel error {worst}, white L*={:.6}", white.l))
}

fn overlap(a: &BinaryMask, b: &BinaryMask) -> u64 {
    a.as_slice().iter().zip(b.as_slice()).filter(|(x, y)| **x && **y).count() as u64
}

fn synthetic_leaf() -> Check {
    let mut results = Vec::new();
    let mut slowest = Duration::ZERO;
    for backdrop in [Backdrop::White, Backdrop::Black] {
        let leaf = generate_leaf(&LeafSpec {
            backdrop,
            noise: 6,
            ..Default::default()
        });
        let start = Instant::now();
        let a = analyze(&leaf.image, &PipelineConfig::default()).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());

        let truth = leaf.damage_percent();
        ensure((truth - 20.0).abs() < 0.05, || format!("generator produced {truth}%"))?;
        ensure((a.report.damage_percent - truth).abs() <= 2.0, || {
            format!("{backdrop:?}: reported {:.4}% vs truth {truth:.4}%", a.report.damage_percent)
        })?;
        let affected = a.affected_mask();
        let captured = overlap(&affected, &leaf.lesions) as f64 / leaf.lesion_px() as f64;
        let healthy = leaf.healthy();
        let leaked = overlap(&affected, &healthy) as f64 / count_white(&healthy) as f64;
        ensure(captured >= 0.95, || format!("{backdrop:?}: captured {:.2}%", 100.0 * captured))?;
        ensure(leaked <= 0.02, || format!("{backdrop:?}: leaked {:.2}%", 100.0 * leaked))?;
        results.push((a.report, affected, truth, captured, leaked));
    }
    let (white, black) = (&results[0], &results[1]);
    ensure(white.0 == black.0 && white.1 == black.1, || {
        format!(
            "backdrops disagree: {:.4}% vs {:.4}%",
            white.0.damage_percent, black.0.damage_percent
        )
    })?;
    within_budget(slowest, Duration::from_secs(2))?;
    Ok(format!(
        "truth {:.4}%, reported {:.4}%, captured {:.2}%, leaked {:.2}%",
        white.2,
        white.0.damage_percent,
        100.0 * white.3,
        100.0 * white.4
    ))
}

fn grid_method() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    for case in 0..100 {
        let w = rng.random_range(1..=64);
        let h = rng.random_range(1..=64);
        let density = rng.random_range(0.0..1.0);
        let data = (0..w * h).map(|_| rng.random_bool(density)).collect();
        let mask = BinaryMask::new(w, h, data).map_err(|e| e.to_string())?;
        let g = grid_area(&mask, 1);
        ensure(g.area_px == count_white(&mask), || {
            format!("mask {case}: grid {} vs count {}", g.area_px, count_white(&mask))
        })?;
    }
    let disk = disk_mask(100, 100, 50.0, 50.0, 40.0);
    let white = count_white(&disk);
    let g = grid_area(&disk, 4);
    let bound = boundary_cells(&disk, 4) * 16;
    let diff = g.area_px.abs_diff(white);
    ensure(diff <= bound, || format!("disk: |{} - {white}| > {bound}", g.area_px))?;
    within_budget(start.elapsed(), Duration::from_secs(2))?;
    Ok(format!("disk area {} vs {white} px, error {diff} <= {bound}", g.area_px))
}

/// Threshold maximizing w0*w1*(mu0 - mu1)^2 over all 256 cuts, compared as
/// exact fractions. Lowest level wins ties; `None` when no cut splits the
/// data.
fn exhaustive_otsu(values: &[u8]) -> Option<u8> {
    let n = values.len() as u128;
    let sum: u128 = values.iter().map(|&v| v as u128).sum();
    let mut best: Option<(u8, u128, u128)> = None;
    for t in 0..=255u8 {
        let (mut w0, mut s0) = (0u128, 0u128);
        for &v in values.iter().filter(|&&v| v <= t) {
            w0 += 1;
            s0 += v as u128;
        }
        let w1 = n - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        // sigma_b^2 * n^2 = (n*s0 - sum*w0)^2 / (w0*w1)
        let d = (n * s0).abs_diff(sum * w0);
        let (num, den) = (d * d, w0 * w1);
        if best.is_none_or(|(_, bn, bd)| num * bd > bn * den) {
            best = Some((t, num, den));
        }
    }
    best.map(|(t, _, _)| t)
}

fn otsu_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut images: Vec<(u32, u32, Vec<u8>)> = Vec::new();
    for _ in 0..50 {
        let w = rng.random_range(1..=64u32);
        let h = rng.random_range(1..=64u32);
        let lo = rng.random_range(0..=255u8);
        let hi = rng.random_range(lo..=255u8);
        images.push((w, h, (0..w * h).map(|_| rng.random_range(lo..=hi)).collect()));
    }
    for (m0, m1, sd) in [(40.0, 200.0, 12.0), (60.0, 190.0, 10.0), (90.0, 150.0, 15.0), (20.0, 120.0, 25.0), (128.0, 250.0, 5.0)] {
        let a = Normal::new(m0, sd).map_err(|e| e.to_string())?;
        let b = Normal::new(m1, sd).map_err(|e| e.to_string())?;
        let share = rng.random_range(0.3..0.7);
        let data = (0..64 * 48)
            .map(|_| {
                let v: f64 = if rng.random_bool(share) { a.sample(&mut rng) } else { b.sample(&mut rng) };
                v.round().clamp(0.0, 255.0) as u8
            })
            .collect();
        images.push((64, 48, data));
    }
    for (i, (w, h, data)) in images.iter().enumerate() {
        let expected = exhaustive_otsu(data);
        let img = GrayImage::new(*w, *h, data.clone()).map_err(|e| e.to_string())?;
        let got = otsu_threshold(&img).ok();
        ensure(got == expected, || format!("image {i}: got {got:?}, oracle {expected:?}"))?;
    }
    within_budget(start.elapsed(), Duration::from_secs(2))?;
    Ok(format!("{} images agree", images.len()))
}

fn write_fixture_set(dir: &Path) -> Result<(), String> {
    let specs = [
        ("white", Backdrop::White, 0.2, FixtureFormat::Png),
        ("black", Backdrop::Black, 0.2, FixtureFormat::Png),
        ("mild", Backdrop::White, 0.05, FixtureFormat::Jpeg),
        ("clean", Backdrop::Black, 0.0, FixtureFormat::Png),
    ];
    for (seed, (stem, backdrop, lesion_fraction, format)) in specs.into_iter().enumerate() {
        let spec = LeafSpec {
            backdrop,
            lesion_fraction,
            noise: 5,
            seed: seed as u64,
            ..Default::default()
        };
        write_fixture(dir, stem, &spec, format).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn cli_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fixtures = dir.path().join("fixtures");
    fs::create_dir(&fixtures).map_err(|e| e.to_string())?;
    write_fixture_set(&fixtures)?;

    let start = Instant::now();
    let mut runs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_leafscan"))
            .arg(&fixtures)
            .arg("--out-dir")
            .arg(&out)
            .args(["--seed", "42", "--k", "2", "--emit", "json"])
            .output()
            .map_err(|e| e.to_string())?
            .status;
        ensure(status.success(), || format!("run {run} exited with {status}"))?;
        let mut reports = Vec::new();
        let mut names: Vec<_> = fs::read_dir(&out)
            .map_err(|e| e.to_string())?
            .map(|e| e.map(|e| e.file_name()))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        names.sort();
        for name in names {
            reports.push((name.clone(), fs::read(out.join(name)).map_err(|e| e.to_string())?));
        }
        runs.push(reports);
    }
    let elapsed = start.elapsed();
    ensure(runs[0].len() == 4, || format!("expected 4 reports, found {}", runs[0].len()))?;
    ensure(runs[0] == runs[1], || "reports differ between runs".to_string())?;
    within_budget(elapsed, Duration::from_secs(5))?;
    Ok(format!("{} reports byte-identical", runs[0].len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("worked example 195612/41246", worked_example),
        ("k-means matches exhaustive optimum", kmeans_oracle),
        ("Lloyd inertia non-increasing", lloyd_monotone),
        ("sRGB/Lab round trip", color_round_trip),
        ("synthetic leaf end to end", synthetic_leaf),
        ("grid method degeneracy and bound", grid_method),
        ("Otsu equals exhaustive scan", otsu_oracle),
        ("CLI determinism", cli_determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>())));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {}. {name} ({secs:.2}s): {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL {}. {name} ({secs:.2}s): {reason}", i + 1);
            }
        }
    }
    println!("{}/{} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
