//! End-to-end acceptance checks. Each test prints one `[PASS]`/`[FAIL]` line;
//! run with `cargo test --test acceptance -- --nocapture` to see them.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use fda_align::config::AppConfig;
use fda_align::dynamic::run_dynamic;
use fda_align::fda::{decompose, explore, FdaConfig, HypersphereNode, SearchSpace};
use fda_align::loss::{percentile_threshold, trimmed_loss, trimmed_sum, MatchSet, MatchedPair, TrimmedLossConfig};
use fda_align::synth::{generate, ScenarioConfig};
use fda_align::{Homography, Point2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

fn verdict(id: &str, ok: bool, detail: String) {
    println!("[{}] {id} {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{id} failed: {detail}");
}

fn mount_truth() -> Homography {
    Homography::rotation_about(0.02, Point2::new(960.0, 540.0), (12.0, -7.0))
}

fn static_config(outliers: f64, noise: f64, percentile: u32) -> AppConfig {
    let mut cfg = AppConfig {
        scenario: ScenarioConfig {
            n_frames: 1,
            move_frames: Some(vec![]),
            noise_sigma: noise,
            outlier_fraction: outliers,
            outlier_radius: 300.0,
            initial_truth: mount_truth(),
            ..Default::default()
        },
        ..Default::default()
    };
    cfg.loss.percentile_i = percentile;
    cfg.fda.eval_budget = 20_000;
    cfg
}

fn bench(cfg: &AppConfig, out: &Path, threads: &str) -> (Value, Duration) {
    std::fs::create_dir_all(out).unwrap();
    let config_path = out.join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    let started = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_fda-align"))
        .args(["bench", "--quiet", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(out)
        .env("FDA_ALIGN_THREADS", threads)
        .status()
        .unwrap();
    let elapsed = started.elapsed();
    assert!(status.success(), "bench exited with {status}");
    let report = std::fs::read_to_string(out.join("report.json")).unwrap();
    (serde_json::from_str(&report).unwrap(), elapsed)
}

fn period_errors(report: &Value) -> Vec<f64> {
    report["periods"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["reprojection_error"].as_f64().unwrap())
        .collect()
}

#[test]
fn c1_static_ground_truth_recovery() {
    let dir = tempfile::tempdir().unwrap();
    let (report, elapsed) = bench(&static_config(0.0, 0.0, 80), dir.path(), "0");
    let err = period_errors(&report)[0];
    let ok = err <= 0.5 && elapsed < Duration::from_secs(10);
    verdict(
        "C1",
        ok,
        format!("static recovery: reprojection {err:.3e} px (<= 0.5), {:.2} s (< 10 s)", elapsed.as_secs_f64()),
    );
}

#[test]
fn c2_trim_is_load_bearing_under_outliers() {
    let dir = tempfile::tempdir().unwrap();
    let (trimmed, _) = bench(&static_config(0.1, 0.5, 80), &dir.path().join("p80"), "0");
    let (full, _) = bench(&static_config(0.1, 0.5, 100), &dir.path().join("p100"), "0");
    let e80 = period_errors(&trimmed)[0];
    let e100 = period_errors(&full)[0];
    let ok = e80 <= 1.0 && e100 > e80;
    verdict(
        "C2",
        ok,
        format!("outliers: p80 reprojection {e80:.4} px (<= 1.0), p100 {e100:.4} px (must exceed p80)"),
    );
}

#[test]
fn c3_dynamic_structure() {
    let cfg = AppConfig::default();
    let scenario = generate(&cfg.scenario).unwrap();
    let (trace, periods) = run_dynamic(&scenario.stream, &cfg.runner_config()).unwrap();
    let events: Vec<_> = trace.entries.iter().filter(|e| e.is_change_event && e.period_index > 0).collect();
    let monotone = periods.iter().all(|p| {
        let best: Vec<f64> = trace.period(p.period_index).map(|e| e.best_loss_period).collect();
        best.windows(2).all(|w| w[1] <= w[0])
    });
    let jumps = events.iter().all(|e| {
        let prior = trace.period(e.period_index - 1).last().unwrap().best_loss_period;
        e.current_loss > cfg.detector.relative_jump * prior
    });
    let ok = periods.len() == 6 && events.len() == 5 && monotone && jumps;
    verdict(
        "C3",
        ok,
        format!(
            "dynamic: {} periods (6), {} change events (5), monotone best {monotone}, jumps > {}x {jumps}",
            periods.len(),
            events.len(),
            cfg.detector.relative_jump
        ),
    );
}

fn sort_prefix_oracle(errors: &[f64], i: u32) -> f64 {
    let mut s = errors.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let t = nearest_rank_oracle(&s, i);
    s.iter().take_while(|&&e| e <= t).sum()
}

fn nearest_rank_oracle(sorted: &[f64], i: u32) -> f64 {
    let n = sorted.len();
    let mut rank = 1;
    while rank * 100 < i as usize * n {
        rank += 1;
    }
    sorted[rank - 1]
}

#[test]
fn c4_trimmed_loss_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = TrimmedLossConfig::default();
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=50);
        // errors on a 1/16 lattice so the L1 error of each pair is exact
        let errors: Vec<f64> = (0..n).map(|_| rng.random_range(0..1600) as f64 / 16.0).collect();
        let pairs = errors
            .iter()
            .map(|&e| MatchedPair::new(Point2::new(100.0, 50.0), Point2::new(100.0 + e, 50.0)))
            .collect();
        let set = MatchSet { frame_id: 0, pairs };
        let expected = sort_prefix_oracle(&errors, cfg.percentile_i);
        if trimmed_loss(&Homography::identity(), &set, &cfg).unwrap() != expected
            || trimmed_sum(&errors, cfg.percentile_i).unwrap() != expected
        {
            mismatches += 1;
        }
    }
    let mut rank_mismatches = 0;
    for n in 1..=20 {
        let errors: Vec<f64> = (0..n).map(|k| ((k * 7) % n) as f64 + 0.5).collect();
        let mut sorted = errors.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for i in 1..=100 {
            if percentile_threshold(&errors, i).unwrap() != nearest_rank_oracle(&sorted, i) {
                rank_mismatches += 1;
            }
        }
    }
    verdict(
        "C4",
        mismatches == 0 && rank_mismatches == 0,
        format!("loss oracle: {mismatches}/1000 list mismatches, {rank_mismatches}/2000 percentile mismatches"),
    );
}

fn optimum(dim: usize) -> Vec<f64> {
    (0..dim).map(|j| 1.2345 - 0.6789 * j as f64).collect()
}

type Objective<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

fn grid_scan_2d(f: Objective) -> Vec<f64> {
    let mut best = (f64::INFINITY, vec![0.0, 0.0]);
    for a in 0..=1000 {
        for b in 0..=1000 {
            let x = [-5.0 + a as f64 * 0.01, -5.0 + b as f64 * 0.01];
            let v = f(&x);
            if v < best.0 {
                best = (v, x.to_vec());
            }
        }
    }
    best.1
}

#[test]
fn c5_closed_form_objectives() {
    let mut lines = Vec::new();
    let mut ok = true;
    for (dim, budget) in [(2, 10_000), (8, 50_000)] {
        let c = optimum(dim);
        let sphere = |x: &[f64]| x.iter().zip(&c).map(|(v, o)| (v - o).powi(2)).sum::<f64>();
        let shifted_l1 = |x: &[f64]| x.iter().zip(&c).map(|(v, o)| (v - o).abs()).sum::<f64>();
        let objectives: [(&str, Objective); 2] = [("sphere", &sphere), ("l1", &shifted_l1)];
        for (name, f) in objectives {
            let space = SearchSpace::uniform(dim, -5.0, 5.0).unwrap();
            let cfg = FdaConfig { eval_budget: budget, ..Default::default() };
            let started = Instant::now();
            let res = explore(f, &space, &cfg, None).unwrap();
            let secs = started.elapsed().as_secs_f64();
            let dev = res.best_point.iter().zip(&c).map(|(v, o)| (v - o).abs()).fold(0.0, f64::max);
            let mut pass = dev <= 0.01 && secs < 5.0;
            let mut note = String::new();
            if dim == 2 {
                let grid = grid_scan_2d(f);
                let gdev = res.best_point.iter().zip(&grid).map(|(v, g)| (v - g).abs()).fold(0.0, f64::max);
                pass &= gdev <= 0.01;
                note = format!(", vs grid scan {gdev:.1e}");
            }
            ok &= pass;
            lines.push(format!("{name} D={dim}: max dev {dev:.1e}{note}, {secs:.2} s"));
        }
    }
    verdict("C5", ok, format!("closed-form optima: {}", lines.join("; ")));
}

fn random_homography(rng: &mut ChaCha8Rng) -> Homography {
    let dof = [
        rng.random_range(0.7..1.3),
        rng.random_range(-0.3..0.3),
        rng.random_range(-80.0..80.0),
        rng.random_range(-0.3..0.3),
        rng.random_range(0.7..1.3),
        rng.random_range(-80.0..80.0),
        rng.random_range(-2e-4..2e-4),
        rng.random_range(-2e-4..2e-4),
    ];
    Homography::from_dof(dof).unwrap()
}

fn sample_ball(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = rng.random::<f64>().powf(1.0 / dim as f64);
    dir.iter().map(|v| v / norm * r).collect()
}

#[test]
fn c6_geometry_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut round_trip_failures = 0;
    let mut checked = 0;
    while checked < 10_000 {
        let h = random_homography(&mut rng);
        let p = Point2::new(rng.random_range(0.0..1920.0), rng.random_range(0.0..1080.0));
        let Ok(q) = h.apply(p) else { continue };
        checked += 1;
        let back = h.invert().unwrap().apply(q).unwrap();
        if (back.x - p.x).abs() > 1e-9 || (back.y - p.y).abs() > 1e-9 {
            round_trip_failures += 1;
        }
    }

    let mut decompose_failures = 0;
    for dim in 1..=8 {
        let node = HypersphereNode {
            center: (0..dim).map(|j| 0.1 * j as f64 - 0.2).collect(),
            radius: 0.6,
            depth: 1,
            quality: None,
        };
        for (j, kid) in decompose(&node, 1.75, 4).unwrap().iter().enumerate() {
            let mut expected = node.center.clone();
            expected[j / 2] += if j % 2 == 0 { 0.3 } else { -0.3 };
            if kid.center != expected || kid.radius != 0.3 * 1.75 || kid.depth != 2 {
                decompose_failures += 1;
            }
        }
    }

    let mut uncovered = Vec::new();
    for dim in 1..=8 {
        let root = HypersphereNode::root(dim);
        let kids = decompose(&root, 1.75, 4).unwrap();
        let misses = (0..10_000)
            .filter(|_| {
                let x = sample_ball(&mut rng, dim);
                !kids.iter().any(|k| k.contains(&x))
            })
            .count();
        uncovered.push(misses);
    }
    let ok = round_trip_failures == 0 && decompose_failures == 0 && uncovered.iter().all(|&m| m == 0);
    verdict(
        "C6",
        ok,
        format!(
            "geometry: {round_trip_failures}/10000 round-trip failures, {decompose_failures} decompose mismatches, \
             uncovered of 10000 per D=1..8: {uncovered:?}"
        ),
    );
}

#[test]
fn c7_thread_count_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = AppConfig::default();
    bench(&cfg, &dir.path().join("t0"), "0");
    bench(&cfg, &dir.path().join("t4"), "4");
    let same = |file: &str| {
        std::fs::read(dir.path().join("t0").join(file)).unwrap() == std::fs::read(dir.path().join("t4").join(file)).unwrap()
    };
    let (trace, periods) = (same("trace.csv"), same("periods.json"));
    verdict(
        "C7",
        trace && periods,
        format!("determinism: trace.csv identical {trace}, periods.json identical {periods}"),
    );
}
